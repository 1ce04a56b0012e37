#include "diffstruct/pipeline.hpp"

#include "diffstruct/errors.hpp"
#include "diffstruct/shell_fem.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <sstream>

namespace diffstruct {

using nlohmann::json;

namespace {

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename Fn>
auto run_stage(const char* stage, double& seconds, Fn&& fn)
{
    Stopwatch clock;
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            seconds = clock.seconds();
        } else {
            auto result = fn();
            seconds = clock.seconds();
            return result;
        }
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

double plane_von_mises(const Vec2& eig)
{
    return std::sqrt(std::max(0.0, eig[0] * eig[0] - eig[0] * eig[1] + eig[1] * eig[1]));
}

// Classification, remap, operators and modes from the stored unit-force stress.
void rebuild_tail(SessionBundle& b, const ModeSet* previous_u, const ModeSet* previous_w)
{
    const TriangleMesh& mesh = b.mesh;
    const int nf = mesh.num_faces();
    const auto frames = build_face_frames(mesh);

    std::vector<TangentStress> scaled(nf);
    run_stage("stress", b.timing.stress, [&] {
#pragma omp parallel for schedule(static)
        for (int f = 0; f < nf; ++f) scaled[f] = b.base_stress[f].scaled(b.config.gamma);
    });

    SparseMatrix L_u, L_w;
    MassMatrix mass;
    run_stage("diffusion", b.timing.diffusion, [&] {
        const DiffusionTensorField tensors = stress_to_diffusion(scaled, b.config.anisotropy);
        StressSummary& s = b.summary;
        s.eigenvalues.resize(nf, 2);
        s.major_direction.resize(nf, 3);
        s.minor_direction.resize(nf, 3);
        s.isotropic.assign(nf, 0);
        s.von_mises.resize(nf);
        std::vector<Mat2> major(nf), minor(nf);
        for (int f = 0; f < nf; ++f) {
            s.eigenvalues.row(f) = scaled[f].eigenvalues.transpose();
            s.major_direction.row(f) = to_world(frames[f], scaled[f].eigenvectors.col(1)).transpose();
            s.minor_direction.row(f) = to_world(frames[f], scaled[f].eigenvectors.col(0)).transpose();
            s.isotropic[f] = tensors[f].isotropic ? 1 : 0;
            s.von_mises[f] = plane_von_mises(scaled[f].eigenvalues);
            major[f] = tensors[f].major;
            minor[f] = tensors[f].minor;
        }
        L_u = assemble_anisotropic(mesh, frames, major);
        L_w = assemble_anisotropic(mesh, frames, minor);
        mass = assemble_mass(mesh, b.config.lumping);
    });

    run_stage("modes", b.timing.modes, [&] {
        EigenSolverOptions base;
        base.normalization = b.config.normalization;
        base.seed = b.config.seed;
        EigenSolverOptions opt_u = base, opt_w = base;
        if (previous_u && previous_u->vectors.rows() == mesh.num_vertices()) opt_u.warm_start = previous_u->vectors;
        if (previous_w && previous_w->vectors.rows() == mesh.num_vertices()) opt_w.warm_start = previous_w->vectors;
        auto w_future = std::async(std::launch::async, [&] { return solve_modes(L_w, mass, b.config.k, opt_w); });
        std::optional<ModeSet> u;
        try {
            u = solve_modes(L_u, mass, b.config.k, opt_u);
        } catch (...) {
            w_future.wait();
            throw;
        }
        b.w = w_future.get();
        b.u = std::move(*u);
    });
}

SessionBundle recompute_with(const SessionBundle& bundle, SessionConfig config, bool warm)
{
    Stopwatch clock;
    config.validate();
    SessionBundle out;
    out.revision = bundle.revision + 1;
    out.config = std::move(config);
    out.mesh = bundle.mesh;
    out.base_displacement = bundle.base_displacement;
    out.base_stress = bundle.base_stress;
    if (out.config.material.bending_enabled) out.timing.bending = 0.0;
    rebuild_tail(out, warm ? &bundle.u : nullptr, warm ? &bundle.w : nullptr);
    out.timing.total = clock.seconds();
    return out;
}

} // namespace

SessionBundle precompute(const SessionConfig& config)
{
    TriangleMesh mesh;
    double load_seconds = 0.0;
    run_stage("load", load_seconds, [&] { mesh = load_obj(config.mesh_path); });
    return precompute(config, mesh);
}

SessionBundle precompute(const SessionConfig& config, const TriangleMesh& mesh)
{
    Stopwatch clock;
    config.validate();
    SessionBundle b;
    b.config = config;
    b.mesh = mesh;
    const MaterialParams& material = config.material;

    SparseMatrix H = run_stage("membrane", b.timing.membrane, [&] { return assemble_membrane_hessian(mesh, material); });
    if (material.bending_enabled) {
        double seconds = 0.0;
        H += run_stage("bending", seconds, [&] { return assemble_bending_hessian(mesh, build_hinges(mesh), material); });
        b.timing.bending = seconds;
    }

    run_stage("statics", b.timing.statics, [&] {
        const BoundaryConditions bc = config.boundary.resolve(mesh);
        b.base_displacement = static_solve(mesh, H, bc, 1.0).base_displacement();
    });

    double stress_seconds = 0.0;
    run_stage("stress", stress_seconds, [&] {
        b.base_stress = project_to_tangent(cauchy_stress(mesh, b.base_displacement, material), build_face_frames(mesh));
    });

    rebuild_tail(b, nullptr, nullptr);
    b.timing.stress += stress_seconds;
    b.timing.total = clock.seconds();
    return b;
}

SessionBundle recompute_r(const SessionBundle& bundle, double r)
{
    SessionConfig config = bundle.config;
    config.anisotropy.r = r;
    return recompute_with(bundle, std::move(config), true);
}

SessionBundle recompute_gamma(const SessionBundle& bundle, double gamma)
{
    SessionConfig config = bundle.config;
    config.gamma = gamma;
    return recompute_with(bundle, std::move(config), true);
}

SessionBundle recompute_k(const SessionBundle& bundle, int k)
{
    SessionConfig config = bundle.config;
    config.k = k;
    return recompute_with(bundle, std::move(config), true);
}

bool params_match_bundle(const StripeParams& params, const SessionBundle& bundle)
{
    return params.gamma == bundle.config.gamma && params.r == bundle.config.anisotropy.r;
}

StripeField stripe_field(const SessionBundle& bundle, const StripeParams& params)
{
    if (!params_match_bundle(params, bundle)) {
        std::ostringstream msg;
        msg << "stripe parameters ask for gamma=" << params.gamma << ", r=" << params.r << " but the bundle holds gamma="
            << bundle.config.gamma << ", r=" << bundle.config.anisotropy.r;
        throw ConfigError(msg.str());
    }
    return StripeField::from_modes(bundle.mesh, bundle.u.vectors, bundle.w.vectors, params);
}

StructureExport export_structure(const SessionBundle& bundle, const StripeParams& params, int max_depth)
{
    const StripeField field = stripe_field(bundle, params);
    ExtractionOptions options;
    options.max_depth = max_depth;
    StructureExport out{extract(field, options), {}};
    std::vector<std::string> comments{
        "diffusion structure",
        "params " + json(params).dump(),
        "bundle revision " + std::to_string(bundle.revision),
    };
    std::ostringstream area;
    area << std::setprecision(17) << "kept area " << out.mesh.kept_area << " of " << out.mesh.refined_area;
    comments.push_back(area.str());
    if (out.mesh.empty()) comments.push_back("empty structure");
    std::ostringstream obj;
    write_obj(obj, out.mesh.mesh, comments);
    out.obj = obj.str();
    return out;
}

// ---------------------------------------------------------------------------
// Bundle I/O

namespace {

constexpr char kMagic[8] = {'D', 'S', 'T', 'R', 'B', 'N', 'D', 'L'};

template <typename T>
void write_le(std::string& buf, const T* data, std::size_t count)
{
    const std::size_t start = buf.size();
    buf.resize(start + count * sizeof(T));
    std::memcpy(buf.data() + start, data, count * sizeof(T));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        for (std::size_t i = 0; i < count; ++i) std::reverse(buf.data() + start + i * sizeof(T), buf.data() + start + (i + 1) * sizeof(T));
    }
}

template <typename T>
void read_le(const char* src, T* data, std::size_t count)
{
    std::memcpy(data, src, count * sizeof(T));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        auto* bytes = reinterpret_cast<char*>(data);
        for (std::size_t i = 0; i < count; ++i) std::reverse(bytes + i * sizeof(T), bytes + (i + 1) * sizeof(T));
    }
}

class BlockWriter {
public:
    template <typename T>
    void add(const std::string& name, const char* dtype, std::vector<std::int64_t> shape, const T* data, std::size_t count)
    {
        pad();
        blocks_.push_back({{"name", name}, {"dtype", dtype}, {"shape", shape}, {"offset", data_.size()}, {"bytes", count * sizeof(T)}});
        write_le(data_, data, count);
    }

    const json& blocks() const { return blocks_; }
    const std::string& data() const { return data_; }

private:
    void pad()
    {
        while (data_.size() % 8 != 0) data_.push_back('\0');
    }

    json blocks_ = json::array();
    std::string data_;
};

// Row-major copy of a column-major Eigen matrix.
template <typename Matrix>
std::vector<typename Matrix::Scalar> row_major(const Matrix& m)
{
    std::vector<typename Matrix::Scalar> out(static_cast<std::size_t>(m.rows() * m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return out;
}

json timing_json(const TimingRecord& t)
{
    json j = {{"membrane", t.membrane}, {"statics", t.statics}, {"stress", t.stress},
              {"diffusion", t.diffusion}, {"modes", t.modes}, {"total", t.total}};
    j["bending"] = t.bending ? json(*t.bending) : json(nullptr);
    return j;
}

TimingRecord timing_from_json(const json& j)
{
    TimingRecord t;
    t.membrane = j.at("membrane").get<double>();
    if (!j.at("bending").is_null()) t.bending = j.at("bending").get<double>();
    t.statics = j.at("statics").get<double>();
    t.stress = j.at("stress").get<double>();
    t.diffusion = j.at("diffusion").get<double>();
    t.modes = j.at("modes").get<double>();
    t.total = j.at("total").get<double>();
    return t;
}

} // namespace

std::string bundle_bytes(const SessionBundle& b)
{
    const auto nv = static_cast<std::int64_t>(b.mesh.num_vertices());
    const auto nf = static_cast<std::int64_t>(b.mesh.num_faces());
    const auto k = static_cast<std::int64_t>(b.num_modes());
    if (b.w.count() != k || b.u.vectors.rows() != nv || b.w.vectors.rows() != nv ||
        static_cast<std::int64_t>(b.base_stress.size()) != nf || b.base_displacement.size() != 3 * nv) {
        throw ConfigError("bundle arrays are inconsistent with |V|, |F| and k");
    }

    BlockWriter w;
    const auto pos = row_major(b.mesh.positions());
    w.add("positions", "float64", {nv, 3}, pos.data(), pos.size());
    const auto faces = row_major(b.mesh.faces());
    static_assert(sizeof(int) == 4);
    w.add("faces", "int32", {nf, 3}, faces.data(), faces.size());
    w.add("base_displacement", "float64", {3 * nv}, b.base_displacement.data(), static_cast<std::size_t>(3 * nv));
    std::vector<double> stress;
    stress.reserve(static_cast<std::size_t>(4 * nf));
    for (const auto& s : b.base_stress) stress.insert(stress.end(), {s.matrix(0, 0), s.matrix(0, 1), s.matrix(1, 0), s.matrix(1, 1)});
    w.add("base_stress", "float64", {nf, 2, 2}, stress.data(), stress.size());
    const auto eig = row_major(b.summary.eigenvalues);
    w.add("stress_eigenvalues", "float64", {nf, 2}, eig.data(), eig.size());
    const auto major = row_major(b.summary.major_direction);
    w.add("major_direction", "float64", {nf, 3}, major.data(), major.size());
    const auto minor = row_major(b.summary.minor_direction);
    w.add("minor_direction", "float64", {nf, 3}, minor.data(), minor.size());
    w.add("isotropic", "uint8", {nf}, b.summary.isotropic.data(), b.summary.isotropic.size());
    w.add("von_mises", "float64", {nf}, b.summary.von_mises.data(), static_cast<std::size_t>(nf));
    // Modes are stored one contiguous column per mode.
    w.add("u_eigenvalues", "float64", {k}, b.u.eigenvalues.data(), static_cast<std::size_t>(k));
    w.add("u_modes", "float64", {k, nv}, b.u.vectors.data(), static_cast<std::size_t>(k * nv));
    w.add("w_eigenvalues", "float64", {k}, b.w.eigenvalues.data(), static_cast<std::size_t>(k));
    w.add("w_modes", "float64", {k, nv}, b.w.vectors.data(), static_cast<std::size_t>(k * nv));

    json header = {{"format", "diffstruct-bundle"},
                   {"formatVersion", SessionBundle::kFormatVersion},
                   {"revision", b.revision},
                   {"config", b.config},
                   {"counts", {{"vertices", nv}, {"faces", nf}, {"modes", k}}},
                   {"normalization", {{"u", to_string(b.u.normalization)}, {"w", to_string(b.w.normalization)}}},
                   {"timing", timing_json(b.timing)},
                   {"blocks", w.blocks()}};
    std::string text = header.dump();
    while ((sizeof(kMagic) + 4 + 8 + text.size()) % 8 != 0) text.push_back(' ');

    std::string out(kMagic, sizeof(kMagic));
    const std::uint32_t version = SessionBundle::kFormatVersion;
    write_le(out, &version, 1);
    const std::uint64_t length = text.size();
    write_le(out, &length, 1);
    out += text;
    out += w.data();
    return out;
}

void save_bundle(std::ostream& out, const SessionBundle& bundle)
{
    const std::string bytes = bundle_bytes(bundle);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed to write bundle");
}

void save_bundle(const std::filesystem::path& path, const SessionBundle& bundle)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    save_bundle(out, bundle);
}

SessionBundle load_bundle(std::istream& in)
{
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    constexpr std::size_t kPrefix = sizeof(kMagic) + 4 + 8;
    if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw ConfigError("not a diffstruct bundle");
    }
    std::uint32_t version = 0;
    read_le(bytes.data() + 8, &version, 1);
    if (version != SessionBundle::kFormatVersion) {
        throw ConfigError("unsupported bundle format version " + std::to_string(version));
    }
    std::uint64_t length = 0;
    read_le(bytes.data() + 12, &length, 1);
    if (bytes.size() < kPrefix + length) throw ConfigError("truncated bundle header");

    json header;
    try {
        header = json::parse(bytes.begin() + kPrefix, bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + length));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bundle header: ") + e.what());
    }
    const char* data = bytes.data() + kPrefix + length;
    const std::size_t data_size = bytes.size() - kPrefix - length;

    std::map<std::string, json> blocks;
    for (const json& blk : header.at("blocks")) blocks[blk.at("name").get<std::string>()] = blk;
    auto block = [&](const std::string& name, std::size_t elem, std::size_t count) {
        const auto it = blocks.find(name);
        if (it == blocks.end()) throw ConfigError("bundle lacks block " + name);
        const auto offset = it->second.at("offset").get<std::size_t>();
        const auto size = it->second.at("bytes").get<std::size_t>();
        if (size != elem * count || offset + size > data_size) throw ConfigError("bundle block " + name + " has the wrong size");
        return data + offset;
    };

    SessionBundle b;
    try {
        b.revision = header.at("revision").get<std::uint64_t>();
        b.config = header.at("config").get<SessionConfig>();
        b.timing = timing_from_json(header.at("timing"));
        const auto& counts = header.at("counts");
        const auto nv = counts.at("vertices").get<std::size_t>();
        const auto nf = counts.at("faces").get<std::size_t>();
        const auto k = counts.at("modes").get<std::size_t>();
        const auto rows_v = static_cast<Eigen::Index>(nv);
        const auto rows_f = static_cast<Eigen::Index>(nf);
        const auto cols_k = static_cast<Eigen::Index>(k);

        auto read_rows = [&](const std::string& name, auto& matrix, Eigen::Index rows, Eigen::Index cols) {
            using Scalar = typename std::decay_t<decltype(matrix)>::Scalar;
            std::vector<Scalar> tmp(static_cast<std::size_t>(rows * cols));
            read_le(block(name, sizeof(Scalar), tmp.size()), tmp.data(), tmp.size());
            matrix.resize(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) matrix(r, c) = tmp[static_cast<std::size_t>(r * cols + c)];
        };

        Positions P;
        Faces F;
        read_rows("positions", P, rows_v, 3);
        read_rows("faces", F, rows_f, 3);
        b.mesh = TriangleMesh::from_arrays(std::move(P), std::move(F));

        b.base_displacement.resize(3 * rows_v);
        read_le(block("base_displacement", 8, 3 * nv), b.base_displacement.data(), 3 * nv);
        std::vector<double> stress(4 * nf);
        read_le(block("base_stress", 8, 4 * nf), stress.data(), stress.size());
        b.base_stress.resize(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            Mat2 S;
            S << stress[4 * f], stress[4 * f + 1], stress[4 * f + 2], stress[4 * f + 3];
            b.base_stress[f] = TangentStress::from_matrix(S);
        }

        read_rows("stress_eigenvalues", b.summary.eigenvalues, rows_f, 2);
        read_rows("major_direction", b.summary.major_direction, rows_f, 3);
        read_rows("minor_direction", b.summary.minor_direction, rows_f, 3);
        b.summary.isotropic.resize(nf);
        read_le(block("isotropic", 1, nf), b.summary.isotropic.data(), nf);
        b.summary.von_mises.resize(rows_f);
        read_le(block("von_mises", 8, nf), b.summary.von_mises.data(), nf);

        auto read_modes = [&](const std::string& prefix, ModeSet& m, const std::string& norm) {
            m.normalization = normalization_from_string(norm);
            m.eigenvalues.resize(cols_k);
            read_le(block(prefix + "_eigenvalues", 8, k), m.eigenvalues.data(), k);
            m.vectors.resize(rows_v, cols_k);
            read_le(block(prefix + "_modes", 8, k * nv), m.vectors.data(), k * nv);
        };
        read_modes("u", b.u, header.at("normalization").at("u").get<std::string>());
        read_modes("w", b.w, header.at("normalization").at("w").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bundle header: ") + e.what());
    }
    return b;
}

SessionBundle load_bundle(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open bundle " + path.string());
    return load_bundle(in);
}

std::string format_timing_table(const std::vector<TimingRow>& rows)
{
    std::size_t label_width = 4;
    for (const auto& r : rows) label_width = std::max(label_width, r.label.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(label_width)) << "Mesh" << std::right;
    const char* columns[] = {"|V|", "|T|", "Membrane(s)", "Bending(s)", "Statics(s)", "Stress(s)", "Diffusion(s)", "Modes(s)"};
    for (const char* c : columns) out << "  " << std::setw(12) << c;
    out << '\n';
    auto seconds = [&](double s) { out << "  " << std::setw(12) << std::fixed << std::setprecision(4) << s; };
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(label_width)) << r.label << std::right;
        out << "  " << std::setw(12) << r.vertices << "  " << std::setw(12) << r.faces;
        seconds(r.timing.membrane);
        if (r.timing.bending) seconds(*r.timing.bending);
        else out << "  " << std::setw(12) << "N/A";
        seconds(r.timing.statics);
        seconds(r.timing.stress);
        seconds(r.timing.diffusion);
        seconds(r.timing.modes);
        out << '\n';
    }
    return out.str();
}

} // namespace diffstruct

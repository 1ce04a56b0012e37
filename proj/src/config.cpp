#include "diffstruct/config.hpp"

#include "diffstruct/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>

namespace diffstruct {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key, const T& fallback)
{
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

Vec3 vec3_from(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be a 3-element array");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw ConfigError(std::string(what) + " must contain numbers");
        v[i] = j[i].get<double>();
    }
    return v;
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

} // namespace

std::vector<int> VertexSelection::resolve(const TriangleMesh& mesh) const
{
    std::vector<int> out;
    switch (kind) {
    case Kind::All:
        out.resize(mesh.num_vertices());
        for (int v = 0; v < mesh.num_vertices(); ++v) out[v] = v;
        break;
    case Kind::Vertices:
        for (int v : vertices) {
            if (v < 0 || v >= mesh.num_vertices()) {
                throw ConfigError("selected vertex " + std::to_string(v) + " out of range");
            }
            out.push_back(v);
        }
        break;
    case Kind::Box: {
        const double pad = 1e-9 * mesh.bbox_diagonal();
        for (int v = 0; v < mesh.num_vertices(); ++v) {
            const Vec3 x = mesh.vertex(v);
            if ((x.array() >= box_min.array() - pad).all() && (x.array() <= box_max.array() + pad).all()) {
                out.push_back(v);
            }
        }
        break;
    }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) throw ConfigError("selection resolves to no vertices");
    return out;
}

BoundaryConditions BoundarySpec::resolve(const TriangleMesh& mesh) const
{
    BoundaryConditions bc;
    bc.forces = Eigen::VectorXd::Zero(3 * mesh.num_vertices());
    for (const auto& fx : fixed) {
        for (int v : fx.selection.resolve(mesh))
            for (int a = 0; a < 3; ++a)
                if (fx.axes[a]) bc.fixed_dofs.push_back(3 * v + a);
    }
    for (const auto& f : forces) {
        const auto verts = f.selection.resolve(mesh);
        const Vec3 per_vertex = f.total ? Vec3(f.value / static_cast<double>(verts.size())) : f.value;
        for (int v : verts) bc.forces.segment<3>(3 * v) += per_vertex;
    }
    bc.normalize(mesh.num_vertices());
    return bc;
}

void SessionConfig::validate() const
{
    material.validate();
    anisotropy.validate();
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be finite and nonnegative");
    if (k < 1) throw ConfigError("mode count k must be at least 1");
    if (max_depth < 0) throw ConfigError("maxDepth must be nonnegative");
}

void to_json(json& j, const VertexSelection& s)
{
    switch (s.kind) {
    case VertexSelection::Kind::All: j = {{"all", true}}; break;
    case VertexSelection::Kind::Vertices: j = {{"vertices", s.vertices}}; break;
    case VertexSelection::Kind::Box: j = {{"box", {{"min", vec3_to(s.box_min)}, {"max", vec3_to(s.box_max)}}}}; break;
    }
}

void from_json(const json& j, VertexSelection& s)
{
    if (!j.is_object()) throw ConfigError("selection must be an object");
    s = VertexSelection{};
    if (j.contains("all")) {
        if (!j.at("all").is_boolean() || !j.at("all").get<bool>()) throw ConfigError("'all' selection must be true");
        s.kind = VertexSelection::Kind::All;
    } else if (j.contains("vertices")) {
        s.kind = VertexSelection::Kind::Vertices;
        s.vertices = field<std::vector<int>>(j, "vertices", {});
    } else if (j.contains("box")) {
        s.kind = VertexSelection::Kind::Box;
        const json& b = j.at("box");
        if (!b.is_object() || !b.contains("min") || !b.contains("max")) throw ConfigError("box needs min and max");
        s.box_min = vec3_from(b.at("min"), "box.min");
        s.box_max = vec3_from(b.at("max"), "box.max");
    } else {
        throw ConfigError("selection needs one of 'vertices', 'box' or 'all'");
    }
}

void to_json(json& j, const BoundarySpec& b)
{
    j = {{"fixed", json::array()}, {"forces", json::array()}};
    for (const auto& f : b.fixed) {
        j["fixed"].push_back({{"select", f.selection}, {"axes", {f.axes[0], f.axes[1], f.axes[2]}}});
    }
    for (const auto& f : b.forces) {
        j["forces"].push_back({{"select", f.selection}, {f.total ? "total" : "vector", vec3_to(f.value)}});
    }
}

void from_json(const json& j, BoundarySpec& b)
{
    if (!j.is_object()) throw ConfigError("boundary conditions must be an object");
    b = BoundarySpec{};
    for (const json& f : field<json>(j, "fixed", json::array())) {
        FixedSpec spec;
        if (!f.contains("select")) throw ConfigError("fixed entry needs 'select'");
        spec.selection = f.at("select").get<VertexSelection>();
        if (f.contains("axes")) {
            const auto axes = field<std::vector<bool>>(f, "axes", {});
            if (axes.size() != 3) throw ConfigError("'axes' must list three booleans");
            spec.axes = {axes[0], axes[1], axes[2]};
        }
        b.fixed.push_back(spec);
    }
    for (const json& f : field<json>(j, "forces", json::array())) {
        ForceSpec spec;
        if (!f.contains("select")) throw ConfigError("force entry needs 'select'");
        spec.selection = f.at("select").get<VertexSelection>();
        if (f.contains("vector") == f.contains("total")) throw ConfigError("force entry needs exactly one of 'vector' or 'total'");
        spec.total = f.contains("total");
        spec.value = vec3_from(f.at(spec.total ? "total" : "vector"), "force");
        b.forces.push_back(spec);
    }
}

void to_json(json& j, const MaterialParams& m)
{
    j = {{"youngModulus", m.young_modulus},
         {"poissonRatio", m.poisson_ratio},
         {"thickness", m.thickness},
         {"bendingStiffness", m.bending_stiffness},
         {"bending", m.bending_enabled}};
}

void from_json(const json& j, MaterialParams& m)
{
    if (!j.is_object()) throw ConfigError("material must be an object");
    const MaterialParams d;
    m.young_modulus = field(j, "youngModulus", d.young_modulus);
    m.poisson_ratio = field(j, "poissonRatio", d.poisson_ratio);
    m.thickness = field(j, "thickness", d.thickness);
    m.bending_stiffness = field(j, "bendingStiffness", d.bending_stiffness);
    m.bending_enabled = field(j, "bending", d.bending_enabled);
}

void to_json(json& j, const AnisotropySettings& a)
{
    j = {{"r", a.r}, {"isotropyTolerance", a.isotropy_tolerance}};
    j["stressFloor"] = a.stress_floor ? json(*a.stress_floor) : json(nullptr);
}

void from_json(const json& j, AnisotropySettings& a)
{
    if (!j.is_object()) throw ConfigError("anisotropy must be an object");
    const AnisotropySettings d;
    a.r = field(j, "r", d.r);
    a.isotropy_tolerance = field(j, "isotropyTolerance", d.isotropy_tolerance);
    a.stress_floor.reset();
    if (j.contains("stressFloor") && !j.at("stressFloor").is_null()) a.stress_floor = field(j, "stressFloor", 0.0);
}

void to_json(json& j, const SessionConfig& c)
{
    j = {{"name", c.name},
         {"mesh", c.mesh_path.generic_string()},
         {"boundaryConditions", c.boundary},
         {"material", c.material},
         {"gamma", c.gamma},
         {"anisotropy", c.anisotropy},
         {"k", c.k},
         {"maxDepth", c.max_depth},
         {"massLumping", to_string(c.lumping)},
         {"normalization", to_string(c.normalization)},
         {"seed", c.seed}};
}

void from_json(const json& j, SessionConfig& c)
{
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const SessionConfig d;
    c.name = field<std::string>(j, "name", "");
    c.mesh_path = field<std::string>(j, "mesh", "");
    c.boundary = j.contains("boundaryConditions") ? j.at("boundaryConditions").get<BoundarySpec>() : BoundarySpec{};
    c.material = j.contains("material") ? j.at("material").get<MaterialParams>() : d.material;
    c.gamma = field(j, "gamma", d.gamma);
    c.anisotropy = j.contains("anisotropy") ? j.at("anisotropy").get<AnisotropySettings>() : d.anisotropy;
    c.k = field(j, "k", d.k);
    c.max_depth = field(j, "maxDepth", d.max_depth);
    c.lumping = mass_lumping_from_string(field<std::string>(j, "massLumping", to_string(d.lumping)));
    c.normalization = normalization_from_string(field<std::string>(j, "normalization", to_string(d.normalization)));
    c.seed = field(j, "seed", d.seed);
    c.validate();
}

SessionConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    SessionConfig c = j.get<SessionConfig>();
    if (!c.mesh_path.empty() && c.mesh_path.is_relative()) c.mesh_path = path.parent_path() / c.mesh_path;
    return c;
}

} // namespace diffstruct

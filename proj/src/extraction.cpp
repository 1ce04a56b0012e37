#include "diffstruct/extraction.hpp"

#include "diffstruct/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <unordered_map>

namespace diffstruct {

namespace {

std::uint64_t edge_key(int a, int b)
{
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

struct FamilyArgs {
    double alpha;
    double beta;
    double threshold;
    double tol;

    double arg(double value) const { return alpha * value + beta; }
};

std::array<FamilyArgs, 2> family_args(const Eigen::VectorXd& upsilon, const Eigen::VectorXd& omega,
                                      const StripeParams& p)
{
    return {FamilyArgs{p.alpha_u, p.beta_u, p.m_u, argument_tolerance(upsilon, p.alpha_u)},
            FamilyArgs{p.alpha_w, p.beta_w, p.m_w, argument_tolerance(omega, p.alpha_w)}};
}

int face_crossings(const FamilyArgs& fa, double v0, double v1, double v2)
{
    const double a0 = fa.arg(v0);
    const double a1 = fa.arg(v1);
    const double a2 = fa.arg(v2);
    return count_level_crossings(std::min({a0, a1, a2}), std::max({a0, a1, a2}), fa.threshold, fa.tol);
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) { return 0.5 * (b - a).cross(c - a).norm(); }

} // namespace

std::vector<double> level_crossings(double lo, double hi, double m, double tol)
{
    std::vector<double> out;
    if (!(m > -1.0 && m < 1.0)) return out;
    lo += tol;
    hi -= tol;
    if (!(hi > lo)) return out;
    const double d = (1.0 - m) / 4.0;
    const auto k_begin = static_cast<long long>(std::floor(lo - d)) - 1;
    const auto k_end = static_cast<long long>(std::ceil(hi + d)) + 1;
    for (long long k = k_begin; k <= k_end; ++k) {
        for (double x : {static_cast<double>(k) - d, static_cast<double>(k) + d}) {
            if (x > lo && x < hi) out.push_back(x);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

double argument_tolerance(const Eigen::VectorXd& values, double alpha)
{
    if (values.size() == 0) return 0.0;
    return 1e-10 * std::abs(alpha) * (values.maxCoeff() - values.minCoeff());
}

CrossingCount count_crossings(const StripeField& field, int face)
{
    const auto args = family_args(field.upsilon(), field.omega(), field.params());
    const auto& F = field.mesh().faces();
    const int i = F(face, 0), j = F(face, 1), k = F(face, 2);
    CrossingCount c;
    c.major = face_crossings(args[0], field.upsilon()[i], field.upsilon()[j], field.upsilon()[k]);
    c.minor = face_crossings(args[1], field.omega()[i], field.omega()[j], field.omega()[k]);
    return c;
}

double RefinedMesh::face_area(int f) const
{
    return triangle_area(positions.row(faces(f, 0)).transpose(), positions.row(faces(f, 1)).transpose(),
                         positions.row(faces(f, 2)).transpose());
}

double RefinedMesh::total_area() const
{
    double sum = 0.0;
    for (int f = 0; f < num_faces(); ++f) sum += face_area(f);
    return sum;
}

RefinedMesh adaptive_subdivide(const StripeField& field, int max_depth)
{
    if (max_depth < 0) throw ConfigError("maxDepth must be nonnegative");
    const TriangleMesh& mesh = field.mesh();
    const auto args = family_args(field.upsilon(), field.omega(), field.params());

    std::vector<Vec3> pos(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) pos[v] = mesh.vertex(v);
    std::vector<double> up(field.upsilon().data(), field.upsilon().data() + field.upsilon().size());
    std::vector<double> om(field.omega().data(), field.omega().data() + field.omega().size());
    std::vector<std::array<int, 3>> faces(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) faces[f] = {mesh.faces()(f, 0), mesh.faces()(f, 1), mesh.faces()(f, 2)};
    std::vector<int> source(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) source[f] = f;

    auto needs_split = [&](const std::array<int, 3>& t) {
        return face_crossings(args[0], up[t[0]], up[t[1]], up[t[2]]) > 1 ||
               face_crossings(args[1], om[t[0]], om[t[1]], om[t[2]]) > 1;
    };

    RefinedMesh out;
    out.area_epsilon = mesh.area_epsilon();
    for (int round = 0;; ++round) {
        const int nf = static_cast<int>(faces.size());
        std::vector<char> red(nf, 0);
        int flagged = 0;
#pragma omp parallel for schedule(static) reduction(+ : flagged)
        for (int f = 0; f < nf; ++f) {
            red[f] = needs_split(faces[f]) ? 1 : 0;
            flagged += red[f];
        }
        if (flagged == 0) break;
        if (round == max_depth) {
            out.unresolved_faces = flagged;
            break;
        }
        out.rounds = round + 1;

        // Conformity closure: faces with two or more split edges turn red.
        std::unordered_map<std::uint64_t, int> split;
        for (int f = 0; f < nf; ++f)
            if (red[f])
                for (int c = 0; c < 3; ++c) split.emplace(edge_key(faces[f][c], faces[f][(c + 1) % 3]), -1);
        for (bool changed = true; changed;) {
            changed = false;
            for (int f = 0; f < nf; ++f) {
                if (red[f]) continue;
                int marked = 0;
                for (int c = 0; c < 3; ++c) marked += split.count(edge_key(faces[f][c], faces[f][(c + 1) % 3])) ? 1 : 0;
                if (marked >= 2) {
                    red[f] = 1;
                    changed = true;
                    for (int c = 0; c < 3; ++c) split.emplace(edge_key(faces[f][c], faces[f][(c + 1) % 3]), -1);
                }
            }
        }

        auto midpoint = [&](int a, int b) {
            int& id = split.at(edge_key(a, b));
            if (id < 0) {
                id = static_cast<int>(pos.size());
                pos.push_back(0.5 * (pos[a] + pos[b]));
                up.push_back(0.5 * (up[a] + up[b]));
                om.push_back(0.5 * (om[a] + om[b]));
            }
            return id;
        };

        std::vector<std::array<int, 3>> next;
        std::vector<int> next_source;
        next.reserve(faces.size() * 2);
        for (int f = 0; f < nf; ++f) {
            const auto& t = faces[f];
            if (red[f]) {
                const int m01 = midpoint(t[0], t[1]);
                const int m12 = midpoint(t[1], t[2]);
                const int m20 = midpoint(t[2], t[0]);
                next.push_back({t[0], m01, m20});
                next.push_back({t[1], m12, m01});
                next.push_back({t[2], m20, m12});
                next.push_back({m01, m12, m20});
                next_source.insert(next_source.end(), 4, source[f]);
                continue;
            }
            int green = -1;
            for (int c = 0; c < 3; ++c)
                if (split.count(edge_key(t[(c + 1) % 3], t[(c + 2) % 3]))) green = c;
            if (green < 0) {
                next.push_back(t);
                next_source.push_back(source[f]);
                continue;
            }
            const int a = t[green];
            const int b = t[(green + 1) % 3];
            const int d = t[(green + 2) % 3];
            const int m = midpoint(b, d);
            next.push_back({a, b, m});
            next.push_back({a, m, d});
            next_source.insert(next_source.end(), 2, source[f]);
        }
        faces = std::move(next);
        source = std::move(next_source);
    }

    out.positions.resize(static_cast<Eigen::Index>(pos.size()), 3);
    for (std::size_t v = 0; v < pos.size(); ++v) out.positions.row(static_cast<Eigen::Index>(v)) = pos[v].transpose();
    out.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f)
        out.faces.row(static_cast<Eigen::Index>(f)) << faces[f][0], faces[f][1], faces[f][2];
    out.upsilon = Eigen::Map<const Eigen::VectorXd>(up.data(), static_cast<Eigen::Index>(up.size()));
    out.omega = Eigen::Map<const Eigen::VectorXd>(om.data(), static_cast<Eigen::Index>(om.size()));
    out.source_face = std::move(source);
    return out;
}

namespace {

// Splits triangles along straight isolines of the per-face linear wave
// argument, welding cut points on shared edges.
class Cutter {
public:
    Cutter(const RefinedMesh& refined, const StripeParams& params)
        : args_(family_args(refined.upsilon, refined.omega, params)), params_(params)
    {
        const auto n = refined.positions.rows();
        pos_.reserve(static_cast<std::size_t>(n) * 2);
        for (Eigen::Index v = 0; v < n; ++v) {
            pos_.push_back(refined.positions.row(v).transpose());
            values_[0].push_back(refined.upsilon[v]);
            values_[1].push_back(refined.omega[v]);
        }
    }

    std::vector<std::array<int, 3>> cut_face(const std::array<int, 3>& face)
    {
        std::vector<std::array<int, 3>> tris{face};
        for (int fam = 0; fam < 2; ++fam) {
            const FamilyArgs& fa = args_[fam];
            double lo = fa.arg(values_[fam][face[0]]);
            double hi = lo;
            for (int c = 1; c < 3; ++c) {
                lo = std::min(lo, fa.arg(values_[fam][face[c]]));
                hi = std::max(hi, fa.arg(values_[fam][face[c]]));
            }
            for (double level : level_crossings(lo, hi, fa.threshold, fa.tol)) {
                std::vector<std::array<int, 3>> next;
                for (const auto& t : tris) split(t, fam, level, next);
                tris = std::move(next);
            }
        }
        return tris;
    }

    const Vec3& position(int v) const { return pos_[v]; }
    double value(int fam, int v) const { return values_[fam][v]; }
    int num_vertices() const { return static_cast<int>(pos_.size()); }

    Vec2 centroid_values(const std::array<int, 3>& t) const
    {
        const double up = (values_[0][t[0]] + values_[0][t[1]] + values_[0][t[2]]) / 3.0;
        const double om = (values_[1][t[0]] + values_[1][t[1]] + values_[1][t[2]]) / 3.0;
        return stripe_values(up, om, params_);
    }

private:
    int sign_of(int fam, int v, double level) const
    {
        const double d = args_[fam].arg(values_[fam][v]) - level;
        if (std::abs(d) <= args_[fam].tol) return 0;
        return d > 0.0 ? 1 : -1;
    }

    int cut_point(int a, int b, int fam, double level)
    {
        if (a > b) std::swap(a, b);
        const auto key = std::make_tuple(a, b, fam, std::bit_cast<std::uint64_t>(level));
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const double da = args_[fam].arg(values_[fam][a]) - level;
        const double db = args_[fam].arg(values_[fam][b]) - level;
        const double t = da / (da - db);
        const int id = static_cast<int>(pos_.size());
        pos_.push_back(pos_[a] + t * (pos_[b] - pos_[a]));
        for (int k = 0; k < 2; ++k) values_[k].push_back(values_[k][a] + t * (values_[k][b] - values_[k][a]));
        cache_.emplace(key, id);
        return id;
    }

    void split(const std::array<int, 3>& t, int fam, double level, std::vector<std::array<int, 3>>& out)
    {
        const std::array<int, 3> s{sign_of(fam, t[0], level), sign_of(fam, t[1], level), sign_of(fam, t[2], level)};
        const bool has_pos = s[0] > 0 || s[1] > 0 || s[2] > 0;
        const bool has_neg = s[0] < 0 || s[1] < 0 || s[2] < 0;
        if (!has_pos || !has_neg) {
            out.push_back(t);
            return;
        }
        for (int c = 0; c < 3; ++c) {
            const int i = c, j = (c + 1) % 3, k = (c + 2) % 3;
            if (s[i] == 0) {
                // Isoline runs through corner i and the opposite edge.
                const int p = cut_point(t[j], t[k], fam, level);
                out.push_back({t[i], t[j], p});
                out.push_back({t[i], p, t[k]});
                return;
            }
        }
        // No zero corners: find the corner whose sign differs from the other two.
        int iso = 0;
        if (s[0] == s[1]) iso = 2;
        else if (s[0] == s[2]) iso = 1;
        const int a = t[iso], b = t[(iso + 1) % 3], c = t[(iso + 2) % 3];
        const int pab = cut_point(a, b, fam, level);
        const int pac = cut_point(a, c, fam, level);
        out.push_back({a, pab, pac});
        if ((pos_[pab] - pos_[c]).squaredNorm() <= (pos_[b] - pos_[pac]).squaredNorm()) {
            out.push_back({pab, b, c});
            out.push_back({pab, c, pac});
        } else {
            out.push_back({pab, b, pac});
            out.push_back({b, c, pac});
        }
    }

    std::array<FamilyArgs, 2> args_;
    StripeParams params_;
    std::vector<Vec3> pos_;
    std::array<std::vector<double>, 2> values_;
    std::map<std::tuple<int, int, int, std::uint64_t>, int> cache_;
};

} // namespace

ExtractedMesh cut_and_discard(const RefinedMesh& refined, const StripeParams& params,
                              const std::vector<std::uint8_t>& solid_faces)
{
    const int num_sources = refined.source_face.empty()
                                ? 0
                                : *std::max_element(refined.source_face.begin(), refined.source_face.end()) + 1;
    if (!solid_faces.empty() && static_cast<int>(solid_faces.size()) < num_sources) {
        throw ConfigError("solid face flags must cover every input face");
    }
    Cutter cutter(refined, params);
    ExtractedMesh out;
    out.unresolved_faces = refined.unresolved_faces;

    std::vector<std::array<int, 3>> kept;
    std::vector<int> kept_source;
    for (int f = 0; f < refined.num_faces(); ++f) {
        const std::array<int, 3> face{refined.faces(f, 0), refined.faces(f, 1), refined.faces(f, 2)};
        out.refined_area += refined.face_area(f);
        const bool solid = !solid_faces.empty() && solid_faces[refined.source_face[f]] != 0;
        for (const auto& t : cutter.cut_face(face)) {
            const double area = triangle_area(cutter.position(t[0]), cutter.position(t[1]), cutter.position(t[2]));
            const Vec2 s = cutter.centroid_values(t);
            if (area < refined.area_epsilon || !(solid || indicator(s))) {
                out.discarded_area += area;
                continue;
            }
            out.kept_area += area;
            kept.push_back(t);
            kept_source.push_back(refined.source_face[f]);
            out.inside_flags.push_back(static_cast<std::uint8_t>((s.x() > 0.0 ? 1 : 0) | (s.y() > 0.0 ? 2 : 0) | (solid ? 4 : 0)));
        }
    }

    // Compact to referenced vertices in first-use order.
    std::vector<int> remap(cutter.num_vertices(), -1);
    std::vector<int> order;
    for (auto& t : kept) {
        for (int& v : t) {
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(order.size());
                order.push_back(v);
            }
            v = remap[v];
        }
    }
    Positions P(static_cast<Eigen::Index>(order.size()), 3);
    out.upsilon.resize(static_cast<Eigen::Index>(order.size()));
    out.omega.resize(static_cast<Eigen::Index>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        P.row(row) = cutter.position(order[i]).transpose();
        out.upsilon[row] = cutter.value(0, order[i]);
        out.omega[row] = cutter.value(1, order[i]);
    }
    Faces F(static_cast<Eigen::Index>(kept.size()), 3);
    for (std::size_t i = 0; i < kept.size(); ++i) F.row(static_cast<Eigen::Index>(i)) << kept[i][0], kept[i][1], kept[i][2];
    out.mesh = TriangleMesh::from_arrays(std::move(P), std::move(F));
    out.source_face = std::move(kept_source);
    return out;
}

ExtractedMesh extract(const StripeField& field, const ExtractionOptions& options)
{
    if (!options.solid_faces.empty() && static_cast<int>(options.solid_faces.size()) != field.mesh().num_faces()) {
        throw ConfigError("solid face flags must have one entry per face");
    }
    return cut_and_discard(adaptive_subdivide(field, options.max_depth), field.params(), options.solid_faces);
}

} // namespace diffstruct

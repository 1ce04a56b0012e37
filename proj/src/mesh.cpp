#include "diffstruct/mesh.hpp"

#include "diffstruct/errors.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace diffstruct {

namespace {

std::uint64_t edge_key(int a, int b)
{
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

// Does face `f` traverse a -> b?
bool traverses(const Faces& faces, int f, int a, int b)
{
    for (int c = 0; c < 3; ++c) {
        if (faces(f, c) == a && faces(f, (c + 1) % 3) == b) return true;
    }
    return false;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x)
    {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

TriangleMesh TriangleMesh::from_arrays(Positions positions, Faces faces)
{
    TriangleMesh mesh;
    const int nv = static_cast<int>(positions.rows());
    const int nf = static_cast<int>(faces.rows());

    if (!positions.allFinite()) throw MeshError("non-finite vertex position");
    for (int f = 0; f < nf; ++f) {
        for (int c = 0; c < 3; ++c) {
            const int v = faces(f, c);
            if (v < 0 || v >= nv) {
                throw MeshError("face " + std::to_string(f) + " references vertex " +
                                std::to_string(v) + " but the mesh has " +
                                std::to_string(nv) + " vertices");
            }
        }
        if (faces(f, 0) == faces(f, 1) || faces(f, 1) == faces(f, 2) ||
            faces(f, 0) == faces(f, 2)) {
            throw MeshError("face " + std::to_string(f) + " repeats a vertex");
        }
    }

    mesh.positions_ = std::move(positions);
    mesh.faces_ = std::move(faces);

    const double diag = mesh.bbox_diagonal();
    mesh.area_epsilon_ = 1e-12 * diag * diag;
    for (int f = 0; f < nf; ++f) {
        if (!(mesh.face_area(f) >= mesh.area_epsilon_) || mesh.face_area(f) == 0.0) {
            throw MeshError("face " + std::to_string(f) + " is degenerate");
        }
    }

    // Edge -> incident faces.
    std::unordered_map<std::uint64_t, int> edge_ids;
    edge_ids.reserve(static_cast<std::size_t>(nf) * 2);
    std::vector<std::array<int, 2>> incident;
    std::vector<std::array<int, 2>> endpoints;
    mesh.face_edges_.resize(nf, 3);
    for (int f = 0; f < nf; ++f) {
        for (int c = 0; c < 3; ++c) {
            const int a = mesh.faces_(f, (c + 1) % 3);
            const int b = mesh.faces_(f, (c + 2) % 3);
            auto [it, inserted] = edge_ids.try_emplace(edge_key(a, b), static_cast<int>(incident.size()));
            if (inserted) {
                incident.push_back({f, -1});
                endpoints.push_back({a, b});
            } else {
                auto& inc = incident[it->second];
                if (inc[1] >= 0) {
                    throw MeshError("non-manifold edge (" + std::to_string(a) + ", " +
                                    std::to_string(b) + ") has more than two incident faces");
                }
                inc[1] = f;
            }
            mesh.face_edges_(f, c) = it->second;
        }
    }

    // Consistent winding by BFS over face adjacency.
    std::vector<char> visited(nf, 0);
    for (int seed = 0; seed < nf; ++seed) {
        if (visited[seed]) continue;
        visited[seed] = 1;
        std::queue<int> queue;
        queue.push(seed);
        while (!queue.empty()) {
            const int f = queue.front();
            queue.pop();
            for (int c = 0; c < 3; ++c) {
                const int a = mesh.faces_(f, (c + 1) % 3);
                const int b = mesh.faces_(f, (c + 2) % 3);
                const auto& inc = incident[mesh.face_edges_(f, c)];
                const int g = inc[0] == f ? inc[1] : inc[0];
                if (g < 0) continue;
                const bool same_direction = traverses(mesh.faces_, g, a, b);
                if (!visited[g]) {
                    if (same_direction) {
                        std::swap(mesh.faces_(g, 1), mesh.faces_(g, 2));
                        const int e1 = mesh.face_edges_(g, 1);
                        mesh.face_edges_(g, 1) = mesh.face_edges_(g, 2);
                        mesh.face_edges_(g, 2) = e1;
                    }
                    visited[g] = 1;
                    queue.push(g);
                } else if (same_direction) {
                    throw MeshError("mesh is not orientable");
                }
            }
        }
    }

    mesh.edges_.resize(incident.size());
    for (std::size_t e = 0; e < incident.size(); ++e) {
        Edge edge;
        edge.f0 = incident[e][0];
        edge.f1 = incident[e][1];
        int a = endpoints[e][0];
        int b = endpoints[e][1];
        if (!traverses(mesh.faces_, edge.f0, a, b)) std::swap(a, b);
        edge.v0 = a;
        edge.v1 = b;
        mesh.edges_[e] = edge;
    }

    UnionFind uf(nv);
    for (const Edge& e : mesh.edges_) uf.unite(e.v0, e.v1);
    std::unordered_map<int, int> root_to_id;
    mesh.vertex_component_.resize(nv);
    for (int v = 0; v < nv; ++v) {
        auto [it, inserted] = root_to_id.try_emplace(uf.find(v), static_cast<int>(root_to_id.size()));
        mesh.vertex_component_[v] = it->second;
    }
    mesh.num_components_ = static_cast<int>(root_to_id.size());
    return mesh;
}

TriangleMesh TriangleMesh::with_positions(Positions positions) const
{
    if (positions.rows() != positions_.rows()) throw MeshError("vertex count mismatch");
    return from_arrays(std::move(positions), faces_);
}

int TriangleMesh::num_boundary_edges() const
{
    return static_cast<int>(std::count_if(edges_.begin(), edges_.end(),
                                          [](const Edge& e) { return e.boundary(); }));
}

double TriangleMesh::face_area(int f) const
{
    const Vec3 a = corner(f, 0);
    return 0.5 * (corner(f, 1) - a).cross(corner(f, 2) - a).norm();
}

double TriangleMesh::total_area() const
{
    double sum = 0.0;
    for (int f = 0; f < num_faces(); ++f) sum += face_area(f);
    return sum;
}

double TriangleMesh::bbox_diagonal() const
{
    if (positions_.rows() == 0) return 0.0;
    return (positions_.colwise().maxCoeff() - positions_.colwise().minCoeff()).norm();
}

int TriangleMesh::euler_characteristic() const
{
    std::vector<char> used(num_vertices(), 0);
    for (int f = 0; f < num_faces(); ++f)
        for (int c = 0; c < 3; ++c) used[faces_(f, c)] = 1;
    const int nv = static_cast<int>(std::count(used.begin(), used.end(), 1));
    return nv - num_edges() + num_faces();
}

std::vector<FaceFrame> build_face_frames(const TriangleMesh& mesh)
{
    std::vector<FaceFrame> frames(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Vec3 x0 = mesh.corner(f, 0);
        const Vec3 e1 = mesh.corner(f, 1) - x0;
        const Vec3 e2 = mesh.corner(f, 2) - x0;
        const Vec3 c = e1.cross(e2);
        const double area = 0.5 * c.norm();
        if (!(area >= mesh.area_epsilon()) || area == 0.0) {
            throw MeshError("face " + std::to_string(f) + " is degenerate");
        }
        FaceFrame& fr = frames[f];
        fr.n = c / c.norm();
        fr.t1 = e1.normalized();
        fr.t2 = fr.n.cross(fr.t1);
        fr.area = area;
    }
    return frames;
}

double dihedral_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3)
{
    const Vec3 e = x1 - x0;
    const Vec3 n0 = e.cross(x2 - x0);
    const Vec3 n1 = (x0 - x1).cross(x3 - x1);
    const double sine = n1.cross(n0).dot(e) / e.norm();
    const double cosine = n0.dot(n1);
    return std::atan2(sine, cosine);
}

std::vector<EdgeHinge> build_hinges(const TriangleMesh& mesh)
{
    std::vector<EdgeHinge> hinges;
    const auto& faces = mesh.faces();
    auto opposite = [&](int f, int a, int b) {
        for (int c = 0; c < 3; ++c) {
            const int v = faces(f, c);
            if (v != a && v != b) return v;
        }
        return -1;
    };
    for (const Edge& e : mesh.edges()) {
        if (e.boundary()) continue;
        EdgeHinge h;
        h.v0 = e.v0;
        h.v1 = e.v1;
        h.f0 = e.f0;
        h.f1 = e.f1;
        h.opp0 = opposite(e.f0, e.v0, e.v1);
        h.opp1 = opposite(e.f1, e.v0, e.v1);
        h.length = (mesh.vertex(e.v1) - mesh.vertex(e.v0)).norm();
        h.area = (mesh.face_area(e.f0) + mesh.face_area(e.f1)) / 3.0;
        h.rest_angle = dihedral_angle(mesh.vertex(h.v0), mesh.vertex(h.v1),
                                      mesh.vertex(h.opp0), mesh.vertex(h.opp1));
        hinges.push_back(h);
    }
    return hinges;
}

TriangleMesh parse_obj(std::istream& in)
{
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> tris;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x() >> p.y() >> p.z())) {
                throw MeshError("OBJ line " + std::to_string(line_no) + ": malformed vertex");
            }
            verts.push_back(p);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ss >> tok) {
                const auto slash = tok.find('/');
                const std::string head = tok.substr(0, slash);
                int idx = 0;
                try {
                    std::size_t used = 0;
                    idx = std::stoi(head, &used);
                    if (used != head.size()) throw std::invalid_argument(head);
                } catch (const std::exception&) {
                    throw MeshError("OBJ line " + std::to_string(line_no) + ": bad index '" + tok + "'");
                }
                if (idx == 0) {
                    throw MeshError("OBJ line " + std::to_string(line_no) + ": index 0 is invalid");
                }
                // Negative indices are relative to the vertices read so far.
                poly.push_back(idx > 0 ? idx - 1 : static_cast<int>(verts.size()) + idx);
            }
            if (poly.size() < 3) {
                throw MeshError("OBJ line " + std::to_string(line_no) + ": face with fewer than 3 vertices");
            }
            for (std::size_t i = 1; i + 1 < poly.size(); ++i) tris.push_back({poly[0], poly[i], poly[i + 1]});
        }
    }
    Positions P(verts.size(), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
    Faces F(tris.size(), 3);
    for (std::size_t i = 0; i < tris.size(); ++i)
        F.row(static_cast<Eigen::Index>(i)) << tris[i][0], tris[i][1], tris[i][2];
    return TriangleMesh::from_arrays(std::move(P), std::move(F));
}

TriangleMesh parse_obj_string(const std::string& text)
{
    std::istringstream in(text);
    return parse_obj(in);
}

TriangleMesh load_obj(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open OBJ file " + path.string());
    return parse_obj(in);
}

void write_obj(std::ostream& out, const Positions& positions, const Faces& faces,
               const std::vector<std::string>& comments)
{
    for (const auto& c : comments) out << "# " << c << '\n';
    out.precision(17);
    for (Eigen::Index v = 0; v < positions.rows(); ++v) {
        out << "v " << positions(v, 0) << ' ' << positions(v, 1) << ' ' << positions(v, 2) << '\n';
    }
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        out << "f " << faces(f, 0) + 1 << ' ' << faces(f, 1) + 1 << ' ' << faces(f, 2) + 1 << '\n';
    }
}

void write_obj(std::ostream& out, const TriangleMesh& mesh, const std::vector<std::string>& comments)
{
    write_obj(out, mesh.positions(), mesh.faces(), comments);
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh,
               const std::vector<std::string>& comments)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_obj(out, mesh, comments);
}

} // namespace diffstruct

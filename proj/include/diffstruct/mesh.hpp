#pragma once

#include "diffstruct/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace diffstruct {

/// Undirected mesh edge. `f1` is -1 on boundary edges. For interior edges
/// `f0` traverses v0 -> v1 and `f1` traverses v1 -> v0.
struct Edge {
    int v0 = -1;
    int v1 = -1;
    int f0 = -1;
    int f1 = -1;

    bool boundary() const { return f1 < 0; }
};

/// Triangle mesh of an open or closed, orientable 2-manifold.
///
/// Instances are immutable once built and validated by `from_arrays`:
/// indices are in range, faces are non-degenerate (area above
/// `area_epsilon()`), every edge has at most two incident faces, and face
/// windings are consistent within each connected component (inconsistently
/// wound but orientable input is re-oriented to match the first face of the
/// component).
class TriangleMesh {
public:
    TriangleMesh() = default;

    static TriangleMesh from_arrays(Positions positions, Faces faces);

    const Positions& positions() const { return positions_; }
    const Faces& faces() const { return faces_; }
    const std::vector<Edge>& edges() const { return edges_; }

    /// Edge id opposite corner `corner` of face `f`.
    int face_edge(int f, int corner) const { return face_edges_(f, corner); }

    int num_vertices() const { return static_cast<int>(positions_.rows()); }
    int num_faces() const { return static_cast<int>(faces_.rows()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    int num_boundary_edges() const;

    Vec3 vertex(int v) const { return positions_.row(v).transpose(); }
    Vec3 corner(int f, int c) const { return positions_.row(faces_(f, c)).transpose(); }

    double face_area(int f) const;
    double total_area() const;
    double bbox_diagonal() const;

    /// 1e-12 * (bounding-box diagonal)^2.
    double area_epsilon() const { return area_epsilon_; }

    int num_components() const { return num_components_; }
    /// Connected component id per vertex (isolated vertices get their own id).
    const std::vector<int>& vertex_component() const { return vertex_component_; }

    /// V - E + F, counting only vertices referenced by a face.
    int euler_characteristic() const;

    /// Mesh with the same connectivity and new positions; re-validated.
    TriangleMesh with_positions(Positions positions) const;

private:
    Positions positions_;
    Faces faces_;
    std::vector<Edge> edges_;
    Eigen::Matrix<int, Eigen::Dynamic, 3> face_edges_;
    std::vector<int> vertex_component_;
    int num_components_ = 0;
    double area_epsilon_ = 0.0;
};

/// Orthonormal tangent frame of a face. `t1` follows the first edge,
/// `n` follows the face winding and `t2 = n x t1`.
struct FaceFrame {
    Vec3 t1;
    Vec3 t2;
    Vec3 n;
    double area = 0.0;

    /// 3x2 basis [t1 t2].
    Eigen::Matrix<double, 3, 2> basis() const
    {
        Eigen::Matrix<double, 3, 2> b;
        b.col(0) = t1;
        b.col(1) = t2;
        return b;
    }
};

std::vector<FaceFrame> build_face_frames(const TriangleMesh& mesh);

/// Interior edge with its two incident faces and rest bending data.
/// `opp0` is the vertex of `f0` not on the edge, `opp1` likewise for `f1`.
struct EdgeHinge {
    int v0 = -1;
    int v1 = -1;
    int opp0 = -1;
    int opp1 = -1;
    int f0 = -1;
    int f1 = -1;
    double rest_angle = 0.0;
    double length = 0.0;
    /// One third of the summed incident face areas.
    double area = 0.0;
};

std::vector<EdgeHinge> build_hinges(const TriangleMesh& mesh);

/// Signed dihedral angle of the hinge (x0, x1) with wings x2 (face x0,x1,x2)
/// and x3 (face x1,x0,x3). Zero when flat, positive when the wings fold
/// towards the normal side, in (-pi, pi].
double dihedral_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3);

TriangleMesh load_obj(const std::filesystem::path& path);
TriangleMesh parse_obj(std::istream& in);
TriangleMesh parse_obj_string(const std::string& text);

/// Writes `v` and `f` records with 1-based indices. Each entry of
/// `comments` is emitted as a leading `# ` line.
void write_obj(std::ostream& out, const TriangleMesh& mesh,
               const std::vector<std::string>& comments = {});
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh,
               const std::vector<std::string>& comments = {});
void write_obj(std::ostream& out, const Positions& positions, const Faces& faces,
               const std::vector<std::string>& comments = {});

} // namespace diffstruct

#include "diffstruct/diffusion_operators.hpp"

#include "diffstruct/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <future>

namespace diffstruct {

std::string to_string(OperatorKind kind)
{
    switch (kind) {
    case OperatorKind::Major: return "major";
    case OperatorKind::Minor: return "minor";
    default: return "isotropic-reference";
    }
}

std::string to_string(Normalization n) { return n == Normalization::Euclidean ? "euclidean" : "mass"; }

std::string to_string(MassLumping m) { return m == MassLumping::Barycentric ? "barycentric" : "voronoi"; }

Normalization normalization_from_string(const std::string& s)
{
    if (s == "euclidean") return Normalization::Euclidean;
    if (s == "mass") return Normalization::MassOrthonormal;
    throw ConfigError("unknown normalization '" + s + "' (expected euclidean or mass)");
}

MassLumping mass_lumping_from_string(const std::string& s)
{
    if (s == "barycentric") return MassLumping::Barycentric;
    if (s == "voronoi") return MassLumping::Voronoi;
    throw ConfigError("unknown mass lumping '" + s + "' (expected barycentric or voronoi)");
}

Eigen::Matrix<double, 2, 3> hat_gradients(const TriangleMesh& mesh, const FaceFrame& frame, int face)
{
    Eigen::Matrix<double, 2, 3> g;
    const double inv = 1.0 / (2.0 * frame.area);
    for (int i = 0; i < 3; ++i) {
        const Vec3 opposite = mesh.corner(face, (i + 2) % 3) - mesh.corner(face, (i + 1) % 3);
        const Vec3 grad = frame.n.cross(opposite) * inv;
        g(0, i) = frame.t1.dot(grad);
        g(1, i) = frame.t2.dot(grad);
    }
    return g;
}

SparseMatrix assemble_anisotropic(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames,
                                  const std::vector<Mat2>& tensors)
{
    const int nf = mesh.num_faces();
    if (static_cast<int>(frames.size()) != nf || static_cast<int>(tensors.size()) != nf) {
        throw ConfigError("per-face frames and tensors must match the face count");
    }
    const auto& faces = mesh.faces();
    std::vector<Triplet> triplets(static_cast<std::size_t>(nf) * 9);
#pragma omp parallel for schedule(static)
    for (int f = 0; f < nf; ++f) {
        const auto g = hat_gradients(mesh, frames[f], f);
        const Mat2 D = 0.5 * (tensors[f] + tensors[f].transpose());
        const Eigen::Matrix<double, 2, 3> Dg = D * g;
        std::size_t slot = static_cast<std::size_t>(f) * 9;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                // Mirror so that entry (i, j) and (j, i) are bitwise equal.
                const int a = std::min(i, j);
                const int b = std::max(i, j);
                const double v = frames[f].area * g.col(a).dot(Dg.col(b));
                triplets[slot++] = Triplet(faces(f, i), faces(f, j), v);
            }
        }
    }
    SparseMatrix L(mesh.num_vertices(), mesh.num_vertices());
    L.setFromTriplets(triplets.begin(), triplets.end());
    return L;
}

SparseMatrix assemble_isotropic(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames)
{
    return assemble_anisotropic(mesh, frames, std::vector<Mat2>(mesh.num_faces(), Mat2::Identity()));
}

MassMatrix assemble_mass(const TriangleMesh& mesh, MassLumping lumping)
{
    MassMatrix M = MassMatrix::Zero(mesh.num_vertices());
    const auto& faces = mesh.faces();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const double area = mesh.face_area(f);
        if (lumping == MassLumping::Barycentric) {
            for (int c = 0; c < 3; ++c) M[faces(f, c)] += area / 3.0;
            continue;
        }
        std::array<Vec3, 3> x{mesh.corner(f, 0), mesh.corner(f, 1), mesh.corner(f, 2)};
        int obtuse = -1;
        for (int c = 0; c < 3; ++c) {
            if ((x[(c + 1) % 3] - x[c]).dot(x[(c + 2) % 3] - x[c]) < 0.0) obtuse = c;
        }
        for (int c = 0; c < 3; ++c) {
            double share = 0.0;
            if (obtuse < 0) {
                const int j = (c + 1) % 3;
                const int k = (c + 2) % 3;
                auto cot = [&](int at) {
                    const Vec3 u = x[(at + 1) % 3] - x[at];
                    const Vec3 v = x[(at + 2) % 3] - x[at];
                    return u.dot(v) / u.cross(v).norm();
                };
                share = ((x[j] - x[c]).squaredNorm() * cot(k) + (x[k] - x[c]).squaredNorm() * cot(j)) / 8.0;
            } else {
                share = c == obtuse ? area / 2.0 : area / 4.0;
            }
            M[faces(f, c)] += share;
        }
    }
    return M;
}

double infinity_norm(const SparseMatrix& L)
{
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(L.rows());
    for (int col = 0; col < L.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(L, col); it; ++it) rows[it.row()] += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
}

double max_mode_residual(const SparseMatrix& L, const MassMatrix& M, const ModeSet& modes)
{
    double worst = 0.0;
    for (int i = 0; i < modes.count(); ++i) {
        const Eigen::VectorXd u = modes.vectors.col(i);
        const double r = (L * u - modes.eigenvalues[i] * M.cwiseProduct(u)).norm();
        worst = std::max(worst, r);
    }
    return worst;
}

ModePair mode_pair_pipeline(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames,
                            const DiffusionTensorField& tensors, const ModePairOptions& options)
{
    std::vector<Mat2> major(tensors.size());
    std::vector<Mat2> minor(tensors.size());
    for (std::size_t f = 0; f < tensors.size(); ++f) {
        major[f] = tensors[f].major;
        minor[f] = tensors[f].minor;
    }
    ModePair out;
    out.major = {assemble_anisotropic(mesh, frames, major), OperatorKind::Major};
    out.minor = {assemble_anisotropic(mesh, frames, minor), OperatorKind::Minor};
    out.mass = assemble_mass(mesh, options.lumping);

    EigenSolverOptions eu = options.eigen;
    EigenSolverOptions ew = options.eigen;
    if (options.warm_start_u) eu.warm_start = options.warm_start_u;
    if (options.warm_start_w) ew.warm_start = options.warm_start_w;

    // The two problems share only the read-only mass matrix.
    auto minor_modes = std::async(std::launch::async, [&] { return solve_modes(out.minor.matrix, out.mass, options.k, ew); });
    out.u = solve_modes(out.major.matrix, out.mass, options.k, eu);
    out.w = minor_modes.get();
    return out;
}

} // namespace diffstruct

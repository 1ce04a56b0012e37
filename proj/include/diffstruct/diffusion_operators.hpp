#pragma once

#include "diffstruct/mesh.hpp"
#include "diffstruct/stress_diffusion.hpp"
#include "diffstruct/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace diffstruct {

enum class OperatorKind { Major, Minor, IsotropicReference };

/// Symmetric PSD stiffness matrix of an anisotropic diffusion operator.
struct SparseSymmetricOperator {
    SparseMatrix matrix;
    OperatorKind kind = OperatorKind::IsotropicReference;

    int dimension() const { return static_cast<int>(matrix.rows()); }
};

enum class MassLumping {
    /// One third of each incident face area.
    Barycentric,
    /// Mixed Voronoi areas with the obtuse-triangle fallback.
    Voronoi,
};

/// Diagonal lumped mass matrix.
using MassMatrix = Eigen::VectorXd;

enum class Normalization {
    /// u^T u = 1 per mode.
    Euclidean,
    /// u^T M u = 1 per mode.
    MassOrthonormal,
};

std::string to_string(OperatorKind kind);
std::string to_string(Normalization n);
std::string to_string(MassLumping m);
Normalization normalization_from_string(const std::string& s);
MassLumping mass_lumping_from_string(const std::string& s);

/// Generalised eigenpairs of (L, M), constant modes excluded, ascending.
struct ModeSet {
    Eigen::VectorXd eigenvalues;
    /// |V| x k, one mode per column.
    Eigen::MatrixXd vectors;
    Normalization normalization = Normalization::Euclidean;
    bool constant_mode_excluded = true;

    int count() const { return static_cast<int>(eigenvalues.size()); }
};

struct EigenSolverOptions {
    Normalization normalization = Normalization::Euclidean;
    /// Seed of the random start vector.
    std::uint64_t seed = 0x5eed5eedULL;
    /// Krylov basis size is basis_factor * k (at least 2k + 8, at most the problem size).
    int basis_factor = 30;
    int max_restarts = 1000;
    /// Convergence threshold on the shift-inverted Ritz residual, relative to the Ritz value.
    double tolerance = 1e-12;
    /// Optional previous eigenvectors (|V| x j) used to build the start vector.
    std::optional<Eigen::MatrixXd> warm_start;
};

/// Gradients of the three hat functions of a face in its tangent basis (columns).
Eigen::Matrix<double, 2, 3> hat_gradients(const TriangleMesh& mesh, const FaceFrame& frame, int face);

/// L_ij = sum_f area_f g_i^T D_f g_j with tangent-basis hat gradients g.
SparseMatrix assemble_anisotropic(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames,
                                  const std::vector<Mat2>& tensors);

/// Identity-tensor (isotropic reference) operator.
SparseMatrix assemble_isotropic(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames);

MassMatrix assemble_mass(const TriangleMesh& mesh, MassLumping lumping = MassLumping::Barycentric);

/// k smallest non-constant eigenpairs of L u = lambda M u by shift-invert
/// Lanczos about zero with the per-component constant modes deflated.
ModeSet solve_modes(const SparseMatrix& L, const MassMatrix& M, int k, const EigenSolverOptions& options = {});

/// Largest |L u - lambda M u|_2 over the retained pairs.
double max_mode_residual(const SparseMatrix& L, const MassMatrix& M, const ModeSet& modes);

/// Infinity norm of L (maximum absolute row sum).
double infinity_norm(const SparseMatrix& L);

struct ModePair {
    SparseSymmetricOperator major;
    SparseSymmetricOperator minor;
    MassMatrix mass;
    ModeSet u;
    ModeSet w;
};

struct ModePairOptions {
    int k = 6;
    MassLumping lumping = MassLumping::Barycentric;
    EigenSolverOptions eigen;
    std::optional<Eigen::MatrixXd> warm_start_u;
    std::optional<Eigen::MatrixXd> warm_start_w;
};

/// Builds L_U from the major tensors, L_W from the minor tensors and solves both problems.
ModePair mode_pair_pipeline(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames,
                            const DiffusionTensorField& tensors, const ModePairOptions& options = {});

} // namespace diffstruct

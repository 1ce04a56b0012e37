#pragma once

#include "diffstruct/mesh.hpp"
#include "diffstruct/types.hpp"

#include <Eigen/SparseCholesky>

#include <memory>
#include <vector>

namespace diffstruct {

/// Shell material. Lame constants are the 3D ones derived from E and nu.
struct MaterialParams {
    double young_modulus = 1e3;
    double poisson_ratio = 0.3;
    double thickness = 1e-2;
    double bending_stiffness = 1e-3;
    bool bending_enabled = true;

    double mu() const { return young_modulus / (2.0 * (1.0 + poisson_ratio)); }
    double lambda() const
    {
        return young_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    }

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Fixed degrees of freedom (index 3*v + axis) and the stacked external
/// force vector of length 3*|V|.
struct BoundaryConditions {
    std::vector<int> fixed_dofs;
    Eigen::VectorXd forces;

    /// Sorts and deduplicates `fixed_dofs` and checks ranges against `num_vertices`.
    void normalize(int num_vertices);
};

/// Per-face stress tensors in world coordinates.
using StressField = std::vector<Mat3>;

/// Least-squares projection of a rest-space vector onto barycentric deltas
/// of the triangle (x1, x2, x3). Rows 0-1 are (Z^T Z)^-1 Z^T with
/// Z = [x1 - x3, x2 - x3]; row 2 is minus their sum.
Mat3 face_projection(const Vec3& x1, const Vec3& x2, const Vec3& x3);
Mat3 face_projection(const TriangleMesh& mesh, int face);

/// Per-triangle deformation gradient  F = [x1 x2 x3] phi + n nbar^T.
Mat3 deformation_gradient(const TriangleMesh& rest, const Positions& deformed, int face);

/// thickness * area * (mu |E|_F^2 + lambda/2 tr(E)^2),  E = (F^T F - I) / 2.
double stvk_energy(const Mat3& F, const MaterialParams& material, double area);

/// Hinge bending weight |e|^2 / A_e scaled by the bending stiffness.
double hinge_weight(const EdgeHinge& hinge, const MaterialParams& material);

/// Gradient of the signed dihedral angle w.r.t. (x0, x1, x2, x3) as laid out
/// in `dihedral_angle`.
Eigen::Matrix<double, 12, 1> dihedral_angle_gradient(const Vec3& x0, const Vec3& x1,
                                                      const Vec3& x2, const Vec3& x3);

/// 9x9 rest-state membrane Hessian of one face, DOFs ordered (corner, axis).
Eigen::Matrix<double, 9, 9> membrane_element_hessian(const TriangleMesh& mesh, int face,
                                                     const MaterialParams& material);

/// 12x12 rest-state bending Hessian of one hinge, DOFs ordered (v0, v1, opp0, opp1).
Eigen::Matrix<double, 12, 12> bending_element_hessian(const TriangleMesh& mesh, const EdgeHinge& hinge,
                                                      const MaterialParams& material);

/// Total shell energy and its analytic gradient at arbitrary configurations,
/// for a fixed rest mesh.
class ShellEnergy {
public:
    ShellEnergy(const TriangleMesh& rest, MaterialParams material);

    double membrane_energy(const Positions& x) const;
    double bending_energy(const Positions& x) const;
    double energy(const Positions& x) const { return membrane_energy(x) + bending_energy(x); }

    /// Stacked gradient of length 3|V|.
    Eigen::VectorXd membrane_gradient(const Positions& x) const;
    Eigen::VectorXd bending_gradient(const Positions& x) const;
    Eigen::VectorXd gradient(const Positions& x) const { return membrane_gradient(x) + bending_gradient(x); }

    const std::vector<EdgeHinge>& hinges() const { return hinges_; }

private:
    const TriangleMesh* rest_;
    MaterialParams material_;
    std::vector<Mat3> projections_;
    std::vector<Vec3> rest_normals_;
    std::vector<EdgeHinge> hinges_;
};

/// Rest-state membrane Hessian (3|V| x 3|V|), parallel over faces.
SparseMatrix assemble_membrane_hessian(const TriangleMesh& mesh, const MaterialParams& material);

/// Rest-state hinge bending Hessian (3|V| x 3|V|), parallel over hinges.
SparseMatrix assemble_bending_hessian(const TriangleMesh& mesh, const std::vector<EdgeHinge>& hinges,
                                      const MaterialParams& material);

/// Membrane plus (when enabled) bending Hessian at rest.
SparseMatrix assemble_hessian(const TriangleMesh& mesh, const MaterialParams& material);

/// Result of a Dirichlet-projected linear statics solve.
///
/// The unit-scale displacement is stored once; `displacement()` returns
/// `gamma * base`, so rescaling never refactors or re-solves.
class StaticsSolution {
public:
    using Factorization = Eigen::SimplicialLDLT<SparseMatrix>;

    StaticsSolution() = default;
    StaticsSolution(Eigen::VectorXd base, double gamma, std::shared_ptr<const Factorization> factor,
                    std::vector<int> free_dofs);

    Eigen::VectorXd displacement() const { return gamma_ * base_; }
    const Eigen::VectorXd& base_displacement() const { return base_; }
    double gamma() const { return gamma_; }
    StaticsSolution with_gamma(double gamma) const;

    /// Solves for another force vector with the retained factorization (gamma = 1).
    StaticsSolution resolve(const Eigen::VectorXd& forces) const;

    const std::shared_ptr<const Factorization>& factorization() const { return factor_; }
    const std::vector<int>& free_dofs() const { return free_dofs_; }

private:
    Eigen::VectorXd base_;
    double gamma_ = 1.0;
    std::shared_ptr<const Factorization> factor_;
    std::vector<int> free_dofs_;
};

/// Solves H_ff u_f = gamma f_f with fixed DOFs projected out. Throws
/// SingularSystemError naming the under-constrained component.
StaticsSolution static_solve(const TriangleMesh& mesh, const SparseMatrix& H,
                             const BoundaryConditions& bc, double gamma);

/// Per-face Cauchy stress of the linearised strain restricted to the rest tangent plane.
StressField cauchy_stress(const TriangleMesh& rest, const Eigen::VectorXd& u, const MaterialParams& material);

std::vector<double> von_mises(const StressField& stress);

/// f_ext^T u.
double compliance(const BoundaryConditions& bc, const Eigen::VectorXd& u);

} // namespace diffstruct

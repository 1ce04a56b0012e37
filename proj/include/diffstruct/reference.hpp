#pragma once

// Single-threaded versions of the OpenMP kernels. They share the element
// routines with the parallel code but accumulate in plain loop order, and
// exist for cross-checking and benchmarking.

#include "diffstruct/diffusion_operators.hpp"
#include "diffstruct/shell_fem.hpp"
#include "diffstruct/stress_diffusion.hpp"
#include "diffstruct/stripes.hpp"

#include <cstdint>
#include <vector>

namespace diffstruct::reference {

SparseMatrix assemble_membrane_hessian(const TriangleMesh& mesh, const MaterialParams& material);

SparseMatrix assemble_bending_hessian(const TriangleMesh& mesh, const std::vector<EdgeHinge>& hinges,
                                      const MaterialParams& material);

StressField cauchy_stress(const TriangleMesh& rest, const Eigen::VectorXd& u, const MaterialParams& material);

DiffusionTensorField stress_to_diffusion(const std::vector<TangentStress>& field, const AnisotropySettings& settings);

SparseMatrix assemble_anisotropic(const TriangleMesh& mesh, const std::vector<FaceFrame>& frames,
                                  const std::vector<Mat2>& tensors);

double coverage(const StripeField& field, std::int64_t samples, std::uint64_t seed = 1);

} // namespace diffstruct::reference

#pragma once

// Independent reference computations used only by tests.

#include "diffstruct/mesh.hpp"

#include <functional>

namespace testing_support {

using diffstruct::SparseMatrix;
using diffstruct::TriangleMesh;

/// Textbook cotangent Laplacian, positive semidefinite sign convention:
/// L_ij = -(cot a_ij + cot b_ij) / 2, L_ii = -sum_j L_ij.
SparseMatrix cotangent_laplacian(const TriangleMesh& mesh);

/// Vertex areas: one third of each incident face area.
Eigen::VectorXd barycentric_areas(const TriangleMesh& mesh);

/// Central differences of a scalar function.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x, double h);

/// Central differences of a vector function, one column per coordinate.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double h);

/// Angle in degrees between two undirected lines, in [0, 90].
double line_angle_degrees(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// Maximum relative entrywise deviation |A - B|_max / |B|_max.
double relative_max_difference(const SparseMatrix& A, const SparseMatrix& B);

} // namespace testing_support

#include "diffstruct/shell_fem.hpp"

#include "diffstruct/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace diffstruct {

namespace {

Mat3 sym(const Mat3& A) { return 0.5 * (A + A.transpose()); }

// d(cross normal) for a unit perturbation `delta` of corner `c`, given rest
// edges e1 = x1 - x0, e2 = x2 - x0.
Vec3 cross_normal_variation(int c, const Vec3& delta, const Vec3& e1, const Vec3& e2)
{
    switch (c) {
    case 0: return delta.cross(e1 - e2);
    case 1: return delta.cross(e2);
    default: return -delta.cross(e1);
    }
}

} // namespace

void MaterialParams::validate() const
{
    if (!(young_modulus > 0.0)) throw ConfigError("youngModulus must be positive");
    if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5)) throw ConfigError("poissonRatio must lie in (-1, 0.5)");
    if (!(thickness > 0.0)) throw ConfigError("thickness must be positive");
    if (!(bending_stiffness >= 0.0)) throw ConfigError("bendingStiffness must be nonnegative");
}

void BoundaryConditions::normalize(int num_vertices)
{
    std::sort(fixed_dofs.begin(), fixed_dofs.end());
    fixed_dofs.erase(std::unique(fixed_dofs.begin(), fixed_dofs.end()), fixed_dofs.end());
    for (int d : fixed_dofs) {
        if (d < 0 || d >= 3 * num_vertices) throw ConfigError("fixed DOF " + std::to_string(d) + " out of range");
    }
    if (forces.size() == 0) forces = Eigen::VectorXd::Zero(3 * num_vertices);
    if (forces.size() != 3 * num_vertices) throw ConfigError("force vector length must be 3|V|");
}

Mat3 face_projection(const Vec3& x1, const Vec3& x2, const Vec3& x3)
{
    Eigen::Matrix<double, 3, 2> Z;
    Z.col(0) = x1 - x3;
    Z.col(1) = x2 - x3;
    const Mat2 gram = Z.transpose() * Z;
    const double scale = gram.trace();
    if (!(std::abs(gram.determinant()) > 1e-24 * scale * scale)) {
        throw MeshError("rank-deficient triangle in face projection");
    }
    const Eigen::Matrix<double, 2, 3> G = gram.inverse() * Z.transpose();
    Mat3 phi;
    phi.topRows<2>() = G;
    phi.row(2) = -(G.row(0) + G.row(1));
    return phi;
}

Mat3 face_projection(const TriangleMesh& mesh, int face)
{
    return face_projection(mesh.corner(face, 0), mesh.corner(face, 1), mesh.corner(face, 2));
}

Mat3 deformation_gradient(const TriangleMesh& rest, const Positions& deformed, int face)
{
    const auto& f = rest.faces();
    Mat3 X;
    for (int c = 0; c < 3; ++c) X.col(c) = deformed.row(f(face, c)).transpose();
    const Vec3 n_raw = (X.col(1) - X.col(0)).cross(X.col(2) - X.col(0));
    const double len = n_raw.norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw MeshError("deformed face " + std::to_string(face) + " is degenerate");
    const Vec3 n = n_raw / len;
    const Vec3 nbar = (rest.corner(face, 1) - rest.corner(face, 0))
                          .cross(rest.corner(face, 2) - rest.corner(face, 0))
                          .normalized();
    return X * face_projection(rest, face) + n * nbar.transpose();
}

double stvk_energy(const Mat3& F, const MaterialParams& material, double area)
{
    const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
    const double tr = E.trace();
    return material.thickness * area *
           (material.mu() * E.squaredNorm() + 0.5 * material.lambda() * tr * tr);
}

double hinge_weight(const EdgeHinge& hinge, const MaterialParams& material)
{
    return material.bending_stiffness * hinge.length * hinge.length / hinge.area;
}

Eigen::Matrix<double, 12, 1> dihedral_angle_gradient(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                                                      const Vec3& x3)
{
    const Vec3 e = x1 - x0;
    const double len = e.norm();
    const Vec3 N0 = e.cross(x2 - x0);
    const Vec3 N1 = (x0 - x1).cross(x3 - x1);
    const Vec3 a0 = N0 / N0.squaredNorm();
    const Vec3 a1 = N1 / N1.squaredNorm();

    Eigen::Matrix<double, 12, 1> g;
    g.segment<3>(0) = ((x2 - x1).dot(e) / len) * a0 + ((x3 - x1).dot(e) / len) * a1;
    g.segment<3>(3) = -((x2 - x0).dot(e) / len) * a0 - ((x3 - x0).dot(e) / len) * a1;
    g.segment<3>(6) = len * a0;
    g.segment<3>(9) = len * a1;
    return g;
}

Eigen::Matrix<double, 9, 9> membrane_element_hessian(const TriangleMesh& mesh, int face,
                                                     const MaterialParams& material)
{
    const Vec3 x0 = mesh.corner(face, 0);
    const Vec3 e1 = mesh.corner(face, 1) - x0;
    const Vec3 e2 = mesh.corner(face, 2) - x0;
    const Vec3 c = e1.cross(e2);
    const double cn = c.norm();
    const Vec3 nbar = c / cn;
    const double area = 0.5 * cn;
    const Mat3 phi = face_projection(mesh, face);
    const Mat3 tangent = Mat3::Identity() - nbar * nbar.transpose();

    std::array<Mat3, 9> strains;
    for (int a = 0; a < 9; ++a) {
        const int corner = a / 3;
        const Vec3 delta = Vec3::Unit(a % 3);
        const Vec3 dn = tangent * cross_normal_variation(corner, delta, e1, e2) / cn;
        const Mat3 dF = delta * phi.row(corner) + dn * nbar.transpose();
        strains[a] = sym(dF);
    }

    const double mu = material.mu();
    const double lambda = material.lambda();
    const double scale = material.thickness * area;
    Eigen::Matrix<double, 9, 9> K;
    for (int a = 0; a < 9; ++a) {
        for (int b = a; b < 9; ++b) {
            const double v = scale * (2.0 * mu * strains[a].cwiseProduct(strains[b]).sum() +
                                      lambda * strains[a].trace() * strains[b].trace());
            K(a, b) = v;
            K(b, a) = v;
        }
    }
    return K;
}

Eigen::Matrix<double, 12, 12> bending_element_hessian(const TriangleMesh& mesh, const EdgeHinge& hinge,
                                                      const MaterialParams& material)
{
    const auto g = dihedral_angle_gradient(mesh.vertex(hinge.v0), mesh.vertex(hinge.v1),
                                           mesh.vertex(hinge.opp0), mesh.vertex(hinge.opp1));
    return 2.0 * hinge_weight(hinge, material) * g * g.transpose();
}

ShellEnergy::ShellEnergy(const TriangleMesh& rest, MaterialParams material)
    : rest_(&rest), material_(material)
{
    projections_.reserve(rest.num_faces());
    rest_normals_.reserve(rest.num_faces());
    for (int f = 0; f < rest.num_faces(); ++f) {
        projections_.push_back(face_projection(rest, f));
        rest_normals_.push_back((rest.corner(f, 1) - rest.corner(f, 0))
                                    .cross(rest.corner(f, 2) - rest.corner(f, 0))
                                    .normalized());
    }
    if (material_.bending_enabled) hinges_ = build_hinges(rest);
}

double ShellEnergy::membrane_energy(const Positions& x) const
{
    double sum = 0.0;
    for (int f = 0; f < rest_->num_faces(); ++f) {
        sum += stvk_energy(deformation_gradient(*rest_, x, f), material_, rest_->face_area(f));
    }
    return sum;
}

double ShellEnergy::bending_energy(const Positions& x) const
{
    double sum = 0.0;
    for (const EdgeHinge& h : hinges_) {
        const double theta = dihedral_angle(x.row(h.v0).transpose(), x.row(h.v1).transpose(),
                                            x.row(h.opp0).transpose(), x.row(h.opp1).transpose());
        const double d = theta - h.rest_angle;
        sum += hinge_weight(h, material_) * d * d;
    }
    return sum;
}

Eigen::VectorXd ShellEnergy::membrane_gradient(const Positions& x) const
{
    const auto& faces = rest_->faces();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * rest_->num_vertices());
    const double mu = material_.mu();
    const double lambda = material_.lambda();
    for (int f = 0; f < rest_->num_faces(); ++f) {
        Mat3 X;
        for (int c = 0; c < 3; ++c) X.col(c) = x.row(faces(f, c)).transpose();
        const Vec3 e1 = X.col(1) - X.col(0);
        const Vec3 e2 = X.col(2) - X.col(0);
        const Vec3 cr = e1.cross(e2);
        const double cn = cr.norm();
        const Vec3 n = cr / cn;
        const Vec3& nbar = rest_normals_[f];
        const Mat3& phi = projections_[f];

        const Mat3 F = X * phi + n * nbar.transpose();
        const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
        const Mat3 S = 2.0 * mu * E + lambda * E.trace() * Mat3::Identity();
        const Mat3 P = material_.thickness * rest_->face_area(f) * (F * S);

        // In-plane stretch term: dF = delta * phi.row(c).
        const Mat3 in_plane = P * phi.transpose();
        // Normal term: P : (dn nbar^T) = (P nbar) . dn.
        const Vec3 w = (Mat3::Identity() - n * n.transpose()) * (P * nbar) / cn;
        std::array<Vec3, 3> g;
        g[1] = e2.cross(w);
        g[2] = w.cross(e1);
        g[0] = -(g[1] + g[2]);
        for (int c = 0; c < 3; ++c) {
            grad.segment<3>(3 * faces(f, c)) += in_plane.col(c) + g[c];
        }
    }
    return grad;
}

Eigen::VectorXd ShellEnergy::bending_gradient(const Positions& x) const
{
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * rest_->num_vertices());
    for (const EdgeHinge& h : hinges_) {
        const Vec3 x0 = x.row(h.v0).transpose();
        const Vec3 x1 = x.row(h.v1).transpose();
        const Vec3 x2 = x.row(h.opp0).transpose();
        const Vec3 x3 = x.row(h.opp1).transpose();
        const double d = dihedral_angle(x0, x1, x2, x3) - h.rest_angle;
        const auto g = (2.0 * hinge_weight(h, material_) * d) * dihedral_angle_gradient(x0, x1, x2, x3);
        const int verts[4] = {h.v0, h.v1, h.opp0, h.opp1};
        for (int k = 0; k < 4; ++k) grad.segment<3>(3 * verts[k]) += g.segment<3>(3 * k);
    }
    return grad;
}

SparseMatrix assemble_membrane_hessian(const TriangleMesh& mesh, const MaterialParams& material)
{
    const int nf = mesh.num_faces();
    const auto& faces = mesh.faces();
    std::vector<Triplet> triplets(static_cast<std::size_t>(nf) * 81);
#pragma omp parallel for schedule(static)
    for (int f = 0; f < nf; ++f) {
        const auto K = membrane_element_hessian(mesh, f, material);
        std::size_t slot = static_cast<std::size_t>(f) * 81;
        for (int a = 0; a < 9; ++a) {
            const int row = 3 * faces(f, a / 3) + a % 3;
            for (int b = 0; b < 9; ++b) {
                triplets[slot++] = Triplet(row, 3 * faces(f, b / 3) + b % 3, K(a, b));
            }
        }
    }
    SparseMatrix H(3 * mesh.num_vertices(), 3 * mesh.num_vertices());
    H.setFromTriplets(triplets.begin(), triplets.end());
    return H;
}

SparseMatrix assemble_bending_hessian(const TriangleMesh& mesh, const std::vector<EdgeHinge>& hinges,
                                      const MaterialParams& material)
{
    const int nh = static_cast<int>(hinges.size());
    std::vector<Triplet> triplets(static_cast<std::size_t>(nh) * 144);
#pragma omp parallel for schedule(static)
    for (int e = 0; e < nh; ++e) {
        const EdgeHinge& h = hinges[e];
        const auto K = bending_element_hessian(mesh, h, material);
        const int verts[4] = {h.v0, h.v1, h.opp0, h.opp1};
        std::size_t slot = static_cast<std::size_t>(e) * 144;
        for (int a = 0; a < 12; ++a) {
            const int row = 3 * verts[a / 3] + a % 3;
            for (int b = 0; b < 12; ++b) {
                triplets[slot++] = Triplet(row, 3 * verts[b / 3] + b % 3, K(a, b));
            }
        }
    }
    SparseMatrix H(3 * mesh.num_vertices(), 3 * mesh.num_vertices());
    H.setFromTriplets(triplets.begin(), triplets.end());
    return H;
}

SparseMatrix assemble_hessian(const TriangleMesh& mesh, const MaterialParams& material)
{
    SparseMatrix H = assemble_membrane_hessian(mesh, material);
    if (material.bending_enabled) H += assemble_bending_hessian(mesh, build_hinges(mesh), material);
    return H;
}

StaticsSolution::StaticsSolution(Eigen::VectorXd base, double gamma, std::shared_ptr<const Factorization> factor,
                                 std::vector<int> free_dofs)
    : base_(std::move(base)), gamma_(gamma), factor_(std::move(factor)), free_dofs_(std::move(free_dofs))
{
}

StaticsSolution StaticsSolution::with_gamma(double gamma) const
{
    StaticsSolution s = *this;
    s.gamma_ = gamma;
    return s;
}

StaticsSolution StaticsSolution::resolve(const Eigen::VectorXd& forces) const
{
    Eigen::VectorXd f(static_cast<Eigen::Index>(free_dofs_.size()));
    for (std::size_t i = 0; i < free_dofs_.size(); ++i) f[static_cast<Eigen::Index>(i)] = forces[free_dofs_[i]];
    const Eigen::VectorXd uf = factor_->solve(f);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(base_.size());
    for (std::size_t i = 0; i < free_dofs_.size(); ++i) u[free_dofs_[i]] = uf[static_cast<Eigen::Index>(i)];
    return StaticsSolution(std::move(u), 1.0, factor_, free_dofs_);
}

namespace {

// Returns the first face-bearing component whose fixed DOFs leave a rigid mode free, or -1.
int find_unconstrained_component(const TriangleMesh& mesh, const std::vector<char>& fixed)
{
    const int nv = mesh.num_vertices();
    const auto& comp = mesh.vertex_component();
    std::vector<char> has_face(mesh.num_components(), 0);
    for (int f = 0; f < mesh.num_faces(); ++f) has_face[comp[mesh.faces()(f, 0)]] = 1;

    std::vector<Vec3> centroid(mesh.num_components(), Vec3::Zero());
    std::vector<int> count(mesh.num_components(), 0);
    for (int v = 0; v < nv; ++v) {
        centroid[comp[v]] += mesh.vertex(v);
        ++count[comp[v]];
    }
    const double scale = std::max(mesh.bbox_diagonal(), 1e-300);
    for (int c = 0; c < mesh.num_components(); ++c) {
        if (!has_face[c]) continue;
        centroid[c] /= count[c];
        std::vector<Eigen::Matrix<double, 1, 6>> rows;
        for (int v = 0; v < nv; ++v) {
            if (comp[v] != c) continue;
            const Vec3 r = (mesh.vertex(v) - centroid[c]) / scale;
            for (int k = 0; k < 3; ++k) {
                if (!fixed[3 * v + k]) continue;
                Eigen::Matrix<double, 1, 6> row = Eigen::Matrix<double, 1, 6>::Zero();
                row(k) = 1.0;
                // k-th component of omega x r for omega = e_0, e_1, e_2.
                for (int j = 0; j < 3; ++j) row(3 + j) = Vec3::Unit(j).cross(r)(k);
                rows.push_back(row);
            }
        }
        if (rows.size() < 6) return c;
        Eigen::MatrixXd K(rows.size(), 6);
        for (std::size_t i = 0; i < rows.size(); ++i) K.row(static_cast<Eigen::Index>(i)) = rows[i];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
        const auto& s = svd.singularValues();
        if (s(5) <= 1e-10 * s(0)) return c;
    }
    return -1;
}

} // namespace

StaticsSolution static_solve(const TriangleMesh& mesh, const SparseMatrix& H, const BoundaryConditions& bc,
                             double gamma)
{
    const int n = static_cast<int>(H.rows());
    if (n != 3 * mesh.num_vertices()) throw ConfigError("Hessian size does not match the mesh");
    if (bc.forces.size() != n) throw ConfigError("force vector length must be 3|V|");

    std::vector<char> fixed(n, 0);
    for (int d : bc.fixed_dofs) {
        if (d < 0 || d >= n) throw ConfigError("fixed DOF out of range");
        fixed[d] = 1;
    }
    // Vertices not referenced by any face carry no stiffness.
    std::vector<char> referenced(mesh.num_vertices(), 0);
    for (int f = 0; f < mesh.num_faces(); ++f)
        for (int c = 0; c < 3; ++c) referenced[mesh.faces()(f, c)] = 1;
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (!referenced[v]) fixed[3 * v] = fixed[3 * v + 1] = fixed[3 * v + 2] = 1;

    const int bad = find_unconstrained_component(mesh, fixed);
    if (bad >= 0) {
        throw SingularSystemError("boundary conditions leave a rigid motion of component " + std::to_string(bad) +
                                      " unconstrained",
                                  bad);
    }

    std::vector<int> free_dofs;
    std::vector<int> reduced_index(n, -1);
    for (int d = 0; d < n; ++d) {
        if (!fixed[d]) {
            reduced_index[d] = static_cast<int>(free_dofs.size());
            free_dofs.push_back(d);
        }
    }
    const int nr = static_cast<int>(free_dofs.size());

    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(H.nonZeros()));
    for (int col = 0; col < H.outerSize(); ++col) {
        if (reduced_index[col] < 0) continue;
        for (SparseMatrix::InnerIterator it(H, col); it; ++it) {
            const int r = reduced_index[it.row()];
            if (r >= 0) triplets.emplace_back(r, reduced_index[col], it.value());
        }
    }
    SparseMatrix Hr(nr, nr);
    Hr.setFromTriplets(triplets.begin(), triplets.end());

    auto factor = std::make_shared<StaticsSolution::Factorization>();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    if (nr > 0) {
        factor->compute(Hr);
        bool ok = factor->info() == Eigen::Success;
        if (ok) {
            const auto& D = factor->vectorD();
            ok = D.minCoeff() > 1e-13 * D.cwiseAbs().maxCoeff();
        }
        if (!ok) throw SingularSystemError("reduced stiffness matrix is singular (mechanism not removed)", -1);

        Eigen::VectorXd fr(nr);
        for (int i = 0; i < nr; ++i) fr[i] = bc.forces[free_dofs[i]];
        Eigen::VectorXd ur = factor->solve(fr);
        // Normwise backward error; stiff shells reach eps * cond in the plain
        // relative residual, so that measure would reject sound solves.
        double hnorm = 0.0;
        for (int col = 0; col < Hr.outerSize(); ++col) {
            double sum = 0.0;
            for (SparseMatrix::InnerIterator it(Hr, col); it; ++it) sum += std::abs(it.value());
            hnorm = std::max(hnorm, sum);
        }
        const double fnorm = fr.lpNorm<1>();
        auto backward_error = [&](const Eigen::VectorXd& x) {
            const double scale = hnorm * x.lpNorm<1>() + fnorm;
            return scale > 0.0 ? (Hr * x - fr).lpNorm<1>() / scale : 0.0;
        };
        double err = backward_error(ur);
        for (int step = 0; step < 4 && err > 1e-12; ++step) {
            Eigen::VectorXd next = ur + factor->solve(fr - Hr * ur);
            const double next_err = backward_error(next);
            if (!(next_err < err)) break;
            ur = std::move(next);
            err = next_err;
        }
        if (!(err <= 1e-10)) {
            throw SingularSystemError("statics backward error " + std::to_string(err) + " exceeds tolerance", -1);
        }
        for (int i = 0; i < nr; ++i) u[free_dofs[i]] = ur[i];
    }
    return StaticsSolution(std::move(u), gamma, std::move(factor), std::move(free_dofs));
}

StressField cauchy_stress(const TriangleMesh& rest, const Eigen::VectorXd& u, const MaterialParams& material)
{
    const int nf = rest.num_faces();
    const auto& faces = rest.faces();
    const double mu = material.mu();
    const double lambda = material.lambda();
    StressField stress(nf);
#pragma omp parallel for schedule(static)
    for (int f = 0; f < nf; ++f) {
        Mat3 U;
        for (int c = 0; c < 3; ++c) U.col(c) = u.segment<3>(3 * faces(f, c));
        const Vec3 nbar = (rest.corner(f, 1) - rest.corner(f, 0))
                              .cross(rest.corner(f, 2) - rest.corner(f, 0))
                              .normalized();
        const Mat3 P = Mat3::Identity() - nbar * nbar.transpose();
        // Linearisation of F - I about rest; the normal-rotation term has no tangent part.
        const Mat3 strain = P * sym(U * face_projection(rest, f)) * P;
        stress[f] = 2.0 * mu * strain + lambda * strain.trace() * P;
    }
    return stress;
}

std::vector<double> von_mises(const StressField& stress)
{
    std::vector<double> out(stress.size());
    for (std::size_t i = 0; i < stress.size(); ++i) {
        const Mat3& s = stress[i];
        const double d01 = s(0, 0) - s(1, 1);
        const double d12 = s(1, 1) - s(2, 2);
        const double d20 = s(2, 2) - s(0, 0);
        const double shear = s(0, 1) * s(0, 1) + s(1, 2) * s(1, 2) + s(2, 0) * s(2, 0);
        out[i] = std::sqrt(0.5 * (d01 * d01 + d12 * d12 + d20 * d20) + 3.0 * shear);
    }
    return out;
}

double compliance(const BoundaryConditions& bc, const Eigen::VectorXd& u) { return bc.forces.dot(u); }

} // namespace diffstruct

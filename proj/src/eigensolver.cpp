// Shift-invert Krylov-Schur (thick-restart Lanczos) for the smallest
// generalised eigenpairs of (L, M) with diagonal M.
//
// The pencil is symmetrised with y = M^{1/2} u, so the iteration runs on
//   Op = M^{1/2} (L + eps M)^{-1} M^{1/2},   theta = 1 / (lambda + eps),
// whose largest eigenvalues are the wanted ones. Constant modes of every
// connected component of L are deflated explicitly.

#include "diffstruct/diffusion_operators.hpp"
#include "diffstruct/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace diffstruct {

namespace {

std::vector<int> sparsity_components(const SparseMatrix& L, int& count)
{
    const int n = static_cast<int>(L.rows());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int col = 0; col < L.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(L, col); it; ++it)
            if (it.value() != 0.0) parent[find(static_cast<int>(it.row()))] = find(col);
    std::vector<int> label(n, -1);
    std::vector<int> comp(n);
    count = 0;
    for (int v = 0; v < n; ++v) {
        const int r = find(v);
        if (label[r] < 0) label[r] = count++;
        comp[v] = label[r];
    }
    return comp;
}

class ShiftInvertOperator {
public:
    ShiftInvertOperator(const SparseMatrix& L, const MassMatrix& M, double shift)
        : sqrt_mass_(M.cwiseSqrt())
    {
        SparseMatrix A = L;
        for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += shift * M[i];
        solver_.compute(A);
        if (solver_.info() != Eigen::Success) {
            throw EigenSolveError("factorisation of the regularised operator failed", {});
        }
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& y) const
    {
        return sqrt_mass_.cwiseProduct(solver_.solve(sqrt_mass_.cwiseProduct(y)));
    }

    const Eigen::VectorXd& sqrt_mass() const { return sqrt_mass_; }

private:
    Eigen::VectorXd sqrt_mass_;
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

} // namespace

ModeSet solve_modes(const SparseMatrix& L, const MassMatrix& M, int k, const EigenSolverOptions& options)
{
    const int n = static_cast<int>(L.rows());
    if (L.cols() != n || M.size() != n) throw ConfigError("operator and mass matrix sizes differ");
    if (k < 1) throw ConfigError("mode count k must be at least 1");
    if (!(M.minCoeff() > 0.0)) throw ConfigError("mass matrix must be positive");

    int ncomp = 0;
    const std::vector<int> comp = sparsity_components(L, ncomp);
    const int space = n - ncomp;
    if (k > space) {
        throw EigenSolveError("requested " + std::to_string(k) + " modes but only " + std::to_string(space) +
                                  " non-constant modes exist",
                              {});
    }

    const double trace_ratio = L.diagonal().sum() / M.sum();
    const double shift = 1e-10 * (trace_ratio > 0.0 ? trace_ratio : 1.0);
    const ShiftInvertOperator op(L, M, shift);
    const Eigen::VectorXd& sqrt_mass = op.sqrt_mass();

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, ncomp);
    for (int v = 0; v < n; ++v) Q(v, comp[v]) = sqrt_mass[v];
    for (int c = 0; c < ncomp; ++c) Q.col(c).normalize();
    auto deflate = [&](Eigen::VectorXd& w) { w -= Q * (Q.transpose() * w); };

    const int m = std::min(space, std::max(options.basis_factor * k, 2 * k + 8));
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, m + 1);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    auto random_vector = [&] {
        Eigen::VectorXd r(n);
        for (int i = 0; i < n; ++i) r[i] = normal(rng);
        return r;
    };

    Eigen::VectorXd start = random_vector();
    if (options.warm_start && options.warm_start->rows() == n && options.warm_start->cols() > 0) {
        Eigen::VectorXd warm = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < options.warm_start->cols(); ++j) {
            Eigen::VectorXd y = sqrt_mass.cwiseProduct(options.warm_start->col(j));
            const double norm = y.norm();
            if (norm > 0.0) warm += y / norm;
        }
        start = warm + 1e-3 * (warm.norm() / std::sqrt(static_cast<double>(n))) * start;
    }
    deflate(start);
    V.col(0) = start.normalized();

    int kept = 0;
    double beta = 0.0;
    Eigen::VectorXd theta;
    Eigen::MatrixXd S;
    std::vector<double> residuals;
    bool converged = false;

    for (int restart = 0; restart <= options.max_restarts && !converged; ++restart) {
        for (int j = kept; j < m; ++j) {
            Eigen::VectorXd w = op.apply(V.col(j));
            deflate(w);
            const auto basis = V.leftCols(j + 1);
            Eigen::VectorXd h = basis.transpose() * w;
            w -= basis * h;
            const Eigen::VectorXd h2 = basis.transpose() * w;
            w -= basis * h2;
            h += h2;
            T.block(0, j, j + 1, 1) = h;
            T.block(j, 0, 1, j + 1) = h.transpose();
            beta = w.norm();

            const double scale = std::max(std::abs(T(j, j)), 1e-300);
            if (beta <= 1e-13 * scale) {
                beta = 0.0;
                if (j + 1 == space) {
                    V.col(j + 1).setZero();
                    continue;
                }
                // Invariant subspace found: continue from a fresh orthogonal direction.
                Eigen::VectorXd r = random_vector();
                deflate(r);
                for (int pass = 0; pass < 2; ++pass) r -= basis * (basis.transpose() * r);
                V.col(j + 1) = r.normalized();
            } else {
                V.col(j + 1) = w / beta;
            }
        }

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (T + T.transpose()));
        if (es.info() != Eigen::Success) throw EigenSolveError("projected eigenproblem failed", {});
        // Descending theta.
        theta = es.eigenvalues().reverse();
        S = es.eigenvectors().rowwise().reverse();

        residuals.assign(k, 0.0);
        converged = true;
        for (int i = 0; i < k; ++i) {
            residuals[i] = std::abs(beta * S(m - 1, i));
            if (residuals[i] > options.tolerance * std::abs(theta[i])) converged = false;
        }
        if (converged || m == space) {
            converged = true;
            break;
        }

        kept = std::min(m - 1, k + (m - k) / 2);
        const Eigen::MatrixXd Vk = V.leftCols(m) * S.leftCols(kept);
        const Eigen::VectorXd residual_vector = V.col(m);
        V.leftCols(kept) = Vk;
        V.col(kept) = residual_vector;
        T.setZero();
        for (int i = 0; i < kept; ++i) T(i, i) = theta[i];
    }

    if (!converged) {
        std::ostringstream msg;
        msg << "Lanczos did not converge after " << options.max_restarts << " restarts";
        throw EigenSolveError(msg.str(), residuals);
    }

    ModeSet out;
    out.normalization = options.normalization;
    out.constant_mode_excluded = true;
    out.eigenvalues.resize(k);
    out.vectors.resize(n, k);
    const Eigen::MatrixXd Y = V.leftCols(m) * S.leftCols(k);
    for (int i = 0; i < k; ++i) {
        out.eigenvalues[i] = std::max(0.0, 1.0 / theta[i] - shift);
        Eigen::VectorXd u = Y.col(i).cwiseQuotient(sqrt_mass);
        const double norm = options.normalization == Normalization::Euclidean ? u.norm()
                                                                                : std::sqrt(u.dot(M.cwiseProduct(u)));
        u /= norm;
        Eigen::Index peak = 0;
        u.cwiseAbs().maxCoeff(&peak);
        if (u[peak] < 0.0) u = -u;
        out.vectors.col(i) = u;
    }

    const double scale = std::max(infinity_norm(L), 1e-300);
    std::vector<double> true_residuals(k);
    bool ok = true;
    for (int i = 0; i < k; ++i) {
        const Eigen::VectorXd u = out.vectors.col(i) / out.vectors.col(i).norm();
        true_residuals[i] = (L * u - out.eigenvalues[i] * M.cwiseProduct(u)).norm() / scale;
        if (!(true_residuals[i] <= 1e-6)) ok = false;
    }
    if (!ok) throw EigenSolveError("eigenpairs violate the residual contract", true_residuals);
    return out;
}

} // namespace diffstruct

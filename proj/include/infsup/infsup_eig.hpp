#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "infsup/errors.hpp"
#include "infsup/fem.hpp"

namespace infsup {

/// full: pressures in all of L^2; zero_mean: pressures M_p-orthogonal to constants.
enum class PressureMode { full, zero_mean };

inline std::string_view to_string(PressureMode m) { return m == PressureMode::full ? "full" : "zero_mean"; }

struct InfSupResult {
    double lambda_min = 0.0;
    double gamma_h = 0.0;
    Eigen::VectorXd eigenmode;  // M_p-normalized
    int iterations = 0;
    double residual = 0.0;  // ||S q - lambda M_p q||_2 with ||q||_{M_p} = 1
    PressureMode mode = PressureMode::full;
    bool singular = false;  // constants lie in the kernel of B^T
};

/// Sparse Cholesky (LDL^T) of the velocity Gram matrix A.
class SpdFactor {
 public:
    explicit SpdFactor(const SparseMatrix& A) {
        if (A.rows() == 0) throw InvalidInput("SpdFactor: empty velocity space");
        ldlt_.compute(Eigen::SparseMatrix<double>(A));
        if (ldlt_.info() != Eigen::Success) throw SingularSystem("factorization of A failed");
        const Eigen::VectorXd d = ldlt_.vectorD();
        if (!(d.minCoeff() > 1e-13 * d.maxCoeff())) {
            throw SingularSystem("A is not positive definite; the Dirichlet boundary is empty");
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return ldlt_.solve(b); }

 private:
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

/// S q = B A^{-1} B^T q.
inline Eigen::VectorXd schur_apply(const SpdFactor& A, const SparseMatrix& B, const Eigen::VectorXd& q) {
    return B * A.solve(B.transpose() * q);
}

/// Solves S z = g through the saddle-point matrix [[A, B^T], [B, 0]].
///
/// In zero_mean mode the matrix is bordered by c = M_p 1, which restricts z to the
/// M_p-orthogonal complement of constants and solves the compressed Schur system
/// there (S z - g is a multiple of c).
class SaddleSolver {
 public:
    SaddleSolver(const SparseMatrix& A, const SparseMatrix& B, const SparseMatrix& M, PressureMode mode)
        : n_u_(static_cast<int>(A.rows())), n_p_(static_cast<int>(B.rows())), mode_(mode) {
        const int extra = mode == PressureMode::zero_mean ? 1 : 0;
        const int n = n_u_ + n_p_ + extra;
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(A.nonZeros() + 2 * B.nonZeros() + 2 * n_p_));
        for (int i = 0; i < A.outerSize(); ++i)
            for (SparseMatrix::InnerIterator it(A, i); it; ++it) entries.emplace_back(it.row(), it.col(), it.value());
        for (int i = 0; i < B.outerSize(); ++i) {
            for (SparseMatrix::InnerIterator it(B, i); it; ++it) {
                entries.emplace_back(n_u_ + it.row(), it.col(), it.value());
                entries.emplace_back(it.col(), n_u_ + it.row(), it.value());
            }
        }
        if (extra) {
            const Eigen::VectorXd c = M * Eigen::VectorXd::Ones(n_p_);
            for (int i = 0; i < n_p_; ++i) {
                entries.emplace_back(n_u_ + i, n - 1, c[i]);
                entries.emplace_back(n - 1, n_u_ + i, c[i]);
            }
        }
        K_.resize(n, n);
        K_.setFromTriplets(entries.begin(), entries.end());
        K_.makeCompressed();
        lu_.analyzePattern(K_);
        lu_.factorize(K_);
        if (lu_.info() != Eigen::Success) {
            throw SingularSystem("saddle-point factorization failed (" + lu_.lastErrorMessage() +
                                 "); the pressure Schur complement is singular");
        }
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& g) const {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K_.rows());
        rhs.segment(n_u_, n_p_) = -g;
        Eigen::VectorXd x = lu_.solve(rhs);
        const Eigen::VectorXd defect = rhs - K_ * x;  // one step of iterative refinement
        x += lu_.solve(defect);
        return x.segment(n_u_, n_p_);
    }

    PressureMode mode() const { return mode_; }

 private:
    int n_u_;
    int n_p_;
    PressureMode mode_;
    Eigen::SparseMatrix<double> K_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

struct EigOptions {
    double tol = 1e-10;
    int max_iter = 500;
    int restart = 50;
    std::optional<std::uint64_t> seed;  // random start vector instead of the +-1 pattern
};

/// True when B^T 1 vanishes, i.e. constant pressures are invisible to every velocity.
inline bool constants_in_kernel(const SparseMatrix& B) {
    const Eigen::VectorXd flux = B.transpose() * Eigen::VectorXd::Ones(B.rows());
    double scale = 0.0;
    for (int i = 0; i < B.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(B, i); it; ++it) scale = std::max(scale, std::abs(it.value()));
    return flux.size() == 0 || flux.cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

/// Residual ||S q - lambda M q||, taken modulo span(M 1) in zero_mean mode.
inline double eigen_residual(const SpdFactor& A, const SparseMatrix& B, const SparseMatrix& M, PressureMode mode,
                             double lambda, const Eigen::VectorXd& q) {
    Eigen::VectorXd r = schur_apply(A, B, q) - lambda * (M * q);
    if (mode == PressureMode::zero_mean) {
        const Eigen::VectorXd c = M * Eigen::VectorXd::Ones(q.size());
        r -= c * (c.dot(r) / c.dot(c));
    }
    return r.norm();
}

/// Smallest eigenpair of S q = lambda M_p q on the pressure subspace of `mode`.
///
/// Runs Lanczos (M_p inner product, full reorthogonalization, explicit restarts)
/// for the largest eigenvalue mu of the reversed pencil M_p x = mu S x; every
/// application of S^{-1} is one saddle-point solve with a single factorization.
/// lambda = 1/mu.
inline InfSupResult smallest_eigpair(const SparseMatrix& A, const SparseMatrix& B, const SparseMatrix& M,
                                     PressureMode mode, const EigOptions& options = {}) {
    const auto n = static_cast<int>(M.rows());
    if (B.rows() != n || B.cols() != A.rows() || A.rows() != A.cols() || M.cols() != n) {
        throw InvalidInput("smallest_eigpair: inconsistent matrix shapes");
    }
    const bool zero_mean = mode == PressureMode::zero_mean;
    const int dim = n - (zero_mean ? 1 : 0);
    if (dim < 1) throw InvalidInput("smallest_eigpair: pressure space is empty");

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd c = M * ones;
    const double area = ones.dot(c);
    auto deflate = [&](Eigen::VectorXd& v) {
        if (zero_mean) v -= (c.dot(v) / area) * ones;
    };
    auto m_normalize = [&](Eigen::VectorXd& v) { v /= std::sqrt(v.dot(M * v)); };

    InfSupResult result;
    result.mode = mode;
    if (!zero_mean && constants_in_kernel(B)) {
        result.singular = true;
        result.eigenmode = ones / std::sqrt(area);
        return result;
    }

    const SaddleSolver solver(A, B, M, mode);

    Eigen::VectorXd v(n);
    if (options.seed) {
        std::mt19937_64 gen(*options.seed);
        std::normal_distribution<double> normal;
        for (int i = 0; i < n; ++i) v[i] = normal(gen);
    } else {
        // Alternating signs with aperiodic magnitudes: a pure +-1 pattern can be
        // orthogonal to the wanted mode on symmetric domains.
        constexpr double golden = 0.61803398874989484820;
        for (int i = 0; i < n; ++i) {
            const double magnitude = 1.0 + (i * golden - std::floor(i * golden));
            v[i] = (i % 2 == 0) ? magnitude : -magnitude;
        }
    }
    deflate(v);
    if (v.norm() == 0.0) {
        v.setLinSpaced(n, 1.0, 2.0);
        deflate(v);
    }
    m_normalize(v);

    const int m = std::max(1, std::min(options.restart, dim));
    Eigen::MatrixXd V(n, m);
    Eigen::MatrixXd MV(n, m);
    double theta = 0.0;
    double best_estimate = std::numeric_limits<double>::infinity();
    Eigen::VectorXd ritz;
    int steps = 0;
    bool converged = false;

    while (true) {
        std::vector<double> alpha;
        std::vector<double> beta;
        V.col(0) = v;
        MV.col(0) = M * v;
        Eigen::VectorXd s;
        double estimate = std::numeric_limits<double>::infinity();
        int k = 0;
        for (;; ++k) {
            Eigen::VectorXd w = solver.solve(MV.col(k));
            deflate(w);
            alpha.push_back(w.dot(MV.col(k)));
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXd coeff = MV.leftCols(k + 1).transpose() * w;
                w -= V.leftCols(k + 1) * coeff;
            }
            const Eigen::VectorXd Mw = M * w;
            const double b = std::sqrt(std::max(0.0, w.dot(Mw)));
            ++steps;

            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
            const Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), k + 1);
            const Eigen::VectorXd sub = Eigen::Map<const Eigen::VectorXd>(beta.data(), k);
            tri.computeFromTridiagonal(diag, sub);
            theta = tri.eigenvalues()[k];
            s = tri.eigenvectors().col(k);
            estimate = b * std::abs(s[k]);
            if (estimate <= options.tol * std::abs(theta) || b <= 1e-14 * std::abs(theta) || k + 1 == dim) {
                converged = true;
                break;
            }
            if (steps >= options.max_iter || k + 1 == m) break;
            beta.push_back(b);
            V.col(k + 1) = w / b;
            MV.col(k + 1) = Mw / b;
        }
        ritz = V.leftCols(k + 1) * s;
        deflate(ritz);
        m_normalize(ritz);
        best_estimate = std::min(best_estimate, estimate);
        if (converged) break;
        if (steps >= options.max_iter) {
            throw NonConvergence("smallest_eigpair: no convergence after " + std::to_string(steps) +
                                     " iterations (best Ritz residual " + std::to_string(best_estimate) + ")",
                                 best_estimate);
        }
        v = ritz;
    }

    if (!(theta > 0.0)) throw SingularSystem("smallest_eigpair: reversed pencil has no positive eigenvalue");
    result.lambda_min = 1.0 / theta;
    result.gamma_h = std::sqrt(result.lambda_min);
    result.eigenmode = ritz;
    result.iterations = steps;
    const SpdFactor afac(A);
    result.residual = eigen_residual(afac, B, M, mode, result.lambda_min, ritz);
    return result;
}

/// Every eigenvalue of the pencil (S, M_p) on the subspace of `mode`, ascending.
/// S is formed densely one column at a time. Test oracle; n_p <= 1000.
inline Eigen::VectorXd dense_oracle(const SparseMatrix& A, const SparseMatrix& B, const SparseMatrix& M,
                                    PressureMode mode) {
    const auto n = static_cast<int>(B.rows());
    if (n > 1000) throw InvalidInput("dense_oracle: n_p = " + std::to_string(n) + " exceeds 1000");
    const SpdFactor afac(A);
    Eigen::MatrixXd S(n, n);
    for (int j = 0; j < n; ++j) S.col(j) = schur_apply(afac, B, Eigen::VectorXd::Unit(n, j));
    S = (0.5 * (S + S.transpose())).eval();
    Eigen::MatrixXd Md = Eigen::MatrixXd(M);
    if (mode == PressureMode::zero_mean) {
        const Eigen::VectorXd c = Md * Eigen::VectorXd::Ones(n);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
        const Eigen::MatrixXd Q = qr.householderQ();
        const Eigen::MatrixXd Z = Q.rightCols(n - 1);
        S = (Z.transpose() * S * Z).eval();
        Md = (Z.transpose() * Md * Z).eval();
        S = (0.5 * (S + S.transpose())).eval();
        Md = (0.5 * (Md + Md.transpose())).eval();
    }
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(S, Md, Eigen::EigenvaluesOnly);
    return ges.eigenvalues();
}

}  // namespace infsup

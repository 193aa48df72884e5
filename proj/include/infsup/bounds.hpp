#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "infsup/constants.hpp"
#include "infsup/errors.hpp"
#include "infsup/fem.hpp"
#include "infsup/geometry.hpp"
#include "infsup/infsup_eig.hpp"
#include "infsup/mesh.hpp"

namespace infsup {

/// Inputs of the explicit lower bound for the mixed-boundary inf-sup constant.
struct BoundInputs {
    double gamma0;  // inf-sup constant of H^1_0 x L^2_0
    double c1;
    double c2;
    int d;
    double area;

    void validate() const {
        if (!(gamma0 > 0.0) || !(c1 > 0.0) || !(c2 > 0.0) || d < 1 || !(area > 0.0)) {
            throw InvalidInput("BoundInputs: gamma0, c1, c2, d and |Omega| must all be positive");
        }
    }
};

/// gamma = gamma0/2 * min{1, c1 / (d c2 |Omega|^{1/2})} / (1 + gamma0/(2d)).
inline double gamma_lower(const BoundInputs& in) {
    in.validate();
    const double ratio = in.c1 / (in.d * in.c2 * std::sqrt(in.area));
    return 0.5 * in.gamma0 * std::min(1.0, ratio) / (1.0 + in.gamma0 / (2.0 * in.d));
}

struct PressureSplit {
    double p_bar;
    Eigen::VectorXd p0;
};

/// p = p_bar + p0 with p_bar the mean value and p0 of zero mean.
inline PressureSplit split_pressure(const Eigen::VectorXd& p, const SparseMatrix& M, double area) {
    const double p_bar = (M * p).sum() / area;
    return {p_bar, p - Eigen::VectorXd::Constant(p.size(), p_bar)};
}

struct Candidate {
    Eigen::VectorXd u;   // mixed-space coefficients
    Eigen::VectorXd u0;  // zero-trace part, embedded into the mixed space
    double coefficient;  // multiplier of ubar_h, signed like p_bar
    double grad_u0;      // ||grad u0||, the V-norm in use
    double h1_norm_u0;   // full H^1 norm of u0, recorded for audit
    bool fallback;       // p0 = 0: the candidate is ubar_h alone
};

struct SampleVerification {
    int id = 0;
    double ratio = 0.0;  // (div u, p) / (||grad u|| ||p||)
    double bound = 0.0;  // gamma_lower with discrete constants
    double margin = 0.0;
    double p_bar = 0.0;
    double norm_p0 = 0.0;
    double grad_u0 = 0.0;
    double h1_norm_u0 = 0.0;
    // Slack of each step of the inequality chain; nonnegative when the step holds.
    double ubar_step_slack = 0.0;  // (div s ubar, p) >= c1/|Omega|^{1/2} ||p_bar|| - sqrt(d) c2 ||p0||
    double u0_step_slack = 0.0;    // (div u0, p) >= gamma0 ||grad u0|| ||p0||
    double norm_step_slack = 0.0;  // ||grad u|| <= (1 + gamma0/(2d)) ||grad u0||
    bool fallback = false;
};

/// Discrete replay of the constructive inf-sup argument on one mesh.
///
/// Holds the mixed system (Dirichlet on the tagged walls, free outflow), the
/// zero-trace system on the same mesh, the interpolated half-ball field ubar_h and
/// the discrete constants c1_h = 1^T B ubar_h, c2_h = ||grad ubar_h|| and gamma0_h.
class ProofReplay {
 public:
    static constexpr int dim = 2;

    ProofReplay(const Mesh& mesh, const DomainSpec& spec, const EigOptions& eig = {},
                std::optional<double> gamma0_h = std::nullopt)
        : spec_(spec),
          mixed_(build_fesystem(mesh, ConstraintPolicy::from_tags)),
          closed_(build_fesystem(mesh, ConstraintPolicy::all_dirichlet)),
          A_(assemble_gradgrad(mixed_)),
          B_(assemble_div(mixed_)),
          M_(assemble_pressure_mass(mixed_)),
          A0_(assemble_gradgrad(closed_)),
          B0_(assemble_div(closed_)),
          Mu_(assemble_velocity_mass(mixed_)),
          a0_factor_(A0_),
          ubar_h_(interpolate_ubar(mixed_, spec)),
          area_(mesh.area()) {
        embed_.resize(closed_.n_u);
        for (std::size_t k = 0; k < closed_.nodes.size(); ++k) {
            const int d0 = closed_.velocity_dof[k];
            if (d0 < 0) continue;
            embed_[d0] = mixed_.velocity_dof[k];
            embed_[d0 + 1] = mixed_.velocity_dof[k] + 1;
        }
        c1_h_ = (B_ * ubar_h_).sum();
        c2_h_ = std::sqrt(ubar_h_.dot(A_ * ubar_h_));
        if (gamma0_h) {
            gamma0_h_ = *gamma0_h;
        } else {
            gamma0_result_ = smallest_eigpair(A0_, B0_, M_, PressureMode::zero_mean, eig);
            gamma0_h_ = gamma0_result_->gamma_h;
        }
    }

    ProofReplay(const ProofReplay&) = delete;
    ProofReplay& operator=(const ProofReplay&) = delete;

    const DomainSpec& spec() const { return spec_; }
    const FESystem& mixed() const { return mixed_; }
    const FESystem& closed() const { return closed_; }
    const SparseMatrix& A() const { return A_; }
    const SparseMatrix& B() const { return B_; }
    const SparseMatrix& M() const { return M_; }
    const SparseMatrix& A0() const { return A0_; }
    const SparseMatrix& B0() const { return B0_; }
    const Eigen::VectorXd& ubar_h() const { return ubar_h_; }
    const std::optional<InfSupResult>& gamma0_result() const { return gamma0_result_; }
    double c1_h() const { return c1_h_; }
    double c2_h() const { return c2_h_; }
    double gamma0_h() const { return gamma0_h_; }
    double area() const { return area_; }

    BoundInputs discrete_inputs() const { return {gamma0_h_, c1_h_, c2_h_, dim, area_}; }

    double pressure_norm(const Eigen::VectorXd& p) const { return std::sqrt(p.dot(M_ * p)); }
    double velocity_seminorm(const Eigen::VectorXd& u) const { return std::sqrt(u.dot(A_ * u)); }

    /// u0 = A0^{-1} B0^T p0 in the zero-trace space, embedded into the mixed space.
    Eigen::VectorXd zero_trace_supremizer(const Eigen::VectorXd& p0) const {
        const Eigen::VectorXd local = a0_factor_.solve(B0_.transpose() * p0);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(mixed_.n_u);
        for (int i = 0; i < closed_.n_u; ++i) u[embed_[i]] = local[i];
        return u;
    }

    /// u = u0 + sign(p_bar) gamma0 ||grad u0|| / (2 d c2_h) ubar_h.
    /// The sign keeps (div ubar_h, p_bar) nonnegative for either sign of the mean.
    Candidate build_candidate_velocity(const Eigen::VectorXd& p) const {
        const PressureSplit split = split_pressure(p, M_, area_);
        const double sign = split.p_bar < 0.0 ? -1.0 : 1.0;
        Candidate cand;
        cand.u0 = zero_trace_supremizer(split.p0);
        cand.grad_u0 = velocity_seminorm(cand.u0);
        cand.h1_norm_u0 = std::sqrt(cand.grad_u0 * cand.grad_u0 + cand.u0.dot(Mu_ * cand.u0));
        cand.fallback = pressure_norm(split.p0) <= 1e-12 * pressure_norm(p) || cand.grad_u0 == 0.0;
        if (cand.fallback) {
            cand.coefficient = sign;
            cand.u = sign * ubar_h_;
            return cand;
        }
        cand.coefficient = sign * gamma0_h_ * cand.grad_u0 / (2.0 * dim * c2_h_);
        cand.u = cand.u0 + cand.coefficient * ubar_h_;
        return cand;
    }

    SampleVerification verify_sample(int id, const Eigen::VectorXd& p) const {
        if (p.size() != M_.rows()) throw InvalidInput("verify_sample: pressure vector has wrong size");
        const double norm_p = pressure_norm(p);
        if (!(norm_p > 0.0)) throw InvalidInput("verify_sample: pressure must be nonzero");
        const PressureSplit split = split_pressure(p, M_, area_);
        const Candidate cand = build_candidate_velocity(p);
        const Eigen::VectorXd Bp = B_.transpose() * p;

        SampleVerification out;
        out.id = id;
        out.fallback = cand.fallback;
        out.p_bar = split.p_bar;
        out.norm_p0 = pressure_norm(split.p0);
        out.grad_u0 = cand.grad_u0;
        out.h1_norm_u0 = cand.h1_norm_u0;
        const double grad_u = velocity_seminorm(cand.u);
        out.ratio = Bp.dot(cand.u) / (grad_u * norm_p);
        out.bound = gamma_lower(discrete_inputs());
        out.margin = out.ratio - out.bound;

        const double sign = split.p_bar < 0.0 ? -1.0 : 1.0;
        const double norm_pbar = std::abs(split.p_bar) * std::sqrt(area_);
        out.ubar_step_slack = sign * Bp.dot(ubar_h_) -
                              (c1_h_ / std::sqrt(area_) * norm_pbar - std::sqrt(double(dim)) * c2_h_ * out.norm_p0);
        if (!cand.fallback) {
            out.u0_step_slack = Bp.dot(cand.u0) - gamma0_h_ * cand.grad_u0 * out.norm_p0;
            out.norm_step_slack = (1.0 + gamma0_h_ / (2.0 * dim)) * cand.grad_u0 - grad_u;
        }
        return out;
    }

    /// sup over the mixed space of (div u, p) / (||grad u|| ||p||) = sqrt(p^T S p) / ||p||.
    double optimal_ratio(const SpdFactor& a_factor, const Eigen::VectorXd& p) const {
        return std::sqrt(p.dot(schur_apply(a_factor, B_, p))) / pressure_norm(p);
    }

    /// iid standard normal coefficients, M_p-normalized.
    std::vector<Eigen::VectorXd> random_pressures(int count, std::uint64_t seed) const {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> normal;
        std::vector<Eigen::VectorXd> out;
        out.reserve(count);
        for (int s = 0; s < count; ++s) {
            Eigen::VectorXd p(M_.rows());
            for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = normal(gen);
            p /= pressure_norm(p);
            out.push_back(std::move(p));
        }
        return out;
    }

    std::vector<SampleVerification> verify_random(int count, std::uint64_t seed) const {
        const auto pressures = random_pressures(count, seed);
        std::vector<SampleVerification> out;
        out.reserve(pressures.size());
        for (int s = 0; s < count; ++s) out.push_back(verify_sample(s, pressures[s]));
        return out;
    }

 private:
    DomainSpec spec_;
    FESystem mixed_;
    FESystem closed_;
    SparseMatrix A_;
    SparseMatrix B_;
    SparseMatrix M_;
    SparseMatrix A0_;
    SparseMatrix B0_;
    SparseMatrix Mu_;
    SpdFactor a0_factor_;
    Eigen::VectorXd ubar_h_;
    double area_;
    std::vector<int> embed_;
    double c1_h_ = 0.0;
    double c2_h_ = 0.0;
    double gamma0_h_ = 0.0;
    std::optional<InfSupResult> gamma0_result_;
};

}  // namespace infsup

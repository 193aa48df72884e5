#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "infsup/errors.hpp"
#include "infsup/fem.hpp"
#include "infsup/geometry.hpp"
#include "infsup/mesh.hpp"
#include "infsup/quadrature.hpp"

namespace infsup {

enum class ConstantsMethod { analytic, quadrature };
enum class C2Variant { paper, tight };

inline std::string_view to_string(ConstantsMethod m) { return m == ConstantsMethod::analytic ? "analytic" : "quadrature"; }
inline std::string_view to_string(C2Variant v) { return v == C2Variant::paper ? "paper" : "tight"; }

/// Constants of the half-ball construction for one configuration.
struct ConstantsReport {
    double c1;        // flux of ubar through the outflow boundary
    double c2_paper;  // ||n||_{W^{1,inf}(H)} ||psi||_{H^1(H)}
    double c2_tight;  // ||grad ubar||
    double area;
    int dim;
    double r;
    ConstantsMethod method;

    double c2(C2Variant v) const { return v == C2Variant::paper ? c2_paper : c2_tight; }
};

namespace detail {

// The flat chord must sit entirely inside the outflow boundary.
inline void require_full_chord(const DomainSpec& spec) {
    if (spec.dim == 3) {
        if (!(spec.r > 0.0)) throw InvalidInput("probe radius must be positive");
        return;
    }
    validate_probe(spec);
    const auto probe = make_probe(spec);
    const double chord = (probe.chord_end - probe.chord_begin).norm();
    if (std::abs(chord - 2.0 * spec.r) > 1e-12 * spec.r) {
        throw InvalidInput("probe chord protrudes beyond the outflow boundary");
    }
}

// Polar integral over the half-disc facing into the channel; f(x) with weight rho.
template <typename F>
double integrate_half_disc(const DomainSpec& spec, F&& f) {
    const Vec2 inward = -nearest_normal(spec.x0, spec.gamma_N);
    const Vec2 tangent(-inward.y(), inward.x());
    const double half_pi = 0.5 * std::numbers::pi;
    return integrate_1d(
        [&](double theta) {
            const Vec2 dir = std::cos(theta) * inward + std::sin(theta) * tangent;
            return integrate_1d([&](double rho) { return rho * f(Vec2(spec.x0 + rho * dir)); }, 0.0, spec.r);
        },
        -half_pi, half_pi);
}

// Spherical integral over the half-ball {|x| < r, x_1 < 0}; f(x) with the volume weight.
template <typename F>
double integrate_half_ball(double r, F&& f) {
    return integrate_1d(
        [&](double polar) {
            return integrate_1d(
                [&](double azimuth) {
                    return integrate_1d(
                        [&](double rho) {
                            const Vec<3> x(-rho * std::cos(polar), rho * std::sin(polar) * std::cos(azimuth),
                                           rho * std::sin(polar) * std::sin(azimuth));
                            return rho * rho * std::sin(polar) * f(x);
                        },
                        0.0, r);
                },
                0.0, 2.0 * std::numbers::pi);
        },
        0.0, 0.5 * std::numbers::pi);
}

template <int D>
double grad_psi_squared(const Vec<D>& x, const Vec<D>& x0) {
    const Vec<D> g = -(x - x0) / (x - x0).norm();
    return g.squaredNorm();
}

}  // namespace detail

/// c1 = integral over the chord of psi.
inline double compute_c1(const DomainSpec& spec, ConstantsMethod method) {
    detail::require_full_chord(spec);
    if (method == ConstantsMethod::analytic) return analytic_constants(spec.dim, spec.r).c1;
    const double r = spec.r;
    if (spec.dim == 2) {
        const auto probe = make_probe(spec);
        const Vec2 t = (probe.chord_end - probe.chord_begin).normalized();
        auto along = [&](double s) { return psi<2>(Vec2(spec.x0 + s * t), spec.x0, r); };
        // Split at the kink of psi.
        return integrate_1d(along, -r, 0.0) + integrate_1d(along, 0.0, r);
    }
    const Vec<3> x0 = Vec<3>::Zero();
    return integrate_1d(
        [&](double theta) {
            return integrate_1d(
                [&](double rho) {
                    const Vec<3> x(0.0, rho * std::cos(theta), rho * std::sin(theta));
                    return rho * psi<3>(x, x0, r);
                },
                0.0, r);
        },
        0.0, 2.0 * std::numbers::pi);
}

inline double compute_c2(const DomainSpec& spec, C2Variant variant, ConstantsMethod method) {
    detail::require_full_chord(spec);
    const double r = spec.r;
    if (method == ConstantsMethod::analytic) {
        if (variant == C2Variant::tight) return analytic_constants(spec.dim, r).c2_tight;
        return psi_h1_norm(spec.dim, r);  // flat outflow: ||n||_{W^{1,inf}} = 1
    }
    if (spec.dim == 2) {
        const double grad_sq = detail::integrate_half_disc(
            spec, [&](const Vec2& x) { return detail::grad_psi_squared<2>(x, spec.x0); });
        if (variant == C2Variant::tight) return std::sqrt(grad_sq);
        const double psi_sq = detail::integrate_half_disc(spec, [&](const Vec2& x) {
            const double v = psi<2>(x, spec.x0, r);
            return v * v;
        });
        return normal_w1inf_estimate(spec) * std::sqrt(psi_sq + grad_sq);
    }
    const Vec<3> x0 = Vec<3>::Zero();
    const double grad_sq = detail::integrate_half_ball(r, [&](const Vec<3>& x) { return detail::grad_psi_squared<3>(x, x0); });
    if (variant == C2Variant::tight) return std::sqrt(grad_sq);
    const double psi_sq = detail::integrate_half_ball(r, [&](const Vec<3>& x) {
        const double v = psi<3>(x, x0, r);
        return v * v;
    });
    return std::sqrt(psi_sq + grad_sq);
}

inline ConstantsReport constants_report(const DomainSpec& spec, ConstantsMethod method) {
    return {compute_c1(spec, method),
            compute_c2(spec, C2Variant::paper, method),
            compute_c2(spec, C2Variant::tight, method),
            spec.area(),
            spec.dim,
            spec.r,
            method};
}

struct GaussCheck {
    double discrete_flux;
    double c1;
    double error;
};

/// Discrete flux 1^T B ubar_h against the exact c1.
inline GaussCheck check_gauss(const SparseMatrix& B, const Eigen::VectorXd& ubar_h, const DomainSpec& spec) {
    const double flux = (B * ubar_h).sum();
    const double c1 = analytic_constants(spec.dim, spec.r).c1;
    return {flux, c1, std::abs(flux - c1)};
}

inline GaussCheck check_gauss(const FESystem& fes, const DomainSpec& spec) {
    return check_gauss(assemble_div(fes), interpolate_ubar(fes, spec), spec);
}

/// check_gauss on a family of channel meshes with ny cells across the height and
/// square cells. With ny odd the probe center is never a mesh vertex; with a vertex
/// at x0 the P2 interpolant of psi along the outflow is exact and the error is
/// at round-off level.
inline std::vector<GaussCheck> gauss_refinement_study(const DomainSpec& spec, std::span<const int> ny_list) {
    std::vector<GaussCheck> out;
    out.reserve(ny_list.size());
    for (int ny : ny_list) {
        const int nx = std::max(1, static_cast<int>(std::lround(ny * spec.L / spec.H)));
        out.push_back(check_gauss(build_fesystem(triangulate_channel(spec, nx, ny)), spec));
    }
    return out;
}

}  // namespace infsup

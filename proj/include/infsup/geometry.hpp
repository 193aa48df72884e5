#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "infsup/errors.hpp"

namespace infsup {

template <int D>
using Vec = Eigen::Matrix<double, D, 1>;
using Vec2 = Vec<2>;

/// Oriented boundary polyline. Segment k runs from points[k] to points[k+1]
/// and the domain lies to its left, so (dy, -dx) points outward.
struct Polyline {
    std::vector<Vec2> points;

    std::size_t segments() const { return points.size() < 2 ? 0 : points.size() - 1; }

    Vec2 outward_normal(std::size_t k) const {
        const Vec2 d = points[k + 1] - points[k];
        return Vec2(d.y(), -d.x()).normalized();
    }

    double length() const {
        double len = 0.0;
        for (std::size_t k = 0; k < segments(); ++k) len += (points[k + 1] - points[k]).norm();
        return len;
    }
};

/// Parametric domain with a Dirichlet part, an outflow part and the half-ball probe.
///
/// For dim == 2 this is the channel (0,L) x (0,H) whose outflow boundary is the
/// right edge {L} x (0,H). For dim == 3 only the probe radius is carried (ball of
/// diameter one with a flat disc-shaped outflow boundary); no mesh is ever built.
struct DomainSpec {
    int dim = 2;
    double L = 0.0;
    double H = 0.0;
    Vec2 x0 = Vec2::Zero();
    double r = 0.0;
    Polyline gamma_N;
    Polyline gamma_D;

    double area() const {
        if (dim == 3) return std::numbers::pi / 6.0;
        return L * H;
    }

    bool contains(const Vec2& x) const {
        const double tol = 1e-12 * std::max(L, H);
        return x.x() >= -tol && x.x() <= L + tol && x.y() >= -tol && x.y() <= H + tol;
    }
};

namespace detail {

inline double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (x - a).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * d - x).norm();
}

// Clip segment [a,b] to the closed disc |y - c| <= r. Returns nullopt if disjoint.
inline std::optional<std::pair<Vec2, Vec2>> clip_to_disc(const Vec2& a, const Vec2& b,
                                                         const Vec2& c, double r) {
    const Vec2 d = b - a;
    const Vec2 f = a - c;
    const double qa = d.squaredNorm();
    const double qb = 2.0 * f.dot(d);
    const double qc = f.squaredNorm() - r * r;
    if (qa == 0.0) {
        if (qc <= 0.0) return std::make_pair(a, b);
        return std::nullopt;
    }
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double t0 = std::max(0.0, (-qb - sq) / (2.0 * qa));
    const double t1 = std::min(1.0, (-qb + sq) / (2.0 * qa));
    if (t0 > t1) return std::nullopt;
    return std::make_pair(Vec2(a + t0 * d), Vec2(a + t1 * d));
}

}  // namespace detail

/// Outward normal of the polyline segment nearest to x.
/// When a disc is given, only the part of each segment inside the disc counts.
/// Ties go to the segment with the smallest index.
inline Vec2 nearest_normal(const Vec2& x, const Polyline& line,
                           const std::optional<std::pair<Vec2, double>>& disc = std::nullopt) {
    double best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_k;
    for (std::size_t k = 0; k < line.segments(); ++k) {
        Vec2 a = line.points[k];
        Vec2 b = line.points[k + 1];
        if (disc) {
            auto clipped = detail::clip_to_disc(a, b, disc->first, disc->second);
            if (!clipped) continue;
            std::tie(a, b) = *clipped;
        }
        const double dist = detail::point_segment_distance(x, a, b);
        const double tie_tol = 1e-12 * std::max(1.0, best);
        if (!best_k || dist < best - tie_tol) {
            best = dist;
            best_k = k;
        }
    }
    if (!best_k) throw InvalidInput("nearest_normal: polyline has no segment inside the probe");
    return line.outward_normal(*best_k);
}

/// Builds the channel (0,L) x (0,H) with outflow on {L} x (0,H).
/// The probe is centered at the outflow midpoint with radius r (default H/2).
inline DomainSpec make_channel(double L, double H, std::optional<double> r = std::nullopt) {
    if (!(L > 0.0) || !(H > 0.0)) {
        throw InvalidInput("make_channel: L and H must be positive (L=" + std::to_string(L) +
                           ", H=" + std::to_string(H) + ")");
    }
    const double radius = r.value_or(0.5 * H);
    if (!(radius > 0.0)) throw InvalidInput("make_channel: r must be positive");
    if (radius > 0.5 * H) {
        throw InvalidInput("make_channel: r=" + std::to_string(radius) +
                           " exceeds H/2; the half-ball would reach the Dirichlet boundary");
    }
    DomainSpec spec;
    spec.dim = 2;
    spec.L = L;
    spec.H = H;
    spec.r = radius;
    spec.x0 = Vec2(L, 0.5 * H);
    spec.gamma_N.points = {Vec2(L, 0.0), Vec2(L, H)};
    spec.gamma_D.points = {Vec2(L, H), Vec2(0.0, H), Vec2(0.0, 0.0), Vec2(L, 0.0)};
    return spec;
}

/// Three-dimensional ball of diameter one with a flat disc outflow; carries r only.
inline DomainSpec make_ball(double r) {
    if (!(r > 0.0) || !(r < 1.0)) throw InvalidInput("make_ball: r must lie in (0,1)");
    DomainSpec spec;
    spec.dim = 3;
    spec.r = r;
    return spec;
}

/// Distance from the probe center to the Dirichlet boundary.
inline double probe_clearance(const DomainSpec& spec) {
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < spec.gamma_D.segments(); ++k) {
        dist = std::min(dist, detail::point_segment_distance(spec.x0, spec.gamma_D.points[k],
                                                             spec.gamma_D.points[k + 1]));
    }
    return dist;
}

/// Throws unless H(x0,r) is an admissible probe: x0 on the outflow boundary and
/// the open ball B_r(x0) disjoint from the Dirichlet boundary.
inline void validate_probe(const DomainSpec& spec) {
    if (spec.dim != 2) return;
    if (!(spec.r > 0.0)) throw InvalidInput("probe radius must be positive");
    double to_outflow = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < spec.gamma_N.segments(); ++k) {
        to_outflow = std::min(to_outflow,
                              detail::point_segment_distance(spec.x0, spec.gamma_N.points[k],
                                                             spec.gamma_N.points[k + 1]));
    }
    const double scale = std::max(spec.L, spec.H);
    if (to_outflow > 1e-12 * scale) throw InvalidInput("probe center is not on the outflow boundary");
    if (probe_clearance(spec) < spec.r * (1.0 - 1e-12)) {
        throw InvalidInput("half-ball H(x0,r) touches the Dirichlet boundary (r=" +
                           std::to_string(spec.r) + ")");
    }
}

/// The half-ball H(x0,r) = B_r(x0) cut with the domain, and its flat chord on the outflow.
struct ProbeRegion {
    Vec2 x0;
    double r;
    Vec2 chord_begin;
    Vec2 chord_end;

    bool contains(const DomainSpec& spec, const Vec2& x) const {
        return (x - x0).norm() < r && spec.contains(x);
    }
};

inline ProbeRegion make_probe(const DomainSpec& spec) {
    validate_probe(spec);
    for (std::size_t k = 0; k < spec.gamma_N.segments(); ++k) {
        auto clipped = detail::clip_to_disc(spec.gamma_N.points[k], spec.gamma_N.points[k + 1],
                                            spec.x0, spec.r);
        if (clipped) return {spec.x0, spec.r, clipped->first, clipped->second};
    }
    throw InvalidInput("make_probe: outflow boundary does not meet the probe");
}

/// psi(x) = r - |x - x0|. Negative outside the ball.
template <int D>
double psi(const Vec<D>& x, const Vec<D>& x0, double r) {
    return r - (x - x0).norm();
}

/// Normal at the nearest point of the outflow boundary inside the probe.
inline Vec2 normal_extension(const Vec2& x, const DomainSpec& spec) {
    const bool in_ball = (x - spec.x0).norm() <= spec.r * (1.0 + 1e-12);
    if (!in_ball || !spec.contains(x)) {
        throw InvalidInput("normal_extension: point lies outside the half-ball");
    }
    return nearest_normal(x, spec.gamma_N, std::make_pair(spec.x0, spec.r));
}

/// ubar(x) = chi_H(x) psi(x) n(x).
inline Vec2 ubar_eval(const Vec2& x, const DomainSpec& spec) {
    if ((x - spec.x0).norm() >= spec.r || !spec.contains(x)) return Vec2::Zero();
    return psi<2>(x, spec.x0, spec.r) * normal_extension(x, spec);
}

struct AnalyticConstants {
    double c1;
    double c2_tight;
};

/// Closed forms for a flat outflow boundary:
///   c1 = integral of psi over the chord,  c2_tight = |grad ubar| = sqrt(|H|).
inline AnalyticConstants analytic_constants(int dim, double r) {
    if (!(r > 0.0)) throw InvalidInput("analytic_constants: r must be positive");
    constexpr double pi = std::numbers::pi;
    if (dim == 2) return {r * r, r * std::sqrt(pi / 2.0)};
    if (dim == 3) return {pi * r * r * r / 3.0, std::sqrt(2.0 * pi / 3.0) * std::pow(r, 1.5)};
    throw InvalidInput("analytic_constants: dim must be 2 or 3");
}

/// ||psi||_{H^1(H)} for the flat half-ball, closed form.
inline double psi_h1_norm(int dim, double r) {
    constexpr double pi = std::numbers::pi;
    if (dim == 2) return std::sqrt(pi * r * r / 2.0 + pi * std::pow(r, 4) / 12.0);
    if (dim == 3) return std::sqrt(2.0 * pi * std::pow(r, 3) / 3.0 + pi * std::pow(r, 5) / 15.0);
    throw InvalidInput("psi_h1_norm: dim must be 2 or 3");
}

/// Finite-difference estimate of ||n||_{W^{1,inf}(H)} = max(sup|n|, sup|grad n|)
/// on a polar probe grid. An estimate, not a certified bound.
inline double normal_w1inf_estimate(const DomainSpec& spec, int grid = 16) {
    const Vec2 inward = -nearest_normal(spec.x0, spec.gamma_N);
    const Vec2 tangent(-inward.y(), inward.x());
    const double step = 1e-6 * spec.r;
    auto inside = [&](const Vec2& y) { return (y - spec.x0).norm() <= spec.r && spec.contains(y); };
    double norm = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double rho = spec.r * 0.95 * (i + 0.5) / grid;
        for (int j = 0; j < grid; ++j) {
            const double theta = std::numbers::pi * ((j + 0.5) / grid - 0.5);
            const Vec2 x = spec.x0 + rho * (std::cos(theta) * inward + std::sin(theta) * tangent);
            const Vec2 n = normal_extension(x, spec);
            Eigen::Matrix2d grad;
            for (int c = 0; c < 2; ++c) {
                const Vec2 e = Vec2::Unit(c) * step;
                const bool fwd = inside(x + e);
                const bool bwd = inside(x - e);
                const Vec2 hi = fwd ? normal_extension(x + e, spec) : n;
                const Vec2 lo = bwd ? normal_extension(x - e, spec) : n;
                const double span = (fwd ? step : 0.0) + (bwd ? step : 0.0);
                grad.col(c) = span > 0.0 ? Vec2((hi - lo) / span) : Vec2::Zero();
            }
            norm = std::max({norm, n.norm(), grad.norm()});
        }
    }
    return norm;
}

}  // namespace infsup

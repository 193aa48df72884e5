#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "infsup/errors.hpp"

namespace infsup {

struct GaussRule {
    std::vector<double> nodes;    // on (-1, 1)
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
    if (n < 1) throw InvalidInput("gauss_legendre: n must be >= 1");
    GaussRule rule{std::vector<double>(n), std::vector<double>(n)};
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

/// Composite Gauss-Legendre integral of f over [a, b].
template <typename F>
double integrate_1d(F&& f, double a, double b, int panels = 4, int points = 8) {
    const GaussRule rule = gauss_legendre(points);
    const double width = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * width;
        for (int k = 0; k < points; ++k) {
            const double x = lo + 0.5 * width * (rule.nodes[k] + 1.0);
            sum += 0.5 * width * rule.weights[k] * f(x);
        }
    }
    return sum;
}

}  // namespace infsup

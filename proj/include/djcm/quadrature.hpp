#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace djcm {

struct GaussLegendreRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

// n-point rule, nodes by Newton iteration on P_n.
GaussLegendreRule gauss_legendre_rule(int n);

// The 10-point rule shared by the adaptive integrator.
const GaussLegendreRule& default_rule();

namespace detail {

template <class F>
double gl_panel(F& f, double a, double b, const GaussLegendreRule& rule) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return acc * half;
}

template <class F>
double adapt(F& f, double a, double b, double whole, double tol, int depth, const GaussLegendreRule& rule) {
    const double m = 0.5 * (a + b);
    const double left = gl_panel(f, a, m, rule);
    const double right = gl_panel(f, m, b, rule);
    const double refined = left + right;
    if (depth <= 0 || std::abs(refined - whole) <= tol || !(m > a && m < b)) return refined;
    return adapt(f, a, m, left, 0.5 * tol, depth - 1, rule) + adapt(f, m, b, right, 0.5 * tol, depth - 1, rule);
}

}  // namespace detail

/// Adaptive composite Gauss-Legendre on [a, b] to absolute tolerance
/// `abs_tol`. Each panel is accepted when the 10-point estimate and the sum
/// over its two halves agree within the panel's share of the tolerance.
/// The integrand should be smooth on (a, b); pass known kinks and jumps as
/// breakpoints to integrate_pieces.
template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-8, int max_depth = 40) {
    if (!(b > a)) return 0.0;
    const GaussLegendreRule& rule = default_rule();
    const double whole = detail::gl_panel(f, a, b, rule);
    return detail::adapt(f, a, b, whole, abs_tol, max_depth, rule);
}

// Integrates over [breaks.front(), breaks.back()] piece by piece. Breaks are
// sorted and deduplicated internally; the tolerance is split across pieces.
template <class F>
double integrate_pieces(F&& f, std::vector<double> breaks, double abs_tol = 1e-8, int max_depth = 40) {
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (breaks.size() < 2) return 0.0;
    const double piece_tol = abs_tol / static_cast<double>(breaks.size() - 1);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) acc += integrate(f, breaks[i], breaks[i + 1], piece_tol, max_depth);
    return acc;
}

}  // namespace djcm

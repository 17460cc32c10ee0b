#pragma once
// Gauss-Legendre quadrature plus the graded / power-substituted composites
// used for integrands with an integrable power singularity at one endpoint.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace fsde::quad {

struct GlRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Cached rule for a given node count (computed once per n).
const GlRule& gl_rule(int n);

template <typename R, typename F>
R integrate_gl(const F& f, double a, double b, int n, R zero) {
    const GlRule& r = gl_rule(n);
    R acc = zero;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (size_t i = 0; i < r.nodes.size(); ++i)
        acc += f(mid + half * r.nodes[i]) * (half * r.weights[i]);
    return acc;
}

inline double integrate_gl(double (*f)(double), double a, double b, int n) {
    return integrate_gl<double>(f, a, b, n, 0.0);
}

// Composite rule on [a, b] with panels shrinking geometrically toward a
// (ratio < 1 is the shrink factor). Intended for integrands that are smooth
// away from a and merely Holder-continuous at a.
template <typename R, typename F>
R integrate_graded(const F& f, double a, double b, int levels, double ratio,
                   int n, R zero) {
    R acc = zero;
    double w = b - a;
    double hi = b;
    for (int j = 1; j <= levels; ++j) {
        double lo = (j == levels) ? a : a + w * std::pow(ratio, j);
        acc += integrate_gl<R>(f, lo, hi, n, zero);
        hi = lo;
    }
    return acc;
}

// integral_0^h f(u) du where f(u) ~ u^{1/p - 1} * (smooth) near 0.
// Substituting u = h v^p turns the leading singularity into a constant;
// residual milder terms are handled by grading toward v = 0.
template <typename R, typename F>
R integrate_power_edge(const F& f, double h, double p, int levels, int n,
                       R zero) {
    auto g = [&](double v) -> R {
        double u = h * std::pow(v, p);
        return f(u) * (h * p * std::pow(v, p - 1.0));
    };
    return integrate_graded<R>(g, 0.0, 1.0, levels, 0.25, n, zero);
}

}  // namespace fsde::quad

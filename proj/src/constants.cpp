#include "fsde/constants.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fsde/errors.hpp"
#include "fsde/mlf.hpp"
#include "fsde/quad.hpp"

namespace fsde::constants {

namespace {

constexpr int kGradedLevels = 14;

void check_inputs(double alpha, const QuadConfig& q) {
    if (!(alpha > 0.5 && alpha < 1.0))
        throw InvalidParams("alpha must lie in (1/2, 1), got " +
                            std::to_string(alpha));
    if (!(q.y_max >= 1.0))
        throw ConfigInvalid("y_max must be >= 1");
    if (q.cells_per_unit < 4 || q.cells_per_unit > 256)
        throw ConfigInvalid("cells_per_unit out of range [4, 256]");
    if (!(q.tail_tol > 0.0)) throw ConfigInvalid("tail_tol must be positive");
}

// Inner x-integral of the (y+x) form at fixed y, with ceil(y) = k passed
// explicitly so cell boundaries stay unambiguous.
double inner_yx(double alpha, double y, int k, int nodes) {
    const double ck = std::pow(static_cast<double>(k), alpha - 1.0);
    auto f = [&](double x) {
        double d = std::pow(y + x, alpha - 1.0) - ck;
        return d * d;
    };
    if (k == 1) {
        // near y = 0 the integrand is steep at x = 0; grade toward it
        return quad::integrate_graded<double>(f, 0.0, 1.0, 10, 0.25, nodes,
                                              0.0);
    }
    return quad::integrate_gl<double>(f, 0.0, 1.0, nodes, 0.0);
}

// Inner x-integral of the (k-x) form; constant in y across the cell.
double inner_kx(double alpha, int k, int nodes) {
    const double ck = std::pow(static_cast<double>(k), alpha - 1.0);
    if (k == 1) {
        // (1-x)^{alpha-1} blows up at x = 1; substitute the power away
        auto g = [&](double s) {
            double d = std::pow(s, alpha - 1.0) - 1.0;
            return d * d;
        };
        return quad::integrate_power_edge<double>(
            g, 1.0, 1.0 / (2.0 * alpha - 1.0), kGradedLevels, nodes, 0.0);
    }
    auto f = [&](double x) {
        double d = std::pow(static_cast<double>(k) - x, alpha - 1.0) - ck;
        return d * d;
    };
    return quad::integrate_gl<double>(f, 0.0, 1.0, nodes, 0.0);
}

// Bound the neglected tail int_{y_max}^inf g(y) dy by C * int psi, with C
// fitted as the largest observed ratio g/psi on [1, y_max]. g decays exactly
// like psi there, so the ratio levels off and the fit is meaningful.
double tail_bound(double alpha, const QuadConfig& q, bool kx_form) {
    const int last = static_cast<int>(std::ceil(q.y_max));
    double c_fit = 0.0;
    std::vector<int> cells;
    for (int k = 2; k <= last; k = std::max(k + 1, 2 * k)) cells.push_back(k);
    cells.push_back(last);
    for (int k : cells) {
        if (kx_form) {
            double g = inner_kx(alpha, k, q.cells_per_unit);
            // g is y-constant on the cell and psi decreasing: worst at y = k
            c_fit = std::max(c_fit, g / psi(alpha, static_cast<double>(k)));
        } else {
            for (double y : {k - 0.99, k - 0.5, k - 0.01}) {
                double g = inner_yx(alpha, y, k, q.cells_per_unit);
                c_fit = std::max(c_fit, g / psi(alpha, y));
            }
        }
    }
    return c_fit * std::pow(q.y_max, 2.0 * alpha - 3.0) / (3.0 - 2.0 * alpha);
}

void require_tail_ok(double alpha, const QuadConfig& q, bool kx_form) {
    const double bound = tail_bound(alpha, q, kx_form);
    if (bound > q.tail_tol)
        throw TailTooLarge("tail bound " + std::to_string(bound) +
                           " exceeds tail_tol " + std::to_string(q.tail_tol) +
                           " at y_max " + std::to_string(q.y_max));
}

}  // namespace

double psi(double alpha, double y) {
    if (!(y > 0.0)) throw SingularArgument("psi requires y > 0");
    return y <= 1.0 ? std::pow(y, 2.0 * alpha - 2.0)
                    : std::pow(y, 2.0 * alpha - 4.0);
}

double kappa11_sq(double alpha, const QuadConfig& q) {
    check_inputs(alpha, q);
    require_tail_ok(alpha, q, false);
    const int cells = static_cast<int>(std::ceil(q.y_max));
    double sum = 0.0;
    for (int k = 1; k <= cells; ++k) {
        auto g = [&](double y) { return inner_yx(alpha, y, k, q.cells_per_unit); };
        if (k == 1) {
            // g(y) - g(0) ~ y^{2a-1}: Holder edge at zero, grade toward it
            sum += quad::integrate_graded<double>(g, 0.0, 1.0, kGradedLevels,
                                                  0.25, q.cells_per_unit, 0.0);
        } else {
            sum += quad::integrate_gl<double>(g, k - 1.0, static_cast<double>(k),
                                              q.cells_per_unit, 0.0);
        }
    }
    const double rg = mlf::rgamma(alpha);
    return sum * rg * rg;
}

double kappa1_sq(double alpha, const QuadConfig& q) {
    const double rg = mlf::rgamma(alpha);
    return kappa11_sq(alpha, q) +
           rg * rg / (2.0 * alpha * (2.0 * alpha - 1.0));
}

double tail_estimate(double alpha, const QuadConfig& q) {
    check_inputs(alpha, q);
    return std::max(tail_bound(alpha, q, false), tail_bound(alpha, q, true));
}

double kappa2_sq(double alpha, const QuadConfig& q) {
    check_inputs(alpha, q);
    require_tail_ok(alpha, q, true);
    const int cells = static_cast<int>(std::ceil(q.y_max));
    double sum = 0.0;
    // the integrand is y-constant on each unit cell, so the outer integral
    // over cell k contributes exactly the inner value once
    for (int k = 1; k <= cells; ++k) sum += inner_kx(alpha, k, q.cells_per_unit);
    const double rg = mlf::rgamma(alpha);
    return sum * rg * rg;
}

}  // namespace fsde::constants

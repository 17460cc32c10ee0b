#include "fsde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsde/errors.hpp"
#include "fsde/kernel.hpp"
#include "fsde/quad.hpp"

namespace fsde::analysis {

namespace {

constexpr int kGlNodes = 32;
constexpr int kEdgeLevels = 14;

int grid_index(int n, double t, const char* what) {
    double k = t * n;
    if (std::fabs(k - std::round(k)) > 1e-9 * std::max(1.0, std::fabs(k)))
        throw NotGridPoint(std::string(what) + " is not a multiple of 1/n");
    return static_cast<int>(std::llround(k));
}

// two-sided 95% quantiles of the t distribution by degrees of freedom
double t_quantile_95(int dof) {
    static const double q[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                               2.365,  2.306, 2.262, 2.228, 2.201, 2.179,
                               2.160,  2.145, 2.131, 2.120, 2.110, 2.101,
                               2.093,  2.086, 2.080, 2.074, 2.069, 2.064,
                               2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
    if (dof < 1) return 12.706;
    if (dof <= 30) return q[dof - 1];
    return 1.96;
}

}  // namespace

double mn_cross_covariance_quadrature(const MnIndices& idx, double alpha,
                                      const Eigen::MatrixXd& A, int n,
                                      double t1, double t2) {
    if (n < 1) throw InvalidParams("grid count must be positive");
    const int d = static_cast<int>(A.rows());
    for (int v : {idx.i1, idx.j1, idx.i2, idx.j2})
        if (v < 0 || v >= d) throw InvalidParams("kernel index out of range");
    if (idx.l1 < 0 || idx.l2 < 0) throw InvalidParams("noise index negative");
    if (idx.l1 != idx.l2) return 0.0;  // independent noise components

    if (t2 < t1) return mn_cross_covariance_quadrature(
        MnIndices{idx.i2, idx.j2, idx.i1, idx.j1, idx.l1, idx.l2}, alpha, A, n,
        t2, t1);

    const int k1 = grid_index(n, t1, "t1");
    grid_index(n, t2, "t2");
    if (k1 == 0) return 0.0;

    kernel::Evaluator ev(alpha, A);
    const double h = 1.0 / n;
    const double gap = t2 - t1;
    auto k1e = [&](double u) { return ev.k(u)(idx.i1, idx.j1); };
    auto k2e = [&](double u) { return ev.k(u)(idx.i2, idx.j2); };

    double sum = 0.0;
    for (int q = 0; q < k1; ++q) {
        const double sq = q * h;
        const double a1 = k1e(t1 - sq), a2 = k2e(t2 - sq);
        if (q == k1 - 1) {
            // s runs into t1; integrate in u = t1 - s which passes through 0
            auto f = [&](double u) {
                return (k1e(u) - a1) * (k2e(u + gap) - a2);
            };
            // the squared kernel power needs the stronger substitution when
            // both factors are singular (same-time case)
            const double p =
                gap > 0.0 ? 1.0 / alpha : 1.0 / (2.0 * alpha - 1.0);
            sum += quad::integrate_power_edge<double>(f, h, p, kEdgeLevels,
                                                      kGlNodes, 0.0);
        } else {
            auto f = [&](double s) {
                return (k1e(t1 - s) - a1) * (k2e(t2 - s) - a2);
            };
            sum += quad::integrate_gl<double>(f, sq, sq + h, kGlNodes, 0.0);
        }
    }
    return std::pow(static_cast<double>(n), 2.0 * alpha - 1.0) * sum;
}

double mn_covariance_quadrature(const MnIndices& idx, double alpha,
                                const Eigen::MatrixXd& A, int n, double t) {
    return mn_cross_covariance_quadrature(idx, alpha, A, n, t, t);
}

FitResult fit_order(const std::vector<double>& h_values,
                    const std::vector<double>& errors) {
    const int n = static_cast<int>(h_values.size());
    if (n != static_cast<int>(errors.size()))
        throw DegenerateInput("h and error lists differ in length");
    if (n < 4) throw DegenerateInput("need at least 4 points to fit");
    for (int i = 0; i < n; ++i)
        if (!(h_values[i] > 0.0) || !(errors[i] > 0.0))
            throw DegenerateInput("fit inputs must be strictly positive");

    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        sx += std::log(h_values[i]);
        sy += std::log(errors[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = std::log(h_values[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(errors[i]) - my);
    }
    if (sxx == 0.0) throw DegenerateInput("all step sizes equal");

    FitResult r;
    r.points = n;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double res = std::log(errors[i]) - r.intercept -
                           r.slope * std::log(h_values[i]);
        rss += res * res;
    }
    r.stderr_slope = std::sqrt(rss / (n - 2) / sxx);
    const double half = t_quantile_95(n - 2) * r.stderr_slope;
    r.ci_lo = r.slope - half;
    r.ci_hi = r.slope + half;
    return r;
}

double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    // below this the 100-term truncation is meaningless; the tail mass is 1
    // to far beyond double precision anyway
    if (lambda < 0.02) return 1.0;
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        q += (k % 2 == 1) ? term : -term;
    }
    return std::clamp(2.0 * q, 0.0, 1.0);
}

KsResult ks_test(const std::vector<double>& samples,
                 const std::function<double(double)>& cdf) {
    const int n = static_cast<int>(samples.size());
    if (n < 100) throw TooFewSamples("Kolmogorov-Smirnov needs >= 100 samples");
    std::vector<double> x = samples;
    std::sort(x.begin(), x.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = cdf(x[i]);
        d = std::max(d, std::fabs((i + 1.0) / n - f));
        d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    }
    KsResult r;
    r.n = n;
    r.statistic = d;
    r.p_value = kolmogorov_q(std::sqrt(static_cast<double>(n)) * d);
    return r;
}

MomentSummary moment_summary(const std::vector<double>& samples) {
    const int n = static_cast<int>(samples.size());
    if (n < 2) throw TooFewSamples("moment summary needs >= 2 samples");
    MomentSummary s;
    s.n = n;
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= n;
    s.mean = mean;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : samples) {
        const double c = v - mean;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.variance = m2 * n / (n - 1.0);
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.kurtosis = m4 / (m2 * m2);
    }
    s.se_mean = std::sqrt(s.variance / n);
    s.se_variance = s.variance * std::sqrt(2.0 / (n - 1.0));
    s.se_skewness = std::sqrt(6.0 / n);
    s.se_kurtosis = std::sqrt(24.0 / n);
    return s;
}

}  // namespace fsde::analysis

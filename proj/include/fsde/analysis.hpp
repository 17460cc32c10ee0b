#pragma once
// Deterministic covariance quadrature for the normalized kernel-increment
// martingale, order-of-convergence regression, and distribution statistics.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace fsde::analysis {

// Component selectors for the covariance quadrature. Kernel entries are
// (i, j); l1/l2 pick the driving noise component (covariance vanishes
// exactly unless l1 == l2).
struct MnIndices {
    int i1 = 0, j1 = 0;
    int i2 = 0, j2 = 0;
    int l1 = 0, l2 = 0;
};

// n^{2a-1} * int_0^t (K^{i1}_{j1}(t-s) - K^{i1}_{j1}(t-s_))
//                  * (K^{i2}_{j2}(t-s) - K^{i2}_{j2}(t-s_)) ds
// with s_ the left grid neighbour of s; the exact one-step covariance of the
// normalized martingale at grid time t.
double mn_covariance_quadrature(const MnIndices& idx, double alpha,
                                const Eigen::MatrixXd& A, int n, double t);

// Same integrand across two distinct grid times (tends to zero as n grows).
double mn_cross_covariance_quadrature(const MnIndices& idx, double alpha,
                                      const Eigen::MatrixXd& A, int n,
                                      double t1, double t2);

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    double ci_lo = 0.0;  // 95% interval for the slope
    double ci_hi = 0.0;
    int points = 0;
};

// Least squares on (log h, log error); interval from residual variance via
// the t distribution with points-2 degrees of freedom.
FitResult fit_order(const std::vector<double>& h_values,
                    const std::vector<double>& errors);

struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
    int n = 0;
};

// One-sample Kolmogorov-Smirnov against a caller-supplied distribution
// function; p-value from the asymptotic series.
KsResult ks_test(const std::vector<double>& samples,
                 const std::function<double(double)>& cdf);

// Tail probability Q(lambda) of the Kolmogorov distribution,
// 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2), truncated at 100 terms.
double kolmogorov_q(double lambda);

struct MomentSummary {
    int n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double skewness = 0.0;  // m3 / m2^{3/2}
    double kurtosis = 0.0;  // m4 / m2^2, 3 for a Gaussian
    double se_mean = 0.0;
    double se_variance = 0.0;
    double se_skewness = 0.0;
    double se_kurtosis = 0.0;
};

MomentSummary moment_summary(const std::vector<double>& samples);

// Row types for experiment reports; every statistic travels with its sample
// size and either a standard error or a quadrature tolerance.
struct ErrorRow {
    int n = 0;
    double l2_error = 0.0;
    double std_error = 0.0;
    int paths = 0;
};

struct CovRow {
    int n = 0;
    double mn_var = 0.0;
    double target = 0.0;
    double gap = 0.0;
    double quad_tol = 0.0;
};

struct DistTest {
    std::string label;
    int sample_size = 0;
    double ks_stat = 0.0;
    double p_value = 0.0;
    MomentSummary moments;
};

struct ExperimentReport {
    std::string config_echo;
    std::vector<ErrorRow> errors;
    FitResult fit;
    bool has_fit = false;
    std::vector<CovRow> covariances;
    std::vector<DistTest> dist_tests;
};

}  // namespace fsde::analysis

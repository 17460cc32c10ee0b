#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "fsde/errors.hpp"
#include "fsde/mlf.hpp"

using namespace fsde;
using mlf::MlParams;

namespace {
double rel_err(double got, double want) {
    return std::fabs(got - want) / std::fabs(want);
}
}  // namespace

TEST_CASE("gamma against extended-precision reference values") {
    // reference values computed with a 40-digit arbitrary-precision library
    CHECK(rel_err(mlf::gamma_fn(0.75), 1.2254167024651776451) < 1e-13);
    CHECK(rel_err(mlf::gamma_fn(0.6), 1.4891922488128171024) < 1e-13);
    CHECK(rel_err(mlf::gamma_fn(0.9), 1.0686287021193193549) < 1e-13);
    CHECK(rel_err(mlf::gamma_fn(0.5), std::sqrt(M_PI)) < 1e-13);
    CHECK(rel_err(mlf::gamma_fn(5.0), 24.0) < 1e-13);
    CHECK(rel_err(mlf::gamma_fn(1.0), 1.0) < 1e-14);
    // factorial ladder over the working range
    for (int k = 2; k <= 18; ++k) {
        double fact = 1.0;
        for (int j = 2; j < k; ++j) fact *= j;
        CHECK(rel_err(mlf::gamma_fn(k), fact) < 1e-13);
    }
}

TEST_CASE("gamma reflection handles negative arguments") {
    CHECK(rel_err(mlf::gamma_fn(-0.5), -2.0 * std::sqrt(M_PI)) < 1e-13);
    CHECK(rel_err(mlf::gamma_fn(-1.5), 4.0 / 3.0 * std::sqrt(M_PI)) < 1e-13);
    // alpha - 1 arguments that the kernel normalizations hit
    CHECK(rel_err(mlf::gamma_fn(-0.25), -4.9016668098607105803) < 1e-13);
    CHECK(mlf::rgamma(0.0) == 0.0);
    CHECK(mlf::rgamma(-1.0) == 0.0);
    CHECK(mlf::rgamma(-7.0) == 0.0);
}

TEST_CASE("ml series matches extended-precision reference values") {
    // tight tol so the stopping rule is not the limiting factor
    CHECK(rel_err(mlf::ml_scalar({0.75, 0.75, 1e-15}, -1.0),
                  0.23223772010096143194) < 1e-13);
    CHECK(rel_err(mlf::ml_scalar({0.75, 1.0, 1e-15}, -0.5),
                  0.60379034509524675559) < 1e-13);
    CHECK(rel_err(mlf::ml_scalar({0.6, 0.6, 1e-15}, -2.0),
                  0.064794543691715566734) < 1e-13);
    CHECK(rel_err(mlf::ml_scalar({0.9, 1.9, 1e-15}, -3.0),
                  0.30537054865540891032) < 1e-13);
    // default tol still lands within its own contract
    CHECK(rel_err(mlf::ml_scalar({0.6, 0.6}, -2.0),
                  0.064794543691715566734) < 1e-11);
}

TEST_CASE("ml reduces to exp at a = b = 1") {
    for (int zi = -5; zi <= 5; ++zi) {
        double z = zi;
        CHECK(std::fabs(mlf::ml_scalar({1.0, 1.0}, z) - std::exp(z)) <=
              1e-12 * std::fabs(std::exp(z)));
    }
}

TEST_CASE("ml at zero equals the first series term exactly") {
    for (double b : {0.6, 0.75, 0.9, 1.0, 1.75}) {
        CHECK(mlf::ml_scalar({0.75, b}, 0.0) == 1.0 / mlf::gamma_fn(b));
    }
}

TEST_CASE("ml complex argument") {
    std::complex<double> z(0.3, 0.4);
    std::complex<double> got = mlf::ml_scalar({0.75, 0.75}, z);
    CHECK(std::abs(got - std::complex<double>(1.0225617133245344914,
                                              0.67463232126368273226)) <
          1e-13);
    // real input comes back with an exactly zero imaginary part
    std::complex<double> r = mlf::ml_scalar({0.75, 0.75}, {-1.0, 0.0});
    CHECK(r.imag() == 0.0);
    CHECK(r.real() == mlf::ml_scalar({0.75, 0.75}, -1.0));
}

TEST_CASE("ml stays bounded on the negative real axis") {
    // |E_{a,a}(z)| <= C / (1 + |z|) for z <= 0; C = 1.6 covers the range.
    // The grid stays within the region the alternating series can certify.
    for (double a : {0.6, 0.75, 0.9}) {
        for (double z = 0.0; z >= -8.0; z -= 0.5) {
            double v = mlf::ml_scalar({a, a}, z);
            CHECK(std::fabs(v) <= 1.6 / (1.0 + std::fabs(z)));
        }
    }
}

TEST_CASE("ml refuses arguments where cancellation destroys the result") {
    CHECK_THROWS_AS(mlf::ml_scalar({0.6, 0.6}, -30.0), NonConvergent);
}

TEST_CASE("ml derivative identity, finite differences") {
    // d/dt [ t^{b-1} E_{a,b}(-lambda t^a) ] equals
    //   -lambda t^{a-1} E_{a,a}(-lambda t^a)        for b = 1
    //   t^{b-2} E_{a,b-1}(-lambda t^a)              otherwise
    const double a = 0.75, lam = 1.0, fd = 1e-5;
    auto F = [&](double b, double t) {
        return std::pow(t, b - 1.0) *
               mlf::ml_scalar({a, b}, -lam * std::pow(t, a));
    };
    for (double t : {0.3, 0.7, 1.1}) {
        double d1 = (F(1.0, t + fd) - F(1.0, t - fd)) / (2.0 * fd);
        double want1 =
            -lam * std::pow(t, a - 1.0) * mlf::ml_scalar({a, a}, -lam * std::pow(t, a));
        CHECK(rel_err(d1, want1) < 1e-6);

        double b = a + 1.0;
        double d2 = (F(b, t + fd) - F(b, t - fd)) / (2.0 * fd);
        double want2 = std::pow(t, b - 2.0) *
                       mlf::ml_scalar({a, b - 1.0}, -lam * std::pow(t, a));
        CHECK(rel_err(d2, want2) < 1e-6);
    }
}

TEST_CASE("ml matrix: eigendecomposition path agrees with the plain series") {
    Eigen::MatrixXd m(2, 2);
    m << -2.0, 1.0, 1.0, -2.0;
    MlParams p{0.75, 1.0};
    Eigen::MatrixXd fast = mlf::ml_matrix(p, m);
    Eigen::MatrixXd series = mlf::ml_matrix_series(p, m);
    CHECK((fast - series).norm() < 1e-10 * series.norm());

    // eigenvalues of m are -1 and -3 with (1,1)/sqrt2, (1,-1)/sqrt2 vectors
    double e1 = mlf::ml_scalar(p, -1.0), e3 = mlf::ml_scalar(p, -3.0);
    Eigen::MatrixXd want(2, 2);
    want << 0.5 * (e1 + e3), 0.5 * (e1 - e3), 0.5 * (e1 - e3), 0.5 * (e1 + e3);
    CHECK((fast - want).norm() < 1e-12);
}

TEST_CASE("ml matrix: diagonal input reduces to scalar calls") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = -1.0;
    m(1, 1) = -2.5;
    MlParams p{0.75, 0.75};
    Eigen::MatrixXd got = mlf::ml_matrix(p, m);
    CHECK(std::fabs(got(0, 0) - mlf::ml_scalar(p, -1.0)) < 1e-12);
    CHECK(std::fabs(got(1, 1) - mlf::ml_scalar(p, -2.5)) < 1e-12);
    CHECK(std::fabs(got(0, 1)) < 1e-12);
    CHECK(std::fabs(got(1, 0)) < 1e-12);
}

TEST_CASE("ml matrix: nilpotent input terminates with the exact finite sum") {
    Eigen::MatrixXd m(2, 2);
    m << 0.0, 1.0, 0.0, 0.0;
    MlParams p{0.75, 0.75};
    Eigen::MatrixXd got = mlf::ml_matrix_series(p, m);
    CHECK(std::fabs(got(0, 0) - mlf::rgamma(0.75)) < 1e-15);
    CHECK(std::fabs(got(0, 1) - mlf::rgamma(1.5)) < 1e-15);
    CHECK(got(1, 0) == 0.0);
}

TEST_CASE("ml error paths") {
    CHECK_THROWS_AS(mlf::ml_scalar({-0.5, 1.0}, 1.0), InvalidParams);
    CHECK_THROWS_AS(mlf::ml_scalar({0.75, 1.0, 1e-12, 0}, 1.0), InvalidParams);
    CHECK_THROWS_AS(mlf::ml_scalar({0.75, 1.0, -1.0, 500}, 1.0), InvalidParams);
    CHECK_THROWS_AS(mlf::ml_scalar({0.75, 0.75, 1e-12, 5}, -3.0), NonConvergent);
    Eigen::MatrixXd bad(2, 3);
    bad.setZero();
    CHECK_THROWS_AS(mlf::ml_matrix({0.75, 1.0}, bad), DimensionMismatch);
}

#include "fsde/mlf.hpp"

#include <cmath>
#include <limits>

#include "fsde/errors.hpp"

namespace fsde::mlf {

namespace {

// Lanczos coefficients for g = 7, n = 9 (Godfrey's set). The core is
// evaluated in long double: the approximation error itself is smooth and
// cancels in alternating sums, double-precision evaluation noise does not.
constexpr long double kLanczos[9] = {
    0.99999999999980993L,      676.5203681218851L, -1259.1392167224028L,
    771.32342877765313L,       -176.61502916214059L, 12.507343278686905L,
    -0.13857109526572012L,     9.9843695780195716e-6L,
    1.5056327351493116e-7L};

const long double kPi = 3.14159265358979323846264338327950288L;

long double gamma_core(long double x) {
    if (x < 0.5L) {
        // reflection; sin(pi x) vanishes at non-positive integers and the
        // quotient correctly produces +/-inf there
        return kPi / (std::sin(kPi * x) * gamma_core(1.0L - x));
    }
    x -= 1.0L;
    long double s = kLanczos[0];
    for (int i = 1; i < 9; ++i) s += kLanczos[i] / (x + i);
    long double t = x + 7.5L;
    return std::sqrt(2.0L * kPi) * std::pow(t, x + 0.5L) * std::exp(-t) * s;
}

bool is_nonpositive_integer(long double x) {
    return x <= 0.0L && x == std::floor(x);
}

long double rgamma_core(long double x) {
    if (is_nonpositive_integer(x)) return 0.0L;
    return 1.0L / gamma_core(x);
}

void check_params(const MlParams& p) {
    if (!std::isfinite(p.a) || !std::isfinite(p.b) || p.a <= 0.0)
        throw InvalidParams("ml: need finite parameters with a > 0");
    if (!(p.tol > 0.0) || p.max_terms < 1)
        throw InvalidParams("ml: need tol > 0 and max_terms >= 1");
}

// Shared series driver. Scalar instantiates with long double or
// complex<long double>; norm is the absolute value.
template <typename T>
T ml_series(const MlParams& p, T z) {
    const long double a = p.a, b = p.b;
    T partial = T(0);
    T zp = T(1);  // z^k
    T term = zp * rgamma_core(b);
    long double peak = 0.0L;  // largest term magnitude seen
    for (int k = 0; k < p.max_terms; ++k) {
        partial += term;
        zp *= z;
        T next = zp * rgamma_core(a * (k + 1) + b);
        long double nc = std::abs(term), nn = std::abs(next);
        peak = std::max(peak, nc);
        if (nn < nc) {
            long double ratio = nn / nc;
            if (nc / (1.0L - ratio) < p.tol * std::abs(partial)) {
                // alternating sums can eat the whole working precision; if
                // rounding noise from the largest term dwarfs the result,
                // the digits left are garbage and we refuse to return them
                if (peak * 1e-19L > 0.01L * std::abs(partial))
                    throw NonConvergent(
                        "ml_scalar: cancellation exhausted working precision");
                return partial;
            }
        }
        if (nc == 0.0L && nn == 0.0L && k > 0) return partial;
        term = next;
    }
    throw NonConvergent("ml_scalar: series did not reach tol within max_terms");
}

using MatrixLd = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace

double gamma_fn(double x) {
    if (std::isnan(x)) throw InvalidParams("gamma_fn: nan argument");
    return static_cast<double>(gamma_core(static_cast<long double>(x)));
}

double rgamma(double x) {
    if (std::isnan(x)) throw InvalidParams("rgamma: nan argument");
    return static_cast<double>(rgamma_core(static_cast<long double>(x)));
}

double ml_scalar(const MlParams& p, double z) {
    check_params(p);
    if (std::isnan(z)) throw InvalidParams("ml_scalar: nan argument");
    if (z == 0.0) return 1.0 / gamma_fn(p.b);  // first term, exact
    return static_cast<double>(ml_series<long double>(p, z));
}

std::complex<double> ml_scalar(const MlParams& p, std::complex<double> z) {
    check_params(p);
    if (std::isnan(z.real()) || std::isnan(z.imag()))
        throw InvalidParams("ml_scalar: nan argument");
    if (z.imag() == 0.0) return {ml_scalar(p, z.real()), 0.0};
    std::complex<long double> r =
        ml_series<std::complex<long double>>(p, {z.real(), z.imag()});
    return {static_cast<double>(r.real()), static_cast<double>(r.imag())};
}

Eigen::MatrixXd ml_matrix_series(const MlParams& p, const Eigen::MatrixXd& m) {
    check_params(p);
    if (m.rows() != m.cols())
        throw DimensionMismatch("ml_matrix: square matrix required");
    if (!m.allFinite()) throw InvalidParams("ml_matrix: non-finite entries");
    const long double a = p.a, b = p.b;
    const Eigen::Index d = m.rows();
    MatrixLd ml = m.cast<long double>();
    MatrixLd partial = MatrixLd::Zero(d, d);
    MatrixLd power = MatrixLd::Identity(d, d);  // m^k
    MatrixLd term = power * rgamma_core(b);
    for (int k = 0; k < p.max_terms; ++k) {
        partial += term;
        power = power * ml;
        MatrixLd next = power * rgamma_core(a * (k + 1) + b);
        long double nc = term.norm(), nn = next.norm();
        if (nn < nc) {
            long double ratio = nn / nc;
            if (nc / (1.0L - ratio) < p.tol * partial.norm())
                return partial.cast<double>();
        }
        if (nc == 0.0L && nn == 0.0L && k > 0) return partial.cast<double>();
        term = next;
    }
    throw NonConvergent("ml_matrix: series did not reach tol within max_terms");
}

Eigen::MatrixXd ml_matrix(const MlParams& p, const Eigen::MatrixXd& m) {
    check_params(p);
    if (m.rows() != m.cols())
        throw DimensionMismatch("ml_matrix: square matrix required");
    if (!m.allFinite()) throw InvalidParams("ml_matrix: non-finite entries");
    if ((m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm())) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        if (es.info() == Eigen::Success) {
            Eigen::VectorXd ev = es.eigenvalues();
            Eigen::VectorXd fv(ev.size());
            for (Eigen::Index i = 0; i < ev.size(); ++i)
                fv[i] = ml_scalar(p, ev[i]);
            return es.eigenvectors() * fv.asDiagonal() *
                   es.eigenvectors().transpose();
        }
    }
    return ml_matrix_series(p, m);
}

}  // namespace fsde::mlf

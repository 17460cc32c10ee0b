#include "fsde/kernel.hpp"

#include <cmath>

#include "fsde/errors.hpp"
#include "fsde/mlf.hpp"
#include "fsde/quad.hpp"

namespace fsde::kernel {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.5 && alpha < 1.0))
        throw InvalidParams("kernel: alpha must lie in (0.5, 1)");
}

void check_matrix(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols() || A.rows() < 1)
        throw DimensionMismatch("kernel: A must be square");
    if (!A.allFinite()) throw InvalidParams("kernel: A has non-finite entries");
}

constexpr int kGlNodes = 32;
constexpr int kEdgeLevels = 14;

}  // namespace

Evaluator::Evaluator(double alpha, const Eigen::MatrixXd& A)
    : alpha_(alpha), A_(A) {
    check_alpha(alpha);
    check_matrix(A);
    symmetric_ = (A - A.transpose()).norm() <= 1e-12 * (1.0 + A.norm());
    if (symmetric_) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        symmetric_ = (es.info() == Eigen::Success);
        if (symmetric_) {
            q_ = es.eigenvectors();
            lambda_ = es.eigenvalues();
        }
    }
}

Eigen::MatrixXd Evaluator::apply(double ml_b, double powered) const {
    mlf::MlParams p{alpha_, ml_b};
    if (symmetric_) {
        Eigen::VectorXd f(lambda_.size());
        for (Eigen::Index i = 0; i < lambda_.size(); ++i)
            f[i] = mlf::ml_scalar(p, lambda_[i] * powered);
        return q_ * f.asDiagonal() * q_.transpose();
    }
    return mlf::ml_matrix_series(p, A_ * powered);
}

Eigen::MatrixXd Evaluator::e(double u) const {
    if (u < 0.0) throw SingularArgument("kernel: negative argument");
    return apply(alpha_, std::pow(u, alpha_));
}

Eigen::MatrixXd Evaluator::k(double u) const {
    if (!(u > 0.0)) throw SingularArgument("kernel: K needs u > 0");
    return std::pow(u, alpha_ - 1.0) * e(u);
}

Eigen::MatrixXd Evaluator::ml_one(double t) const {
    if (t < 0.0) throw SingularArgument("kernel: negative argument");
    return apply(1.0, std::pow(t, alpha_));
}

Eigen::MatrixXd kernel_eval(double alpha, const Eigen::MatrixXd& A, double u) {
    return Evaluator(alpha, A).k(u);
}

double kernel_eval(double alpha, double a_scalar, double u) {
    Eigen::MatrixXd A(1, 1);
    A(0, 0) = a_scalar;
    return kernel_eval(alpha, A, u)(0, 0);
}

KernelTable build_kernel_table(double alpha, const Eigen::MatrixXd& A, int n) {
    check_alpha(alpha);
    check_matrix(A);
    if (n < 1) throw InvalidParams("kernel: n must be positive");
    Evaluator ev(alpha, A);
    const Eigen::Index d = A.rows();
    KernelTable t;
    t.alpha = alpha;
    t.A = A;
    t.n = n;
    t.h = 1.0 / n;
    t.k_at_grid.assign(n + 1, Eigen::MatrixXd::Zero(d, d));
    t.e_at_grid.resize(n + 1);
    t.ml_one.resize(n + 1);
    t.cell_integrals.resize(n);
    for (int m = 0; m <= n; ++m) {
        double tm = t.grid_time(m);
        t.e_at_grid[m] = ev.e(tm);
        t.ml_one[m] = ev.ml_one(tm);
        if (m >= 1) t.k_at_grid[m] = std::pow(tm, alpha - 1.0) * t.e_at_grid[m];
    }
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d, d);
    auto kf = [&](double u) { return ev.k(u); };
    // cell 0 carries the u^{alpha-1} singularity; u = h v^{1/alpha} turns the
    // integrand into (h^alpha/alpha) E_{a,a}(A h^alpha v), entire in v
    t.cell_integrals[0] = quad::integrate_power_edge<Eigen::MatrixXd>(
        kf, t.h, 1.0 / alpha, kEdgeLevels, kGlNodes, zero);
    for (int m = 1; m < n; ++m) {
        t.cell_integrals[m] = quad::integrate_gl<Eigen::MatrixXd>(
            kf, t.grid_time(m), t.grid_time(m + 1), kGlNodes, zero);
    }
    return t;
}

RegularityIntegrals regularity_integrals(double alpha, const Eigen::MatrixXd& A,
                                         int n, double t) {
    check_alpha(alpha);
    check_matrix(A);
    if (n < 1) throw InvalidParams("kernel: n must be positive");
    if (!(t > 0.0 && t <= 1.0))
        throw InvalidParams("kernel: t must lie in (0, 1]");
    const double h = 1.0 / n;
    const double idx = t * n;
    const int ell = static_cast<int>(std::lround(idx));
    if (std::fabs(idx - ell) > 1e-9 || ell < 1)
        throw NotGridPoint("kernel: t is not a grid point");

    Evaluator ev(alpha, A);
    RegularityIntegrals out;
    for (int j = 0; j < ell; ++j) {
        const double tj = static_cast<double>(j) / n;
        const Eigen::MatrixXd kj = ev.k(t - tj);
        auto d1 = [&](double u) { return (ev.k(u) - kj).norm(); };
        auto d2 = [&](double u) {
            double r = (ev.k(u) - kj).norm();
            return r * r;
        };
        if (j == ell - 1) {
            // u = t - s runs through 0; substitute away the singularity,
            // matching the exponent to the strongest power in each integrand
            out.l1 += quad::integrate_power_edge<double>(
                d1, h, 1.0 / alpha, kEdgeLevels, kGlNodes, 0.0);
            out.l2 += quad::integrate_power_edge<double>(
                d2, h, 1.0 / (2.0 * alpha - 1.0), kEdgeLevels, kGlNodes, 0.0);
        } else {
            const double ua = t - (j + 1) * h, ub = t - tj;
            auto both = [&](double u) {
                double r = (ev.k(u) - kj).norm();
                return Eigen::Vector2d(r, r * r);
            };
            Eigen::Vector2d v = quad::integrate_gl<Eigen::Vector2d>(
                both, ua, ub, kGlNodes, Eigen::Vector2d::Zero());
            out.l1 += v[0];
            out.l2 += v[1];
        }
    }
    // at a grid point floor(t) = t and the floor reference K(t_ - s_) equals
    // K(t - s_) cell by cell, so the floor integrals coincide with the plain
    // ones; t off the grid is rejected above
    out.l1_floor = out.l1;
    out.l2_floor = out.l2;
    return out;
}

}  // namespace fsde::kernel

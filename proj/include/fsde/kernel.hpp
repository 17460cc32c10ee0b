#pragma once
// Singular convolution kernel K(u) = u^{alpha-1} E_{alpha,alpha}(A u^alpha)
// with its grid tables and the smoothing integrals used for rate checks.

#include <vector>

#include <Eigen/Dense>

namespace fsde::kernel {

// Repeated-evaluation helper. Symmetric A goes through one eigendecomposition
// so each call costs d scalar series; other A falls back to the matrix series.
class Evaluator {
  public:
    Evaluator(double alpha, const Eigen::MatrixXd& A);

    // E_{a,a}(A u^a); finite at u = 0 where it equals I / Gamma(a)
    Eigen::MatrixXd e(double u) const;
    // K(u); throws SingularArgument for u <= 0
    Eigen::MatrixXd k(double u) const;
    // E_{a,1}(A t^a), the deterministic decay factor
    Eigen::MatrixXd ml_one(double t) const;

    double alpha() const { return alpha_; }
    const Eigen::MatrixXd& A() const { return A_; }
    Eigen::Index dim() const { return A_.rows(); }

  private:
    Eigen::MatrixXd apply(double ml_b, double powered) const;
    double alpha_;
    Eigen::MatrixXd A_;
    bool symmetric_;
    Eigen::MatrixXd q_;       // eigenvectors when symmetric
    Eigen::VectorXd lambda_;  // eigenvalues when symmetric
};

Eigen::MatrixXd kernel_eval(double alpha, const Eigen::MatrixXd& A, double u);
double kernel_eval(double alpha, double a_scalar, double u);

// Kernel quantities tabulated on the uniform grid t_m = m / n over [0, 1].
struct KernelTable {
    double alpha = 0.0;
    Eigen::MatrixXd A;
    int n = 0;
    double h = 0.0;
    // index m = 1..n for k_at_grid; [0] is kept zero since K blows up at 0
    std::vector<Eigen::MatrixXd> k_at_grid;
    // E_{a,a}(A (m h)^a) for m = 0..n
    std::vector<Eigen::MatrixXd> e_at_grid;
    // integral_0^h K(m h + s) ds for m = 0..n-1; entry 0 spans the singularity
    std::vector<Eigen::MatrixXd> cell_integrals;
    // E_{a,1}(A (m h)^a) for m = 0..n
    std::vector<Eigen::MatrixXd> ml_one;

    // exact at m = 0 and m = n; T = 1
    double grid_time(int m) const { return static_cast<double>(m) / n; }
};

KernelTable build_kernel_table(double alpha, const Eigen::MatrixXd& A, int n);

// Frobenius-norm smoothing integrals at a grid point t:
//   l1       integral_0^t  |K(t - s) - K(t - s_)| ds
//   l2       same with the square
//   l1_floor integral_0^t_ |K(t - s) - K(t_ - s_)| ds
//   l2_floor same with the square
// where s_ and t_ round down to the grid. Scaling in h is h^alpha for l1
// and h^{2 alpha - 1} for l2.
struct RegularityIntegrals {
    double l1 = 0.0;
    double l2 = 0.0;
    double l1_floor = 0.0;
    double l2_floor = 0.0;
};

RegularityIntegrals regularity_integrals(double alpha, const Eigen::MatrixXd& A,
                                         int n, double t);

}  // namespace fsde::kernel

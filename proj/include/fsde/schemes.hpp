#pragma once
// Path simulation: the left-rectangle kernel scheme, its kernel-exact
// variants (which need joint Gaussian cell draws), a fine-grid reference,
// the limiting linear Volterra equation, and the limiting Gaussian sampler.

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fsde/kernel.hpp"
#include "fsde/models.hpp"

namespace fsde::schemes {

// States at grid points t_k = k h, k = 0..n.
using StatePath = std::vector<Eigen::VectorXd>;

struct PathBundle {
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;
    int n = 0;       // coarse grid count
    int m = 0;       // noise dimension
    int refine = 1;  // fine sub-steps per coarse cell
    // increments[j]: m-vector over coarse cell j; defined as the exact sum of
    // its refine fine sub-increments, so the coupling is bit-exact
    std::vector<Eigen::VectorXd> increments;
    // fine_increments[j*refine + r]: the sub-increments themselves
    std::vector<Eigen::VectorXd> fine_increments;
    // optional per-scheme state storage for callers that bundle results
    std::map<std::string, StatePath> states;
};

// Deterministic given (seed, path_index, stream, cell); streams with
// different path_index or stream values are independent.
PathBundle generate_increments(std::uint64_t seed, int n, int m, int refine,
                               std::uint64_t path_index = 0,
                               std::uint64_t stream = 0);

// Joint Gaussian draws of the exact kernel-weighted noise integrals
// G[cell][target][l] = int_{t_c}^{t_c+1} K(t_k - s) dW_s^l (a d x d matrix),
// drawn conditionally on the bundle's (finest available) increments.
struct IntervalGaussians {
    int n = 0, d = 1, m = 1;
    std::vector<int> targets;  // ascending grid indices in (0, n]
    // g[cell][target position][l]
    std::vector<std::vector<std::vector<Eigen::MatrixXd>>> g;

    const Eigen::MatrixXd& G(int cell, int target, int l) const;
    bool full() const { return static_cast<int>(targets.size()) == n; }
};

// Precomputes the per-cell joint covariances (which depend on cell position
// only through the target offsets) and their factorizations; sample() is then
// cheap per path. Caps: d <= 2, n <= 512, n*refine <= 32768.
class IntervalGaussianSampler {
  public:
    // empty targets means every grid point 1..n
    IntervalGaussianSampler(const models::ModelSpec& model,
                            const kernel::KernelTable& table, int refine,
                            std::vector<int> targets = {});

    IntervalGaussians sample(const PathBundle& bundle) const;

    // Joint covariance for one cell, conditioned variables first: the refine
    // fine increments, then d*d kernel-integral entries per target (ascending
    // targets, entries row-major over (i,j)). One noise component; the
    // components are iid.
    Eigen::MatrixXd cell_covariance(int cell) const;

    // smallest diagonal pivot seen while factorizing (exactly duplicated
    // kernel entries make this ~0; negative beyond tolerance would throw)
    double min_pivot() const { return min_pivot_; }

    const std::vector<int>& targets() const { return targets_; }

  private:
    Eigen::MatrixXd assemble(const std::vector<int>& offsets) const;
    double qpair(int o1, int o2, int e1, int e2) const;

    double alpha_, h_, hf_;
    int d_, m_, n_, refine_;
    bool full_;
    std::vector<int> targets_;
    std::vector<std::vector<int>> cell_offsets_;
    std::vector<Eigen::MatrixXd> fine_cells_;          // fine cell integrals
    std::vector<std::vector<Eigen::MatrixXd>> k_reg_;  // per offset>=2, GL nodes
    std::vector<double> reg_w_;
    std::vector<double> sing_u_, sing_w_;              // graded singular nodes
    std::vector<Eigen::MatrixXd> k_sing_;              // K at singular nodes
    std::vector<std::vector<Eigen::MatrixXd>> k_shift_;  // K((o-1)h + v) there
    Eigen::MatrixXd big_l_;                 // full-target factor (cell 0)
    std::vector<Eigen::MatrixXd> cell_l_;   // per-cell factors otherwise
    double min_pivot_ = 0.0;
};

// Convenience one-shot form of the sampler.
IntervalGaussians sample_interval_gaussians(const models::ModelSpec& model,
                                            const kernel::KernelTable& table,
                                            const PathBundle& bundle,
                                            std::vector<int> targets = {});

// Left-rectangle scheme: both the kernel argument and the coefficients are
// frozen at left grid points. O(n^2) per path.
StatePath solve_mle(const models::ModelSpec& model,
                    const kernel::KernelTable& table, const PathBundle& bundle);

// Kernel-exact variant: coefficients frozen, kernel kept inside the
// integrals; noise enters through the joint Gaussian draws. Needs draws at
// every grid point.
StatePath solve_variant_kmle(const models::ModelSpec& model,
                             const kernel::KernelTable& table,
                             const PathBundle& bundle,
                             const IntervalGaussians& ig);

// States evaluated only at the draw targets, in target order.
struct TargetStates {
    std::vector<int> targets;
    std::vector<Eigen::VectorXd> states;
};

// Kernel-exact scheme with coefficients evaluated along a previously computed
// left-rectangle path (xhat from solve_mle on the same bundle).
TargetStates solve_auxiliary(const models::ModelSpec& model,
                             const kernel::KernelTable& table,
                             const PathBundle& bundle,
                             const IntervalGaussians& ig,
                             const StatePath& xhat);

// Fine-grid left-rectangle solve on n*refine steps using the bundle's fine
// increments, restricted to the coarse grid.
StatePath reference_solution(const models::ModelSpec& model, int n_coarse,
                             int refine, const PathBundle& bundle);
StatePath reference_solution(const models::ModelSpec& model,
                             const kernel::KernelTable& fine_table, int refine,
                             const PathBundle& bundle);

// Discretization of the limiting linear Volterra equation driven by the
// path's own increments plus an independent m^2-dimensional forcing.
// x_path holds the states the coefficients are linearized at (n+1 entries on
// the table's grid); b_increments[j] has layout index = q*m + l for the
// (q,l) forcing component; kappa1 scales the forcing.
StatePath solve_limit_sve(const models::ModelSpec& model,
                          const kernel::KernelTable& table,
                          const StatePath& x_path, const PathBundle& bundle,
                          const std::vector<Eigen::VectorXd>& b_increments,
                          double kappa1);

// One draw of the limiting Gaussian at state x_t. z_draws carries d*d*m
// standard normals laid out (i*d + j)*m + l; the stated covariance makes all
// off-diagonal (i != j) entries vanish and all diagonal entries share one
// normal per noise index, so only the first m slots enter.
Eigen::VectorXd sample_r_tilde(const models::ModelSpec& model,
                               const Eigen::VectorXd& x_t, double kappa2,
                               const Eigen::VectorXd& z_draws);

}  // namespace fsde::schemes

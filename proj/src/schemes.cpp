#include "fsde/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fsde/errors.hpp"
#include "fsde/quad.hpp"

namespace fsde::schemes {
namespace {

constexpr int kGlNodes = 32;
constexpr int kEdgeLevels = 14;
constexpr double kEdgeRatio = 0.25;

// Stream layout: 0 driving noise, 1 interval draws (sampler), 2 limit-SVE
// forcing, 3 limiting-Gaussian batches. Independent across (path, stream).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t path,
                         std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path),
                      static_cast<std::uint32_t>(path >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

// L L^T = S for symmetric positive semidefinite S. Zero pivots mark exactly
// dependent coordinates (duplicated kernel entries); their columns stay zero
// so the dependent draw reproduces its duplicate.
Eigen::MatrixXd chol_semidefinite(const Eigen::MatrixXd& s, double* min_pivot) {
    const Eigen::Index nn = s.rows();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(nn, nn);
    const double scale = nn > 0 ? s.diagonal().maxCoeff() : 1.0;
    for (Eigen::Index k = 0; k < nn; ++k) {
        double d = s(k, k) - l.row(k).head(k).squaredNorm();
        if (min_pivot) *min_pivot = std::min(*min_pivot, d);
        if (d < -1e-8 * scale)
            throw CholeskyFailure(
                "joint covariance indefinite beyond tolerance");
        if (d <= 1e-12 * scale) continue;
        l(k, k) = std::sqrt(d);
        for (Eigen::Index i = k + 1; i < nn; ++i)
            l(i, k) =
                (s(i, k) - l.row(i).head(k).dot(l.row(k).head(k))) / l(k, k);
    }
    return l;
}

void check_solver_inputs(const models::ModelSpec& model,
                         const kernel::KernelTable& table,
                         const PathBundle& bundle) {
    if (model.A.rows() != model.d || table.A.rows() != model.d)
        throw DimensionMismatch("scheme: model/table dimension mismatch");
    if (std::abs(table.alpha - model.alpha) > 1e-14)
        throw InvalidParams("scheme: model and table alpha disagree");
    if (bundle.n != table.n || bundle.m != model.m ||
        static_cast<int>(bundle.increments.size()) != table.n)
        throw DimensionMismatch("scheme: bundle does not match grid");
    if (model.x0.size() != model.d)
        throw DimensionMismatch("scheme: x0 has wrong dimension");
}

}  // namespace

PathBundle generate_increments(std::uint64_t seed, int n, int m, int refine,
                               std::uint64_t path_index, std::uint64_t stream) {
    if (n < 1 || m < 1 || refine < 1)
        throw InvalidParams("generate_increments: need n, m, refine >= 1");
    PathBundle b;
    b.seed = seed;
    b.path_index = path_index;
    b.n = n;
    b.m = m;
    b.refine = refine;
    const double hf = 1.0 / (static_cast<double>(n) * refine);
    const double sf = std::sqrt(hf);
    auto rng = make_rng(seed, path_index, stream);
    std::normal_distribution<double> nd;
    b.fine_increments.resize(static_cast<std::size_t>(n) * refine);
    for (auto& v : b.fine_increments) {
        v.resize(m);
        for (int c = 0; c < m; ++c) v(c) = sf * nd(rng);
    }
    b.increments.resize(n);
    for (int j = 0; j < n; ++j) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
        for (int r = 0; r < refine; ++r) s += b.fine_increments[j * refine + r];
        b.increments[j] = s;
    }
    return b;
}

const Eigen::MatrixXd& IntervalGaussians::G(int cell, int target, int l) const {
    auto it = std::lower_bound(targets.begin(), targets.end(), target);
    if (it == targets.end() || *it != target || cell < 0 || cell >= target ||
        l < 0 || l >= m)
        throw InvalidParams("IntervalGaussians::G: bad (cell, target, l)");
    auto first = std::upper_bound(targets.begin(), targets.end(), cell);
    return g[cell][it - first][l];
}

IntervalGaussianSampler::IntervalGaussianSampler(
    const models::ModelSpec& model, const kernel::KernelTable& table,
    int refine, std::vector<int> targets)
    : alpha_(model.alpha),
      h_(table.h),
      d_(model.d),
      m_(model.m),
      n_(table.n),
      refine_(refine) {
    if (model.A.rows() != d_ || table.A.rows() != d_)
        throw DimensionMismatch("sampler: model/table dimension mismatch");
    if (std::abs(table.alpha - alpha_) > 1e-14)
        throw InvalidParams("sampler: model and table alpha disagree");
    if (refine_ < 1) throw InvalidParams("sampler: refine must be >= 1");
    if (d_ > 2 || n_ > 512 || n_ * refine_ > 32768)
        throw CapExceeded("sampler caps: d <= 2, n <= 512, n*refine <= 32768");
    hf_ = h_ / refine_;

    if (targets.empty()) {
        targets_.resize(n_);
        std::iota(targets_.begin(), targets_.end(), 1);
    } else {
        targets_ = std::move(targets);
        std::sort(targets_.begin(), targets_.end());
        targets_.erase(std::unique(targets_.begin(), targets_.end()),
                       targets_.end());
        if (targets_.front() < 1 || targets_.back() > n_)
            throw InvalidParams("sampler: targets must lie in 1..n");
    }
    full_ = static_cast<int>(targets_.size()) == n_;
    const int maxo = targets_.back();

    kernel::Evaluator ev(alpha_, model.A);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d_, d_);

    // integrals of K over fine cells; exact covariance between a fine
    // increment and a kernel integral is one of these
    const int nf = n_ * refine_;
    if (refine_ == 1) {
        fine_cells_ = table.cell_integrals;
    } else {
        auto kf = [&](double u) { return ev.k(u); };
        fine_cells_.resize(nf);
        fine_cells_[0] = quad::integrate_power_edge<Eigen::MatrixXd>(
            kf, hf_, 1.0 / alpha_, kEdgeLevels, kGlNodes, zero);
        for (int mf = 1; mf < maxo * refine_; ++mf)
            fine_cells_[mf] = quad::integrate_gl<Eigen::MatrixXd>(
                kf, mf * hf_, (mf + 1) * hf_, kGlNodes, zero);
        for (int mf = maxo * refine_; mf < nf; ++mf) fine_cells_[mf] = zero;
    }

    // kernel values at shared product-quadrature nodes: plain Gauss nodes for
    // offsets >= 2 (smooth on the cell), a power-substituted graded family
    // for the offset-1 pairs whose integrand is singular at the cell edge
    const quad::GlRule& gl = quad::gl_rule(kGlNodes);
    std::vector<double> reg_u(kGlNodes);
    reg_w_.resize(kGlNodes);
    for (int g = 0; g < kGlNodes; ++g) {
        reg_u[g] = 0.5 * h_ * (1.0 + gl.nodes[g]);
        reg_w_[g] = 0.5 * h_ * gl.weights[g];
    }
    k_reg_.resize(maxo + 1);
    for (int o = 2; o <= maxo; ++o) {
        k_reg_[o].resize(kGlNodes);
        for (int g = 0; g < kGlNodes; ++g)
            k_reg_[o][g] = ev.k(o * h_ - reg_u[g]);
    }

    const double p = 1.0 / (2.0 * alpha_ - 1.0);
    double hi = 1.0;
    for (int lev = 1; lev <= kEdgeLevels; ++lev) {
        const double lo = (lev == kEdgeLevels) ? 0.0 : std::pow(kEdgeRatio, lev);
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int g = 0; g < kGlNodes; ++g) {
            const double w = mid + half * gl.nodes[g];
            sing_u_.push_back(h_ * std::pow(w, p));
            sing_w_.push_back(half * gl.weights[g] * h_ * p *
                              std::pow(w, p - 1.0));
        }
        hi = lo;
    }
    k_sing_.resize(sing_u_.size());
    for (std::size_t g = 0; g < sing_u_.size(); ++g)
        k_sing_[g] = ev.k(sing_u_[g]);

    // per-cell target offsets
    cell_offsets_.resize(n_);
    for (int c = 0; c < n_; ++c) {
        auto it = std::upper_bound(targets_.begin(), targets_.end(), c);
        for (; it != targets_.end(); ++it)
            cell_offsets_[c].push_back(*it - c);
    }

    // shifted kernel values are only needed for offsets paired with offset 1
    std::vector<char> need_shift(maxo + 1, 0);
    for (int c = 0; c < n_; ++c) {
        const auto& os = cell_offsets_[c];
        if (os.empty() || os.front() != 1) continue;
        for (std::size_t a = 1; a < os.size(); ++a) need_shift[os[a]] = 1;
    }
    k_shift_.resize(maxo + 1);
    for (int o = 2; o <= maxo; ++o) {
        if (!need_shift[o]) continue;
        k_shift_[o].resize(sing_u_.size());
        for (std::size_t g = 0; g < sing_u_.size(); ++g)
            k_shift_[o][g] = ev.k((o - 1) * h_ + sing_u_[g]);
    }

    min_pivot_ = std::numeric_limits<double>::infinity();
    if (full_) {
        big_l_ = chol_semidefinite(assemble(cell_offsets_[0]), &min_pivot_);
    } else {
        cell_l_.resize(n_);
        for (int c = 0; c < n_; ++c)
            if (!cell_offsets_[c].empty())
                cell_l_[c] =
                    chol_semidefinite(assemble(cell_offsets_[c]), &min_pivot_);
    }
}

double IntervalGaussianSampler::qpair(int o1, int o2, int e1, int e2) const {
    if (o1 > o2) {
        std::swap(o1, o2);
        std::swap(e1, e2);
    }
    const int i1 = e1 / d_, j1 = e1 % d_, i2 = e2 / d_, j2 = e2 % d_;
    double acc = 0.0;
    if (o1 >= 2) {
        const auto& k1 = k_reg_[o1];
        const auto& k2 = k_reg_[o2];
        for (std::size_t g = 0; g < reg_w_.size(); ++g)
            acc += reg_w_[g] * k1[g](i1, j1) * k2[g](i2, j2);
    } else if (o2 >= 2) {
        const auto& k2 = k_shift_[o2];
        for (std::size_t g = 0; g < sing_w_.size(); ++g)
            acc += sing_w_[g] * k_sing_[g](i1, j1) * k2[g](i2, j2);
    } else {
        for (std::size_t g = 0; g < sing_w_.size(); ++g)
            acc += sing_w_[g] * k_sing_[g](i1, j1) * k_sing_[g](i2, j2);
    }
    return acc;
}

Eigen::MatrixXd IntervalGaussianSampler::assemble(
    const std::vector<int>& os) const {
    const int M = refine_, dd = d_ * d_;
    const int no = static_cast<int>(os.size());
    const int dim = M + dd * no;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
    for (int r = 0; r < M; ++r) s(r, r) = hf_;
    for (int a = 0; a < no; ++a) {
        const int o = os[a];
        for (int r = 0; r < M; ++r) {
            const Eigen::MatrixXd& fc = fine_cells_[o * M - r - 1];
            for (int i = 0; i < d_; ++i)
                for (int j = 0; j < d_; ++j) {
                    s(r, M + a * dd + i * d_ + j) = fc(i, j);
                    s(M + a * dd + i * d_ + j, r) = fc(i, j);
                }
        }
    }
    for (int a1 = 0; a1 < no; ++a1)
        for (int a2 = a1; a2 < no; ++a2)
            for (int e1 = 0; e1 < dd; ++e1)
                for (int e2 = 0; e2 < dd; ++e2) {
                    const double v = qpair(os[a1], os[a2], e1, e2);
                    s(M + a1 * dd + e1, M + a2 * dd + e2) = v;
                    s(M + a2 * dd + e2, M + a1 * dd + e1) = v;
                }
    return s;
}

Eigen::MatrixXd IntervalGaussianSampler::cell_covariance(int cell) const {
    if (cell < 0 || cell >= n_)
        throw InvalidParams("cell_covariance: cell out of range");
    return assemble(cell_offsets_[cell]);
}

IntervalGaussians IntervalGaussianSampler::sample(
    const PathBundle& bundle) const {
    if (bundle.n != n_ || bundle.m != m_ || bundle.refine != refine_ ||
        static_cast<int>(bundle.fine_increments.size()) != n_ * refine_)
        throw DimensionMismatch("sample: bundle does not match sampler");
    IntervalGaussians ig;
    ig.n = n_;
    ig.d = d_;
    ig.m = m_;
    ig.targets = targets_;
    ig.g.resize(n_);
    auto rng = make_rng(bundle.seed, bundle.path_index, 1);
    std::normal_distribution<double> nd;
    const int M = refine_, dd = d_ * d_;
    const double isf = 1.0 / std::sqrt(hf_);
    Eigen::VectorXd z, vg;
    for (int c = 0; c < n_; ++c) {
        const auto& os = cell_offsets_[c];
        if (os.empty()) continue;
        const int no = static_cast<int>(os.size());
        const int dim = M + dd * no;
        z.resize(dim);
        ig.g[c].assign(no, std::vector<Eigen::MatrixXd>(m_));
        for (int l = 0; l < m_; ++l) {
            for (int r = 0; r < M; ++r)
                z(r) = bundle.fine_increments[c * M + r](l) * isf;
            for (int i = M; i < dim; ++i) z(i) = nd(rng);
            if (full_)
                vg.noalias() = big_l_.block(M, 0, dd * no, dim) * z;
            else
                vg = (cell_l_[c] * z).tail(dd * no);
            for (int a = 0; a < no; ++a) {
                Eigen::MatrixXd& gm = ig.g[c][a][l];
                gm.resize(d_, d_);
                for (int i = 0; i < d_; ++i)
                    for (int j = 0; j < d_; ++j)
                        gm(i, j) = vg(a * dd + i * d_ + j);
            }
        }
    }
    return ig;
}

IntervalGaussians sample_interval_gaussians(const models::ModelSpec& model,
                                            const kernel::KernelTable& table,
                                            const PathBundle& bundle,
                                            std::vector<int> targets) {
    IntervalGaussianSampler s(model, table, bundle.refine, std::move(targets));
    return s.sample(bundle);
}

StatePath solve_mle(const models::ModelSpec& model,
                    const kernel::KernelTable& table,
                    const PathBundle& bundle) {
    check_solver_inputs(model, table, bundle);
    const int n = table.n;
    const double h = table.h;
    if (model.d == 1 && model.m == 1) {
        // scalar fast path; the O(n^2) convolution dominates fine-grid
        // reference solves, so keep it free of per-entry Eigen overhead
        std::vector<double> kg(n + 1), u(n), xv(n + 1);
        for (int k = 1; k <= n; ++k) kg[k] = table.k_at_grid[k](0, 0);
        xv[0] = model.x0(0);
        Eigen::VectorXd xs(1);
        for (int k = 1; k <= n; ++k) {
            xs(0) = xv[k - 1];
            u[k - 1] = h * model.drift(xs)(0) +
                       model.diffusion(xs)(0, 0) * bundle.increments[k - 1](0);
            double acc = table.ml_one[k](0, 0) * xv[0];
            for (int j = 0; j < k; ++j) acc += kg[k - j] * u[j];
            if (!std::isfinite(acc))
                throw NonFinite("left-rectangle scheme state left finite range");
            xv[k] = acc;
        }
        StatePath xs_out(n + 1);
        for (int k = 0; k <= n; ++k)
            xs_out[k] = Eigen::VectorXd::Constant(1, xv[k]);
        return xs_out;
    }
    StatePath x(n + 1);
    x[0] = model.x0;
    std::vector<Eigen::VectorXd> u(n);  // h b(X_j) + sigma(X_j) dW_j per cell
    for (int k = 1; k <= n; ++k) {
        const Eigen::VectorXd& xp = x[k - 1];
        u[k - 1] = h * model.drift(xp) +
                   model.diffusion(xp) * bundle.increments[k - 1];
        Eigen::VectorXd acc = table.ml_one[k] * model.x0;
        for (int j = 0; j < k; ++j)
            acc.noalias() += table.k_at_grid[k - j] * u[j];
        x[k] = std::move(acc);
        if (!x[k].allFinite())
            throw NonFinite("left-rectangle scheme state left finite range");
    }
    return x;
}

StatePath solve_variant_kmle(const models::ModelSpec& model,
                             const kernel::KernelTable& table,
                             const PathBundle& bundle,
                             const IntervalGaussians& ig) {
    check_solver_inputs(model, table, bundle);
    const int n = table.n;
    if (!ig.full() || ig.n != n || ig.d != model.d || ig.m != model.m)
        throw InvalidParams("kernel-exact scheme needs draws at every target");
    StatePath x(n + 1);
    x[0] = model.x0;
    std::vector<Eigen::VectorXd> b(n);
    std::vector<Eigen::MatrixXd> sg(n);
    for (int k = 1; k <= n; ++k) {
        b[k - 1] = model.drift(x[k - 1]);
        sg[k - 1] = model.diffusion(x[k - 1]);
        Eigen::VectorXd acc = table.ml_one[k] * model.x0;
        for (int j = 0; j < k; ++j) {
            acc.noalias() += table.cell_integrals[k - j - 1] * b[j];
            // full targets: position of target k within cell j is k - j - 1
            const auto& gk = ig.g[j][k - j - 1];
            for (int l = 0; l < model.m; ++l)
                acc.noalias() += gk[l] * sg[j].col(l);
        }
        x[k] = std::move(acc);
        if (!x[k].allFinite())
            throw NonFinite("kernel-exact scheme state left finite range");
    }
    return x;
}

TargetStates solve_auxiliary(const models::ModelSpec& model,
                             const kernel::KernelTable& table,
                             const PathBundle& bundle,
                             const IntervalGaussians& ig,
                             const StatePath& xhat) {
    check_solver_inputs(model, table, bundle);
    const int n = table.n;
    if (ig.n != n || ig.d != model.d || ig.m != model.m)
        throw DimensionMismatch("auxiliary: draws built for another grid");
    if (static_cast<int>(xhat.size()) != n + 1)
        throw DimensionMismatch("auxiliary: coefficient path has wrong length");
    TargetStates out;
    out.targets = ig.targets;
    out.states.reserve(out.targets.size());
    const int kmax = out.targets.back();
    std::vector<Eigen::VectorXd> b(kmax);
    std::vector<Eigen::MatrixXd> sg(kmax);
    for (int j = 0; j < kmax; ++j) {
        b[j] = model.drift(xhat[j]);
        sg[j] = model.diffusion(xhat[j]);
    }
    // number of targets <= j, to locate target positions inside each cell
    std::vector<int> cnt_le(kmax + 1, 0);
    {
        int c = 0;
        for (int j = 0; j <= kmax; ++j) {
            while (c < static_cast<int>(out.targets.size()) &&
                   out.targets[c] <= j)
                ++c;
            cnt_le[j] = c;
        }
    }
    for (std::size_t ti = 0; ti < out.targets.size(); ++ti) {
        const int k = out.targets[ti];
        Eigen::VectorXd acc = table.ml_one[k] * model.x0;
        for (int j = 0; j < k; ++j) {
            acc.noalias() += table.cell_integrals[k - j - 1] * b[j];
            const auto& gk = ig.g[j][static_cast<int>(ti) - cnt_le[j]];
            for (int l = 0; l < model.m; ++l)
                acc.noalias() += gk[l] * sg[j].col(l);
        }
        if (!acc.allFinite())
            throw NonFinite("auxiliary scheme state left finite range");
        out.states.push_back(std::move(acc));
    }
    return out;
}

StatePath reference_solution(const models::ModelSpec& model,
                             const kernel::KernelTable& fine_table, int refine,
                             const PathBundle& bundle) {
    if (refine < 1 || bundle.refine != refine ||
        fine_table.n != bundle.n * refine)
        throw DimensionMismatch("reference: table/bundle refinement mismatch");
    PathBundle fb;
    fb.seed = bundle.seed;
    fb.path_index = bundle.path_index;
    fb.n = fine_table.n;
    fb.m = bundle.m;
    fb.refine = 1;
    fb.increments = bundle.fine_increments;
    StatePath fine = solve_mle(model, fine_table, fb);
    StatePath out(bundle.n + 1);
    for (int k = 0; k <= bundle.n; ++k) out[k] = std::move(fine[k * refine]);
    return out;
}

StatePath reference_solution(const models::ModelSpec& model, int n_coarse,
                             int refine, const PathBundle& bundle) {
    if (bundle.n != n_coarse)
        throw DimensionMismatch("reference: bundle built for another grid");
    kernel::KernelTable ft =
        kernel::build_kernel_table(model.alpha, model.A, n_coarse * refine);
    return reference_solution(model, ft, refine, bundle);
}

StatePath solve_limit_sve(const models::ModelSpec& model,
                          const kernel::KernelTable& table,
                          const StatePath& x_path, const PathBundle& bundle,
                          const std::vector<Eigen::VectorXd>& b_increments,
                          double kappa1) {
    check_solver_inputs(model, table, bundle);
    if (!model.drift_jacobian || !model.diffusion_jacobian)
        throw InvalidParams("limit equation needs coefficient derivatives");
    const int n = table.n, d = model.d, m = model.m;
    if (static_cast<int>(x_path.size()) != n + 1 ||
        static_cast<int>(b_increments.size()) != n)
        throw DimensionMismatch("limit equation: path/forcing length mismatch");
    if (!std::isfinite(kappa1) || kappa1 < 0.0)
        throw InvalidParams("limit equation: bad forcing scale");
    const double h = table.h;
    StatePath y(n + 1);
    y[0] = Eigen::VectorXd::Zero(d);
    std::vector<Eigen::VectorXd> f(n);
    Eigen::MatrixXd jl(d, d);
    for (int k = 1; k <= n; ++k) {
        const int j = k - 1;
        const Eigen::VectorXd& xj = x_path[j];
        const Eigen::VectorXd& yj = y[j];
        const Eigen::VectorXd& db = b_increments[j];
        if (db.size() != static_cast<Eigen::Index>(m) * m)
            throw DimensionMismatch("limit equation: forcing needs m*m slots");
        models::DiffusionJacobian sk = model.diffusion_jacobian(xj);
        if (static_cast<int>(sk.size()) != d)
            throw DimensionMismatch("limit equation: bad diffusion jacobian");
        const Eigen::MatrixXd sig = model.diffusion(xj);
        Eigen::VectorXd fj = h * (model.drift_jacobian(xj) * yj);
        for (int l = 0; l < m; ++l) {
            for (int col = 0; col < d; ++col)
                for (int row = 0; row < d; ++row) jl(row, col) = sk[col](row, l);
            fj.noalias() += (jl * yj) * bundle.increments[j](l);
            Eigen::VectorXd bl(m);
            for (int q = 0; q < m; ++q) bl(q) = db(q * m + l);
            fj.noalias() += kappa1 * (jl * (sig * bl));
        }
        f[j] = std::move(fj);
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
        for (int jj = 0; jj < k; ++jj)
            acc.noalias() += table.k_at_grid[k - jj] * f[jj];
        y[k] = std::move(acc);
        if (!y[k].allFinite())
            throw NonFinite("limit equation state left finite range");
    }
    return y;
}

Eigen::VectorXd sample_r_tilde(const models::ModelSpec& model,
                               const Eigen::VectorXd& x_t, double kappa2,
                               const Eigen::VectorXd& z_draws) {
    const int d = model.d, m = model.m;
    if (x_t.size() != d)
        throw DimensionMismatch("limiting gaussian: state has wrong dimension");
    if (z_draws.size() != static_cast<Eigen::Index>(d) * d * m)
        throw DimensionMismatch("limiting gaussian: needs d*d*m draws");
    if (!std::isfinite(kappa2) || kappa2 < 0.0)
        throw InvalidParams("limiting gaussian: bad scale");
    // off-diagonal (i != j) components are a.s. zero and every diagonal
    // component shares one normal per noise index, so only slots
    // (0,0,l) = z[l] enter
    return kappa2 * (model.diffusion(x_t) * z_draws.head(m));
}

}  // namespace fsde::schemes

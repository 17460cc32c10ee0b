// Acceptance suite: one criterion per block, each printing a single
// PASS/FAIL line (details on failure) and enforcing its runtime budget.
// Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fsde/analysis.hpp"
#include "fsde/cli.hpp"
#include "fsde/constants.hpp"
#include "fsde/kernel.hpp"
#include "fsde/mlf.hpp"
#include "fsde/models.hpp"
#include "fsde/schemes.hpp"

using namespace fsde;
namespace fs = std::filesystem;

namespace {

struct Result {
    bool pass = true;
    std::vector<std::string> details;

    void check(bool ok, const std::string& detail) {
        if (!ok) {
            pass = false;
            details.push_back(detail);
        }
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::abs(want);
}

fs::path work_dir(const std::string& leaf) {
    fs::path p = fs::temp_directory_path() / "fsde_acceptance" / leaf;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// non-comment lines of a CSV artifact
std::vector<std::string> csv_body(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') lines.push_back(line);
    return lines;
}

// ---------------------------------------------------------------------------
// 1. special function identities

void criterion_identities(Result& r) {
    for (int z = -5; z <= 5; ++z) {
        double got = mlf::ml_scalar({1.0, 1.0}, z);
        double want = std::exp(z);
        r.check(std::abs(got - want) <= 1e-12 * std::abs(want),
                "series at (1,1," + std::to_string(z) + "): rel gap " +
                    num(rel_err(got, want)));
    }
    const double pairs[][2] = {
        {0.55, 1.0}, {0.75, 0.75}, {0.75, 1.75}, {0.9, 0.5}, {1.0, 1.0}};
    for (auto [a, b] : pairs)
        r.check(mlf::ml_scalar({a, b}, 0.0) == 1.0 / mlf::gamma_fn(b),
                "value at z=0 not exactly 1/gamma(b) for a=" + num(a) +
                    ", b=" + num(b));

    // d/dt [t^{b-1} E_{a,b}(-l t^a)] against central differences
    const double a = 0.75, lam = 1.0, fd = 1e-5;
    auto F = [&](double b, double t) {
        return std::pow(t, b - 1.0) *
               mlf::ml_scalar({a, b}, -lam * std::pow(t, a));
    };
    for (double t : {0.3, 0.7, 1.1}) {
        double d1 = (F(1.0, t + fd) - F(1.0, t - fd)) / (2.0 * fd);
        double want1 = -lam * std::pow(t, a - 1.0) *
                       mlf::ml_scalar({a, a}, -lam * std::pow(t, a));
        r.check(rel_err(d1, want1) <= 1e-6,
                "derivative (b=1) at t=" + num(t) + ": rel gap " +
                    num(rel_err(d1, want1)));
        double b = a + 1.0;
        double d2 = (F(b, t + fd) - F(b, t - fd)) / (2.0 * fd);
        double want2 = std::pow(t, b - 2.0) *
                       mlf::ml_scalar({a, b - 1.0}, -lam * std::pow(t, a));
        r.check(rel_err(d2, want2) <= 1e-6,
                "derivative (b=a+1) at t=" + num(t) + ": rel gap " +
                    num(rel_err(d2, want2)));
    }
}

// ---------------------------------------------------------------------------
// 2. limit-constant consistency

void criterion_constants(Result& r) {
    const double alphas[] = {0.55, 0.60, 0.65, 0.70, 0.75,
                             0.80, 0.85, 0.90, 0.95};
    for (double a : alphas) {
        double k1 = constants::kappa1_sq(a);
        double k11 = constants::kappa11_sq(a);
        double g = mlf::gamma_fn(a);
        double expected = 1.0 / (g * g * 2.0 * a * (2.0 * a - 1.0));
        double gap = std::abs(k1 - k11 - expected);
        r.check(gap <= 1e-10, "decomposition gap " + num(gap) + " at alpha=" +
                                  num(a) + " exceeds 1e-10");
    }
    // high-precision brute-force reference values
    struct Ref {
        double (*fn)(double, const constants::QuadConfig&);
        double alpha, value;
        const char* name;
    };
    const Ref refs[] = {
        {constants::kappa11_sq, 0.60, 0.044091145653778286, "kappa11_sq"},
        {constants::kappa11_sq, 0.75, 0.02039385376780404, "kappa11_sq"},
        {constants::kappa11_sq, 0.90, 0.0037591197793568045, "kappa11_sq"},
        {constants::kappa1_sq, 0.75, 0.90830834843900474, "kappa1_sq"},
        {constants::kappa2_sq, 0.60, 1.2126004478079786, "kappa2_sq"},
        {constants::kappa2_sq, 0.75, 0.22936898240851198, "kappa2_sq"},
        {constants::kappa2_sq, 0.90, 0.026362455516245615, "kappa2_sq"},
    };
    for (const auto& ref : refs) {
        double got = ref.fn(ref.alpha, {});
        r.check(rel_err(got, ref.value) <= 1e-6,
                std::string(ref.name) + "(" + num(ref.alpha) +
                    ") off reference by rel " + num(rel_err(got, ref.value)));
    }
}

// ---------------------------------------------------------------------------
// 3. normalized covariance approaches its limit

void criterion_mn_limit(Result& r) {
    Eigen::MatrixXd A(1, 1);
    A(0, 0) = -1.0;
    double target = constants::kappa2_sq(0.75);
    std::vector<double> gaps;
    for (int n : {16, 64, 256, 1024}) {
        double v = analysis::mn_covariance_quadrature({}, 0.75, A, n, 1.0);
        gaps.push_back(std::abs(v - target) / target);
    }
    for (size_t i = 1; i < gaps.size(); ++i)
        r.check(gaps[i] <= gaps[i - 1] * 1.01,
                "gap fails to decrease at step " + std::to_string(i) + ": " +
                    num(gaps[i - 1]) + " -> " + num(gaps[i]));
    r.check(gaps.back() <= 0.05,
            "terminal relative gap " + num(gaps.back()) + " exceeds 0.05");
}

// ---------------------------------------------------------------------------
// 4. kernel smoothing-integral decay rates

void criterion_kernel_rates(Result& r) {
    const std::vector<int> ns = {8, 16, 32, 64, 128};
    std::vector<double> hs;
    for (int n : ns) hs.push_back(1.0 / n);
    for (const char* name : {"bilinear_scalar", "coupled_2d"}) {
        for (double alpha : {0.6, 0.75, 0.9}) {
            auto model = models::builtin_model(name, alpha);
            std::vector<kernel::RegularityIntegrals> ri;
            for (int n : ns)
                ri.push_back(
                    kernel::regularity_integrals(alpha, model.A, n, 1.0));
            struct Form {
                const char* id;
                double target;
                double (*pick)(const kernel::RegularityIntegrals&);
            };
            const Form forms[] = {
                {"l1", alpha, [](const kernel::RegularityIntegrals& g) { return g.l1; }},
                {"l2", 2 * alpha - 1, [](const kernel::RegularityIntegrals& g) { return g.l2; }},
                {"l1_floor", alpha, [](const kernel::RegularityIntegrals& g) { return g.l1_floor; }},
                {"l2_floor", 2 * alpha - 1, [](const kernel::RegularityIntegrals& g) { return g.l2_floor; }},
            };
            for (const auto& form : forms) {
                std::vector<double> vals;
                for (const auto& g : ri) vals.push_back(form.pick(g));
                double slope = analysis::fit_order(hs, vals).slope;
                r.check(std::abs(slope - form.target) <= 0.05,
                        std::string(name) + " alpha=" + num(alpha) + " " +
                            form.id + ": slope " + num(slope) + " vs target " +
                            num(form.target) + " (gap " +
                            num(std::abs(slope - form.target)) + " > 0.05)");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 5. strong convergence order against a refined reference

void criterion_strong_order(Result& r) {
    const fs::path dir = work_dir("strong");
    struct Case {
        double alpha, lo, hi;
    };
    for (const Case& c :
         {Case{0.75, 0.15, 0.35}, Case{0.6, 0.0, 0.2}, Case{0.9, 0.3, 0.5}}) {
        auto cfg = cli::default_config("strong-order");
        cfg.alpha = {c.alpha};
        cfg.out_dir = (dir / num(c.alpha)).string();
        auto run = cli::run_experiment(cfg);
        double slope = run.report.fit.slope;
        r.check(run.report.has_fit && slope >= c.lo && slope <= c.hi,
                "alpha=" + num(c.alpha) + ": slope " + num(slope) +
                    " outside [" + num(c.lo) + ", " + num(c.hi) + "]");
    }
}

// ---------------------------------------------------------------------------
// 6. normalized scheme-difference distribution

void criterion_error_distribution(Result& r) {
    const fs::path dir = work_dir("errdist");
    double kappa2 = constants::kappa2_sq(0.75);  // additive noise: sigma = 1
    int ks_passes = 0, var_passes = 0;
    for (std::uint64_t seed : {42ull, 43ull, 44ull}) {
        auto cfg = cli::default_config("error-dist");
        cfg.seed = seed;
        cfg.out_dir = (dir / std::to_string(seed)).string();
        auto run = cli::run_experiment(cfg);
        const auto& dt = run.report.dist_tests.at(0);
        if (dt.p_value > 0.01) ++ks_passes;
        double gap = std::abs(dt.moments.variance - kappa2);
        bool var_ok = gap <= 3.0 * dt.moments.se_variance;
        if (var_ok) ++var_passes;
        if (dt.p_value <= 0.01 || !var_ok)
            r.details.push_back("  seed " + std::to_string(seed) + ": p=" +
                                num(dt.p_value) + ", var=" +
                                num(dt.moments.variance) + " vs " +
                                num(kappa2) + " (" +
                                num(gap / dt.moments.se_variance) + " se)");
    }
    r.check(ks_passes >= 2, "KS passed only " + std::to_string(ks_passes) +
                                " of 3 seeds at p > 0.01");
    r.check(var_passes >= 2,
            "variance matched the limit constant in only " +
                std::to_string(var_passes) + " of 3 seeds (3 se)");
}

// ---------------------------------------------------------------------------
// 7. degenerate limit equation and reference-gap decay

void criterion_y_degenerate(Result& r) {
    auto model = models::builtin_model("additive_scalar", 0.75);
    double kappa1 = std::sqrt(constants::kappa1_sq(0.75));

    // additive noise freezes the limiting linear equation at zero, exactly
    auto table = kernel::build_kernel_table(0.75, model.A, 64);
    auto bundle = schemes::generate_increments(7, 64, 1, 1);
    auto xhat = schemes::solve_mle(model, table, bundle);
    auto forcing = schemes::generate_increments(7, 64, 1, 1, 0, 2);
    auto y = schemes::solve_limit_sve(model, table, xhat, bundle,
                                      forcing.increments, kappa1);
    double sup = 0.0;
    for (const auto& yk : y) sup = std::max(sup, yk.lpNorm<Eigen::Infinity>());
    r.check(sup == 0.0, "limit equation output not exactly zero: sup " +
                            num(sup));

    // variance of the normalized gap to the refined reference must at least
    // halve when n grows 64 -> 256 (refinement grows with n)
    auto gap_variance = [&](int n, int refine, int paths) {
        auto tab = kernel::build_kernel_table(0.75, model.A, n);
        auto fine = kernel::build_kernel_table(0.75, model.A, n * refine);
        schemes::IntervalGaussianSampler sampler(model, tab, refine, {n});
        double scale = std::pow(n, 0.25);
        std::vector<double> xs(paths);
        for (int p = 0; p < paths; ++p) {
            auto b = schemes::generate_increments(42, n, 1, refine, p);
            auto ref = schemes::reference_solution(model, fine, refine, b);
            auto xh = schemes::solve_mle(model, tab, b);
            auto ig = sampler.sample(b);
            auto aux = schemes::solve_auxiliary(model, tab, b, ig, xh);
            xs[p] = scale * (ref.back()(0) - aux.states[0](0));
        }
        return analysis::moment_summary(xs).variance;
    };
    double v64 = gap_variance(64, 8, 4000);
    double v256 = gap_variance(256, 64, 600);
    r.check(v256 <= 0.5 * v64, "variance ratio " + num(v256 / v64) +
                                   " (" + num(v64) + " -> " + num(v256) +
                                   ") fails to halve");
}

// ---------------------------------------------------------------------------
// 8. limiting Gaussian sampler moments

void criterion_r_tilde(Result& r) {
    auto model = models::builtin_model("coupled_2d", 0.75);
    double kappa2 = std::sqrt(constants::kappa2_sq(0.75));
    auto sigma = model.diffusion(model.x0);  // diagonal by construction

    const int n_draws = 1'000'000;
    std::mt19937_64 rng(828282);
    std::normal_distribution<double> normal;
    std::vector<double> r0(n_draws), r1(n_draws);
    Eigen::VectorXd z(model.d * model.d * model.m);
    for (int i = 0; i < n_draws; ++i) {
        for (int k = 0; k < z.size(); ++k) z(k) = normal(rng);
        Eigen::VectorXd draw = schemes::sample_r_tilde(model, model.x0,
                                                       kappa2, z);
        r0[i] = draw(0);
        r1[i] = draw(1);
    }
    auto m0 = analysis::moment_summary(r0);
    auto m1 = analysis::moment_summary(r1);
    double cov = 0.0;
    for (int i = 0; i < n_draws; ++i)
        cov += (r0[i] - m0.mean) * (r1[i] - m1.mean);
    cov /= n_draws - 1;
    double se_cov =
        std::sqrt((m0.variance * m1.variance + cov * cov) / n_draws);

    double t0 = kappa2 * kappa2 * sigma(0, 0) * sigma(0, 0);
    double t1 = kappa2 * kappa2 * sigma(1, 1) * sigma(1, 1);
    r.check(std::abs(m0.variance - t0) <= 3.0 * m0.se_variance,
            "component 1 variance " + num(m0.variance) + " vs " + num(t0) +
                " (" + num(std::abs(m0.variance - t0) / m0.se_variance) +
                " se)");
    r.check(std::abs(m1.variance - t1) <= 3.0 * m1.se_variance,
            "component 2 variance " + num(m1.variance) + " vs " + num(t1) +
                " (" + num(std::abs(m1.variance - t1) / m1.se_variance) +
                " se)");
    r.check(std::abs(cov) <= 3.0 * se_cov,
            "cross covariance " + num(cov) + " vs 0 (" +
                num(std::abs(cov) / se_cov) + " se)");
}

// ---------------------------------------------------------------------------
// 9. byte-identical artifacts across runs and worker counts

void criterion_determinism(Result& r) {
    const fs::path root = work_dir("determinism");
    std::vector<cli::ExperimentConfig> cfgs;
    cfgs.push_back(cli::default_config("ml-eval"));
    cfgs.push_back(cli::default_config("kernel-check"));
    cfgs.push_back(cli::default_config("kappa"));
    {
        auto c = cli::default_config("mn-cov");
        c.n = {16, 64};
        cfgs.push_back(c);
    }
    {
        auto c = cli::default_config("strong-order");
        c.n = {8, 16, 32, 64};
        c.paths = 150;
        c.refine = {8};
        cfgs.push_back(c);
    }
    {
        auto c = cli::default_config("error-dist");
        c.n = {64};
        c.paths = 500;
        cfgs.push_back(c);
    }
    {
        auto c = cli::default_config("y-limit");
        c.n = {32, 64};
        c.refine = {4, 8};
        c.paths = 120;
        cfgs.push_back(c);
    }
    {
        auto c = cli::default_config("simulate");
        c.n = {32};
        c.paths = 40;
        c.scheme = "kmle";
        cfgs.push_back(c);
    }

    for (auto& cfg : cfgs) {
        cfg.workers = 1;
        cfg.out_dir = (root / (cfg.subcommand + "_a")).string();
        auto run_a = cli::run_experiment(cfg);
        cfg.workers = 3;
        cfg.out_dir = (root / (cfg.subcommand + "_b")).string();
        auto run_b = cli::run_experiment(cfg);
        r.check(run_a.artifacts.size() == run_b.artifacts.size(),
                cfg.subcommand + ": artifact count differs");
        for (size_t i = 0; i < run_a.artifacts.size(); ++i) {
            bool same = csv_body(run_a.artifacts[i]) ==
                        csv_body(run_b.artifacts[i]);
            r.check(same, cfg.subcommand + ": body of " +
                              fs::path(run_a.artifacts[i]).filename().string() +
                              " changed with the worker count");
        }
    }
}

}  // namespace

int main() {
    struct Criterion {
        const char* title;
        double budget_s;
        void (*body)(Result&);
    };
    const std::vector<Criterion> criteria = {
        {"special function identities", 1, criterion_identities},
        {"limit constant consistency", 30, criterion_constants},
        {"normalized covariance limit", 60, criterion_mn_limit},
        {"kernel smoothing decay rates", 60, criterion_kernel_rates},
        {"strong convergence order", 600, criterion_strong_order},
        {"scheme-difference distribution", 600, criterion_error_distribution},
        {"degenerate limit equation", 300, criterion_y_degenerate},
        {"limiting Gaussian sampler moments", 60, criterion_r_tilde},
        {"deterministic artifacts", 900, criterion_determinism},
    };

    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        Result res;
        auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(res);
        } catch (const std::exception& e) {
            res.check(false, std::string("exception: ") + e.what());
        }
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        res.check(elapsed <= c.budget_s,
                  "runtime " + num(elapsed) + "s exceeds budget " +
                      num(c.budget_s) + "s");

        std::string title = c.title;
        title.resize(40, '.');
        std::printf("[%zu/9] %s %s  (%.1fs)\n", i + 1, title.c_str(),
                    res.pass ? "PASS" : "FAIL", elapsed);
        for (const auto& d : res.details) std::printf("      %s\n", d.c_str());
        if (!res.pass) ++failed;
    }
    std::printf("acceptance: %d of 9 criteria passed\n",
                9 - failed);
    return failed;
}

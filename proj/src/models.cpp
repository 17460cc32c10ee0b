#include "fsde/models.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fsde/errors.hpp"

namespace fsde::models {

namespace {

Eigen::MatrixXd scalar_mat(double v) {
    Eigen::MatrixXd a(1, 1);
    a(0, 0) = v;
    return a;
}

void check_alpha(double alpha) {
    if (!(alpha > 0.5 && alpha < 1.0))
        throw InvalidParams("order must lie in (1/2, 1), got " +
                            std::to_string(alpha));
}

ModelSpec make_additive(double alpha) {
    ModelSpec s;
    s.name = "additive_scalar";
    s.alpha = alpha;
    s.A = scalar_mat(-1.0);
    s.d = s.m = 1;
    s.drift = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Zero(x.size()).eval();
    };
    s.diffusion = [](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Ones(1, 1).eval();
    };
    s.drift_jacobian = [](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Zero(1, 1).eval();
    };
    s.diffusion_jacobian = [](const Eigen::VectorXd&) {
        return DiffusionJacobian{Eigen::MatrixXd::Zero(1, 1)};
    };
    s.x0 = Eigen::VectorXd::Zero(1);
    return s;
}

ModelSpec make_bilinear(double alpha) {
    ModelSpec s;
    s.name = "bilinear_scalar";
    s.alpha = alpha;
    s.A = scalar_mat(-1.0);
    s.d = s.m = 1;
    s.drift = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(1);
        v(0) = 0.5 * std::sin(x(0));
        return v;
    };
    s.diffusion = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd v(1, 1);
        v(0, 0) = 0.5 * std::cos(x(0)) + 1.0;
        return v;
    };
    s.drift_jacobian = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd v(1, 1);
        v(0, 0) = 0.5 * std::cos(x(0));
        return v;
    };
    s.diffusion_jacobian = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd v(1, 1);
        v(0, 0) = -0.5 * std::sin(x(0));
        return DiffusionJacobian{v};
    };
    s.x0 = Eigen::VectorXd::Ones(1);
    return s;
}

ModelSpec make_coupled(double alpha) {
    ModelSpec s;
    s.name = "coupled_2d";
    s.alpha = alpha;
    s.A.resize(2, 2);
    s.A << -2.0, 1.0, 1.0, -2.0;
    s.d = s.m = 2;
    s.drift = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(2);
        v(0) = 0.5 * std::sin(x(1));
        v(1) = 0.5 * std::sin(x(0));
        return v;
    };
    s.diffusion = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
        v(0, 0) = 1.0 + 0.5 * std::cos(x(0));
        v(1, 1) = 1.0 + 0.5 * std::cos(x(1));
        return v;
    };
    s.drift_jacobian = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
        v(0, 1) = 0.5 * std::cos(x(1));
        v(1, 0) = 0.5 * std::cos(x(0));
        return v;
    };
    s.diffusion_jacobian = [](const Eigen::VectorXd& x) {
        DiffusionJacobian j(2, Eigen::MatrixXd::Zero(2, 2));
        j[0](0, 0) = -0.5 * std::sin(x(0));
        j[1](1, 1) = -0.5 * std::sin(x(1));
        return j;
    };
    s.x0.resize(2);
    s.x0 << 1.0, 0.0;
    return s;
}

}  // namespace

ModelSpec builtin_model(const std::string& name, double alpha) {
    check_alpha(alpha);
    if (name == "additive_scalar") return make_additive(alpha);
    if (name == "bilinear_scalar") return make_bilinear(alpha);
    if (name == "coupled_2d") return make_coupled(alpha);
    throw UnknownModel("no builtin model named '" + name + "'");
}

ValidationReport validate(const ModelSpec& model) {
    ValidationReport rep;
    auto fail = [&](const std::string& why) {
        rep.valid = false;
        rep.violations.push_back(why);
    };

    if (!(model.alpha > 0.5 && model.alpha < 1.0))
        fail("order outside (1/2, 1): " + std::to_string(model.alpha));
    if (model.d < 1 || model.m < 1) {
        fail("dimensions must be positive");
        return rep;
    }
    if (model.A.rows() != model.d || model.A.cols() != model.d)
        fail("A is not d x d");
    if (model.x0.size() != model.d) fail("x0 length != d");
    if (!(model.T > 0.0)) fail("horizon must be positive");

    if (model.A.rows() == model.d && model.A.cols() == model.d) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(model.A);
        for (int i = 0; i < model.d; ++i)
            if (es.eigenvalues()[i].real() >= 0.0) {
                fail("A not negative definite: eigenvalue real part " +
                     std::to_string(es.eigenvalues()[i].real()));
                break;
            }
    }

    if (!model.drift || !model.diffusion || !model.drift_jacobian ||
        !model.diffusion_jacobian) {
        fail("missing coefficient callable");
        return rep;
    }

    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&] {
        Eigen::VectorXd x(model.d);
        for (int i = 0; i < model.d; ++i) x(i) = gauss(rng);
        return x;
    };

    // shape probes at one point before the finite-difference sweep
    {
        Eigen::VectorXd x = model.x0.size() == model.d
                                ? model.x0
                                : Eigen::VectorXd::Zero(model.d);
        if (model.drift(x).size() != model.d) fail("drift output length != d");
        Eigen::MatrixXd sg = model.diffusion(x);
        if (sg.rows() != model.d || sg.cols() != model.m)
            fail("diffusion output not d x m");
        Eigen::MatrixXd jb = model.drift_jacobian(x);
        if (jb.rows() != model.d || jb.cols() != model.d)
            fail("drift_jacobian output not d x d");
        DiffusionJacobian js = model.diffusion_jacobian(x);
        if (static_cast<int>(js.size()) != model.d)
            fail("diffusion_jacobian must have d slices");
        else
            for (const auto& sl : js)
                if (sl.rows() != model.d || sl.cols() != model.m) {
                    fail("diffusion_jacobian slice not d x m");
                    break;
                }
    }
    if (!rep.valid) return rep;

    const double step = 1e-6, tol = 1e-5;
    bool drift_ok = true, diff_ok = true;
    for (int p = 0; p < 20; ++p) {
        Eigen::VectorXd x = draw();
        Eigen::MatrixXd jb = model.drift_jacobian(x);
        DiffusionJacobian js = model.diffusion_jacobian(x);
        for (int k = 0; k < model.d; ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp(k) += step;
            xm(k) -= step;
            Eigen::VectorXd fd_b =
                (model.drift(xp) - model.drift(xm)) / (2.0 * step);
            if ((fd_b - jb.col(k)).norm() >
                tol * std::max(1.0, jb.col(k).norm()))
                drift_ok = false;
            Eigen::MatrixXd fd_s =
                (model.diffusion(xp) - model.diffusion(xm)) / (2.0 * step);
            if ((fd_s - js[k]).norm() > tol * std::max(1.0, js[k].norm()))
                diff_ok = false;
        }
    }
    if (!drift_ok) fail("drift_jacobian disagrees with finite differences");
    if (!diff_ok) fail("diffusion_jacobian disagrees with finite differences");

    // sampled Lipschitz estimate over random pairs, half of them very close
    // so the local slope is represented
    for (int p = 0; p < 10000; ++p) {
        Eigen::VectorXd x = 2.0 * draw();
        Eigen::VectorXd u = draw();
        double r = (p % 2 == 0) ? 1e-3 : std::fabs(gauss(rng)) + 1e-3;
        Eigen::VectorXd y = x + r * u;
        double dist = (y - x).norm();
        if (dist == 0.0) continue;
        rep.lipschitz_drift =
            std::max(rep.lipschitz_drift,
                     (model.drift(y) - model.drift(x)).norm() / dist);
        rep.lipschitz_diffusion =
            std::max(rep.lipschitz_diffusion,
                     (model.diffusion(y) - model.diffusion(x)).norm() / dist);
    }

    rep.untested.push_back(
        "uniform continuity of coefficient derivatives (sampling cannot "
        "verify it)");
    return rep;
}

}  // namespace fsde::models

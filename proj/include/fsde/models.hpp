#pragma once
// Problem instances: coefficients, Jacobians, initial data, plus the built-in
// test problems used across the tools.

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace fsde::models {

// Partial derivatives of the diffusion: entry k is the d x m matrix
// d sigma / d x_k.
using DiffusionJacobian = std::vector<Eigen::MatrixXd>;

struct ModelSpec {
    std::string name;
    double alpha = 0.75;  // order, strictly inside (1/2, 1)
    Eigen::MatrixXd A;    // d x d, all eigenvalue real parts < 0
    int d = 1;
    int m = 1;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> diffusion;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> drift_jacobian;
    std::function<DiffusionJacobian(const Eigen::VectorXd&)> diffusion_jacobian;
    Eigen::VectorXd x0;
    double T = 1.0;
    // Coefficient callables must be pure; nothing here enforces it.
};

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> violations;
    // Sampled Lipschitz estimates (largest observed difference quotient);
    // reported, not enforced.
    double lipschitz_drift = 0.0;
    double lipschitz_diffusion = 0.0;
    // Hypotheses the sampling check cannot settle, recorded per model.
    std::vector<std::string> untested;
};

// name in {additive_scalar, bilinear_scalar, coupled_2d}
ModelSpec builtin_model(const std::string& name, double alpha);

// Checks order range, negative definiteness, dimension consistency, and
// Jacobians against central finite differences at 20 seeded random points.
// Collects violations instead of throwing.
ValidationReport validate(const ModelSpec& model);

}  // namespace fsde::models

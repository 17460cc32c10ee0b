#pragma once
// Limit-distribution constants kappa11^2, kappa1^2, kappa2^2 as functions of
// the order alpha, computed by quadrature over piecewise-singular double
// integrals on (0,1] x (0,infinity).

namespace fsde::constants {

// Controls for the semi-infinite outer integral. The outer variable is cut at
// y_max and the neglected tail is bounded through the dominating function
// psi(); the bound must come out below tail_tol or the evaluation refuses.
struct QuadConfig {
    double y_max = 200.0;
    int cells_per_unit = 64;  // Gauss-Legendre nodes per unit cell / panel
    double tail_tol = 2e-5;   // admissible absolute tail bound
};

// (1/Gamma^2(a)) int_0^1 int_0^inf ((y+x)^{a-1} - ceil(y)^{a-1})^2 dy dx
double kappa11_sq(double alpha, const QuadConfig& q = {});

// kappa11_sq plus the closed-form term 1/(Gamma^2(a) * 2a(2a-1))
double kappa1_sq(double alpha, const QuadConfig& q = {});

// (1/Gamma^2(a)) int_0^1 int_0^inf ((ceil(y)-x)^{a-1} - ceil(y)^{a-1})^2 dy dx
double kappa2_sq(double alpha, const QuadConfig& q = {});

// Dominating envelope for the outer integrand: y^{2a-2} on (0,1],
// y^{2a-4} on (1,inf). Used for the tail bound above.
double psi(double alpha, double y);

// Fitted tail bound actually achieved at this config (the larger of the two
// integral forms); what the refusal above compares against tail_tol.
double tail_estimate(double alpha, const QuadConfig& q = {});

}  // namespace fsde::constants

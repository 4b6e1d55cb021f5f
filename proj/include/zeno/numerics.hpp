#pragma once

#include <functional>
#include <vector>

namespace zeno::numerics {

/// Adaptive composite Simpson quadrature of f on [a, b] to absolute tolerance.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10);

/// Nodes and weights of the m-point Gauss-Hermite rule for weight e^{-u^2}
/// (Golub-Welsch). Exact for polynomials of degree <= 2m - 1.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermiteRule gauss_hermite(int m);

/// Values of the normalized Hermite functions' polynomial part
/// h_k(y) = H_k(y) / sqrt(2^k k! sqrt(pi)) for k = 0..n_max, written to out.
/// h_k(y)^2 e^{-y^2} integrates to 1 over the real line.
void normalized_hermite(double y, int n_max, std::vector<double>& out);

/// Single value h_n(y), by the same stable three-term recurrence.
double normalized_hermite(int n, double y);

/// Squared Hermite function psi_n(y)^2 = h_n(y)^2 e^{-y^2}. The recurrence is
/// rescaled in log space so neither the polynomial nor the Gaussian factor
/// overflows or underflows prematurely for large n.
double hermite_function_squared(int n, double y);

}  // namespace zeno::numerics

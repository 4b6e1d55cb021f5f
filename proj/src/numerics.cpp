#include "zeno/numerics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace zeno::numerics {
namespace {

struct SimpsonPanel {
  double a, b, fa, fm, fb, whole;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double refine(const std::function<double(double)>& f, const SimpsonPanel& p, double tol,
              int depth) {
  const double m = 0.5 * (p.a + p.b);
  const double lm = 0.5 * (p.a + m);
  const double rm = 0.5 * (m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(p.a, m, p.fa, flm, p.fm);
  const double right = simpson(m, p.b, p.fm, frm, p.fb);
  const double delta = left + right - p.whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return refine(f, {p.a, m, p.fa, flm, p.fm, left}, 0.5 * tol, depth - 1) +
         refine(f, {m, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol) {
  if (a == b) return 0.0;
  if (b < a) return -integrate(f, b, a, abs_tol);
  // Start from a uniform composite rule so narrow features inside a wide
  // interval are not missed by the first coarse estimate.
  constexpr int kPanels = 64;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  double fa = f(a);
  for (int i = 0; i < kPanels; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == kPanels) ? b : lo + h;
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    const double fb = f(hi);
    total += refine(f, {lo, hi, fa, fm, fb, simpson(lo, hi, fa, fm, fb)}, abs_tol / kPanels, 40);
    fa = fb;
  }
  return total;
}

GaussHermiteRule gauss_hermite(int m) {
  if (m < 1) throw std::invalid_argument("gauss_hermite: need at least one node");
  // Jacobi matrix of the Hermite recurrence: off-diagonal sqrt(k/2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  GaussHermiteRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  const double mu0 = std::sqrt(std::numbers::pi);
  for (int k = 0; k < m; ++k) {
    rule.nodes[k] = solver.eigenvalues()(k);
    const double v0 = solver.eigenvectors()(0, k);
    rule.weights[k] = mu0 * v0 * v0;
  }
  return rule;
}

void normalized_hermite(double y, int n_max, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(n_max) + 1);
  const double h0 = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
  out[0] = h0;
  if (n_max == 0) return;
  out[1] = std::sqrt(2.0) * y * h0;
  for (int k = 1; k < n_max; ++k) {
    out[k + 1] = std::sqrt(2.0 / (k + 1)) * y * out[k] - std::sqrt(static_cast<double>(k) / (k + 1)) * out[k - 1];
  }
}

double normalized_hermite(int n, double y) {
  const double h0 = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
  if (n == 0) return h0;
  double prev = h0;
  double cur = std::sqrt(2.0) * y * h0;
  for (int k = 1; k < n; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * y * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_function_squared(int n, double y) {
  constexpr double kBig = 1e150;
  const double log_big = std::log(kBig);
  const double h0 = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
  double log_scale = 0.0;
  double prev = h0;
  double cur = (n == 0) ? h0 : std::sqrt(2.0) * y * h0;
  for (int k = 1; k < n; ++k) {
    const double next = std::sqrt(2.0 / (k + 1)) * y * cur - std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > kBig) {
      cur /= kBig;
      prev /= kBig;
      log_scale += log_big;
    }
  }
  if (cur == 0.0) return 0.0;
  return std::exp(2.0 * (std::log(std::abs(cur)) + log_scale) - y * y);
}

}  // namespace zeno::numerics

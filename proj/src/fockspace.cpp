#include "zeno/fockspace.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "zeno/log.hpp"

namespace zeno::fock {
namespace {

constexpr double kTailWarning = 1e-6;

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

void warn_tail(double xi, int n_max, double tail) {
  if (tail <= kTailWarning) return;
  std::ostringstream msg;
  msg << "pair-state truncation at n_max=" << n_max << " discards tail mass " << tail
      << " for xi=" << xi << "; increase the cutoff";
  warn(msg.str());
}

}  // namespace

FockCutoff::FockCutoff(int n_max) : n_max_(n_max) {
  if (n_max < 0) throw std::invalid_argument("FockCutoff: n_max must be >= 0");
}

FockCutoff cutoff_for_mean_occupation(double mean_occupation, double tail_tol) {
  if (!(mean_occupation >= 0.0)) throw std::invalid_argument("cutoff: mean occupation must be >= 0");
  if (!(tail_tol > 0.0 && tail_tol < 1.0)) throw std::invalid_argument("cutoff: tail_tol must be in (0,1)");
  if (mean_occupation == 0.0) return FockCutoff(0);
  // P(n > n_max) = r^{n_max + 1} with r = nbar / (1 + nbar).
  const double log_r = std::log(mean_occupation) - std::log1p(mean_occupation);
  const double needed = std::log(tail_tol) / log_r;
  return FockCutoff(std::max(0, static_cast<int>(std::ceil(needed - 1e-12)) - 1));
}

FockCutoff default_tmsv_cutoff(double xi, double tail_tol) {
  if (!(xi >= 0.0)) throw std::invalid_argument("default_tmsv_cutoff: xi must be >= 0");
  const double s = std::sinh(xi);
  return cutoff_for_mean_occupation(s * s, tail_tol);
}

ComplexMatrix single_mode_annihilation(int n_max) {
  ComplexMatrix a = ComplexMatrix::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

OperatorSet build_operators(FockCutoff cutoff) {
  const ComplexMatrix a = single_mode_annihilation(cutoff.n_max());
  const ComplexMatrix id = ComplexMatrix::Identity(cutoff.mode_dim(), cutoff.mode_dim());
  return OperatorSet{cutoff, kron(a, id), kron(id, a), ComplexMatrix::Identity(cutoff.dim(), cutoff.dim())};
}

DensityMatrix::DensityMatrix(ComplexMatrix data, FockCutoff cutoff)
    : data_(std::move(data)), cutoff_(cutoff) {
  if (data_.rows() != cutoff_.dim() || data_.cols() != cutoff_.dim())
    throw std::invalid_argument("DensityMatrix: dimension does not match cutoff");
  if ((data_ - data_.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("DensityMatrix: not Hermitian");
  if (std::abs(data_.trace() - Complex(1.0, 0.0)) > 1e-8)
    throw std::invalid_argument("DensityMatrix: trace is not 1");
  const ComplexMatrix herm = 0.5 * (data_ + data_.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(herm, Eigen::EigenvaluesOnly);
  if (solver.eigenvalues().minCoeff() < -1e-8)
    throw std::invalid_argument("DensityMatrix: not positive semidefinite");
}

DensityMatrix DensityMatrix::vacuum(FockCutoff cutoff) { return fock_state(cutoff, 0, 0); }

DensityMatrix DensityMatrix::fock_state(FockCutoff cutoff, int n_minus, int n_plus) {
  if (n_minus < 0 || n_plus < 0 || n_minus > cutoff.n_max() || n_plus > cutoff.n_max())
    throw std::invalid_argument("fock_state: occupation outside cutoff");
  ComplexMatrix m = ComplexMatrix::Zero(cutoff.dim(), cutoff.dim());
  const int i = cutoff.index(n_minus, n_plus);
  m(i, i) = 1.0;
  return DensityMatrix(std::move(m), cutoff);
}

double DensityMatrix::purity() const { return (data_ * data_).trace().real(); }

ComplexMatrix DensityMatrix::reduce_to_plus_mode() const {
  const int d = cutoff_.mode_dim();
  ComplexMatrix r = ComplexMatrix::Zero(d, d);
  for (int m = 0; m < d; ++m) r += data_.block(m * d, m * d, d, d);
  return r;
}

ComplexMatrix DensityMatrix::reduce_to_minus_mode() const {
  const int d = cutoff_.mode_dim();
  ComplexMatrix r = ComplexMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int p = 0; p < d; ++p) r(i, j) += data_(cutoff_.index(i, p), cutoff_.index(j, p));
  return r;
}

FockWeights::FockWeights(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw std::invalid_argument("FockWeights: empty");
  double total = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0)) throw std::invalid_argument("FockWeights: negative or NaN weight");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-10) throw std::invalid_argument("FockWeights: weights do not sum to 1");
}

FockWeights FockWeights::vacuum(int n_max) { return single(0, n_max); }

FockWeights FockWeights::single(int n, int n_max) {
  if (n < 0 || n > n_max) throw std::invalid_argument("FockWeights::single: n outside 0..n_max");
  std::vector<double> w(static_cast<std::size_t>(n_max) + 1, 0.0);
  w[n] = 1.0;
  return FockWeights(std::move(w));
}

FockWeights FockWeights::thermal(double mean_occupation, int n_max) {
  if (!(mean_occupation >= 0.0)) throw std::invalid_argument("thermal: mean occupation must be >= 0");
  if (n_max < 0) throw std::invalid_argument("thermal: n_max must be >= 0");
  std::vector<double> w(static_cast<std::size_t>(n_max) + 1);
  const double r = mean_occupation / (1.0 + mean_occupation);
  double term = 1.0 / (1.0 + mean_occupation);
  for (auto& v : w) {
    v = term;
    term *= r;
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return FockWeights(std::move(w));
}

double FockWeights::mean() const {
  double m = 0.0;
  for (std::size_t n = 0; n < w_.size(); ++n) m += static_cast<double>(n) * w_[n];
  return m;
}

TmsvWeights tmsv_weights(double xi, FockCutoff cutoff) {
  if (!(xi >= 0.0)) throw std::invalid_argument("tmsv_weights: xi must be >= 0");
  const double t2 = std::tanh(xi) * std::tanh(xi);
  const double c = std::cosh(xi);
  std::vector<double> w(static_cast<std::size_t>(cutoff.mode_dim()));
  double term = 1.0 / (c * c);
  for (auto& v : w) {
    v = term;
    term *= t2;
  }
  // Tail beyond n_max sums in closed form to tanh^{2(n_max+1)}.
  const double tail = std::pow(t2, cutoff.n_max() + 1);
  const double kept = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= kept;
  warn_tail(xi, cutoff.n_max(), tail);
  return TmsvWeights{FockWeights(std::move(w)), tail};
}

TmsvState tmsv_state(double xi, FockCutoff cutoff) {
  if (!(xi >= 0.0)) throw std::invalid_argument("tmsv_state: xi must be >= 0");
  const double t = std::tanh(xi);
  const double c = std::cosh(xi);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(cutoff.dim());
  Complex amp(1.0 / c, 0.0);
  const Complex step(0.0, -t);
  for (int n = 0; n <= cutoff.n_max(); ++n) {
    psi(cutoff.index(n, n)) = amp;
    amp *= step;
  }
  const double kept = psi.squaredNorm();
  psi /= std::sqrt(kept);
  const double tail = std::pow(t * t, cutoff.n_max() + 1);
  warn_tail(xi, cutoff.n_max(), tail);
  return TmsvState{DensityMatrix(psi * psi.adjoint(), cutoff), tail};
}

Complex expectation(const ComplexMatrix& op, const DensityMatrix& rho) {
  if (op.rows() != rho.data().rows() || op.cols() != rho.data().cols())
    throw std::invalid_argument("expectation: operator and density matrix dimensions differ");
  // Tr(A B) = sum_ij A_ij B_ji
  return op.cwiseProduct(rho.data().transpose()).sum();
}

}  // namespace zeno::fock

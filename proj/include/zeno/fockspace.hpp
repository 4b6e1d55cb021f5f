#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <vector>

namespace zeno::fock {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// Maximum occupation per mode. The two-mode basis |n_minus, n_plus> is
/// ordered with n_plus fastest: index = n_minus * (n_max + 1) + n_plus.
class FockCutoff {
 public:
  explicit FockCutoff(int n_max);

  int n_max() const { return n_max_; }
  int mode_dim() const { return n_max_ + 1; }
  int dim() const { return mode_dim() * mode_dim(); }
  int index(int n_minus, int n_plus) const { return n_minus * mode_dim() + n_plus; }

  friend bool operator==(const FockCutoff&, const FockCutoff&) = default;

 private:
  int n_max_;
};

/// Smallest cutoff for which a thermal marginal of the given mean occupation
/// has tail probability P(n > n_max) below tail_tol.
FockCutoff cutoff_for_mean_occupation(double mean_occupation, double tail_tol = 1e-8);

/// Cutoff rule for the pair state of squeezing xi: tanh^{2(n_max+1)}(xi) < tail_tol.
FockCutoff default_tmsv_cutoff(double xi, double tail_tol = 1e-8);

struct OperatorSet {
  FockCutoff cutoff;
  ComplexMatrix a_minus;  ///< annihilation on the m = -1 mode
  ComplexMatrix a_plus;   ///< annihilation on the m = +1 mode
  ComplexMatrix identity;
};

/// Single-mode annihilation operator, <n-1|a|n> = sqrt(n).
ComplexMatrix single_mode_annihilation(int n_max);

OperatorSet build_operators(FockCutoff cutoff);

/// Dense two-mode density operator. Construction validates Hermiticity
/// (1e-10), unit trace (1e-8) and positivity (eigenvalues >= -1e-8).
class DensityMatrix {
 public:
  DensityMatrix(ComplexMatrix data, FockCutoff cutoff);

  static DensityMatrix vacuum(FockCutoff cutoff);
  /// Product Fock state |n_minus, n_plus>.
  static DensityMatrix fock_state(FockCutoff cutoff, int n_minus, int n_plus);

  const ComplexMatrix& data() const { return data_; }
  const FockCutoff& cutoff() const { return cutoff_; }
  double purity() const;

  /// Reduced state of the m = +1 mode (partial trace over m = -1).
  ComplexMatrix reduce_to_plus_mode() const;
  ComplexMatrix reduce_to_minus_mode() const;

 private:
  ComplexMatrix data_;
  FockCutoff cutoff_;
};

/// Normalized occupation distribution {w_n}, n = 0..n_max, of one mode.
class FockWeights {
 public:
  /// Validates nonnegativity and unit sum (1e-10).
  explicit FockWeights(std::vector<double> w);

  static FockWeights vacuum(int n_max);
  static FockWeights single(int n, int n_max);
  /// Geometric distribution w_n = nbar^n / (1 + nbar)^{n+1}, renormalized on 0..n_max.
  static FockWeights thermal(double mean_occupation, int n_max);

  std::size_t size() const { return w_.size(); }
  int n_max() const { return static_cast<int>(w_.size()) - 1; }
  double operator[](std::size_t n) const { return w_[n]; }
  std::span<const double> values() const { return w_; }
  double mean() const;

 private:
  std::vector<double> w_;
};

struct TmsvWeights {
  FockWeights weights;
  double tail_mass;  ///< probability mass beyond the cutoff, before renormalization
};

/// Pair-number distribution of the two-mode squeezed vacuum,
/// w_n = tanh^{2n}(xi) / cosh^2(xi), renormalized over the cutoff.
/// Warns when the discarded tail exceeds 1e-6.
TmsvWeights tmsv_weights(double xi, FockCutoff cutoff);

struct TmsvState {
  DensityMatrix rho;
  double tail_mass;
};

/// Pure state sum_n (-i tanh xi)^n / cosh xi |n>_{-1}|n>_{+1}, renormalized.
TmsvState tmsv_state(double xi, FockCutoff cutoff);

/// Tr(op * rho). Throws std::invalid_argument on dimension mismatch.
Complex expectation(const ComplexMatrix& op, const DensityMatrix& rho);

}  // namespace zeno::fock

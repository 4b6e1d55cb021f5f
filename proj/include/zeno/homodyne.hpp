#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "zeno/fockspace.hpp"
#include "zeno/numerics.hpp"
#include "zeno/random.hpp"

namespace zeno::homodyne {

struct DetectionModel {
  double sigma_det_atoms = 16.0;
  double transfer_fraction = 0.08;   ///< cos^2 theta
  double n_condensate_mean = 25000.0;
  double n_condensate_sd = 1250.0;

  void validate() const;
  /// Atom-counting noise in rescaled units at the mean atom number.
  double rescaled_noise_sd() const;
};

struct RawShot {
  double n0_after;
  double n_plus_after;
};

struct RescaledSample {
  double x;
};

/// Noiseless counting density of a displaced Fock state,
/// P(x|n) = H_n(x/sqrt2)^2 e^{-x^2/2} / (n! 2^n sqrt(2 pi)). Var = 2n + 1.
double displaced_fock_pdf(int n, double x);

/// P(x|n) convolved with a zero-mean Gaussian of standard deviation sigma.
double noisy_fock_pdf(int n, double x, double sigma);

/// Noise-convolved component densities P~(x|n) for n = 0..n_max.
///
/// The convolution of a Hermite function with a Gaussian reduces, after
/// completing the square, to a Gauss-Hermite sum that is exact with
/// n_max + 1 nodes. Components beyond kMaxGaussHermite fall back to adaptive
/// quadrature.
class ComponentDensities {
 public:
  static constexpr int kMaxGaussHermite = 200;

  ComponentDensities(int n_max, double sigma);

  int n_max() const { return n_max_; }
  double sigma() const { return sigma_; }
  double operator()(int n, double x) const;
  /// Writes P~(x|n) for all n into out (resized to n_max + 1).
  void evaluate(double x, std::vector<double>& out) const;

 private:
  int n_max_;
  double sigma_;
  numerics::GaussHermiteRule rule_;
};

/// Sum_n w_n P~(x|n) with sigma = det.rescaled_noise_sd().
double mixture_pdf(const fock::FockWeights& weights, double x, const DetectionModel& det);
double mixture_pdf(const fock::FockWeights& weights, double x, const ComponentDensities& components);

/// 2 <n> + 1.
double displaced_variance(const fock::FockWeights& weights);

/// Zero-mean normal density.
double gaussian_pdf(double x, double variance);

RescaledSample rescale_shot(const RawShot& shot, const DetectionModel& det);

/// Exact draw from P(x|n): direct normal for n = 0, otherwise rejection from a
/// uniform envelope using the bound |psi_n(y)| <= 1.0865 pi^{-1/4}.
double sample_displaced_fock(int n, RandomStream& rng);

struct ShotBatch {
  std::vector<RawShot> raw;
  std::vector<RescaledSample> rescaled;
  std::vector<int> fock_n;       ///< drawn occupation per shot
  std::vector<double> ideal_x;   ///< noiseless continuous variable per shot
};

/// Synthesizes shots: N0 ~ Gaussian, n ~ weights, x ~ P(x|n), raw counts from
/// the inverted rescaling with Gaussian atom noise, rounded to whole atoms.
/// Shots are generated in fixed-size blocks with one random stream per block,
/// so the output depends only on the seed.
ShotBatch sample_shots(const fock::FockWeights& weights, const DetectionModel& det, std::size_t n_shots,
                       std::uint64_t seed);

std::vector<double> values(std::span<const RescaledSample> samples);
double sample_variance(std::span<const double> xs);

}  // namespace zeno::homodyne

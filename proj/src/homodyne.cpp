#include "zeno/homodyne.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace zeno::homodyne {
namespace {

constexpr double kCramerBound = 1.086435;
constexpr std::size_t kShotsPerStream = 4096;

double conv_fallback(int n, double x, double sigma) {
  const auto f = [&](double z) { return displaced_fock_pdf(n, x - z) * gaussian_pdf(z, sigma * sigma); };
  return numerics::integrate(f, -12.0 * sigma, 12.0 * sigma, 1e-13);
}

}  // namespace

void DetectionModel::validate() const {
  if (!(sigma_det_atoms >= 0.0)) throw std::invalid_argument("DetectionModel: sigma_det_atoms must be >= 0");
  if (!(transfer_fraction > 0.0 && transfer_fraction < 1.0))
    throw std::invalid_argument("DetectionModel: transfer_fraction must be in (0,1)");
  if (!(n_condensate_mean > 0.0)) throw std::invalid_argument("DetectionModel: n_condensate_mean must be > 0");
  if (!(n_condensate_sd >= 0.0)) throw std::invalid_argument("DetectionModel: n_condensate_sd must be >= 0");
}

double DetectionModel::rescaled_noise_sd() const {
  validate();
  return sigma_det_atoms / std::sqrt(transfer_fraction * (1.0 - transfer_fraction) * n_condensate_mean);
}

double displaced_fock_pdf(int n, double x) {
  if (n < 0) throw std::invalid_argument("displaced_fock_pdf: n must be >= 0");
  return numerics::hermite_function_squared(n, x / std::numbers::sqrt2) / std::numbers::sqrt2;
}

double noisy_fock_pdf(int n, double x, double sigma) {
  if (n < 0) throw std::invalid_argument("noisy_fock_pdf: n must be >= 0");
  if (sigma == 0.0) return displaced_fock_pdf(n, x);
  return ComponentDensities(std::min(n, ComponentDensities::kMaxGaussHermite), sigma)(n, x);
}

ComponentDensities::ComponentDensities(int n_max, double sigma)
    : n_max_(n_max), sigma_(sigma), rule_() {
  if (n_max < 0) throw std::invalid_argument("ComponentDensities: n_max must be >= 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("ComponentDensities: sigma must be >= 0");
  if (sigma > 0.0) rule_ = numerics::gauss_hermite(std::min(n_max, kMaxGaussHermite) + 1);
}

double ComponentDensities::operator()(int n, double x) const {
  if (n < 0 || n > n_max_) throw std::out_of_range("ComponentDensities: n outside 0..n_max");
  if (sigma_ == 0.0) return displaced_fock_pdf(n, x);
  if (n > kMaxGaussHermite) return conv_fallback(n, x, sigma_);
  const double a = 1.0 + sigma_ * sigma_;
  const double shift = sigma_ * std::sqrt(2.0 / a);
  const double gauss = -x * x / (2.0 * a);
  double sum = 0.0;
  for (std::size_t k = 0; k < rule_.nodes.size(); ++k) {
    const double y = (x / a - shift * rule_.nodes[k]) / std::numbers::sqrt2;
    // h_n(y)^2 e^{-x^2/2a} = psi_n(y)^2 e^{y^2 - x^2/2a}
    sum += rule_.weights[k] * numerics::hermite_function_squared(n, y) * std::exp(y * y + gauss);
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * a);
}

void ComponentDensities::evaluate(double x, std::vector<double>& out) const {
  out.resize(static_cast<std::size_t>(n_max_) + 1);
  const int direct = std::min(n_max_, kMaxGaussHermite);
  if (sigma_ == 0.0) {
    for (int n = 0; n <= n_max_; ++n) out[n] = displaced_fock_pdf(n, x);
    return;
  }
  const double a = 1.0 + sigma_ * sigma_;
  const double shift = sigma_ * std::sqrt(2.0 / a);
  const double gauss = -x * x / (2.0 * a);
  std::fill(out.begin(), out.begin() + direct + 1, 0.0);
  std::vector<double> h;
  for (std::size_t k = 0; k < rule_.nodes.size(); ++k) {
    const double y = (x / a - shift * rule_.nodes[k]) / std::numbers::sqrt2;
    if (direct <= 30) {
      // Plain recurrence is safe at low order.
      numerics::normalized_hermite(y, direct, h);
      const double g = rule_.weights[k] * std::exp(gauss);
      for (int n = 0; n <= direct; ++n) out[n] += g * h[n] * h[n];
    } else {
      const double env = std::exp(y * y + gauss);
      for (int n = 0; n <= direct; ++n)
        out[n] += rule_.weights[k] * numerics::hermite_function_squared(n, y) * env;
    }
  }
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * a);
  for (int n = 0; n <= direct; ++n) out[n] *= norm;
  for (int n = direct + 1; n <= n_max_; ++n) out[n] = conv_fallback(n, x, sigma_);
}

double mixture_pdf(const fock::FockWeights& weights, double x, const ComponentDensities& components) {
  if (weights.n_max() > components.n_max())
    throw std::invalid_argument("mixture_pdf: weights extend beyond the component table");
  double p = 0.0;
  for (int n = 0; n <= weights.n_max(); ++n)
    if (weights[n] > 0.0) p += weights[n] * components(n, x);
  return p;
}

double mixture_pdf(const fock::FockWeights& weights, double x, const DetectionModel& det) {
  return mixture_pdf(weights, x, ComponentDensities(weights.n_max(), det.rescaled_noise_sd()));
}

double displaced_variance(const fock::FockWeights& weights) { return 2.0 * weights.mean() + 1.0; }

double gaussian_pdf(double x, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_pdf: variance must be > 0");
  return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

RescaledSample rescale_shot(const RawShot& shot, const DetectionModel& det) {
  det.validate();
  if (shot.n0_after < 0.0 || shot.n_plus_after < 0.0) throw std::invalid_argument("rescale_shot: negative atom count");
  const double total = shot.n0_after + shot.n_plus_after;
  if (!(total > 0.0)) throw std::invalid_argument("rescale_shot: zero total atom number");
  const double c = det.transfer_fraction;
  return RescaledSample{(shot.n_plus_after - c * total) / std::sqrt(c * (1.0 - c) * total)};
}

double sample_displaced_fock(int n, RandomStream& rng) {
  if (n < 0) throw std::invalid_argument("sample_displaced_fock: n must be >= 0");
  if (n == 0) return rng.normal();
  const double half_width = std::numbers::sqrt2 * (std::sqrt(2.0 * n + 1.0) + 6.0);
  const double height = kCramerBound * kCramerBound / std::sqrt(2.0 * std::numbers::pi);
  for (;;) {
    const double x = half_width * (2.0 * rng.uniform() - 1.0);
    const double p = displaced_fock_pdf(n, x);
    if (p > height) throw std::logic_error("sample_displaced_fock: envelope violated");
    if (rng.uniform() * height < p) return x;
  }
}

ShotBatch sample_shots(const fock::FockWeights& weights, const DetectionModel& det, std::size_t n_shots,
                       std::uint64_t seed) {
  det.validate();
  if (n_shots == 0) throw std::invalid_argument("sample_shots: n_shots must be > 0");
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t n = 0; n < weights.size(); ++n) cdf[n] = (acc += weights[n]);

  ShotBatch out;
  out.raw.resize(n_shots);
  out.rescaled.resize(n_shots);
  out.fock_n.resize(n_shots);
  out.ideal_x.resize(n_shots);
  const double c = det.transfer_fraction;
  const std::size_t streams = (n_shots + kShotsPerStream - 1) / kShotsPerStream;
  parallel_for(streams, [&](std::size_t s) {
    RandomStream rng(seed, s);
    const std::size_t end = std::min(n_shots, (s + 1) * kShotsPerStream);
    for (std::size_t i = s * kShotsPerStream; i < end; ++i) {
      const double n0 = std::max(1.0, std::round(rng.normal(det.n_condensate_mean, det.n_condensate_sd)));
      const double u = rng.uniform() * acc;
      const int n = static_cast<int>(std::min<std::ptrdiff_t>(
          std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
      const double x = sample_displaced_fock(n, rng);
      const double noise = det.sigma_det_atoms > 0.0 ? det.sigma_det_atoms * rng.normal() : 0.0;
      const double total = n0 + n;
      const double plus = std::clamp(std::round(c * total + x * std::sqrt(c * (1.0 - c) * total) + noise), 0.0, total);
      out.raw[i] = RawShot{total - plus, plus};
      out.rescaled[i] = rescale_shot(out.raw[i], det);
      out.fock_n[i] = n;
      out.ideal_x[i] = x;
    }
  });
  return out;
}

std::vector<double> values(std::span<const RescaledSample> samples) {
  std::vector<double> xs(samples.size());
  std::transform(samples.begin(), samples.end(), xs.begin(), [](const RescaledSample& s) { return s.x; });
  return xs;
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_variance: need at least two values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace zeno::homodyne

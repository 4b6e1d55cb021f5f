#include "zeno/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "zeno/numerics.hpp"
#include "zeno/random.hpp"

namespace zeno::inference {
namespace {

// P~(x_i | k) for every sample, row-major S x K.
struct ComponentTable {
  std::size_t rows = 0;
  int cols = 0;
  std::vector<double> p;

  ComponentTable(std::span<const RescaledSample> samples, int n_max, double sigma)
      : rows(samples.size()), cols(n_max + 1), p(rows * static_cast<std::size_t>(cols)) {
    const homodyne::ComponentDensities comps(n_max, sigma);
    constexpr std::size_t kChunk = 512;
    parallel_for((rows + kChunk - 1) / kChunk, [&](std::size_t c) {
      std::vector<double> buf;
      for (std::size_t i = c * kChunk; i < std::min(rows, (c + 1) * kChunk); ++i) {
        comps.evaluate(samples[i].x, buf);
        std::copy(buf.begin(), buf.end(), p.begin() + static_cast<std::ptrdiff_t>(i * cols));
      }
    });
  }
  const double* row(std::size_t i) const { return p.data() + i * cols; }
};

// One EM update. Returns the log-likelihood at w (before the update).
double em_step(const ComponentTable& t, std::span<const double> counts, double total,
               const std::vector<double>& w, std::vector<double>& next) {
  const int k_count = t.cols;
  std::vector<double> r(k_count, 0.0);
  double ll = 0.0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    const double m = counts.empty() ? 1.0 : counts[i];
    if (m == 0.0) continue;
    const double* row = t.row(i);
    double denom = 0.0;
    for (int k = 0; k < k_count; ++k) denom += w[k] * row[k];
    if (!(denom > 0.0)) {
      std::ostringstream msg;
      msg << "mle_weights: sample " << i << " has zero likelihood under every component";
      throw std::invalid_argument(msg.str());
    }
    ll += m * std::log(denom);
    const double s = m / denom;
    for (int k = 0; k < k_count; ++k) r[k] += s * row[k];
  }
  next.resize(k_count);
  for (int k = 0; k < k_count; ++k) next[k] = w[k] * r[k] / total;
  const double norm = std::accumulate(next.begin(), next.end(), 0.0);
  for (auto& v : next) v /= norm;
  return ll;
}

double log_likelihood(const ComponentTable& t, std::span<const double> counts, const std::vector<double>& w) {
  double ll = 0.0;
  for (std::size_t i = 0; i < t.rows; ++i) {
    const double m = counts.empty() ? 1.0 : counts[i];
    if (m == 0.0) continue;
    const double* row = t.row(i);
    double denom = 0.0;
    for (int k = 0; k < t.cols; ++k) denom += w[k] * row[k];
    ll += m * std::log(denom);
  }
  return ll;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
  return d;
}

void check_monotone(double previous, double current, int iteration) {
  if (current < previous - 1e-10 * std::max(1.0, std::abs(previous))) {
    std::ostringstream msg;
    msg << "EM log-likelihood decreased at iteration " << iteration << ": " << previous << " -> " << current;
    throw std::logic_error(msg.str());
  }
}

struct EmRun {
  std::vector<double> w;
  double ll;
  int iterations;
  bool converged;
  std::vector<double> history;
};

EmRun run_em(const ComponentTable& t, std::span<const double> counts, double total, std::vector<double> w,
             const EmOptions& opt, bool keep_history) {
  EmRun run{{}, 0.0, 0, false, {}};
  std::vector<double> next;
  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iters; ++it) {
    const double ll = em_step(t, counts, total, w, next);
    check_monotone(previous, ll, it);
    previous = ll;
    if (keep_history) run.history.push_back(ll);
    const double change = max_abs_diff(next, w);
    w.swap(next);
    run.iterations = it + 1;
    if (change < opt.tol) {
      run.converged = true;
      break;
    }
  }
  run.ll = log_likelihood(t, counts, w);
  check_monotone(previous, run.ll, run.iterations);
  if (keep_history) run.history.push_back(run.ll);
  run.w = std::move(w);
  return run;
}

// Newton ascent of the concave log-likelihood on the simplex; used for the
// bootstrap replicates, where it reaches the maximizer in a few iterations.
// Each step maximizes the quadratic model over the simplex exactly by
// enumerating its faces, which is cheap for the handful of weights fitted.
constexpr int kMaxNewtonWeights = 12;

std::vector<double> simplex_qp(const Eigen::VectorXd& g, const Eigen::MatrixXd& h, const std::vector<double>& w) {
  const int k_count = static_cast<int>(w.size());
  std::vector<double> best(k_count, 0.0);
  double best_value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd base(k_count);
  for (int k = 0; k < k_count; ++k) base(k) = w[k];
  for (unsigned mask = 1; mask < (1u << k_count); ++mask) {
    std::vector<int> idx;
    for (int k = 0; k < k_count; ++k)
      if (mask & (1u << k)) idx.push_back(k);
    const int f = static_cast<int>(idx.size());
    // Off-face coordinates go to zero: d_k = -w_k.
    Eigen::VectorXd fixed = Eigen::VectorXd::Zero(k_count);
    double fixed_sum = 0.0;
    for (int k = 0; k < k_count; ++k)
      if (!(mask & (1u << k))) {
        fixed(k) = -base(k);
        fixed_sum += base(k);
      }
    const Eigen::VectorXd gf = g + h * fixed;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + 1, f + 1);
    Eigen::VectorXd rhs(f + 1);
    for (int a = 0; a < f; ++a) {
      for (int b = 0; b < f; ++b) kkt(a, b) = h(idx[a], idx[b]);
      kkt(a, f) = kkt(f, a) = 1.0;
      rhs(a) = -gf(idx[a]);
    }
    rhs(f) = fixed_sum;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    if (!sol.allFinite()) continue;
    Eigen::VectorXd d = fixed;
    bool feasible = true;
    for (int a = 0; a < f; ++a) {
      d(idx[a]) = sol(a);
      if (base(idx[a]) + sol(a) < -1e-14) feasible = false;
    }
    if (!feasible) continue;
    const double value = g.dot(d) + 0.5 * d.dot(h * d);
    if (value > best_value) {
      best_value = value;
      for (int k = 0; k < k_count; ++k) best[k] = d(k);
    }
  }
  return best;
}

EmRun run_newton(const ComponentTable& t, std::span<const double> counts, double total, std::vector<double> w,
                 const EmOptions& opt) {
  const int k_count = t.cols;
  if (k_count > kMaxNewtonWeights) return run_em(t, counts, total, std::move(w), opt, false);
  EmRun run{{}, 0.0, 0, false, {}};
  std::vector<double> d_i(t.rows), trial(k_count), next;

  const auto evaluate = [&](const std::vector<double>& x, bool keep) {
    double ll = 0.0;
    for (std::size_t i = 0; i < t.rows; ++i) {
      const double m = counts.empty() ? 1.0 : counts[i];
      if (m == 0.0) continue;
      const double* row = t.row(i);
      double d = 0.0;
      for (int k = 0; k < k_count; ++k) d += x[k] * row[k];
      if (keep) d_i[i] = d;
      ll += m * std::log(d);
    }
    return ll;
  };

  double ll = evaluate(w, true);
  const int max_iters = std::min(opt.max_iters, 100);
  for (int it = 0; it < max_iters; ++it) {
    run.iterations = it + 1;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(k_count);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k_count, k_count);
    for (std::size_t i = 0; i < t.rows; ++i) {
      const double m = counts.empty() ? 1.0 : counts[i];
      if (m == 0.0) continue;
      const Eigen::Map<const Eigen::VectorXd> row(t.row(i), k_count);
      g += (m / d_i[i]) * row;
      h.selfadjointView<Eigen::Lower>().rankUpdate(row, -m / (d_i[i] * d_i[i]));
    }
    h = h.selfadjointView<Eigen::Lower>();
    const std::vector<double> step = simplex_qp(g, h, w);
    double ascent = 0.0, size = 0.0;
    for (int k = 0; k < k_count; ++k) {
      ascent += g(k) * step[k];
      size = std::max(size, std::abs(step[k]));
    }
    if (size < 0.1 * opt.tol || ascent <= 1e-13 * std::max(1.0, std::abs(ll))) {
      run.converged = true;
      break;
    }
    double len = 1.0;
    double ll_trial = -std::numeric_limits<double>::infinity();
    for (int bt = 0; bt < 60; ++bt) {
      for (int k = 0; k < k_count; ++k) trial[k] = std::max(0.0, w[k] + len * step[k]);
      ll_trial = evaluate(trial, false);
      if (std::isfinite(ll_trial) && ll_trial >= ll + 1e-4 * len * ascent) break;
      len *= 0.5;
    }
    if (!(ll_trial > ll)) {
      // Model and likelihood disagree at this scale; take a plain EM step.
      em_step(t, counts, total, w, next);
      trial = next;
      ll_trial = evaluate(trial, false);
      if (!(ll_trial > ll)) {
        run.converged = true;
        break;
      }
    }
    const double norm = std::accumulate(trial.begin(), trial.end(), 0.0);
    for (auto& x : trial) x /= norm;
    w = trial;
    ll = evaluate(w, true);
  }
  run.ll = ll;
  run.w = std::move(w);
  return run;
}

double percentile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void check_inputs(std::span<const RescaledSample> samples, int n_max) {
  if (samples.empty()) throw std::invalid_argument("mle_weights: no samples");
  if (n_max < 0) throw std::invalid_argument("mle_weights: n_max must be >= 0");
  for (const auto& s : samples)
    if (!std::isfinite(s.x)) throw std::invalid_argument("mle_weights: non-finite sample");
}

double table_sigma(const DetectionModel& det, const EmOptions& opt) {
  return opt.convolve_noise ? det.rescaled_noise_sd() : 0.0;
}

WeightIntervals bootstrap_from_table(const ComponentTable& table, const std::vector<double>& start, int n_resamples,
                                     std::uint64_t seed, const EmOptions& opt) {
  if (n_resamples < 1) throw std::invalid_argument("bootstrap_ci: n_resamples must be >= 1");
  const std::size_t s_count = table.rows;
  const int k_count = table.cols;
  std::vector<std::vector<double>> estimates(n_resamples);
  parallel_for(static_cast<std::size_t>(n_resamples), [&](std::size_t r) {
    RandomStream rng(seed, r);
    std::vector<double> counts(s_count, 0.0);
    for (std::size_t i = 0; i < s_count; ++i) counts[rng.below(s_count)] += 1.0;
    estimates[r] = run_newton(table, counts, static_cast<double>(s_count), start, opt).w;
  });
  WeightIntervals out{std::vector<double>(k_count), std::vector<double>(k_count)};
  std::vector<double> column(n_resamples);
  for (int k = 0; k < k_count; ++k) {
    for (int r = 0; r < n_resamples; ++r) column[r] = estimates[r][k];
    out.lower[k] = percentile(column, 0.16);
    out.upper[k] = percentile(column, 0.84);
  }
  return out;
}

}  // namespace

ReconstructionResult mle_weights(std::span<const RescaledSample> samples, int n_max, const DetectionModel& det,
                                 const EmOptions& options) {
  check_inputs(samples, n_max);
  const ComponentTable table(samples, n_max, table_sigma(det, options));
  const std::vector<double> uniform(n_max + 1, 1.0 / (n_max + 1));
  EmRun run = run_em(table, {}, static_cast<double>(samples.size()), uniform, options, true);
  ReconstructionResult out{fock::FockWeights(run.w), {}, {}, run.ll, run.iterations, run.converged,
                           std::move(run.history)};
  return out;
}

WeightIntervals bootstrap_ci(std::span<const RescaledSample> samples, int n_max, const DetectionModel& det,
                             int n_resamples, std::uint64_t seed, const EmOptions& options) {
  check_inputs(samples, n_max);
  const ComponentTable table(samples, n_max, table_sigma(det, options));
  const std::vector<double> uniform(n_max + 1, 1.0 / (n_max + 1));
  const auto start = run_em(table, {}, static_cast<double>(samples.size()), uniform, options, false).w;
  return bootstrap_from_table(table, start, n_resamples, seed, options);
}

ReconstructionResult reconstruct(std::span<const RescaledSample> samples, int n_max, const DetectionModel& det,
                                 int n_resamples, std::uint64_t seed, const EmOptions& options) {
  check_inputs(samples, n_max);
  const ComponentTable table(samples, n_max, table_sigma(det, options));
  const std::vector<double> uniform(n_max + 1, 1.0 / (n_max + 1));
  EmRun run = run_em(table, {}, static_cast<double>(samples.size()), uniform, options, true);
  auto ci = bootstrap_from_table(table, run.w, n_resamples, seed, options);
  for (int k = 0; k <= n_max; ++k) {
    ci.lower[k] = std::min(ci.lower[k], run.w[k]);
    ci.upper[k] = std::max(ci.upper[k], run.w[k]);
  }
  return ReconstructionResult{fock::FockWeights(run.w), std::move(ci.lower), std::move(ci.upper), run.ll,
                              run.iterations, run.converged, std::move(run.history)};
}

Posteriors bayes_posteriors(double x, const fock::FockWeights& weights_yes, const Density& pdf_no,
                            const homodyne::ComponentDensities& components, double prior_p) {
  if (!(prior_p >= 0.0 && prior_p <= 1.0)) throw std::invalid_argument("bayes_posteriors: prior_p must be in [0,1]");
  if (weights_yes.n_max() > components.n_max())
    throw std::invalid_argument("bayes_posteriors: weights extend beyond the component table");
  const double no = (1.0 - prior_p) * pdf_no(x);
  const double ifm = prior_p * weights_yes[0] * components(0, x);
  double inter = 0.0;
  for (int n = 1; n <= weights_yes.n_max(); ++n)
    if (weights_yes[n] > 0.0) inter += weights_yes[n] * components(n, x);
  inter *= prior_p;
  const double evidence = no + ifm + inter;
  if (!(evidence > 0.0) || !std::isfinite(evidence)) {
    std::ostringstream msg;
    msg << "bayes_posteriors: x=" << x << " is outside the support of both hypotheses";
    throw OutOfSupportError(msg.str());
  }
  return Posteriors{no / evidence, ifm / evidence, inter / evidence};
}

Posteriors bayes_posteriors(const RescaledSample& x, const fock::FockWeights& weights_yes, const Density& pdf_no,
                            const DetectionModel& det, double prior_p) {
  return bayes_posteriors(x.x, weights_yes, pdf_no,
                          homodyne::ComponentDensities(weights_yes.n_max(), det.rescaled_noise_sd()), prior_p);
}

std::vector<ThresholdPoint> threshold_scan(const Density& pdf_yes, const Density& pdf_no,
                                           std::span<const double> L_grid, double abs_tol) {
  std::vector<ThresholdPoint> out;
  out.reserve(L_grid.size());
  double prev_L = 0.0, in_yes = 0.0, in_no = 0.0;
  for (double L : L_grid) {
    if (!(L >= 0.0)) throw std::invalid_argument("threshold_scan: thresholds must be >= 0");
    if (L < prev_L) throw std::invalid_argument("threshold_scan: thresholds must be ascending");
    // Symmetric shells [-L, -prev] and [prev, L] are added to the running masses.
    if (L > prev_L) {
      in_yes += numerics::integrate(pdf_yes, prev_L, L, abs_tol) + numerics::integrate(pdf_yes, -L, -prev_L, abs_tol);
      in_no += numerics::integrate(pdf_no, prev_L, L, abs_tol) + numerics::integrate(pdf_no, -L, -prev_L, abs_tol);
    }
    prev_L = L;
    out.push_back({L, std::clamp(in_yes, 0.0, 1.0), std::clamp(1.0 - in_no, 0.0, 1.0)});
  }
  return out;
}

OptimalThreshold optimal_threshold(const Density& pdf_yes, const Density& pdf_no, double L_max, double abs_tol) {
  if (!(L_max > 0.0)) throw std::invalid_argument("optimal_threshold: L_max must be > 0");
  const auto gap = [&](double L) {
    const double in_yes = numerics::integrate(pdf_yes, -L, L, abs_tol);
    const double out_no = 1.0 - numerics::integrate(pdf_no, -L, L, abs_tol);
    return std::pair{in_yes - out_no, 0.5 * (in_yes + out_no)};
  };
  double lo = 0.0, hi = L_max;
  if (!(gap(hi).first > 0.0))
    throw NoCrossingError("optimal_threshold: inside-mass of pdf_yes never reaches outside-mass of pdf_no");
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid).first < 0.0 ? lo : hi) = mid;
  }
  const double L = 0.5 * (lo + hi);
  return OptimalThreshold{L, gap(L).second};
}

double ev_figure_of_merit(double p_detect, double p_inconclusive, double p_interaction) {
  if (p_detect < 0.0 || p_inconclusive < 0.0 || p_interaction < 0.0)
    throw std::invalid_argument("ev_figure_of_merit: probabilities must be >= 0");
  if (std::abs(p_detect + p_inconclusive + p_interaction - 1.0) > 1e-9)
    throw std::invalid_argument("ev_figure_of_merit: probabilities must sum to 1");
  if (p_detect + p_interaction == 0.0)
    throw std::domain_error("ev_figure_of_merit: undefined when detection and interaction are both impossible");
  return p_detect / (p_detect + p_interaction);
}

OutcomeProbs with_object_outcome_probs(const fock::FockWeights& weights_yes,
                                       const homodyne::ComponentDensities& components, double L, double abs_tol) {
  if (!(L >= 0.0)) throw std::invalid_argument("with_object_outcome_probs: L must be >= 0");
  double inside = 0.0;
  if (std::isinf(L))
    inside = 1.0;
  else if (L > 0.0)
    inside = std::min(1.0, numerics::integrate([&](double x) { return components(0, x); }, -L, L, abs_tol));
  const double w0 = weights_yes[0];
  return OutcomeProbs{w0 * inside, w0 * (1.0 - inside), 1.0 - w0};
}

double ideal_counting_confidence(double xi) {
  if (!(xi >= 0.0)) throw std::invalid_argument("ideal_counting_confidence: xi must be >= 0");
  const double c = std::cosh(xi);
  return 1.0 - 1.0 / (c * c);
}

ConfidenceEstimate ideal_counting_confidence_mc(double xi, std::size_t n_shots, std::uint64_t seed) {
  if (!(xi >= 0.0)) throw std::invalid_argument("ideal_counting_confidence_mc: xi must be >= 0");
  if (n_shots == 0) throw std::invalid_argument("ideal_counting_confidence_mc: n_shots must be > 0");
  const double t = std::tanh(xi);
  const double log_r = std::log(t * t);
  RandomStream rng(seed, 0);
  std::size_t detected = 0;
  for (std::size_t i = 0; i < n_shots; ++i) {
    // Geometric pair number: n = floor(log u / log tanh^2 xi).
    const long n = xi == 0.0 ? 0 : static_cast<long>(std::floor(std::log(rng.uniform()) / log_r));
    if (n > 0) ++detected;
  }
  const double p = static_cast<double>(detected) / static_cast<double>(n_shots);
  return ConfidenceEstimate{p, std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(n_shots)) /
                                         static_cast<double>(n_shots))};
}

ExponentialFit fit_exponential_decay(std::span<const double> times, std::span<const double> counts) {
  if (times.size() != counts.size()) throw std::invalid_argument("fit_exponential_decay: size mismatch");
  if (times.size() < 3) throw std::invalid_argument("fit_exponential_decay: need at least 3 points");
  for (double c : counts)
    if (!(c > 0.0)) throw std::invalid_argument("fit_exponential_decay: counts must be > 0");
  const std::size_t m = times.size();
  const double t_mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(m);
  double stt = 0.0, spread = 0.0, scale = 0.0;
  for (double t : times) {
    stt += (t - t_mean) * (t - t_mean);
    spread = std::max(spread, std::abs(t - t_mean));
    scale = std::max(scale, std::abs(t));
  }
  if (!(spread > 1e-12 * scale)) throw std::invalid_argument("fit_exponential_decay: all times are equal");

  double y_mean = 0.0;
  for (double c : counts) y_mean += std::log(c);
  y_mean /= static_cast<double>(m);
  double sty = 0.0;
  for (std::size_t i = 0; i < m; ++i) sty += (times[i] - t_mean) * (std::log(counts[i]) - y_mean);
  double gamma = -sty / stt;
  double amp = std::exp(y_mean + gamma * t_mean);

  const auto cost = [&](double a, double g) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = a * std::exp(-g * times[i]) - counts[i];
      s += r * r;
    }
    return s;
  };
  double current = cost(amp, gamma);
  double lambda = 1e-3;
  int iterations = 0;
  for (; iterations < 500; ++iterations) {
    double jaa = 0.0, jag = 0.0, jgg = 0.0, ga = 0.0, gg = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = std::exp(-gamma * times[i]);
      const double r = amp * e - counts[i];
      const double da = e;
      const double dg = -amp * times[i] * e;
      jaa += da * da;
      jag += da * dg;
      jgg += dg * dg;
      ga += da * r;
      gg += dg * r;
    }
    bool improved = false;
    while (lambda < 1e12) {
      const double a11 = jaa * (1.0 + lambda), a22 = jgg * (1.0 + lambda);
      const double det = a11 * a22 - jag * jag;
      const double step_a = -(a22 * ga - jag * gg) / det;
      const double step_g = -(a11 * gg - jag * ga) / det;
      const double trial = cost(amp + step_a, gamma + step_g);
      if (std::isfinite(trial) && trial <= current) {
        const double rel = std::abs(step_a) / std::max(std::abs(amp), 1e-300) +
                           std::abs(step_g) / std::max(std::abs(gamma), 1.0);
        amp += step_a;
        gamma += step_g;
        const bool flat = current - trial <= 1e-15 * current;
        current = trial;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = !(flat || rel < 1e-14);
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return ExponentialFit{gamma, amp, std::sqrt(current / static_cast<double>(m)), iterations};
}

}  // namespace zeno::inference

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "zeno/fockspace.hpp"
#include "zeno/homodyne.hpp"

namespace zeno::inference {

using homodyne::DetectionModel;
using homodyne::RescaledSample;
using Density = std::function<double(double)>;

struct EmOptions {
  int max_iters = 10000;
  double tol = 1e-8;            ///< on max |w_new - w_old|
  bool convolve_noise = true;   ///< false fits noiseless components to noisy data
};

struct ReconstructionResult {
  fock::FockWeights weights;
  std::vector<double> ci_lower;   ///< empty until a bootstrap has been run
  std::vector<double> ci_upper;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood_history;  ///< at the start of every iteration, then the final value
};

/// Expectation-maximization over the mixture weights w_0..w_{n_max}, started
/// from uniform weights. Throws std::logic_error if the log-likelihood ever
/// decreases, which would indicate a defect rather than a data problem.
ReconstructionResult mle_weights(std::span<const RescaledSample> samples, int n_max, const DetectionModel& det,
                                 const EmOptions& options = {});

struct WeightIntervals {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Percentile bootstrap (16th/84th) of the EM estimate. Resample r uses its
/// own random stream derived from (seed, r), so results do not depend on
/// thread scheduling. Each replicate starts from the full-data estimate and
/// uses accelerated EM with the same stopping rule.
WeightIntervals bootstrap_ci(std::span<const RescaledSample> samples, int n_max, const DetectionModel& det,
                             int n_resamples, std::uint64_t seed, const EmOptions& options = {});

/// mle_weights plus bootstrap_ci. The interval is widened where needed so it
/// always contains the point estimate.
ReconstructionResult reconstruct(std::span<const RescaledSample> samples, int n_max, const DetectionModel& det,
                                 int n_resamples, std::uint64_t seed, const EmOptions& options = {});

struct Posteriors {
  double p_no;
  double p_ifm;
  double p_int;
};

class OutOfSupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Posterior probabilities of: no object; object without interaction (the
/// n = 0 component of the with-object mixture); object with interaction.
Posteriors bayes_posteriors(double x, const fock::FockWeights& weights_yes, const Density& pdf_no,
                            const homodyne::ComponentDensities& components, double prior_p);
Posteriors bayes_posteriors(const RescaledSample& x, const fock::FockWeights& weights_yes, const Density& pdf_no,
                            const DetectionModel& det, double prior_p);

struct ThresholdPoint {
  double L;
  double p_in_yes;   ///< mass of pdf_yes on [-L, L]
  double p_out_no;   ///< mass of pdf_no outside [-L, L]
};

std::vector<ThresholdPoint> threshold_scan(const Density& pdf_yes, const Density& pdf_no,
                                           std::span<const double> L_grid, double abs_tol = 1e-10);

struct OptimalThreshold {
  double L_star;
  double confidence;
};

class NoCrossingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bisection for p_in_yes(L) = p_out_no(L) on [0, L_max].
OptimalThreshold optimal_threshold(const Density& pdf_yes, const Density& pdf_no, double L_max = 40.0,
                                   double abs_tol = 1e-10);

/// P(D) / (P(D) + P(int)), the asymptotic detection probability after
/// repeating inconclusive rounds.
double ev_figure_of_merit(double p_detect, double p_inconclusive, double p_interaction);

struct OutcomeProbs {
  double p_detect;
  double p_inconclusive;
  double p_interaction;
};

/// Any n > 0 counts as an interaction; the n = 0 branch is split by whether
/// the homodyne reading falls inside [-L, L].
OutcomeProbs with_object_outcome_probs(const fock::FockWeights& weights_yes,
                                       const homodyne::ComponentDensities& components, double L,
                                       double abs_tol = 1e-10);

struct DiscriminationReport {
  double threshold_L;
  double confidence_with;
  double confidence_without;
  double p_interaction;
  double eta;
};

/// Ideal atom counting: declare "object" iff no atom is detected. With the
/// object the outcome is always correct; without it the rule errs only on the
/// vacuum component, so the confidence is 1 - 1/cosh^2(xi).
double ideal_counting_confidence(double xi);

/// Monte Carlo estimate of the same quantity from n_shots sampled pair numbers.
struct ConfidenceEstimate {
  double value;
  double standard_error;
};
ConfidenceEstimate ideal_counting_confidence_mc(double xi, std::size_t n_shots, std::uint64_t seed);

struct ExponentialFit {
  double gamma;
  double amplitude;
  double residual;    ///< root-mean-square residual in count units
  int iterations;
};

/// Least-squares fit of A e^{-gamma t}: log-linear regression for the start
/// point, then Levenberg-Marquardt on the untransformed residuals.
ExponentialFit fit_exponential_decay(std::span<const double> times, std::span<const double> counts);

}  // namespace zeno::inference

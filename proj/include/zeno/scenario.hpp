#pragma once

#include <string>
#include <vector>

#include "zeno/config.hpp"
#include "zeno/dynamics.hpp"
#include "zeno/homodyne.hpp"
#include "zeno/inference.hpp"

namespace zeno::cli {

struct GrowthRow {
  double t;
  double closed;
  double moments;
  double master;
};

/// N_+ on a uniform grid of t_points over [0, t_final] from the closed form,
/// the moment equations and the master equation started in vacuum.
std::vector<GrowthRow> compute_growth(const ScenarioConfig& config);

std::vector<dynamics::ZenoPoint> compute_zeno_sweep(const ScenarioConfig& config);

struct VarianceRow {
  double t;
  double xi;
  double theory;   ///< cosh(2 xi) + sigma_resc^2
  double sample;
};

/// Homodyne variance of the no-object state along the time grid.
std::vector<VarianceRow> compute_variance(const ScenarioConfig& config);

/// Loss rate at which the moment equations give the +1 mode the thermal
/// vacuum weight target_w0 at base.t_final. Bisection on the monotone
/// dependence of N_+ on gamma.
double calibrate_gamma(const dynamics::SpinDynamicsParams& base, double target_w0);

struct StateModel {
  fock::FockWeights weights;
  double gamma;          ///< loss rate used (calibrated when target_w0 is set)
  double mean_occupation;
};

/// Thermal weights with mean N_+(t_final; gamma) from the moment equations.
StateModel with_object_model(const ScenarioConfig& config);
/// Pair-state weights at xi = omega t_final.
StateModel without_object_model(const ScenarioConfig& config);

struct HistogramResult {
  StateModel model;
  homodyne::ShotBatch batch;
  double mean;
  double variance;
};

HistogramResult compute_histogram(const ScenarioConfig& config, bool object_present);

struct AnalysisResult {
  HistogramResult with_object;
  HistogramResult without_object;
  inference::ReconstructionResult reconstruction;
  inference::OptimalThreshold threshold;
  inference::DiscriminationReport report;
  inference::OutcomeProbs outcomes;
  std::vector<double> posterior_x;
  std::vector<inference::Posteriors> posterior_curve;
  std::vector<inference::ThresholdPoint> scan;
};

/// Full discrimination pipeline: both histograms, reconstruction with
/// bootstrap, threshold, outcome split, figure of merit and posterior curve.
/// The with-object density for the threshold is that of the no-interaction
/// branch; the no-object density is a zero-mean Gaussian with the sample
/// variance of the no-object shots.
AnalysisResult run_analysis(const ScenarioConfig& config);

struct DecayCalibration {
  std::vector<double> times;
  std::vector<double> counts;
  inference::ExponentialFit fit;
};

DecayCalibration compute_calibrate_loss(const ScenarioConfig& config);

/// Writes content to path via a temporary file and rename.
void write_atomically(const std::string& path, const std::string& content);

/// Runs config.scenario and writes its outputs into config.output_dir.
/// Returns the paths written.
std::vector<std::string> run_scenario(const ScenarioConfig& config);

}  // namespace zeno::cli

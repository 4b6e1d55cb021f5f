#include "zeno/scenario.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "zeno/random.hpp"

namespace zeno::cli {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Stream indices under the run seed.
constexpr std::uint64_t kStreamWithObject = 1;
constexpr std::uint64_t kStreamWithoutObject = 2;
constexpr std::uint64_t kStreamBootstrap = 3;
constexpr std::uint64_t kStreamDecay = 4;
constexpr std::uint64_t kStreamVariance = 100;

// Block-stored states grow as n_max^3; beyond this the master equation is
// only run on the lossless state-vector path.
constexpr int kMaxLossyCutoff = 300;

void write_json_value(std::ostringstream& out, const Json& v) {
  switch (v.type()) {
    case Json::value_t::object: {
      out << '{';
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out << ',';
        first = false;
        out << Json(key).dump() << ':';
        write_json_value(out, item);
      }
      out << '}';
      break;
    }
    case Json::value_t::array: {
      out << '[';
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out << ',';
        write_json_value(out, v[i]);
      }
      out << ']';
      break;
    }
    case Json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw std::runtime_error("output: non-finite number cannot be written as JSON");
      out << format_double(d);
      break;
    }
    default:
      out << v.dump();
  }
}

std::string json_text(const Json& v) {
  std::ostringstream out;
  write_json_value(out, v);
  out << '\n';
  return out.str();
}

std::string csv_preamble(const ScenarioConfig& c) {
  return "# scenario=" + std::string(scenario_name(c.scenario)) + " seed=" + std::to_string(c.seed) +
         " config_hash=" + config_hash(c) + "\n";
}

Json header_json(const ScenarioConfig& c) {
  Json j;
  j["scenario"] = scenario_name(c.scenario);
  j["seed"] = c.seed;
  j["config_hash"] = config_hash(c);
  return j;
}

std::string out_path(const ScenarioConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

fock::FockCutoff master_cutoff(const ScenarioConfig& c, const dynamics::SpinDynamicsParams& p) {
  const auto cut = c.cutoff ? fock::FockCutoff(*c.cutoff) : dynamics::adequate_cutoff(p, c.cutoff_tol);
  if (p.gamma > 0.0 && cut.n_max() > kMaxLossyCutoff) {
    std::ostringstream msg;
    msg << "growth: the master equation with loss needs cutoff " << cut.n_max() << ", above the supported "
        << kMaxLossyCutoff << "; shorten t_final or set --cutoff";
    throw ConfigError(msg.str());
  }
  return cut;
}

Json weights_json(const fock::FockWeights& w) {
  Json arr = Json::array();
  for (double v : w.values()) arr.push_back(v);
  return arr;
}

std::vector<std::string> run_growth(const ScenarioConfig& c) {
  std::ostringstream csv;
  csv << csv_preamble(c) << "t_s,n_plus_closed,n_plus_moments,n_plus_master\n";
  for (const auto& r : compute_growth(c))
    csv << format_double(r.t) << ',' << format_double(r.closed) << ',' << format_double(r.moments) << ','
        << format_double(r.master) << '\n';
  const auto path = out_path(c, "growth.csv");
  write_atomically(path, csv.str());
  return {path};
}

std::vector<std::string> run_zeno_sweep(const ScenarioConfig& c) {
  std::ostringstream csv;
  csv << csv_preamble(c) << "gamma_per_s,n_plus\n";
  for (const auto& p : compute_zeno_sweep(c)) csv << format_double(p.gamma) << ',' << format_double(p.n_plus) << '\n';
  const auto path = out_path(c, "zeno_sweep.csv");
  write_atomically(path, csv.str());
  return {path};
}

std::vector<std::string> run_variance(const ScenarioConfig& c) {
  std::ostringstream csv;
  csv << csv_preamble(c) << "t_s,xi,variance_theory,variance_sample\n";
  for (const auto& r : compute_variance(c))
    csv << format_double(r.t) << ',' << format_double(r.xi) << ',' << format_double(r.theory) << ','
        << format_double(r.sample) << '\n';
  const auto path = out_path(c, "variance.csv");
  write_atomically(path, csv.str());
  return {path};
}

std::vector<std::string> run_histogram(const ScenarioConfig& c) {
  const auto h = compute_histogram(c, c.with_object);
  const std::string stem = c.with_object ? "histogram_with_object" : "histogram_without_object";
  std::ostringstream csv;
  csv << csv_preamble(c) << "shot,n0_after,n_plus_after,x\n";
  for (std::size_t i = 0; i < h.batch.raw.size(); ++i)
    csv << i << ',' << format_double(h.batch.raw[i].n0_after) << ',' << format_double(h.batch.raw[i].n_plus_after)
        << ',' << format_double(h.batch.rescaled[i].x) << '\n';
  const double sigma = c.detection().rescaled_noise_sd();
  Json j = header_json(c);
  j["object_present"] = c.with_object;
  j["shots"] = h.batch.raw.size();
  j["mean"] = h.mean;
  j["variance"] = h.variance;
  j["variance_model"] = homodyne::displaced_variance(h.model.weights) + sigma * sigma;
  j["gamma_per_s"] = h.model.gamma;
  j["mean_occupation"] = h.model.mean_occupation;
  j["w0_model"] = h.model.weights[0];
  const auto csv_path = out_path(c, stem + ".csv");
  const auto json_path = out_path(c, stem + ".json");
  write_atomically(csv_path, csv.str());
  write_atomically(json_path, json_text(j));
  return {csv_path, json_path};
}

Json ci_json(const inference::ReconstructionResult& r) {
  Json ci = Json::array();
  for (std::size_t k = 0; k < r.ci_lower.size(); ++k) ci.push_back(Json::array({r.ci_lower[k], r.ci_upper[k]}));
  return ci;
}

std::vector<std::string> run_reconstruct(const ScenarioConfig& c) {
  const auto h = compute_histogram(c, true);
  const auto r = inference::reconstruct(h.batch.rescaled, c.n_fit, c.detection(), c.resamples,
                                        derive_seed(c.seed, kStreamBootstrap),
                                        inference::EmOptions{10000, 1e-8, c.convolve_noise});
  Json j = header_json(c);
  j["weights"] = weights_json(r.weights);
  j["ci"] = ci_json(r);
  j["log_likelihood"] = r.log_likelihood;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["gamma_per_s"] = h.model.gamma;
  j["w0_model"] = h.model.weights[0];
  const auto path = out_path(c, "reconstruct.json");
  write_atomically(path, json_text(j));
  return {path};
}

Json analysis_json(const ScenarioConfig& c, const AnalysisResult& a) {
  Json j;
  j["weights"] = weights_json(a.reconstruction.weights);
  j["ci"] = ci_json(a.reconstruction);
  j["threshold_L"] = a.report.threshold_L;
  j["confidence"] = a.threshold.confidence;
  j["eta"] = a.report.eta;
  Json curve = Json::array();
  for (std::size_t i = 0; i < a.posterior_x.size(); ++i) {
    Json row;
    row["x"] = a.posterior_x[i];
    row["p_no"] = a.posterior_curve[i].p_no;
    row["p_ifm"] = a.posterior_curve[i].p_ifm;
    row["p_int"] = a.posterior_curve[i].p_int;
    curve.push_back(row);
  }
  j["posterior_curve"] = curve;
  j["seed"] = c.seed;
  j["config_hash"] = config_hash(c);
  j["scenario"] = scenario_name(c.scenario);
  j["confidence_with"] = a.report.confidence_with;
  j["confidence_without"] = a.report.confidence_without;
  j["p_detect"] = a.outcomes.p_detect;
  j["p_inconclusive"] = a.outcomes.p_inconclusive;
  j["p_interaction"] = a.outcomes.p_interaction;
  j["gamma_per_s"] = a.with_object.model.gamma;
  j["w0_model"] = a.with_object.model.weights[0];
  j["variance_without"] = a.without_object.variance;
  j["prior"] = c.prior;
  return j;
}

std::vector<std::string> run_bayes(const ScenarioConfig& c) {
  const auto a = run_analysis(c);
  const auto path = out_path(c, "bayes.json");
  write_atomically(path, json_text(analysis_json(c, a)));
  return {path};
}

std::vector<std::string> run_ev_merit(const ScenarioConfig& c) {
  const auto json_path = out_path(c, "ev_merit.json");
  if (c.outcomes) {
    const auto [pd, pb, pi] = *c.outcomes;
    Json j = header_json(c);
    j["p_detect"] = pd;
    j["p_inconclusive"] = pb;
    j["p_interaction"] = pi;
    j["eta"] = inference::ev_figure_of_merit(pd, pb, pi);
    write_atomically(json_path, json_text(j));
    return {json_path};
  }
  const auto a = run_analysis(c);
  std::ostringstream csv;
  csv << csv_preamble(c) << "L,p_in_yes,p_out_no,p_detect,p_inconclusive,p_interaction,eta\n";
  const double w0 = a.reconstruction.weights[0];
  for (const auto& p : a.scan) {
    // p_in_yes is the vacuum-branch mass inside [-L, L].
    const inference::OutcomeProbs o{w0 * p.p_in_yes, w0 * (1.0 - p.p_in_yes), 1.0 - w0};
    const double eta = o.p_detect + o.p_interaction > 0.0 ? o.p_detect / (o.p_detect + o.p_interaction) : 0.0;
    csv << format_double(p.L) << ',' << format_double(p.p_in_yes) << ',' << format_double(p.p_out_no) << ','
        << format_double(o.p_detect) << ',' << format_double(o.p_inconclusive) << ','
        << format_double(o.p_interaction) << ',' << format_double(eta) << '\n';
  }
  Json j = header_json(c);
  j["threshold_L"] = a.report.threshold_L;
  j["confidence"] = a.threshold.confidence;
  j["p_detect"] = a.outcomes.p_detect;
  j["p_inconclusive"] = a.outcomes.p_inconclusive;
  j["p_interaction"] = a.outcomes.p_interaction;
  j["eta"] = a.report.eta;
  const auto csv_path = out_path(c, "ev_merit.csv");
  write_atomically(csv_path, csv.str());
  write_atomically(json_path, json_text(j));
  return {csv_path, json_path};
}

std::vector<std::string> run_calibrate_loss(const ScenarioConfig& c) {
  const auto d = compute_calibrate_loss(c);
  std::ostringstream csv;
  csv << csv_preamble(c) << "t_s,count\n";
  for (std::size_t i = 0; i < d.times.size(); ++i) csv << format_double(d.times[i]) << ',' << format_double(d.counts[i]) << '\n';
  Json j = header_json(c);
  j["gamma_true"] = c.synthetic_gamma;
  j["gamma_fit"] = d.fit.gamma;
  j["relative_error"] = c.synthetic_gamma > 0.0 ? std::abs(d.fit.gamma - c.synthetic_gamma) / c.synthetic_gamma
                                                : std::abs(d.fit.gamma);
  j["amplitude"] = d.fit.amplitude;
  j["residual"] = d.fit.residual;
  j["iterations"] = d.fit.iterations;
  const auto csv_path = out_path(c, "calibrate_loss.csv");
  const auto json_path = out_path(c, "calibrate_loss.json");
  write_atomically(csv_path, csv.str());
  write_atomically(json_path, json_text(j));
  return {csv_path, json_path};
}

double mean_of(std::span<const double> xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

}  // namespace

std::vector<GrowthRow> compute_growth(const ScenarioConfig& c) {
  c.validate();
  auto p = c.physics();
  const int intervals = c.t_points - 1;
  if (intervals == 0) p.t_final = 0.0;
  int steps_per = 1;
  if (intervals > 0 && p.t_final > 0.0) {
    steps_per = std::max(1, static_cast<int>(std::ceil(p.t_final / intervals / c.dt - 1e-9)));
    p.dt = p.t_final / (static_cast<double>(steps_per) * intervals);
  }
  const auto moments = dynamics::evolve_moments(p, dynamics::MomentOptions{steps_per});
  dynamics::DensityEvolutionOptions opt;
  opt.sample_every = steps_per;
  opt.keep_final_state = false;
  opt.check_positivity = false;
  const auto cut = master_cutoff(c, p);
  const auto master = dynamics::evolve_from_vacuum(cut, p, opt);
  const std::size_t rows = intervals == 0 ? 1 : static_cast<std::size_t>(intervals) + 1;
  if (moments.states.size() < rows || master.moments.size() < rows)
    throw std::logic_error("growth: sample grids do not line up");
  std::vector<GrowthRow> out;
  for (std::size_t k = 0; k < rows; ++k) {
    const double t = intervals == 0 ? 0.0 : p.t_final * static_cast<double>(k) / intervals;
    out.push_back({t, dynamics::mean_pairs_closed_form(p.omega, t), moments.states[k].n_plus,
                   master.moments[k].n_plus});
  }
  return out;
}

std::vector<dynamics::ZenoPoint> compute_zeno_sweep(const ScenarioConfig& c) {
  c.validate();
  return dynamics::zeno_sweep(c.physics(), c.gamma_grid);
}

std::vector<VarianceRow> compute_variance(const ScenarioConfig& c) {
  c.validate();
  const auto det = c.detection();
  const double s2 = std::pow(det.rescaled_noise_sd(), 2);
  const double omega = c.physics().omega;
  const double t_end = c.physics().t_final;
  const int intervals = c.t_points - 1;
  std::vector<VarianceRow> out;
  for (int k = 0; k <= intervals; ++k) {
    const double t = intervals == 0 ? t_end : t_end * k / intervals;
    const double xi = omega * t;
    const auto cut = c.cutoff ? fock::FockCutoff(*c.cutoff) : fock::default_tmsv_cutoff(xi, c.cutoff_tol);
    const auto w = fock::tmsv_weights(xi, cut).weights;
    const auto batch = homodyne::sample_shots(w, det, c.shots, derive_seed(c.seed, kStreamVariance + k));
    const auto xs = homodyne::values(batch.rescaled);
    out.push_back({t, xi, std::cosh(2.0 * xi) + s2, c.shots > 1 ? homodyne::sample_variance(xs) : 0.0});
  }
  return out;
}

double calibrate_gamma(const dynamics::SpinDynamicsParams& base, double target_w0) {
  if (!(target_w0 > 0.0 && target_w0 <= 1.0)) throw std::invalid_argument("calibrate_gamma: target_w0 must be in (0,1]");
  const double target = 1.0 / target_w0 - 1.0;
  const auto n_plus = [&](double g) {
    auto p = base;
    p.gamma = g;
    return dynamics::evolve_moments(p, dynamics::MomentOptions{0}).final().n_plus;
  };
  if (n_plus(0.0) <= target) return 0.0;
  constexpr double kMaxGamma = 2e4;
  double lo = 0.0, hi = 1.0;
  while (n_plus(hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > kMaxGamma) throw std::runtime_error("calibrate_gamma: target vacuum weight not reachable");
  }
  for (int it = 0; it < 100 && hi - lo > 1e-10 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (n_plus(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

StateModel with_object_model(const ScenarioConfig& c) {
  c.validate();
  auto p = c.physics();
  if (c.target_w0) p.gamma = calibrate_gamma(p, *c.target_w0);
  const double nbar = std::max(0.0, dynamics::evolve_moments(p, dynamics::MomentOptions{0}).final().n_plus);
  const int n_max = c.cutoff ? *c.cutoff : fock::cutoff_for_mean_occupation(nbar, c.cutoff_tol).n_max();
  return StateModel{fock::FockWeights::thermal(nbar, n_max), p.gamma, nbar};
}

StateModel without_object_model(const ScenarioConfig& c) {
  c.validate();
  const double xi = c.squeezing();
  const auto cut = c.cutoff ? fock::FockCutoff(*c.cutoff) : fock::default_tmsv_cutoff(xi, c.cutoff_tol);
  const double s = std::sinh(xi);
  return StateModel{fock::tmsv_weights(xi, cut).weights, 0.0, s * s};
}

HistogramResult compute_histogram(const ScenarioConfig& c, bool object_present) {
  auto model = object_present ? with_object_model(c) : without_object_model(c);
  auto batch = homodyne::sample_shots(model.weights, c.detection(), c.shots,
                                      derive_seed(c.seed, object_present ? kStreamWithObject : kStreamWithoutObject));
  const auto xs = homodyne::values(batch.rescaled);
  const double mean = mean_of(xs);
  const double var = xs.size() > 1 ? homodyne::sample_variance(xs) : 0.0;
  return HistogramResult{std::move(model), std::move(batch), mean, var};
}

AnalysisResult run_analysis(const ScenarioConfig& c) {
  c.validate();
  auto with = compute_histogram(c, true);
  auto without = compute_histogram(c, false);
  if (!(without.variance > 0.0)) throw std::runtime_error("analysis: no-object shots have zero variance");
  const auto det = c.detection();
  auto rec = inference::reconstruct(with.batch.rescaled, c.n_fit, det, c.resamples,
                                    derive_seed(c.seed, kStreamBootstrap),
                                    inference::EmOptions{10000, 1e-8, c.convolve_noise});
  const double sigma = c.convolve_noise ? det.rescaled_noise_sd() : 0.0;
  const homodyne::ComponentDensities comps(c.n_fit, sigma);
  const double var_no = without.variance;
  const inference::Density pdf_yes = [&comps](double x) { return comps(0, x); };
  const inference::Density pdf_no = [var_no](double x) { return homodyne::gaussian_pdf(x, var_no); };

  const auto thr = inference::optimal_threshold(pdf_yes, pdf_no);
  const double at_star[] = {thr.L_star};
  const auto point = inference::threshold_scan(pdf_yes, pdf_no, at_star).front();
  const auto outcomes = inference::with_object_outcome_probs(rec.weights, comps, thr.L_star);
  const double eta = inference::ev_figure_of_merit(outcomes.p_detect, outcomes.p_inconclusive, outcomes.p_interaction);

  std::vector<double> grid(c.threshold_points);
  for (int i = 0; i < c.threshold_points; ++i) grid[i] = c.threshold_max * i / (c.threshold_points - 1);
  auto scan = inference::threshold_scan(pdf_yes, pdf_no, grid);

  std::vector<double> xs(c.posterior_points);
  std::vector<inference::Posteriors> curve(c.posterior_points);
  for (int i = 0; i < c.posterior_points; ++i) {
    xs[i] = -c.posterior_x_max + 2.0 * c.posterior_x_max * i / (c.posterior_points - 1);
    curve[i] = inference::bayes_posteriors(xs[i], rec.weights, pdf_no, comps, c.prior);
  }
  inference::DiscriminationReport report{thr.L_star, point.p_in_yes, point.p_out_no, outcomes.p_interaction, eta};
  return AnalysisResult{std::move(with), std::move(without), std::move(rec), thr, report, outcomes,
                        std::move(xs), std::move(curve), std::move(scan)};
}

DecayCalibration compute_calibrate_loss(const ScenarioConfig& c) {
  c.validate();
  DecayCalibration d;
  RandomStream rng(c.seed, kStreamDecay);
  for (int i = 0; i < c.decay_points; ++i) {
    const double t = c.decay_t_max * i / (c.decay_points - 1);
    const double clean = c.decay_amplitude * std::exp(-c.synthetic_gamma * t);
    const double noisy = c.decay_noise > 0.0 ? clean * (1.0 + c.decay_noise * rng.normal()) : clean;
    d.times.push_back(t);
    d.counts.push_back(std::max(noisy, 1e-9 * clean));
  }
  d.fit = inference::fit_exponential_decay(d.times, d.counts);
  return d;
}

void write_atomically(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("output: cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw std::runtime_error("output: write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, target);
}

std::vector<std::string> run_scenario(const ScenarioConfig& c) {
  c.validate();
  switch (c.scenario) {
    case Scenario::growth: return run_growth(c);
    case Scenario::zeno_sweep: return run_zeno_sweep(c);
    case Scenario::variance: return run_variance(c);
    case Scenario::histogram: return run_histogram(c);
    case Scenario::reconstruct: return run_reconstruct(c);
    case Scenario::bayes: return run_bayes(c);
    case Scenario::ev_merit: return run_ev_merit(c);
    case Scenario::calibrate_loss: return run_calibrate_loss(c);
  }
  throw std::logic_error("run_scenario: unhandled scenario");
}

}  // namespace zeno::cli

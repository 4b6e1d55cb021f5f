// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "zeno/config.hpp"
#include "zeno/dynamics.hpp"
#include "zeno/homodyne.hpp"
#include "zeno/inference.hpp"
#include "zeno/random.hpp"
#include "zeno/scenario.hpp"

using namespace zeno;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

dynamics::SpinDynamicsParams physics(double omega, double gamma, double delta, double t, double dt = 1e-4) {
  dynamics::SpinDynamicsParams p;
  p.omega = omega;
  p.gamma = gamma;
  p.delta = delta;
  p.t_final = t;
  p.dt = dt;
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1: sinh^2 growth from both integrators, omega t <= 3.
Outcome growth_law() {
  constexpr double kRelTol = 1e-6, kMaxSeconds = 1.0;
  const auto t0 = std::chrono::steady_clock::now();
  const double omega = dynamics::hz_to_angular(3.1);
  const auto p = physics(omega, 0.0, 0.0, 3.0 / omega);
  const auto moments = dynamics::evolve_moments(p);
  dynamics::DensityEvolutionOptions opt;
  opt.sample_every = 1;
  opt.keep_final_state = false;
  const auto cut = dynamics::adequate_cutoff(p);
  const auto master = dynamics::evolve_from_vacuum(cut, p, opt);
  const double elapsed = seconds_since(t0);
  double err_m = 0.0, err_q = 0.0;
  for (std::size_t k = 1; k < moments.times.size(); ++k) {
    const double exact = dynamics::mean_pairs_closed_form(omega, moments.times[k]);
    err_m = std::max(err_m, std::abs(moments.states[k].n_plus / exact - 1.0));
  }
  for (std::size_t k = 1; k < master.times.size(); ++k) {
    const double exact = dynamics::mean_pairs_closed_form(omega, master.times[k]);
    err_q = std::max(err_q, std::abs(master.moments[k].n_plus / exact - 1.0));
  }
  const bool ok = err_m < kRelTol && err_q < kRelTol && elapsed < kMaxSeconds && master.times.size() > 1000;
  return {ok, fmt("max rel err moments %.2e, master %.2e (cutoff %d, %zu samples), %.2f s", err_m, err_q, cut.n_max(),
                  master.times.size(), elapsed)};
}

// 2: master equation vs moment equations on a 27-point grid.
Outcome oracle_equivalence() {
  constexpr double kAbsTol = 1e-6, kMaxSeconds = 60.0, kT = 0.05;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int count = 0, max_cut = 0;
  for (double w_hz : {1.0, 2.0, 3.1})
    for (double gamma : {0.0, 15.0, 59.0})
      for (double d_hz : {0.0, 0.5, -1.0}) {
        const auto p = physics(dynamics::hz_to_angular(w_hz), gamma, dynamics::hz_to_angular(d_hz), kT);
        const auto cut = dynamics::adequate_cutoff(p);
        max_cut = std::max(max_cut, cut.n_max());
        dynamics::DensityEvolutionOptions opt;
        opt.sample_every = 50;
        opt.keep_final_state = false;
        const auto rho = dynamics::evolve_from_vacuum(cut, p, opt);
        const auto mom = dynamics::evolve_moments(p, dynamics::MomentOptions{50});
        if (rho.moments.size() != mom.states.size()) return {false, "sample grids differ"};
        for (std::size_t k = 0; k < mom.states.size(); ++k) {
          const auto& a = rho.moments[k];
          const auto& b = mom.states[k];
          worst = std::max({worst, std::abs(a.n_minus - b.n_minus), std::abs(a.n_plus - b.n_plus),
                            std::abs(a.u - b.u), std::abs(a.v - b.v)});
        }
        ++count;
      }
  const double elapsed = seconds_since(t0);
  return {count >= 27 && worst < kAbsTol && elapsed < kMaxSeconds,
          fmt("%d triples, t = %.2f s, max |diff| %.2e, largest cutoff %d, %.1f s", count, kT, worst, max_cut, elapsed)};
}

// 3: Zeno suppression.
Outcome zeno_suppression() {
  constexpr double kRatio = 0.05;
  std::vector<double> grid;
  for (int g = 0; g <= 100; g += 5) grid.push_back(g);
  const auto pts = dynamics::zeno_sweep(physics(dynamics::hz_to_angular(3.6), 0.0, 0.0, 0.2), grid);
  bool monotone = true;
  for (std::size_t i = 1; i < pts.size(); ++i) monotone = monotone && pts[i].n_plus <= pts[i - 1].n_plus;
  const double n59 = dynamics::zeno_sweep(physics(dynamics::hz_to_angular(3.6), 0.0, 0.0, 0.2), std::vector<double>{59.0})
                         .front()
                         .n_plus;
  const double ratio = n59 / pts.front().n_plus;
  return {monotone && ratio < kRatio,
          fmt("N+(59)/N+(0) = %.4f (N+(0) = %.1f), monotone over 0..100: %s", ratio, pts.front().n_plus,
              monotone ? "yes" : "no")};
}

// 4: variance law from 1e6 noiseless shots.
Outcome variance_law() {
  constexpr double kRelTol = 0.01;
  constexpr std::size_t kShots = 1000000;
  homodyne::DetectionModel det;
  det.sigma_det_atoms = 0.0;
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 4000;
  for (double xi : {0.0, 0.5, 1.0}) {
    const auto w = fock::tmsv_weights(xi, fock::default_tmsv_cutoff(xi, 1e-14)).weights;
    const auto v = homodyne::sample_variance(homodyne::values(homodyne::sample_shots(w, det, kShots, ++seed).rescaled));
    const double rel = std::abs(v / std::cosh(2.0 * xi) - 1.0);
    ok = ok && rel < kRelTol;
    detail += fmt("xi=%.1f var %.4f vs %.4f; ", xi, v, std::cosh(2.0 * xi));
  }
  const auto v1 = homodyne::sample_variance(
      homodyne::values(homodyne::sample_shots(fock::FockWeights::single(1, 1), det, kShots, ++seed).rescaled));
  ok = ok && std::abs(v1 / 3.0 - 1.0) < kRelTol;
  detail += fmt("Fock n=1 var %.4f", v1);
  return {ok, detail};
}

// 5: bootstrap coverage of the truth and EM monotonicity.
Outcome mle_recovery() {
  constexpr int kTrials = 50, kResamples = 1000, kNFit = 4;
  constexpr std::size_t kShots = 4200;
  constexpr double kCoverage = 0.90;
  // Summation rounding of a few-thousand-term log-likelihood.
  constexpr double kRoundoff = 1e-13;
  const homodyne::DetectionModel det;
  const std::vector<fock::FockWeights> truths = {
      fock::FockWeights::thermal(0.4925, kNFit), fock::FockWeights::thermal(0.2, kNFit),
      fock::FockWeights::thermal(1.0, kNFit), fock::FockWeights({0.5, 0.3, 0.1, 0.1, 0.0})};
  int all_in = 0, w0_in = 0, pooled = 0, pooled_total = 0;
  bool monotone = true;
  double worst_drop = 0.0;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto& truth = truths[trial % truths.size()];
    const auto batch = homodyne::sample_shots(truth, det, kShots, derive_seed(5000, trial));
    const auto r = inference::reconstruct(batch.rescaled, kNFit, det, kResamples, derive_seed(5001, trial));
    const auto& h = r.log_likelihood_history;
    for (std::size_t i = 1; i < h.size(); ++i) {
      const double drop = h[i - 1] - h[i];
      worst_drop = std::max(worst_drop, drop / std::abs(h[i - 1]));
      monotone = monotone && drop <= kRoundoff * std::abs(h[i - 1]);
    }
    bool all = true;
    for (int k = 0; k <= kNFit; ++k) {
      const bool in = truth[k] >= r.ci_lower[k] && truth[k] <= r.ci_upper[k];
      all = all && in;
      pooled += in;
      ++pooled_total;
      if (k == 0) w0_in += in;
    }
    all_in += all;
  }
  const double frac = static_cast<double>(all_in) / kTrials;
  return {frac >= kCoverage && monotone,
          fmt("all weights inside 16/84 interval in %d/%d trials (%.0f%%, need %.0f%%); w0 alone %d/%d; "
              "per weight %d/%d; EM monotone: %s (largest relative drop %.1e)",
              all_in, kTrials, 100 * frac, 100 * kCoverage, w0_in, kTrials, pooled, pooled_total,
              monotone ? "yes" : "no", worst_drop)};
}

// 6: figure-of-merit arithmetic.
Outcome ev_arithmetic() {
  const double eta = inference::ev_figure_of_merit(0.60, 0.07, 0.33);
  return {std::abs(eta - 0.6452) <= 1e-4, fmt("eta = %.6f", eta)};
}

const cli::AnalysisResult& pipeline() {
  static const cli::AnalysisResult result = [] {
    cli::ScenarioConfig c;
    c.xi = 3.1;
    c.target_w0 = 0.67;
    c.seed = 1;
    return cli::run_analysis(c);
  }();
  return result;
}

// 7: optimal threshold on the simulated pipeline.
Outcome threshold() {
  const auto& a = pipeline();
  const double L = a.threshold.L_star, conf = a.threshold.confidence;
  return {std::abs(L - 1.7) <= 0.3 && std::abs(conf - 0.90) <= 0.03,
          fmt("L* = %.3f, confidence %.4f (gamma %.1f /s, fitted w0 %.3f, no-object variance %.1f)", L, conf,
              a.with_object.model.gamma, a.reconstruction.weights[0], a.without_object.variance)};
}

// 8: posterior curve.
Outcome bayes_curve() {
  const auto& a = pipeline();
  double p0 = -1.0, min_far = 1.0;
  for (std::size_t i = 0; i < a.posterior_x.size(); ++i) {
    if (a.posterior_x[i] == 0.0) p0 = a.posterior_curve[i].p_ifm;
    if (std::abs(a.posterior_x[i]) > 6.0) min_far = std::min(min_far, a.posterior_curve[i].p_no);
  }
  return {p0 >= 0.80 && p0 <= 0.88 && min_far > 0.99,
          fmt("p_ifm(0) = %.4f, min p_no for |x| > 6 = %.5f, eta %.4f", p0, min_far, a.report.eta)};
}

// 9: ideal counting confidence.
Outcome ideal_confidence() {
  constexpr double kSigmas = 4.0, kAsymptotic = 1e-3;
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 9000;
  for (double xi : {0.5, 1.0, 2.0, 3.1}) {
    const double exact = 1.0 - 1.0 / std::pow(std::cosh(xi), 2);
    const auto mc = inference::ideal_counting_confidence_mc(xi, 400000, ++seed);
    const bool in = std::abs(mc.value - exact) <= kSigmas * mc.standard_error + 1e-12;
    ok = ok && in && std::abs(inference::ideal_counting_confidence(xi) - exact) < 1e-14;
    detail += fmt("xi=%.1f MC %.5f vs %.5f; ", xi, mc.value, exact);
  }
  double worst = 0.0;
  for (double xi = 2.5; xi <= 8.0; xi += 0.1) {
    const double c = inference::ideal_counting_confidence(xi);
    worst = std::max(worst, std::abs(c - (1.0 - 4.0 * std::exp(-2.0 * xi))) / c);
  }
  ok = ok && worst < kAsymptotic;
  detail += fmt("max rel gap to 1-4e^-2xi for xi >= 2.5: %.2e", worst);
  return {ok, detail};
}

// 10: decay fit.
Outcome decay_fit() {
  cli::ScenarioConfig c;
  c.decay_noise = 0.0;
  const double clean = cli::compute_calibrate_loss(c).fit.gamma;
  const double clean_rel = std::abs(clean / 58.6 - 1.0);
  c.decay_noise = 0.05;
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= 100; ++s) {
    c.seed = s;
    worst = std::max(worst, std::abs(cli::compute_calibrate_loss(c).fit.gamma / 58.6 - 1.0));
  }
  return {clean_rel < 1e-6 && worst < 0.10,
          fmt("noiseless rel err %.2e; 5%% noise worst rel err over 100 seeds %.4f", clean_rel, worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 11: byte-identical outputs for every scenario.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "zeno_acceptance_determinism";
  fs::remove_all(root);
  std::vector<cli::ScenarioConfig> configs;
  for (auto s : {cli::Scenario::growth, cli::Scenario::zeno_sweep, cli::Scenario::variance, cli::Scenario::histogram,
                 cli::Scenario::reconstruct, cli::Scenario::bayes, cli::Scenario::ev_merit,
                 cli::Scenario::calibrate_loss}) {
    cli::ScenarioConfig c;
    c.scenario = s;
    c.seed = 20260115;
    c.xi = 2.5;
    c.t_points = 11;
    c.resamples = 200;
    if (s == cli::Scenario::histogram) c.with_object = true;
    if (s != cli::Scenario::growth && s != cli::Scenario::zeno_sweep && s != cli::Scenario::variance) c.target_w0 = 0.67;
    configs.push_back(c);
  }
  int files = 0, scenarios = 0;
  std::string bad;
  for (auto& c : configs) {
    std::vector<std::vector<std::string>> runs;
    for (const char* run : {"a", "b"}) {
      c.output_dir = (root / run).string();
      runs.push_back(cli::run_scenario(c));
    }
    if (runs[0].size() != runs[1].size() || runs[0].empty()) bad += std::string(cli::scenario_name(c.scenario)) + " ";
    for (std::size_t i = 0; i < runs[0].size() && i < runs[1].size(); ++i) {
      const auto a = slurp(runs[0][i]), b = slurp(runs[1][i]);
      const bool tagged = a.find("20260115") != std::string::npos && a.find(cli::config_hash(c)) != std::string::npos;
      if (a != b || a.empty() || !tagged) bad += fs::path(runs[0][i]).filename().string() + " ";
      ++files;
    }
    ++scenarios;
  }
  fs::remove_all(root);
  return {bad.empty() && scenarios == 8,
          fmt("%d scenarios, %d files compared%s%s", scenarios, files, bad.empty() ? "" : "; mismatched: ", bad.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"growth law", growth_law},
      {"oracle equivalence", oracle_equivalence},
      {"zeno suppression", zeno_suppression},
      {"variance law", variance_law},
      {"mle recovery", mle_recovery},
      {"ev arithmetic", ev_arithmetic},
      {"threshold", threshold},
      {"bayesian curve", bayes_curve},
      {"ideal-confidence asymptotics", ideal_confidence},
      {"decay-rate fit", decay_fit},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "zeno/config.hpp"
#include "zeno/log.hpp"
#include "zeno/scenario.hpp"

namespace {

struct FlagSpec {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr FlagSpec kValueFlags[] = {
    {"--seed", "seed", "Master seed (u64)"},
    {"--out", "output_dir", "Output directory"},
    {"--shots", "shots", "Homodyne shots per histogram"},
    {"--omega-hz", "omega_hz", "Spin dynamics rate / 2pi, Hz"},
    {"--gamma", "gamma", "Loss rate on the -1 mode, 1/s"},
    {"--xi", "xi", "Squeezing parameter; sets t_final = xi / omega"},
    {"--cutoff", "cutoff", "Fock cutoff n_max (automatic when omitted)"},
    {"--sigma-det", "sigma_det", "Detection noise, atoms"},
    {"--transfer", "transfer", "Fraction of condensate coupled out"},
    {"--delta-hz", "delta_hz", "Detuning / 2pi, Hz"},
    {"--t-final", "t_final", "Evolution time, s"},
    {"--dt", "dt", "Integrator step, s"},
    {"--t-points", "t_points", "Rows of time-grid outputs"},
    {"--gamma-grid", "gamma_grid", "Comma-separated loss rates for zeno-sweep"},
    {"--target-w0", "target_w0", "Calibrate gamma to this vacuum weight"},
    {"--n-fit", "n_fit", "Highest Fock component fitted"},
    {"--resamples", "resamples", "Bootstrap resamples"},
    {"--prior", "prior", "Prior probability of the object"},
    {"--outcomes", "outcomes", "ev-merit from P(D),P(B),P(int)"},
    {"--synthetic-gamma", "synthetic_gamma", "calibrate-loss true rate, 1/s"},
    {"--decay-noise", "decay_noise", "calibrate-loss relative noise"},
};

}  // namespace

int main(int argc, char** argv) {
  using zeno::cli::Scenario;

  CLI::App app{"Interaction-free detection simulations with spinor condensates"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "Key = value config file; flags override it")->check(CLI::ExistingFile);

  // Flags are applied in command-line order after the config file.
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& f : kValueFlags) {
    const std::string key = f.key;
    app.add_option_function<std::string>(
        f.flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); }, f.help);
  }
  bool with_object = false;
  bool no_noise = false;
  app.add_flag("--with-object", with_object, "histogram: sample the with-object state");
  app.add_flag("--no-noise", no_noise, "Fit noiseless components");
  std::vector<std::string> sets;
  app.add_option("--set", sets, "Any config key, as key=value")->take_all();

  Scenario chosen = Scenario::growth;
  const std::pair<const char*, const char*> commands[] = {
      {"growth", "N_+(t): closed form, moment equations, master equation"},
      {"zeno-sweep", "Final N_+ over a grid of loss rates"},
      {"variance", "No-object homodyne variance along the time grid"},
      {"histogram", "Rescaled homodyne samples and summary"},
      {"reconstruct", "Fock weights with bootstrap intervals"},
      {"bayes", "Full discrimination analysis"},
      {"ev-merit", "Outcome split and figure of merit over the threshold"},
      {"calibrate-loss", "Exponential fit of a synthetic decay"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    const Scenario s = zeno::cli::parse_scenario(name);
    sub->parse_complete_callback([&chosen, s] { chosen = s; });
  }

  CLI11_PARSE(app, argc, argv);

  zeno::cli::ScenarioConfig config;
  try {
    if (!config_path.empty()) zeno::cli::load_config_file(config, config_path);
    config.scenario = chosen;
    for (const auto& [k, v] : overrides) zeno::cli::apply_setting(config, k, v);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw zeno::cli::ConfigError("--set expects key=value, got '" + kv + "'");
      zeno::cli::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (with_object) config.with_object = true;
    if (no_noise) config.convolve_noise = false;
    config.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "zeno: configuration error: %s\n", e.what());
    return 2;
  }

  try {
    for (const auto& path : zeno::cli::run_scenario(config)) std::printf("%s\n", path.c_str());
  } catch (const zeno::cli::ConfigError& e) {
    std::fprintf(stderr, "zeno: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "zeno: %s failed: %s\n", std::string(zeno::cli::scenario_name(chosen)).c_str(), e.what());
    return 1;
  }
  return 0;
}

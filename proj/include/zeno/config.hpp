#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zeno/dynamics.hpp"
#include "zeno/homodyne.hpp"

namespace zeno::cli {

enum class Scenario { growth, zeno_sweep, variance, histogram, reconstruct, bayes, ev_merit, calibrate_loss };

std::string_view scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All knobs of a run. Rates given in Hz are converted to rad/s by physics().
///
/// Config files hold one `key = value` per line; `#` starts a comment. Keys
/// are the field names below (output_dir may also be given as `out`).
struct ScenarioConfig {
  Scenario scenario = Scenario::growth;

  double omega_hz = 3.1;
  double gamma = 0.0;                 ///< 1/s
  double delta_hz = 0.0;
  double t_final = 0.2;               ///< s; replaced by xi / omega when xi is set
  std::optional<double> xi;
  double dt = 1e-4;

  double sigma_det = 16.0;
  double transfer = 0.08;
  double n_condensate = 25000.0;
  std::optional<double> n_condensate_sd;  ///< default 5% of n_condensate

  std::uint64_t shots = 4200;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  std::optional<int> cutoff;          ///< automatic when unset
  double cutoff_tol = 1e-8;           ///< tail mass allowed by the automatic cutoff

  bool with_object = false;
  std::optional<double> target_w0;    ///< calibrate gamma to this vacuum weight
  std::vector<double> gamma_grid;     ///< zeno-sweep; default 0, 5, ..., 100
  int t_points = 41;

  int n_fit = 4;
  int resamples = 1000;
  bool convolve_noise = true;
  double prior = 0.5;
  double posterior_x_max = 20.0;
  int posterior_points = 401;
  double threshold_max = 6.0;         ///< ev-merit scan range
  int threshold_points = 121;
  std::optional<std::array<double, 3>> outcomes;  ///< ev-merit from explicit P(D), P(B), P(int)

  double synthetic_gamma = 58.6;
  double decay_noise = 0.05;
  int decay_points = 20;
  double decay_t_max = 0.05;
  double decay_amplitude = 1000.0;

  ScenarioConfig();

  dynamics::SpinDynamicsParams physics() const;
  homodyne::DetectionModel detection() const;
  /// omega * t_final with omega in rad/s.
  double squeezing() const;
  void validate() const;
};

/// Sets one field from its textual value. Throws ConfigError for unknown keys
/// or malformed values.
void apply_setting(ScenarioConfig& config, std::string_view key, std::string_view value);

/// Applies every `key = value` line of a config file.
void load_config_file(ScenarioConfig& config, const std::string& path);
void parse_config_text(ScenarioConfig& config, std::string_view text);

/// Canonical `key=value` listing of every field except output_dir.
std::string canonical_text(const ScenarioConfig& config);
/// FNV-1a 64 of canonical_text, as 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

/// printf %.17g.
std::string format_double(double v);

}  // namespace zeno::cli

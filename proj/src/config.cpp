#include "zeno/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace zeno::cli {
namespace {

constexpr std::array<std::pair<Scenario, std::string_view>, 8> kScenarioNames{{
    {Scenario::growth, "growth"},
    {Scenario::zeno_sweep, "zeno-sweep"},
    {Scenario::variance, "variance"},
    {Scenario::histogram, "histogram"},
    {Scenario::reconstruct, "reconstruct"},
    {Scenario::bayes, "bayes"},
    {Scenario::ev_merit, "ev-merit"},
    {Scenario::calibrate_loss, "calibrate-loss"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  std::ostringstream msg;
  msg << "config: " << key << "=" << value << " is not " << expected;
  throw ConfigError(msg.str());
}

double to_double(std::string_view key, std::string_view value) {
  const std::string text(trim(value));
  if (text.empty()) bad_value(key, value, "a number");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
  if (used != text.size() || !std::isfinite(v)) bad_value(key, value, "a finite number");
  return v;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view value) {
  const auto text = trim(value);
  Int v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) bad_value(key, value, "an integer");
  return v;
}

bool to_bool(std::string_view key, std::string_view value) {
  const auto text = trim(value);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<double> to_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  std::string_view rest = trim(value);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(to_double(key, rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, value, "a comma-separated list of numbers");
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += format_double(values[i]);
  }
  return s;
}

}  // namespace

std::string_view scenario_name(Scenario s) {
  for (const auto& [value, name] : kScenarioNames)
    if (value == s) return name;
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  for (const auto& [value, n] : kScenarioNames)
    if (n == name) return value;
  // The variance scenario is also known by its long name.
  if (name == "variance-vs-time") return Scenario::variance;
  throw ConfigError("config: unknown scenario '" + std::string(name) + "'");
}

ScenarioConfig::ScenarioConfig() {
  for (int g = 0; g <= 100; g += 5) gamma_grid.push_back(g);
}

dynamics::SpinDynamicsParams ScenarioConfig::physics() const {
  dynamics::SpinDynamicsParams p;
  p.omega = dynamics::hz_to_angular(omega_hz);
  p.gamma = gamma;
  p.delta = dynamics::hz_to_angular(delta_hz);
  p.t_final = xi ? (p.omega > 0.0 ? *xi / p.omega : 0.0) : t_final;
  p.dt = std::min(dt, p.t_final > 0.0 ? p.t_final : dt);
  return p;
}

homodyne::DetectionModel ScenarioConfig::detection() const {
  return homodyne::DetectionModel{sigma_det, transfer, n_condensate, n_condensate_sd.value_or(0.05 * n_condensate)};
}

double ScenarioConfig::squeezing() const {
  const auto p = physics();
  return p.omega * p.t_final;
}

void ScenarioConfig::validate() const {
  if (xi && !(omega_hz > 0.0)) throw ConfigError("config: xi requires omega_hz > 0");
  if (xi && !(*xi >= 0.0)) throw ConfigError("config: xi must be >= 0");
  try {
    physics().validate();
    detection().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (shots == 0) throw ConfigError("config: shots must be > 0");
  if (cutoff && *cutoff < 0) throw ConfigError("config: cutoff must be >= 0");
  if (!(cutoff_tol > 0.0 && cutoff_tol < 1.0)) throw ConfigError("config: cutoff_tol must be in (0,1)");
  if (target_w0 && !(*target_w0 > 0.0 && *target_w0 <= 1.0)) throw ConfigError("config: target_w0 must be in (0,1]");
  if (gamma_grid.empty()) throw ConfigError("config: gamma_grid is empty");
  if (std::any_of(gamma_grid.begin(), gamma_grid.end(), [](double g) { return g < 0.0; }))
    throw ConfigError("config: gamma_grid entries must be >= 0");
  if (t_points < 1) throw ConfigError("config: t_points must be >= 1");
  if (n_fit < 0) throw ConfigError("config: n_fit must be >= 0");
  if (resamples < 1) throw ConfigError("config: resamples must be >= 1");
  if (!(prior >= 0.0 && prior <= 1.0)) throw ConfigError("config: prior must be in [0,1]");
  if (!(posterior_x_max > 0.0) || posterior_points < 2) throw ConfigError("config: bad posterior grid");
  if (!(threshold_max > 0.0) || threshold_points < 2) throw ConfigError("config: bad threshold grid");
  if (!(synthetic_gamma >= 0.0)) throw ConfigError("config: synthetic_gamma must be >= 0");
  if (!(decay_noise >= 0.0 && decay_noise < 1.0)) throw ConfigError("config: decay_noise must be in [0,1)");
  if (decay_points < 3 || !(decay_t_max > 0.0) || !(decay_amplitude > 0.0))
    throw ConfigError("config: decay data needs >= 3 points, t_max > 0 and amplitude > 0");
}

void apply_setting(ScenarioConfig& c, std::string_view raw_key, std::string_view value) {
  std::string key(trim(raw_key));
  std::replace(key.begin(), key.end(), '-', '_');
  value = trim(value);
  if (key == "scenario") {
    c.scenario = parse_scenario(value);
  } else if (key == "omega_hz") {
    c.omega_hz = to_double(key, value);
  } else if (key == "gamma") {
    c.gamma = to_double(key, value);
  } else if (key == "delta_hz") {
    c.delta_hz = to_double(key, value);
  } else if (key == "t_final") {
    c.t_final = to_double(key, value);
  } else if (key == "xi") {
    c.xi = to_double(key, value);
  } else if (key == "dt") {
    c.dt = to_double(key, value);
  } else if (key == "sigma_det") {
    c.sigma_det = to_double(key, value);
  } else if (key == "transfer") {
    c.transfer = to_double(key, value);
  } else if (key == "n_condensate") {
    c.n_condensate = to_double(key, value);
  } else if (key == "n_condensate_sd") {
    c.n_condensate_sd = to_double(key, value);
  } else if (key == "shots") {
    c.shots = to_int<std::uint64_t>(key, value);
  } else if (key == "seed") {
    c.seed = to_int<std::uint64_t>(key, value);
  } else if (key == "output_dir" || key == "out") {
    c.output_dir = std::string(value);
  } else if (key == "cutoff") {
    c.cutoff = to_int<int>(key, value);
  } else if (key == "cutoff_tol") {
    c.cutoff_tol = to_double(key, value);
  } else if (key == "with_object") {
    c.with_object = to_bool(key, value);
  } else if (key == "target_w0") {
    c.target_w0 = to_double(key, value);
  } else if (key == "gamma_grid") {
    c.gamma_grid = to_list(key, value);
  } else if (key == "t_points") {
    c.t_points = to_int<int>(key, value);
  } else if (key == "n_fit") {
    c.n_fit = to_int<int>(key, value);
  } else if (key == "resamples") {
    c.resamples = to_int<int>(key, value);
  } else if (key == "convolve_noise") {
    c.convolve_noise = to_bool(key, value);
  } else if (key == "prior") {
    c.prior = to_double(key, value);
  } else if (key == "posterior_x_max") {
    c.posterior_x_max = to_double(key, value);
  } else if (key == "posterior_points") {
    c.posterior_points = to_int<int>(key, value);
  } else if (key == "threshold_max") {
    c.threshold_max = to_double(key, value);
  } else if (key == "threshold_points") {
    c.threshold_points = to_int<int>(key, value);
  } else if (key == "outcomes") {
    const auto v = to_list(key, value);
    if (v.size() != 3) bad_value(key, value, "three probabilities");
    c.outcomes = std::array<double, 3>{v[0], v[1], v[2]};
  } else if (key == "synthetic_gamma") {
    c.synthetic_gamma = to_double(key, value);
  } else if (key == "decay_noise") {
    c.decay_noise = to_double(key, value);
  } else if (key == "decay_points") {
    c.decay_points = to_int<int>(key, value);
  } else if (key == "decay_t_max") {
    c.decay_t_max = to_double(key, value);
  } else if (key == "decay_amplitude") {
    c.decay_amplitude = to_double(key, value);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

void parse_config_text(ScenarioConfig& config, std::string_view text) {
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config: line " + std::to_string(line_no) + " is not of the form key = value");
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

void load_config_file(ScenarioConfig& config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  parse_config_text(config, buf.str());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string canonical_text(const ScenarioConfig& c) {
  const auto opt = [](const auto& o) { return o ? format_double(static_cast<double>(*o)) : std::string("auto"); };
  std::ostringstream s;
  s << "scenario=" << scenario_name(c.scenario) << '\n'
    << "omega_hz=" << format_double(c.omega_hz) << '\n'
    << "gamma=" << format_double(c.gamma) << '\n'
    << "delta_hz=" << format_double(c.delta_hz) << '\n'
    << "t_final=" << format_double(c.t_final) << '\n'
    << "xi=" << opt(c.xi) << '\n'
    << "dt=" << format_double(c.dt) << '\n'
    << "sigma_det=" << format_double(c.sigma_det) << '\n'
    << "transfer=" << format_double(c.transfer) << '\n'
    << "n_condensate=" << format_double(c.n_condensate) << '\n'
    << "n_condensate_sd=" << opt(c.n_condensate_sd) << '\n'
    << "shots=" << c.shots << '\n'
    << "seed=" << c.seed << '\n'
    << "cutoff=" << (c.cutoff ? std::to_string(*c.cutoff) : std::string("auto")) << '\n'
    << "cutoff_tol=" << format_double(c.cutoff_tol) << '\n'
    << "with_object=" << (c.with_object ? "true" : "false") << '\n'
    << "target_w0=" << opt(c.target_w0) << '\n'
    << "gamma_grid=" << join(c.gamma_grid) << '\n'
    << "t_points=" << c.t_points << '\n'
    << "n_fit=" << c.n_fit << '\n'
    << "resamples=" << c.resamples << '\n'
    << "convolve_noise=" << (c.convolve_noise ? "true" : "false") << '\n'
    << "prior=" << format_double(c.prior) << '\n'
    << "posterior_x_max=" << format_double(c.posterior_x_max) << '\n'
    << "posterior_points=" << c.posterior_points << '\n'
    << "threshold_max=" << format_double(c.threshold_max) << '\n'
    << "threshold_points=" << c.threshold_points << '\n'
    << "outcomes=" << (c.outcomes ? join({(*c.outcomes)[0], (*c.outcomes)[1], (*c.outcomes)[2]}) : "auto") << '\n'
    << "synthetic_gamma=" << format_double(c.synthetic_gamma) << '\n'
    << "decay_noise=" << format_double(c.decay_noise) << '\n'
    << "decay_points=" << c.decay_points << '\n'
    << "decay_t_max=" << format_double(c.decay_t_max) << '\n'
    << "decay_amplitude=" << format_double(c.decay_amplitude) << '\n';
  return s.str();
}

std::string config_hash(const ScenarioConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : canonical_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace zeno::cli

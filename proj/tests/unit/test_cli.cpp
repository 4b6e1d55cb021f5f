#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "zeno/config.hpp"
#include "zeno/scenario.hpp"

using namespace zeno::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const char* name) {
  const fs::path p = fs::temp_directory_path() / ("zeno_unit_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config text") {
  ScenarioConfig c;
  parse_config_text(c,
                    "# comment\n"
                    "scenario = zeno-sweep\n"
                    "omega-hz = 3.6   # trailing\n"
                    "gamma_grid = 0, 15, 59\n"
                    "\n"
                    "seed=42\n"
                    "out = results\n");
  CHECK(c.scenario == Scenario::zeno_sweep);
  CHECK(c.omega_hz == 3.6);
  CHECK(c.gamma_grid == std::vector<double>{0.0, 15.0, 59.0});
  CHECK(c.seed == 42);
  CHECK(c.output_dir == "results");
  CHECK_THROWS_AS(parse_config_text(c, "nonsense = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(c, "gamma = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(c, "no equals sign\n"), ConfigError);
  CHECK(parse_scenario("variance-vs-time") == Scenario::variance);
  CHECK_THROWS_AS(parse_scenario("plot"), ConfigError);
}

TEST_CASE("derived physics") {
  ScenarioConfig c;
  apply_setting(c, "omega_hz", "2");
  apply_setting(c, "xi", "3.1");
  const auto p = c.physics();
  CHECK(p.omega == doctest::Approx(4.0 * M_PI));
  CHECK(p.t_final == doctest::Approx(3.1 / (4.0 * M_PI)));
  CHECK(c.squeezing() == doctest::Approx(3.1));
  CHECK(c.detection().n_condensate_sd == doctest::Approx(0.05 * 25000.0));
  apply_setting(c, "gamma", "-2");
  CHECK_THROWS(c.validate());
}

TEST_CASE("config hash") {
  ScenarioConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
}

TEST_CASE("growth rows") {
  ScenarioConfig c;
  c.t_points = 1;
  const auto rows = compute_growth(c);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].t == 0.0);
  CHECK(rows[0].closed == 0.0);
  CHECK(rows[0].moments == 0.0);
  CHECK(rows[0].master == 0.0);

  c.t_final = 0.15;
  c.t_points = 21;
  for (const auto& r : compute_growth(c)) {
    CHECK(r.moments == doctest::Approx(r.closed).epsilon(1e-6));
    CHECK(r.master == doctest::Approx(r.moments).epsilon(1e-6));
  }
}

TEST_CASE("sweep endpoint equals growth endpoint") {
  ScenarioConfig c;
  c.omega_hz = 3.6;
  c.gamma_grid = {0.0};
  c.t_final = 0.1;
  c.t_points = 5;
  CHECK(compute_zeno_sweep(c).front().n_plus == doctest::Approx(compute_growth(c).back().moments).epsilon(1e-12));
}

TEST_CASE("histogram models") {
  ScenarioConfig c;
  c.xi = 3.1;
  c.shots = 4200;
  const auto without = compute_histogram(c, false);
  CHECK(without.batch.raw.size() == 4200);
  const double sigma2 = std::pow(c.detection().rescaled_noise_sd(), 2);
  // Relative sd of a sample variance of this heavy-tailed law is about 10%.
  CHECK(without.variance == doctest::Approx(std::cosh(6.2) + sigma2).epsilon(0.3));

  c.cutoff = 0;
  const auto vac = compute_histogram(c, false);
  CHECK(vac.variance == doctest::Approx(1.0 + sigma2).epsilon(0.06));

  ScenarioConfig g;
  g.gamma = 59.0;
  g.omega_hz = 3.6;
  const auto with = with_object_model(g);
  CHECK(with.mean_occupation ==
        doctest::Approx(zeno::dynamics::evolve_moments(g.physics(), zeno::dynamics::MomentOptions{0}).final().n_plus));
  CHECK(with.weights[0] == doctest::Approx(1.0 / (1.0 + with.mean_occupation)).epsilon(1e-6));
}

TEST_CASE("gamma calibration hits the requested vacuum weight") {
  ScenarioConfig c;
  c.xi = 3.1;
  const double g = calibrate_gamma(c.physics(), 0.67);
  auto p = c.physics();
  p.gamma = g;
  const double n = zeno::dynamics::evolve_moments(p, zeno::dynamics::MomentOptions{0}).final().n_plus;
  CHECK(1.0 / (1.0 + n) == doctest::Approx(0.67).epsilon(1e-8));
  CHECK(calibrate_gamma(c.physics(), 1e-9) == 0.0);
}

TEST_CASE("scenario outputs") {
  ScenarioConfig c;
  c.output_dir = scratch_dir("outputs").string();
  c.seed = 9;

  SUBCASE("growth csv header") {
    c.scenario = Scenario::growth;
    c.t_final = 0.1;
    c.t_points = 3;
    const auto paths = run_scenario(c);
    REQUIRE(paths.size() == 1);
    const auto text = slurp(paths[0]);
    CHECK(text.rfind("# scenario=growth seed=9 config_hash=" + config_hash(c) + "\n", 0) == 0);
    CHECK(text.find("\nt_s,n_plus_closed,n_plus_moments,n_plus_master\n") != std::string::npos);
    CHECK(text.find('\r') == std::string::npos);
  }
  SUBCASE("zeno sweep csv header") {
    c.scenario = Scenario::zeno_sweep;
    const auto text = slurp(run_scenario(c)[0]);
    CHECK(text.find("\ngamma_per_s,n_plus\n") != std::string::npos);
  }
  SUBCASE("calibrate-loss json") {
    c.scenario = Scenario::calibrate_loss;
    c.decay_noise = 0.0;
    const auto paths = run_scenario(c);
    const auto json = slurp(paths[1]);
    CHECK(json.find("\"seed\":9") != std::string::npos);
    CHECK(json.find("\"config_hash\":\"" + config_hash(c) + "\"") != std::string::npos);
    const auto d = compute_calibrate_loss(c);
    CHECK(d.fit.gamma == doctest::Approx(58.6).epsilon(1e-6));
  }
  SUBCASE("calibrate-loss without decay") {
    c.synthetic_gamma = 0.0;
    c.decay_noise = 0.0;
    CHECK(std::abs(compute_calibrate_loss(c).fit.gamma) < 1e-9);
  }
  SUBCASE("ev-merit from explicit outcomes") {
    c.scenario = Scenario::ev_merit;
    c.outcomes = std::array<double, 3>{0.60, 0.07, 0.33};
    const auto json = slurp(run_scenario(c)[0]);
    CHECK(json.find("\"eta\":0.64516129032258") != std::string::npos);
  }
  SUBCASE("identical config gives identical bytes") {
    c.scenario = Scenario::histogram;
    c.shots = 500;
    const auto first = run_scenario(c);
    const auto a = slurp(first[0]), aj = slurp(first[1]);
    const auto second = run_scenario(c);
    CHECK(a == slurp(second[0]));
    CHECK(aj == slurp(second[1]));
  }
  fs::remove_all(c.output_dir);
}

TEST_CASE("atomic write leaves no temporary") {
  const auto dir = scratch_dir("atomic");
  const auto target = (dir / "x.txt").string();
  write_atomically(target, "first\n");
  write_atomically(target, "second\n");
  CHECK(slurp(target) == "second\n");
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
  CHECK(files == 1);
  fs::remove_all(dir);
}

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "zeno/fockspace.hpp"
#include "zeno/log.hpp"

using namespace zeno::fock;

TEST_CASE("annihilation operator matrix elements") {
  SUBCASE("n_max = 0 gives zero operators") {
    const auto ops = build_operators(FockCutoff(0));
    CHECK(ops.a_minus.rows() == 1);
    CHECK(ops.a_minus.norm() == 0.0);
    CHECK(ops.a_plus.norm() == 0.0);
  }
  SUBCASE("n_max = 1 has the single element <0|a|1> = 1") {
    const auto a = single_mode_annihilation(1);
    CHECK(a(0, 1).real() == doctest::Approx(1.0));
    CHECK((a.array() != Complex(0.0)).count() == 1);
  }
  SUBCASE("n_max = 4 gives <3|a|4> = 2") {
    const auto a = single_mode_annihilation(4);
    CHECK(a(3, 4).real() == doctest::Approx(2.0));
  }
}

TEST_CASE("two-mode operators commute and act on their own mode") {
  const FockCutoff cut(5);
  const auto ops = build_operators(cut);
  CHECK(ops.a_minus.rows() == cut.dim());
  const ComplexMatrix comm = ops.a_minus * ops.a_plus - ops.a_plus * ops.a_minus;
  CHECK(comm.cwiseAbs().maxCoeff() < 1e-12);
  // a_+ lowers n_plus only.
  const int from = cut.index(2, 3), to = cut.index(2, 2);
  CHECK(ops.a_plus(to, from).real() == doctest::Approx(std::sqrt(3.0)));
  CHECK(ops.a_minus(cut.index(1, 3), from).real() == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("cutoff rejects negative n_max") { CHECK_THROWS_AS(FockCutoff(-1), std::invalid_argument); }

TEST_CASE("tmsv weights") {
  SUBCASE("xi = 0 is vacuum") {
    const auto w = tmsv_weights(0.0, FockCutoff(6)).weights;
    CHECK(w[0] == doctest::Approx(1.0));
    for (std::size_t n = 1; n < w.size(); ++n) CHECK(w[n] == 0.0);
  }
  SUBCASE("xi = 3.1 at a large cutoff") {
    const double xi = 3.1;
    const double c = std::cosh(xi);
    // Independent sum of the closed form over n <= 2000.
    double mass = 0.0;
    for (int n = 0; n <= 2000; ++n) mass += std::pow(std::tanh(xi), 2.0 * n) / (c * c);
    const auto r2000 = tmsv_weights(xi, FockCutoff(2000));
    CHECK(r2000.tail_mass == doctest::Approx(1.0 - mass).epsilon(1e-6));
    CHECK(r2000.weights[0] == doctest::Approx(1.0 / (c * c) / mass).epsilon(1e-12));
    const auto r = tmsv_weights(xi, FockCutoff(6000));
    CHECK(r.weights[0] == doctest::Approx(1.0 / (c * c)).epsilon(1e-12));
    CHECK(r.weights[0] == doctest::Approx(7.95e-3).epsilon(2e-3));
    CHECK(r.weights.mean() == doctest::Approx(std::pow(std::sinh(xi), 2)).epsilon(1e-9));
  }
  SUBCASE("small cutoff warns about the tail") {
    std::vector<std::string> warnings;
    zeno::ScopedWarningSink sink([&](const std::string& m) { warnings.push_back(m); });
    const auto r = tmsv_weights(2.0, FockCutoff(5));
    CHECK(r.tail_mass > 1e-6);
    CHECK(warnings.size() == 1);
    double total = 0.0;
    for (double v : r.weights.values()) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("tmsv state") {
  SUBCASE("xi = 0 is |0,0><0,0|") {
    const auto s = tmsv_state(0.0, FockCutoff(3));
    CHECK(std::abs(s.rho.data()(0, 0) - Complex(1.0)) < 1e-14);
    CHECK(s.rho.data().cwiseAbs().sum() == doctest::Approx(1.0));
  }
  const double xi = 0.5;
  const FockCutoff cut(20);
  const auto s = tmsv_state(xi, cut);
  const auto ops = build_operators(cut);
  CHECK(s.rho.purity() == doctest::Approx(1.0).epsilon(1e-10));
  SUBCASE("reduced state is diagonal with the pair weights") {
    const auto red = s.rho.reduce_to_plus_mode();
    const auto w = tmsv_weights(xi, cut).weights;
    for (int n = 0; n <= cut.n_max(); ++n) CHECK(red(n, n).real() == doctest::Approx(w[n]).epsilon(1e-12));
    CHECK((red - ComplexMatrix(red.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("expectations") {
    CHECK(expectation(ops.identity, s.rho).real() == doctest::Approx(1.0));
    const ComplexMatrix n_plus = ops.a_plus.adjoint() * ops.a_plus;
    const ComplexMatrix n_minus = ops.a_minus.adjoint() * ops.a_minus;
    CHECK(expectation(n_plus, s.rho).real() == doctest::Approx(std::pow(std::sinh(xi), 2)).epsilon(1e-10));
    CHECK(std::abs(expectation(n_minus - n_plus, s.rho)) < 1e-12);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(expectation(build_operators(FockCutoff(2)).identity, s.rho), std::invalid_argument);
  }
}

TEST_CASE("density matrix validation") {
  const FockCutoff cut(1);
  ComplexMatrix m = ComplexMatrix::Zero(cut.dim(), cut.dim());
  m(0, 0) = 0.5;
  CHECK_THROWS_AS(DensityMatrix(m, cut), std::invalid_argument);  // trace
  m(1, 1) = 0.5;
  m(0, 1) = Complex(0.1, 0.0);
  CHECK_THROWS_AS(DensityMatrix(m, cut), std::invalid_argument);  // not Hermitian
  m(1, 0) = Complex(0.1, 0.0);
  CHECK_NOTHROW(DensityMatrix(m, cut));
  m(0, 1) = m(1, 0) = Complex(0.9, 0.0);
  CHECK_THROWS_AS(DensityMatrix(m, cut), std::invalid_argument);  // negative eigenvalue
}

TEST_CASE("fock weights") {
  CHECK_THROWS_AS(FockWeights({0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(FockWeights({1.1, -0.1}), std::invalid_argument);
  const auto th = FockWeights::thermal(0.5, 200);
  CHECK(th[0] == doctest::Approx(1.0 / 1.5));
  CHECK(th[1] / th[0] == doctest::Approx(0.5 / 1.5));
  CHECK(th.mean() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(FockWeights::single(2, 4).mean() == doctest::Approx(2.0));
  CHECK(FockWeights::thermal(0.0, 3)[0] == doctest::Approx(1.0));
}

TEST_CASE("cutoff rules bound the tail") {
  for (double nbar : {0.1, 0.5, 3.0, 40.0}) {
    const int n = cutoff_for_mean_occupation(nbar, 1e-8).n_max();
    const double q = nbar / (1.0 + nbar);
    CHECK(std::pow(q, n + 1) < 1e-8);
    if (n > 0) CHECK(std::pow(q, n) >= 1e-8);
  }
  const int n = default_tmsv_cutoff(1.5, 1e-8).n_max();
  CHECK(std::pow(std::tanh(1.5), 2.0 * (n + 1)) < 1e-8);
}

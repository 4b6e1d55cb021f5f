#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "zeno/dynamics.hpp"

using namespace zeno::dynamics;
using zeno::fock::Complex;
using zeno::fock::ComplexMatrix;
using zeno::fock::DensityMatrix;
using zeno::fock::FockCutoff;

namespace {

// Random full-rank state supported on n_minus, n_plus <= support.
DensityMatrix random_state(FockCutoff cut, int support, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> g;
  ComplexMatrix a = ComplexMatrix::Zero(cut.dim(), cut.dim());
  for (int m = 0; m <= support; ++m)
    for (int p = 0; p <= support; ++p)
      for (int k = 0; k < cut.dim(); ++k) a(cut.index(m, p), k) = Complex(g(gen), g(gen));
  ComplexMatrix rho = a * a.adjoint();
  rho /= rho.trace().real();
  return DensityMatrix(rho, cut);
}

SpinDynamicsParams params(double omega, double gamma, double delta, double t, double dt = 1e-4) {
  SpinDynamicsParams p;
  p.omega = omega;
  p.gamma = gamma;
  p.delta = delta;
  p.t_final = t;
  p.dt = dt;
  return p;
}

}  // namespace

TEST_CASE("hamiltonian matrix elements") {
  const FockCutoff cut(3);
  const auto ops = zeno::fock::build_operators(cut);
  CHECK(build_hamiltonian(params(0, 0, 0, 1), ops).norm() == 0.0);
  const auto h = build_hamiltonian(params(2.5, 0, 0.7, 1), ops);
  CHECK(h(cut.index(1, 1), cut.index(0, 0)).real() == doctest::Approx(2.5));
  CHECK(h(cut.index(2, 2), cut.index(1, 1)).real() == doctest::Approx(2.5 * 2.0));
  for (int m = 0; m <= 3; ++m)
    for (int p = 0; p <= 3; ++p) CHECK(h(cut.index(m, p), cut.index(m, p)).real() == doctest::Approx(0.7 * (m + p)));
  CHECK((h - h.adjoint()).norm() < 1e-14);
}

TEST_CASE("dense generator") {
  const FockCutoff cut(4);
  const auto ops = zeno::fock::build_operators(cut);
  SUBCASE("vacuum is stationary without drive") {
    const auto rhs = lindblad_rhs(DensityMatrix::vacuum(cut), build_hamiltonian(params(0, 0, 0, 1), ops), 30.0, ops);
    CHECK(rhs.norm() == 0.0);
  }
  SUBCASE("trace preserving on random states") {
    for (unsigned s = 0; s < 5; ++s) {
      const auto rho = random_state(cut, 4, s);
      const auto rhs = lindblad_rhs(rho, build_hamiltonian(params(1.3, 0, 0.4, 1), ops), 7.0, ops);
      CHECK(std::abs(rhs.trace()) < 1e-12);
    }
  }
  SUBCASE("loss of a single -1 particle") {
    const double gamma = 11.0;
    const auto rho = DensityMatrix::fock_state(cut, 1, 0);
    const auto rhs = lindblad_rhs(rho, build_hamiltonian(params(0, gamma, 0, 1), ops), gamma, ops);
    const ComplexMatrix n_minus = ops.a_minus.adjoint() * ops.a_minus;
    CHECK((n_minus * rhs).trace().real() == doctest::Approx(-gamma * 1.0));
  }
}

TEST_CASE("moment equations close on the dense generator") {
  // For states away from the cutoff, d<X>/dt from the generator must equal
  // the moment right-hand side evaluated at the state's moments.
  const FockCutoff cut(8);
  const auto ops = zeno::fock::build_operators(cut);
  const auto p = params(2.1, 13.0, -0.9, 1);
  const auto h = build_hamiltonian(p, ops);
  for (unsigned s = 0; s < 4; ++s) {
    const auto rho = random_state(cut, 3, 100 + s);
    const ComplexMatrix drho = lindblad_rhs(rho, h, p.gamma, ops);
    const ComplexMatrix nm = ops.a_minus.adjoint() * ops.a_minus;
    const ComplexMatrix np = ops.a_plus.adjoint() * ops.a_plus;
    const ComplexMatrix x = ops.a_minus.adjoint() * ops.a_plus.adjoint();
    const Complex dx = (x * drho).trace();
    const auto expected = moment_rhs(moments_of(rho, ops), p);
    CHECK((nm * drho).trace().real() == doctest::Approx(expected.n_minus).epsilon(1e-10));
    CHECK((np * drho).trace().real() == doctest::Approx(expected.n_plus).epsilon(1e-10));
    CHECK(dx.real() == doctest::Approx(expected.u).epsilon(1e-10));
    CHECK(dx.imag() == doctest::Approx(expected.v).epsilon(1e-10));
  }
}

TEST_CASE("block generator equals dense generator") {
  const FockCutoff cut(5);
  const auto ops = zeno::fock::build_operators(cut);
  const auto p = params(1.7, 9.0, 0.6, 1);
  const auto h = build_hamiltonian(p, ops);
  for (unsigned s = 0; s < 3; ++s) {
    const auto rho = random_state(cut, 5, 200 + s);
    const auto blocks = BlockDensity::from_dense(rho);
    BlockDensity out = blocks;
    lindblad_rhs(blocks, p, out);
    const ComplexMatrix dense = lindblad_rhs(rho, h, p.gamma, ops);
    double err = 0.0;
    for (std::size_t k = 0; k < out.blocks().size(); ++k) {
      const auto& bl = out.blocks()[k];
      const int r0 = BlockDensity::sector_first_n_minus(bl.sector);
      const int c0 = BlockDensity::sector_first_n_minus(bl.sector + bl.order);
      for (int i = 0; i < bl.rows; ++i)
        for (int j = 0; j < bl.cols; ++j) {
          const int row = cut.index(r0 + i, r0 + i + bl.sector);
          const int col = cut.index(c0 + j, c0 + j + bl.sector + bl.order);
          err = std::max(err, std::abs(out.block(static_cast<int>(k))(i, j) - dense(row, col)));
        }
    }
    CHECK(out.blocks().size() > 2 * cut.n_max() + 1);
    CHECK(err < 1e-11);
  }
}

TEST_CASE("block storage round trip") {
  const FockCutoff cut(4);
  const auto rho = random_state(cut, 4, 7);
  const auto b = BlockDensity::from_dense(rho);
  CHECK((b.to_dense().data() - rho.data()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(b.trace() == doctest::Approx(1.0));
  CHECK(b.purity() == doctest::Approx(rho.purity()).epsilon(1e-12));
  const auto m = b.moments();
  const auto md = moments_of(rho, zeno::fock::build_operators(cut));
  CHECK(m.n_plus == doctest::Approx(md.n_plus));
  CHECK(m.v == doctest::Approx(md.v));
  CHECK(m.u == doctest::Approx(md.u));
}

TEST_CASE("moment integration") {
  SUBCASE("omega t = 1 lossless resonant") {
    const auto t = evolve_moments(params(1.0, 0, 0, 1.0));
    CHECK(t.final().n_plus == doctest::Approx(std::pow(std::sinh(1.0), 2)).epsilon(1e-8));
    CHECK(t.final().n_plus == doctest::Approx(1.38109).epsilon(1e-5));
  }
  SUBCASE("vacuum start at t = 0") {
    const auto t = evolve_moments(params(1.0, 3.0, 0.5, 0.0));
    CHECK(t.states.front().n_plus == 0.0);
    CHECK(t.states.front().u == 0.0);
  }
  SUBCASE("modes coincide without loss") {
    const auto t = evolve_moments(params(5.0, 0, 1.3, 0.3));
    for (const auto& s : t.states) CHECK(s.n_minus == s.n_plus);
  }
  SUBCASE("strong suppression at 59 per second") {
    const double omega = hz_to_angular(3.6);
    const double free = evolve_moments(params(omega, 0, 0, 0.2)).final().n_plus;
    const double lossy = evolve_moments(params(omega, 59, 0, 0.2)).final().n_plus;
    CHECK(lossy < 0.05 * free);
  }
  SUBCASE("convergence check fires on coarse steps") {
    CHECK_THROWS_AS(evolve_moments(params(40.0, 0, 0, 0.2, 0.02), MomentOptions{0, true, 1e-8}), StepSizeError);
    CHECK_NOTHROW(evolve_moments(params(1.0, 0, 0, 0.2, 1e-4), MomentOptions{0, true, 1e-8}));
  }
}

TEST_CASE("closed form") {
  CHECK(mean_pairs_closed_form(3.0, 0.0) == 0.0);
  CHECK(mean_pairs_closed_form(1.0, 3.1) == doctest::Approx((std::cosh(6.2) - 1.0) / 2.0).epsilon(1e-13));
  CHECK(mean_pairs_closed_form(1.0, 3.1) == doctest::Approx(122.69).epsilon(1e-4));
  const auto p = params(hz_to_angular(3.1), 0, 0, 0.15);
  CHECK(evolve_moments(p).final().n_plus ==
        doctest::Approx(mean_pairs_closed_form(p.omega, p.t_final)).epsilon(1e-6));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(params(-1, 0, 0, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(params(1, -1, 0, 1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(params(1, 0, 0, 0.01, 0.1).validate(), std::invalid_argument);
  CHECK_THROWS_AS(params(1, 0, 0, 1, 0).validate(), std::invalid_argument);
}

TEST_CASE("master equation") {
  SUBCASE("lossless growth stays pure and follows sinh^2") {
    const auto p = params(hz_to_angular(3.1), 0, 0, 0.1);
    const auto cut = adequate_cutoff(p);
    DensityEvolutionOptions opt;
    opt.sample_every = 100;
    const auto tr = evolve_density(BlockDensity::vacuum(cut), p, opt);
    CHECK(tr.unitary_path);
    for (std::size_t k = 0; k < tr.times.size(); ++k)
      CHECK(tr.moments[k].n_plus == doctest::Approx(mean_pairs_closed_form(p.omega, tr.times[k])).epsilon(1e-6));
    REQUIRE(tr.final_state);
    CHECK(tr.final_state->purity() == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("lossy evolution matches the moments") {
    const auto p = params(hz_to_angular(2.0), 15.0, hz_to_angular(0.5), 0.05);
    const auto tr = evolve_density(BlockDensity::vacuum(adequate_cutoff(p)), p);
    const auto m = evolve_moments(p).final();
    CHECK(!tr.unitary_path);
    CHECK(std::abs(tr.moments.back().n_minus - m.n_minus) < 1e-6);
    CHECK(std::abs(tr.moments.back().n_plus - m.n_plus) < 1e-6);
    CHECK(std::abs(tr.moments.back().u - m.u) < 1e-6);
    CHECK(std::abs(tr.moments.back().v - m.v) < 1e-6);
    CHECK(tr.final_state->min_eigenvalue() > -1e-8);
  }
  SUBCASE("dense and block entry points agree") {
    const auto p = params(3.0, 4.0, 0.2, 0.05);
    const FockCutoff cut(10);
    const auto a = evolve_density(DensityMatrix::vacuum(cut), p);
    const auto b = evolve_density(BlockDensity::vacuum(cut), p);
    CHECK(a.moments.back().n_plus == doctest::Approx(b.moments.back().n_plus).epsilon(1e-12));
  }
  SUBCASE("too small a cutoff is reported") {
    const auto p = params(hz_to_angular(3.1), 0, 0, 0.2);
    CHECK_THROWS_AS(evolve_density(BlockDensity::vacuum(FockCutoff(10)), p), CutoffOverflowError);
  }
}

TEST_CASE("zeno sweep is monotone") {
  std::vector<double> grid;
  for (int g = 100; g >= 0; g -= 5) grid.push_back(g);
  const auto pts = zeno_sweep(params(hz_to_angular(3.6), 0, 0, 0.2), grid);
  REQUIRE(pts.size() == grid.size());
  CHECK(pts.front().gamma == 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].n_plus < pts[i - 1].n_plus);
  const double zero[] = {0.0};
  CHECK(zeno_sweep(params(hz_to_angular(3.6), 0, 0, 0.2), zero).front().n_plus ==
        evolve_moments(params(hz_to_angular(3.6), 0, 0, 0.2)).final().n_plus);
}

#include "zeno/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "zeno/log.hpp"
#include "zeno/random.hpp"

namespace zeno::dynamics {

using fock::Complex;
using fock::ComplexMatrix;

namespace {

constexpr double kRk4StableRadius = 2.5;

// Per-sector coefficient tables for the block generator, indexed by D + n_max.
struct SectorTables {
  int n_max = 0;
  std::vector<std::vector<double>> h_diag;
  std::vector<std::vector<double>> h_off;    // coupling between rows i and i + 1
  std::vector<std::vector<double>> n_minus;
  std::vector<std::vector<double>> jump;     // sqrt(n_minus + 1): amplitude fed from sector D - 1
  double h_norm = 0.0;                       // max absolute row sum of H over all sectors

  SectorTables(int n_max_, const SpinDynamicsParams& p) : n_max(n_max_) {
    const int count = 2 * n_max + 1;
    h_diag.resize(count);
    h_off.resize(count);
    n_minus.resize(count);
    jump.resize(count);
    for (int d = -n_max; d <= n_max; ++d) {
      const int size = n_max - std::abs(d) + 1;
      const int first = BlockDensity::sector_first_n_minus(d);
      auto& hd = h_diag[d + n_max];
      auto& ho = h_off[d + n_max];
      auto& nm = n_minus[d + n_max];
      auto& jp = jump[d + n_max];
      hd.resize(size);
      ho.assign(std::max(size - 1, 0), 0.0);
      nm.resize(size);
      jp.resize(size);
      for (int i = 0; i < size; ++i) {
        const double a = first + i;
        const double b = a + d;
        hd[i] = p.delta * (a + b);
        nm[i] = a;
        jp[i] = std::sqrt(a + 1.0);
        if (i + 1 < size) ho[i] = p.omega * std::sqrt((a + 1.0) * (b + 1.0));
      }
      for (int i = 0; i < size; ++i) {
        double row = std::abs(hd[i]);
        if (i > 0) row += std::abs(ho[i - 1]);
        if (i + 1 < size) row += std::abs(ho[i]);
        h_norm = std::max(h_norm, row);
      }
    }
  }

  int idx(int d) const { return d + n_max; }
};

inline Complex times_minus_i(Complex z) { return {z.imag(), -z.real()}; }

// Row offset of sector D's basis inside sector D - 1 when lowering n_minus:
// row i (n_minus = first(D) + i) is fed by n_minus + 1 in sector D - 1.
int feed_offset(int d) { return d >= 1 ? 1 : 0; }

void block_rhs(const BlockDensity& layout, const SectorTables& t, double gamma, const Complex* in,
               Complex* out) {
  const auto& blocks = layout.blocks();
  for (const auto& b : blocks) {
    const int m = b.rows;
    const int n = b.cols;
    const int dr = b.sector;
    const int dc = b.sector + b.order;
    const double* hdr = t.h_diag[t.idx(dr)].data();
    const double* hor = t.h_off[t.idx(dr)].data();
    const double* nmr = t.n_minus[t.idx(dr)].data();
    const double* jpr = t.jump[t.idx(dr)].data();
    const double* hdc = t.h_diag[t.idx(dc)].data();
    const double* hoc = t.h_off[t.idx(dc)].data();
    const double* nmc = t.n_minus[t.idx(dc)].data();
    const double* jpc = t.jump[t.idx(dc)].data();
    const Complex* src = in + b.offset;
    Complex* dst = out + b.offset;

    const Complex* feed = nullptr;
    int feed_rows = 0, feed_cols = 0, off_r = 0, off_c = 0;
    if (b.previous >= 0 && gamma != 0.0) {
      const auto& p = blocks[b.previous];
      feed = in + p.offset;
      feed_rows = p.rows;
      feed_cols = p.cols;
      off_r = feed_offset(dr);
      off_c = feed_offset(dc);
    }

    for (int j = 0; j < n; ++j) {
      const Complex* col = src + static_cast<std::size_t>(j) * m;
      const Complex* col_l = j > 0 ? col - m : nullptr;
      const Complex* col_r = j + 1 < n ? col + m : nullptr;
      const double hl = j > 0 ? hoc[j - 1] : 0.0;
      const double hr = j + 1 < n ? hoc[j] : 0.0;
      Complex* o = dst + static_cast<std::size_t>(j) * m;
      for (int i = 0; i < m; ++i) {
        const Complex x = col[i];
        Complex hb = hdr[i] * x;
        if (i > 0) hb += hor[i - 1] * col[i - 1];
        if (i + 1 < m) hb += hor[i] * col[i + 1];
        Complex bh = x * hdc[j];
        if (col_l) bh += hl * col_l[i];
        if (col_r) bh += hr * col_r[i];
        o[i] = times_minus_i(hb - bh) - (0.5 * gamma * (nmr[i] + nmc[j])) * x;
      }
      if (feed && j + off_c < feed_cols) {
        const Complex* fcol = feed + static_cast<std::size_t>(j + off_c) * feed_rows;
        const double scale = gamma * jpc[j];
        const int rows = std::min(m, feed_rows - off_r);
        for (int i = 0; i < rows; ++i) o[i] += (scale * jpr[i]) * fcol[i + off_r];
      }
    }
  }
}

// Pure-state member of the unitary ensemble.
struct Ket {
  int sector;
  double weight;
  Eigen::VectorXcd psi;
};

void ket_rhs(const SectorTables& t, int sector, const Complex* in, Complex* out, int size) {
  const double* hd = t.h_diag[t.idx(sector)].data();
  const double* ho = t.h_off[t.idx(sector)].data();
  for (int i = 0; i < size; ++i) {
    Complex h = hd[i] * in[i];
    if (i > 0) h += ho[i - 1] * in[i - 1];
    if (i + 1 < size) h += ho[i] * in[i + 1];
    out[i] = times_minus_i(h);
  }
}

// Classic RK4 on a flat complex vector.
template <typename Rhs>
class Rk4 {
 public:
  explicit Rk4(std::size_t n) : k_(n), acc_(n), tmp_(n) {}

  void step(std::vector<Complex>& y, double h, const Rhs& rhs) {
    const std::size_t n = y.size();
    rhs(y.data(), k_.data());
    for (std::size_t i = 0; i < n; ++i) {
      acc_[i] = k_[i];
      tmp_[i] = y[i] + (0.5 * h) * k_[i];
    }
    rhs(tmp_.data(), k_.data());
    for (std::size_t i = 0; i < n; ++i) {
      acc_[i] += 2.0 * k_[i];
      tmp_[i] = y[i] + (0.5 * h) * k_[i];
    }
    rhs(tmp_.data(), k_.data());
    for (std::size_t i = 0; i < n; ++i) {
      acc_[i] += 2.0 * k_[i];
      tmp_[i] = y[i] + h * k_[i];
    }
    rhs(tmp_.data(), k_.data());
    for (std::size_t i = 0; i < n; ++i) y[i] += (h / 6.0) * (acc_[i] + k_[i]);
  }

 private:
  std::vector<Complex> k_, acc_, tmp_;
};

int substeps_for(double h, double spectral_bound) {
  return std::max(1, static_cast<int>(std::ceil(h * spectral_bound / kRk4StableRadius)));
}

bool is_sample_step(int step, int n_steps, int every) {
  if (step == 0 || step == n_steps) return true;
  return every > 0 && step % every == 0;
}

void check_boundary(double population, double tol, double t) {
  if (population > tol) {
    std::ostringstream msg;
    msg << "population " << population << " at the Fock cutoff exceeds " << tol << " at t=" << t
        << " s; increase the cutoff";
    throw CutoffOverflowError(msg.str());
  }
}

void check_drift(double drift, double tol, double t) {
  if (drift > tol) {
    std::ostringstream msg;
    msg << "trace drift " << drift << " in one step exceeds " << tol << " at t=" << t
        << " s; reduce dt";
    throw StepSizeError(msg.str());
  }
}

BlockDensity assemble(const fock::FockCutoff& cutoff, const std::vector<Ket>& kets, int first, int last) {
  BlockDensity rho(cutoff, {{0, first, last}});
  for (const auto& k : kets) {
    const int b = *rho.find_block(k.sector, 0);
    rho.block(b) += k.weight * (k.psi * k.psi.adjoint());
  }
  return rho;
}

MomentState ket_moments(const std::vector<Ket>& kets) {
  MomentState s;
  Complex pair(0.0, 0.0);
  for (const auto& k : kets) {
    const int first = BlockDensity::sector_first_n_minus(k.sector);
    const auto size = k.psi.size();
    for (Eigen::Index i = 0; i < size; ++i) {
      const double nm = first + static_cast<double>(i);
      const double np = nm + k.sector;
      const double p = k.weight * std::norm(k.psi(i));
      s.n_minus += nm * p;
      s.n_plus += np * p;
      if (i + 1 < size)
        pair += k.weight * std::sqrt((nm + 1.0) * (np + 1.0)) * k.psi(i) * std::conj(k.psi(i + 1));
    }
  }
  s.u = pair.real();
  s.v = pair.imag();
  return s;
}

std::vector<Ket> ensemble_of(const BlockDensity& rho0, int& first, int& last) {
  const auto& cutoff = rho0.cutoff();
  std::vector<Ket> kets;
  first = cutoff.n_max();
  last = -cutoff.n_max();
  for (std::size_t k = 0; k < rho0.blocks().size(); ++k) {
    const auto& b = rho0.blocks()[k];
    const auto blk = rho0.block(static_cast<int>(k));
    // Diagonalize only the populated index range; a vacuum-like block is 1x1.
    int lo = b.rows, hi = -1;
    for (int i = 0; i < b.rows; ++i)
      if (blk.row(i).cwiseAbs().maxCoeff() != 0.0 || blk.col(i).cwiseAbs().maxCoeff() != 0.0) {
        lo = std::min(lo, i);
        hi = i;
      }
    if (hi < 0) continue;
    first = std::min(first, b.sector);
    last = std::max(last, b.sector);
    const int n = hi - lo + 1;
    const ComplexMatrix sub = blk.block(lo, lo, n, n);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(0.5 * (sub + sub.adjoint()));
    for (Eigen::Index e = 0; e < solver.eigenvalues().size(); ++e) {
      const double w = solver.eigenvalues()(e);
      if (w < -1e-8) throw std::invalid_argument("evolve_density: initial state is not positive");
      if (w <= 1e-15) continue;
      Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(b.rows);
      psi.segment(lo, n) = solver.eigenvectors().col(e);
      kets.push_back({b.sector, w, std::move(psi)});
    }
  }
  if (kets.empty()) throw std::invalid_argument("evolve_density: initial state is zero");
  return kets;
}

DensityTrajectory evolve_kets(const fock::FockCutoff& cutoff, std::vector<Ket> kets, int first, int last,
                              const SpinDynamicsParams& params, const DensityEvolutionOptions& options) {
  const SectorTables tables(cutoff.n_max(), params);
  const int n_steps = params.step_count();
  const double h = params.t_final / n_steps;
  const int sub = substeps_for(h, tables.h_norm);
  const double hs = h / sub;

  std::vector<std::vector<Complex>> psi(kets.size());
  for (std::size_t k = 0; k < kets.size(); ++k)
    psi[k].assign(kets[k].psi.data(), kets[k].psi.data() + kets[k].psi.size());

  auto sync = [&] {
    for (std::size_t k = 0; k < kets.size(); ++k)
      kets[k].psi = Eigen::Map<const Eigen::VectorXcd>(psi[k].data(), psi[k].size());
  };
  auto boundary = [&] {
    double p = 0.0;
    for (std::size_t k = 0; k < kets.size(); ++k) p += kets[k].weight * std::norm(psi[k].back());
    return p;
  };

  DensityTrajectory traj;
  traj.unitary_path = true;
  traj.substeps = sub;
  auto record = [&](int step) {
    const double t = step * h;
    sync();
    traj.times.push_back(t);
    traj.moments.push_back(ket_moments(kets));
    if (options.keep_states) traj.states.push_back(assemble(cutoff, kets, first, last));
  };

  std::vector<Rk4<std::function<void(const Complex*, Complex*)>>> steppers;
  steppers.reserve(kets.size());
  for (const auto& p : psi) steppers.emplace_back(p.size());

  record(0);
  for (int step = 1; step <= n_steps; ++step) {
    for (int s = 0; s < sub; ++s) {
      for (std::size_t k = 0; k < kets.size(); ++k) {
        const int sector = kets[k].sector;
        const int size = static_cast<int>(psi[k].size());
        std::function<void(const Complex*, Complex*)> rhs = [&, sector, size](const Complex* in, Complex* out) {
          ket_rhs(tables, sector, in, out, size);
        };
        steppers[k].step(psi[k], hs, rhs);
      }
      double norm = 0.0;
      for (std::size_t k = 0; k < kets.size(); ++k) {
        double nk = 0.0;
        for (const auto& z : psi[k]) nk += std::norm(z);
        norm += kets[k].weight * nk;
      }
      const double drift = std::abs(norm - 1.0);
      traj.max_step_trace_drift = std::max(traj.max_step_trace_drift, drift);
      traj.cumulative_trace_drift += drift;
      check_drift(drift, options.max_step_trace_drift, step * h);
      const double scale = 1.0 / std::sqrt(norm);
      for (auto& p : psi)
        for (auto& z : p) z *= scale;
    }
    const double bp = boundary();
    traj.max_boundary_population = std::max(traj.max_boundary_population, bp);
    check_boundary(bp, options.boundary_tolerance, step * h);
    if (is_sample_step(step, n_steps, options.sample_every)) record(step);
  }
  sync();
  if (options.keep_final_state) traj.final_state = assemble(cutoff, kets, first, last);
  return traj;
}

DensityTrajectory evolve_blocks(const BlockDensity& rho0, const SpinDynamicsParams& params,
                                const DensityEvolutionOptions& options) {
  BlockDensity state = rho0.extended_to_cutoff();
  const SectorTables tables(state.cutoff().n_max(), params);
  const int n_steps = params.step_count();
  const double h = params.t_final / n_steps;
  const double bound = 2.0 * tables.h_norm + params.gamma * state.cutoff().n_max();
  const int sub = substeps_for(h, bound);
  const double hs = h / sub;

  DensityTrajectory traj;
  traj.substeps = sub;
  auto record = [&](int step) {
    traj.times.push_back(step * h);
    traj.moments.push_back(state.moments());
    if (options.check_positivity) {
      const double lo = state.min_eigenvalue();
      if (lo < -1e-8) {
        std::ostringstream msg;
        msg << "density operator lost positivity (min eigenvalue " << lo << ") at t=" << step * h;
        throw StepSizeError(msg.str());
      }
    }
    if (options.keep_states) traj.states.push_back(state);
  };

  const double gamma = params.gamma;
  auto rhs = [&](const Complex* in, Complex* out) { block_rhs(state, tables, gamma, in, out); };
  Rk4<decltype(rhs)> rk4(state.raw().size());

  record(0);
  for (int step = 1; step <= n_steps; ++step) {
    for (int s = 0; s < sub; ++s) {
      rk4.step(state.raw(), hs, rhs);
      const double tr = state.hermitize_and_normalize();
      const double drift = std::abs(tr - 1.0);
      traj.max_step_trace_drift = std::max(traj.max_step_trace_drift, drift);
      traj.cumulative_trace_drift += drift;
      check_drift(drift, options.max_step_trace_drift, step * h);
    }
    const double bp = state.boundary_population();
    traj.max_boundary_population = std::max(traj.max_boundary_population, bp);
    check_boundary(bp, options.boundary_tolerance, step * h);
    if (is_sample_step(step, n_steps, options.sample_every)) record(step);
  }
  if (options.keep_final_state) traj.final_state = std::move(state);
  return traj;
}

}  // namespace

void SpinDynamicsParams::validate() const {
  if (!(omega >= 0.0)) throw std::invalid_argument("SpinDynamicsParams: omega must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("SpinDynamicsParams: gamma must be >= 0");
  if (!std::isfinite(delta)) throw std::invalid_argument("SpinDynamicsParams: delta must be finite");
  if (!(t_final >= 0.0)) throw std::invalid_argument("SpinDynamicsParams: t_final must be >= 0");
  if (!(dt > 0.0)) throw std::invalid_argument("SpinDynamicsParams: dt must be > 0");
  if (t_final > 0.0 && dt > t_final * (1.0 + 1e-12))
    throw std::invalid_argument("SpinDynamicsParams: dt must not exceed t_final");
}

int SpinDynamicsParams::step_count() const {
  if (t_final == 0.0) return 1;
  return std::max(1, static_cast<int>(std::ceil(t_final / dt - 1e-9)));
}

double hz_to_angular(double hz) { return 2.0 * std::numbers::pi * hz; }

ComplexMatrix build_hamiltonian(const SpinDynamicsParams& params, const fock::OperatorSet& ops) {
  const auto& am = ops.a_minus;
  const auto& ap = ops.a_plus;
  if (am.rows() != ops.cutoff.dim() || ap.rows() != ops.cutoff.dim())
    throw std::invalid_argument("build_hamiltonian: operator dimensions do not match cutoff");
  const ComplexMatrix number = am.adjoint() * am + ap.adjoint() * ap;
  const ComplexMatrix pair = am.adjoint() * ap.adjoint();
  return params.delta * number + params.omega * (pair + pair.adjoint());
}

ComplexMatrix lindblad_rhs(const fock::DensityMatrix& rho, const ComplexMatrix& h, double gamma,
                           const fock::OperatorSet& ops) {
  const auto& r = rho.data();
  if (h.rows() != r.rows() || h.cols() != r.cols() || ops.a_minus.rows() != r.rows())
    throw std::invalid_argument("lindblad_rhs: dimension mismatch");
  const Complex i(0.0, 1.0);
  const auto& a = ops.a_minus;
  const ComplexMatrix n = a.adjoint() * a;
  ComplexMatrix out = -i * (h * r - r * h);
  out += (0.5 * gamma) * (2.0 * a * r * a.adjoint() - n * r - r * n);
  return out;
}

MomentState moments_of(const fock::DensityMatrix& rho, const fock::OperatorSet& ops) {
  const auto& am = ops.a_minus;
  const auto& ap = ops.a_plus;
  const Complex pair = fock::expectation(am.adjoint() * ap.adjoint(), rho);
  return MomentState{fock::expectation(am.adjoint() * am, rho).real(),
                     fock::expectation(ap.adjoint() * ap, rho).real(), pair.imag(), pair.real()};
}

void lindblad_rhs(const BlockDensity& rho, const SpinDynamicsParams& params, BlockDensity& out) {
  if (out.raw().size() != rho.raw().size() || !(out.cutoff() == rho.cutoff()))
    throw std::invalid_argument("lindblad_rhs: output layout differs from input");
  const SectorTables tables(rho.cutoff().n_max(), params);
  block_rhs(rho, tables, params.gamma, rho.raw().data(), out.raw().data());
}

DensityTrajectory evolve_from_vacuum(fock::FockCutoff cutoff, const SpinDynamicsParams& params,
                                     const DensityEvolutionOptions& options) {
  params.validate();
  if (params.gamma != 0.0) return evolve_density(BlockDensity::vacuum(cutoff), params, options);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(cutoff.mode_dim());
  psi(0) = 1.0;
  return evolve_kets(cutoff, {Ket{0, 1.0, std::move(psi)}}, 0, 0, params, options);
}

DensityTrajectory evolve_density(const BlockDensity& rho0, const SpinDynamicsParams& params,
                                 const DensityEvolutionOptions& options) {
  params.validate();
  if (std::abs(rho0.trace() - 1.0) > 1e-8) throw std::invalid_argument("evolve_density: trace of initial state is not 1");
  if (params.gamma == 0.0 && rho0.block_diagonal()) {
    int first = 0, last = 0;
    auto kets = ensemble_of(rho0, first, last);
    return evolve_kets(rho0.cutoff(), std::move(kets), first, last, params, options);
  }
  return evolve_blocks(rho0, params, options);
}

DensityTrajectory evolve_density(const fock::DensityMatrix& rho0, const SpinDynamicsParams& params,
                                 const DensityEvolutionOptions& options) {
  return evolve_density(BlockDensity::from_dense(rho0), params, options);
}

MomentState moment_rhs(const MomentState& s, const SpinDynamicsParams& p) {
  return MomentState{
      -p.gamma * s.n_minus + 2.0 * p.omega * s.v,
      2.0 * p.omega * s.v,
      -0.5 * p.gamma * s.v + p.omega * (1.0 + s.n_minus + s.n_plus) + 2.0 * p.delta * s.u,
      -0.5 * p.gamma * s.u - 2.0 * p.delta * s.v,
  };
}

namespace {

MomentState axpy(const MomentState& y, double h, const MomentState& k) {
  return {y.n_minus + h * k.n_minus, y.n_plus + h * k.n_plus, y.v + h * k.v, y.u + h * k.u};
}

MomentTrajectory integrate_moments(const SpinDynamicsParams& p, int n_steps, int every) {
  const double h = p.t_final / n_steps;
  MomentTrajectory traj;
  MomentState y;
  traj.times.push_back(0.0);
  traj.states.push_back(y);
  for (int step = 1; step <= n_steps; ++step) {
    const MomentState k1 = moment_rhs(y, p);
    const MomentState k2 = moment_rhs(axpy(y, 0.5 * h, k1), p);
    const MomentState k3 = moment_rhs(axpy(y, 0.5 * h, k2), p);
    const MomentState k4 = moment_rhs(axpy(y, h, k3), p);
    y.n_minus += h / 6.0 * (k1.n_minus + 2.0 * k2.n_minus + 2.0 * k3.n_minus + k4.n_minus);
    y.n_plus += h / 6.0 * (k1.n_plus + 2.0 * k2.n_plus + 2.0 * k3.n_plus + k4.n_plus);
    y.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    y.u += h / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
    if (is_sample_step(step, n_steps, every)) {
      traj.times.push_back(step * h);
      traj.states.push_back(y);
    }
  }
  return traj;
}

}  // namespace

MomentTrajectory evolve_moments(const SpinDynamicsParams& params, const MomentOptions& options) {
  params.validate();
  const int n_steps = params.step_count();
  MomentTrajectory traj = integrate_moments(params, n_steps, options.sample_every);
  if (options.convergence_check) {
    const MomentTrajectory fine = integrate_moments(params, 2 * n_steps, 0);
    const double coarse_n = traj.final().n_plus;
    const double fine_n = fine.final().n_plus;
    const double rel = std::abs(coarse_n - fine_n) / std::max(std::abs(fine_n), 1e-300);
    if (fine_n != 0.0 && rel > options.convergence_tol) {
      std::ostringstream msg;
      msg << "moment integration not converged: halving dt changes N_+ by " << rel << " (relative)";
      throw StepSizeError(msg.str());
    }
  }
  return traj;
}

double mean_pairs_closed_form(double omega, double t) {
  if (!(omega >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("mean_pairs_closed_form: omega and t must be >= 0");
  const double s = std::sinh(omega * t);
  return s * s;
}

std::vector<ZenoPoint> zeno_sweep(const SpinDynamicsParams& base, std::span<const double> gamma_grid) {
  if (gamma_grid.empty()) throw std::invalid_argument("zeno_sweep: empty loss-rate grid");
  std::vector<double> grid(gamma_grid.begin(), gamma_grid.end());
  for (double g : grid)
    if (!(g >= 0.0)) throw std::invalid_argument("zeno_sweep: loss rates must be >= 0");
  std::sort(grid.begin(), grid.end());
  std::vector<ZenoPoint> out(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    SpinDynamicsParams p = base;
    p.gamma = grid[i];
    out[i] = ZenoPoint{grid[i], evolve_moments(p, MomentOptions{0}).final().n_plus};
  });
  return out;
}

fock::FockCutoff adequate_cutoff(const SpinDynamicsParams& params, double tail_tol) {
  const auto traj = evolve_moments(params);
  double peak = 0.0;
  for (const auto& s : traj.states) peak = std::max({peak, s.n_plus, s.n_minus});
  return fock::FockCutoff(std::max(1, fock::cutoff_for_mean_occupation(peak, tail_tol).n_max()));
}

}  // namespace zeno::dynamics

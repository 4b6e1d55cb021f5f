#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "zeno/block_density.hpp"
#include "zeno/fockspace.hpp"

namespace zeno::dynamics {

/// Rates are angular frequencies in rad/s with hbar = 1.
struct SpinDynamicsParams {
  double omega = 0.0;    ///< pair-creation rate
  double gamma = 0.0;    ///< loss rate on the -1 mode, 1/s
  double delta = 0.0;    ///< detuning of the pair energy from resonance
  double t_final = 0.0;  ///< s
  double dt = 1e-4;      ///< s

  void validate() const;
  /// Number of uniform integrator steps covering [0, t_final] with step <= dt.
  int step_count() const;
};

double hz_to_angular(double hz);

class CutoffOverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// H = delta (N_- + N_+) + omega (a_-^dag a_+^dag + a_+ a_-).
fock::ComplexMatrix build_hamiltonian(const SpinDynamicsParams& params, const fock::OperatorSet& ops);

/// -i[H, rho] + (gamma/2)(2 a_- rho a_-^dag - a_-^dag a_- rho - rho a_-^dag a_-), dense.
fock::ComplexMatrix lindblad_rhs(const fock::DensityMatrix& rho, const fock::ComplexMatrix& h,
                                 double gamma, const fock::OperatorSet& ops);

MomentState moments_of(const fock::DensityMatrix& rho, const fock::OperatorSet& ops);

/// Applies the same generator as lindblad_rhs to a block-stored operator.
void lindblad_rhs(const BlockDensity& rho, const SpinDynamicsParams& params, BlockDensity& out);

struct DensityEvolutionOptions {
  int sample_every = 0;             ///< steps between samples; 0 records only the endpoints
  bool keep_states = false;         ///< store the density operator at each sample
  bool check_positivity = true;     ///< eigenvalue check at each sample
  double boundary_tolerance = 1e-6; ///< max population allowed at n_max
  double max_step_trace_drift = 1e-8;
  bool keep_final_state = true;
};

struct DensityTrajectory {
  std::vector<double> times;
  std::vector<MomentState> moments;
  std::vector<BlockDensity> states;  ///< filled when keep_states is set
  std::optional<BlockDensity> final_state;  ///< set when keep_final_state is on
  double max_step_trace_drift = 0.0;
  double cumulative_trace_drift = 0.0;
  double max_boundary_population = 0.0;
  int substeps = 1;                  ///< integrator substeps per requested dt
  bool unitary_path = false;         ///< gamma = 0 state-vector propagation was used
};

/// Fixed-step RK4 integration of the master equation.
///
/// The requested step is subdivided when dt exceeds the RK4 stability bound
/// of the truncated generator. With gamma = 0 and a block-diagonal initial
/// state the evolution is unitary; the state is then propagated as a weighted
/// ensemble of eigenvectors, which is exact and far cheaper at large cutoff.
///
/// Throws CutoffOverflowError when the population at the cutoff exceeds
/// boundary_tolerance and StepSizeError when one step changes the trace by more
/// than max_step_trace_drift.
DensityTrajectory evolve_density(const BlockDensity& rho0, const SpinDynamicsParams& params,
                                 const DensityEvolutionOptions& options = {});
DensityTrajectory evolve_density(const fock::DensityMatrix& rho0, const SpinDynamicsParams& params,
                                 const DensityEvolutionOptions& options = {});
/// Same as evolve_density from |0,0>, without allocating the dense vacuum
/// block when the evolution is unitary.
DensityTrajectory evolve_from_vacuum(fock::FockCutoff cutoff, const SpinDynamicsParams& params,
                                     const DensityEvolutionOptions& options = {});

struct MomentOptions {
  int sample_every = 1;
  bool convergence_check = false;  ///< rerun at dt/2 and compare N_+ at t_final
  double convergence_tol = 1e-8;   ///< relative
};

struct MomentTrajectory {
  std::vector<double> times;
  std::vector<MomentState> states;
  const MomentState& final() const { return states.back(); }
};

/// RK4 integration of the closed moment equations from vacuum.
MomentTrajectory evolve_moments(const SpinDynamicsParams& params, const MomentOptions& options = {});

/// Right-hand side of the moment equations.
MomentState moment_rhs(const MomentState& s, const SpinDynamicsParams& params);

/// sinh^2(omega t), the lossless resonant pair number.
double mean_pairs_closed_form(double omega, double t);

struct ZenoPoint {
  double gamma;
  double n_plus;
};

/// N_+(t_final) for each loss rate, sorted by gamma. Runs in parallel.
std::vector<ZenoPoint> zeno_sweep(const SpinDynamicsParams& base, std::span<const double> gamma_grid);

/// Cutoff for which the thermal tail of either mode, at the largest mean
/// occupation reached by the moment equations, stays below tail_tol.
fock::FockCutoff adequate_cutoff(const SpinDynamicsParams& params, double tail_tol = 1e-10);

}  // namespace zeno::dynamics

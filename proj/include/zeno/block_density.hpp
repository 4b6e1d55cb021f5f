#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "zeno/fockspace.hpp"

namespace zeno::dynamics {

struct MomentState {
  double n_minus = 0.0;  ///< <a_-^dag a_->
  double n_plus = 0.0;   ///< <a_+^dag a_+>
  double v = 0.0;        ///< 2i v = <a_-^dag a_+^dag - a_- a_+>
  double u = 0.0;        ///< 2 u  = <a_-^dag a_+^dag + a_- a_+>
};

/// Density operator stored by imbalance sector.
///
/// Sector D holds the basis states |n, n + D> (n_plus - n_minus = D). The
/// pair Hamiltonian keeps D fixed and a loss jump on the -1 mode raises it by
/// one, so the block rho_{D, D+c} only ever couples to rho_{D-1, D-1+c}: each
/// coherence order c >= 0 evolves as an independent chain of blocks. Blocks
/// with c < 0 are the adjoints of c > 0 blocks and are not stored. A state
/// prepared in vacuum only ever populates the c = 0 chain.
///
/// Storage is one flat buffer so integrator stages are plain vectors.
class BlockDensity {
 public:
  struct Block {
    int sector;        ///< D of the row sector
    int order;         ///< coherence order c; column sector is D + c
    int rows;
    int cols;
    std::size_t offset;
    int previous;      ///< index of block (D - 1, c), or -1
  };

  /// Chain of blocks (D, c) for D in [first_sector, last_sector].
  struct ChainSpec {
    int order;
    int first_sector;
    int last_sector;
  };

  /// Zero operator with the given block chains.
  BlockDensity(fock::FockCutoff cutoff, std::vector<ChainSpec> chains);

  /// Copy whose chains extend up to the largest sector the cutoff admits,
  /// the layout needed once loss can move weight to higher sectors.
  BlockDensity extended_to_cutoff() const;
  std::vector<ChainSpec> chains() const;

  static BlockDensity vacuum(fock::FockCutoff cutoff);
  static BlockDensity from_dense(const fock::DensityMatrix& rho);
  /// Assembles the full matrix. Only sensible for small cutoffs.
  fock::DensityMatrix to_dense() const;

  const fock::FockCutoff& cutoff() const { return cutoff_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::optional<int> find_block(int sector, int order) const;

  Eigen::Map<Eigen::MatrixXcd> block(int k) {
    const auto& b = blocks_[k];
    return {data_.data() + b.offset, b.rows, b.cols};
  }
  Eigen::Map<const Eigen::MatrixXcd> block(int k) const {
    const auto& b = blocks_[k];
    return {data_.data() + b.offset, b.rows, b.cols};
  }

  std::vector<fock::Complex>& raw() { return data_; }
  const std::vector<fock::Complex>& raw() const { return data_; }

  bool block_diagonal() const;  ///< only the c = 0 chain is present
  double trace() const;
  double purity() const;
  MomentState moments() const;
  /// Population with n_minus = n_max or n_plus = n_max.
  double boundary_population() const;
  double min_eigenvalue() const;
  /// Diagonal distribution of the +1 mode.
  std::vector<double> plus_mode_distribution() const;

  /// Symmetrizes the c = 0 blocks and rescales to unit trace.
  /// Returns the trace before rescaling.
  double hermitize_and_normalize();

  // Sector geometry.
  int sector_size(int d) const { return cutoff_.n_max() - std::abs(d) + 1; }
  static int sector_first_n_minus(int d) { return d < 0 ? -d : 0; }

 private:
  fock::FockCutoff cutoff_;
  std::vector<Block> blocks_;
  std::vector<fock::Complex> data_;
};

}  // namespace zeno::dynamics

#include "zeno/block_density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace zeno::dynamics {

using fock::Complex;

BlockDensity::BlockDensity(fock::FockCutoff cutoff, std::vector<ChainSpec> chains)
    : cutoff_(cutoff) {
  const int n_max = cutoff.n_max();
  std::size_t offset = 0;
  std::sort(chains.begin(), chains.end(),
            [](const ChainSpec& a, const ChainSpec& b) { return a.order < b.order; });
  for (std::size_t k = 1; k < chains.size(); ++k)
    if (chains[k].order == chains[k - 1].order) throw std::invalid_argument("BlockDensity: duplicate chain");
  for (const auto& [order, first, last] : chains) {
    if (order < 0 || order > 2 * n_max) throw std::invalid_argument("BlockDensity: bad coherence order");
    if (first < -n_max || last + order > n_max || last < first)
      throw std::invalid_argument("BlockDensity: bad sector range");
    int previous = -1;
    for (int d = first; d <= last; ++d) {
      Block b{d, order, sector_size(d), sector_size(d + order), offset, previous};
      offset += static_cast<std::size_t>(b.rows) * b.cols;
      previous = static_cast<int>(blocks_.size());
      blocks_.push_back(b);
    }
  }
  data_.assign(offset, Complex(0.0, 0.0));
}

BlockDensity BlockDensity::vacuum(fock::FockCutoff cutoff) {
  BlockDensity rho(cutoff, {{0, 0, 0}});
  rho.block(0)(0, 0) = 1.0;
  return rho;
}

std::vector<BlockDensity::ChainSpec> BlockDensity::chains() const {
  std::vector<ChainSpec> out;
  for (const auto& b : blocks_) {
    if (out.empty() || out.back().order != b.order)
      out.push_back({b.order, b.sector, b.sector});
    else
      out.back().last_sector = b.sector;
  }
  return out;
}

BlockDensity BlockDensity::extended_to_cutoff() const {
  auto specs = chains();
  for (auto& c : specs) c.last_sector = cutoff_.n_max() - c.order;
  BlockDensity out(cutoff_, specs);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    const int target = *out.find_block(b.sector, b.order);
    out.block(target) = block(static_cast<int>(k));
  }
  return out;
}

BlockDensity BlockDensity::from_dense(const fock::DensityMatrix& dense) {
  const auto& cut = dense.cutoff();
  const int n_max = cut.n_max();
  const auto& m = dense.data();
  // Row-sector range carrying weight, per coherence order c >= 0.
  std::map<int, std::pair<int, int>> range;
  for (int nm = 0; nm <= n_max; ++nm)
    for (int np = 0; np <= n_max; ++np)
      for (int mm = 0; mm <= n_max; ++mm)
        for (int mp = 0; mp <= n_max; ++mp) {
          if (m(cut.index(nm, np), cut.index(mm, mp)) == Complex(0.0, 0.0)) continue;
          const int d_row = np - nm;
          const int c = (mp - mm) - d_row;
          if (c < 0) continue;
          auto [it, inserted] = range.try_emplace(c, d_row, d_row);
          if (!inserted) {
            it->second.first = std::min(it->second.first, d_row);
            it->second.second = std::max(it->second.second, d_row);
          }
        }
  std::vector<ChainSpec> chains;
  for (const auto& [c, r] : range) chains.push_back({c, r.first, r.second});
  BlockDensity rho(cut, chains);
  for (std::size_t k = 0; k < rho.blocks_.size(); ++k) {
    const auto& b = rho.blocks_[k];
    auto blk = rho.block(static_cast<int>(k));
    const int r0 = sector_first_n_minus(b.sector);
    const int c0 = sector_first_n_minus(b.sector + b.order);
    for (int i = 0; i < b.rows; ++i)
      for (int j = 0; j < b.cols; ++j) {
        const int nm = r0 + i;
        const int mm = c0 + j;
        blk(i, j) = m(cut.index(nm, nm + b.sector), cut.index(mm, mm + b.sector + b.order));
      }
  }
  return rho;
}

fock::DensityMatrix BlockDensity::to_dense() const {
  fock::ComplexMatrix m = fock::ComplexMatrix::Zero(cutoff_.dim(), cutoff_.dim());
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    const auto blk = block(static_cast<int>(k));
    const int r0 = sector_first_n_minus(b.sector);
    const int c0 = sector_first_n_minus(b.sector + b.order);
    for (int i = 0; i < b.rows; ++i)
      for (int j = 0; j < b.cols; ++j) {
        const int row = cutoff_.index(r0 + i, r0 + i + b.sector);
        const int col = cutoff_.index(c0 + j, c0 + j + b.sector + b.order);
        m(row, col) = blk(i, j);
        if (b.order > 0) m(col, row) = std::conj(blk(i, j));
      }
  }
  return fock::DensityMatrix(std::move(m), cutoff_);
}

std::optional<int> BlockDensity::find_block(int sector, int order) const {
  for (std::size_t k = 0; k < blocks_.size(); ++k)
    if (blocks_[k].sector == sector && blocks_[k].order == order) return static_cast<int>(k);
  return std::nullopt;
}

bool BlockDensity::block_diagonal() const {
  return std::all_of(blocks_.begin(), blocks_.end(), [](const Block& b) { return b.order == 0; });
}

double BlockDensity::trace() const {
  double t = 0.0;
  for (std::size_t k = 0; k < blocks_.size(); ++k)
    if (blocks_[k].order == 0) t += block(static_cast<int>(k)).trace().real();
  return t;
}

double BlockDensity::purity() const {
  double p = 0.0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const double f = block(static_cast<int>(k)).squaredNorm();
    p += blocks_[k].order == 0 ? f : 2.0 * f;
  }
  return p;
}

MomentState BlockDensity::moments() const {
  MomentState s;
  Complex pair(0.0, 0.0);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    if (b.order != 0) continue;
    const auto blk = block(static_cast<int>(k));
    const int n0 = sector_first_n_minus(b.sector);
    for (int i = 0; i < b.rows; ++i) {
      const double nm = n0 + i;
      const double np = nm + b.sector;
      const double p = blk(i, i).real();
      s.n_minus += nm * p;
      s.n_plus += np * p;
      if (i + 1 < b.rows) pair += std::sqrt((nm + 1.0) * (np + 1.0)) * blk(i, i + 1);
    }
  }
  s.u = pair.real();
  s.v = pair.imag();
  return s;
}

double BlockDensity::boundary_population() const {
  // The last basis state of every sector has n_minus = n_max (D <= 0) or
  // n_plus = n_max (D >= 0).
  double p = 0.0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    if (b.order != 0) continue;
    p += block(static_cast<int>(k))(b.rows - 1, b.rows - 1).real();
  }
  return p;
}

double BlockDensity::min_eigenvalue() const {
  if (!block_diagonal()) {
    Eigen::SelfAdjointEigenSolver<fock::ComplexMatrix> solver(to_dense().data(), Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
  }
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const fock::ComplexMatrix blk = block(static_cast<int>(k));
    Eigen::SelfAdjointEigenSolver<fock::ComplexMatrix> solver(blk, Eigen::EigenvaluesOnly);
    lo = std::min(lo, solver.eigenvalues().minCoeff());
  }
  return lo;
}

std::vector<double> BlockDensity::plus_mode_distribution() const {
  std::vector<double> p(static_cast<std::size_t>(cutoff_.mode_dim()), 0.0);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    if (b.order != 0) continue;
    const auto blk = block(static_cast<int>(k));
    const int n0 = sector_first_n_minus(b.sector);
    for (int i = 0; i < b.rows; ++i) p[n0 + i + b.sector] += blk(i, i).real();
  }
  return p;
}

double BlockDensity::hermitize_and_normalize() {
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    if (blocks_[k].order != 0) continue;
    auto blk = block(static_cast<int>(k));
    blk = (0.5 * (blk + blk.adjoint())).eval();
  }
  const double t = trace();
  if (!(t > 0.0)) throw std::runtime_error("BlockDensity: trace collapsed to zero");
  for (auto& v : data_) v /= t;
  return t;
}

}  // namespace zeno::dynamics

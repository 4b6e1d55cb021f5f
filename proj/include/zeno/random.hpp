#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace zeno {

/// SplitMix64 finalizer applied to (seed, index). Gives each task its own
/// stream so parallel generation does not depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Seeded random stream. Uniform and normal variates are computed here from
/// raw engine output rather than through <random> distributions, whose
/// algorithms are implementation-defined; results are bit-identical across
/// standard libraries.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t index) : engine_(derive_seed(seed, index)) {}

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Runs body(i) for i in [0, count) on up to hardware_concurrency threads.
/// Callers must write results only to slot i so the outcome is order-independent.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace zeno

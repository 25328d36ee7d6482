#ifndef KBLAB_RNG_HPP
#define KBLAB_RNG_HPP

#include <cstdint>

#include "kblab/matlib.hpp"

namespace kblab {
namespace rng {

/// Counter-based splittable generator (SplitMix64 output function applied to
/// a keyed counter). Every stochastic result in the library is a pure
/// function of (inputs, seed): streams derived from (replicate, particle,
/// channel) never overlap and do not depend on thread scheduling, so ensemble
/// sizes can vary without re-correlating draws. The Gaussian transform is
/// Box-Muller on 53-bit uniforms, fixed here rather than delegated to
/// std::normal_distribution so outputs are implementation-independent.
class Stream {
 public:
  explicit Stream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1).
  double next_double();
  /// Standard normal draw.
  double next_gaussian();
  /// Vector of n independent standard normals.
  Vector gaussian_vector(Eigen::Index n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derive a stream key from a master seed and up to three lane indices.
std::uint64_t derive_key(std::uint64_t master, std::uint64_t a = 0,
                         std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace rng
}  // namespace kblab

#endif  // KBLAB_RNG_HPP

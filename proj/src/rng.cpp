#include "kblab/rng.hpp"

#include <cmath>

namespace kblab {
namespace rng {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_key(std::uint64_t master, std::uint64_t a,
                         std::uint64_t b, std::uint64_t c) {
  std::uint64_t k = mix(master + kGolden);
  k = mix(k + kGolden + a);
  k = mix(k + kGolden + b);
  k = mix(k + kGolden + c);
  return k;
}

std::uint64_t Stream::next_u64() {
  state_ += kGolden;
  return mix(state_);
}

double Stream::next_double() {
  // 53-bit mantissa, shifted into the open interval (0, 1)
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = next_double();
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Vector Stream::gaussian_vector(Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = next_gaussian();
  return v;
}

}  // namespace rng
}  // namespace kblab

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string_view>

namespace regimevar {

/// Seeded stream of uniforms and standard normals. Normals come from
/// Box-Muller on top of mt19937_64 so identical seeds give identical
/// streams on every platform, independent of the standard library's
/// distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Draws an index from a probability vector (assumed to sum to ~1);
  /// rounding residue falls on the last index.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& probs);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);
std::uint64_t hash_string(std::string_view s);

inline std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

inline std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
  return derive_seed(derive_seed(a, b), c);
}

}  // namespace regimevar

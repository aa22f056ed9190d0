#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pea {

/// Deterministic random stream. The engine is mt19937_64 (fixed by the
/// standard); distributions are implemented here so that draws do not depend
/// on the standard library vendor.
class RandomStream {
 public:
  RandomStream() : RandomStream(0, 0) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal via Box-Muller (one variate per two uniforms).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

  std::vector<std::size_t> permutation(std::size_t n);

  std::string state() const;
  void set_state(const std::string& state);

  bool operator==(const RandomStream& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Stable 64-bit id for a named substream (FNV-1a).
std::uint64_t stream_id(std::string_view name);

}  // namespace pea

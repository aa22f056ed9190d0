#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "pea/rng.hpp"
#include "pea/tensor.hpp"

namespace pea::testing {

template <typename T = float>
BasicTensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  RandomStream rng(seed, 99);
  BasicTensor<T> t(std::move(shape), T{0});
  for (T& v : t.data()) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
  return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    RandomStream rng(static_cast<std::uint64_t>(std::rand()), stream_id(tag));
    path_ = std::filesystem::temp_directory_path() / ("pea-" + tag + "-" + std::to_string(rng.next_u64() % 1000000007));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace pea::testing

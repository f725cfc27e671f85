#pragma once

#include "splatsim/cloud.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace testing {

using splatsim::Vec3;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("splatsim_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Vec3 uniform_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  const double x = u(rng), y = u(rng), z = u(rng);
  return Vec3(x, y, z);
}

inline Vec3 unit_vec(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v;
  do {
    const double x = g(rng), y = g(rng), z = g(rng);
    v = Vec3(x, y, z);
  } while (v.norm() < 1e-6);
  return v.normalized();
}

inline splatsim::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  splatsim::PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.positions.push_back(uniform_vec(rng, -extent, extent));
  return c;
}

}  // namespace testing

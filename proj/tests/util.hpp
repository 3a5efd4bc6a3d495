#pragma once

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "evprof/error.hpp"

namespace testutil {

template <class Fn>
void expect_error(Fn&& fn, evprof::ErrorKind kind) {
  try {
    fn();
    ADD_FAILURE() << "no error thrown, expected " << evprof::to_string(kind);
  } catch (const evprof::Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

inline std::vector<double> random_series(std::mt19937_64& rng, std::size_t n, double lo = -50, double hi = 50) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("evprof_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace testutil

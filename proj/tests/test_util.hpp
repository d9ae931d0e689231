#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Core>

// Scratch directory removed at scope exit.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("cbm_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }

  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

// Test-side randomness intentionally uses std::mt19937_64, independent of the
// library's generator.
inline Eigen::MatrixXd random_matrix(long rows, long cols, std::uint64_t seed,
                                     double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) m(i, j) = dist(gen);
  return m;
}

inline Eigen::MatrixXd random_symmetric(long n, std::uint64_t seed, double lo = -1.0,
                                        double hi = 1.0) {
  Eigen::MatrixXd m = random_matrix(n, n, seed, lo, hi);
  return (m + m.transpose()) / 2.0;
}

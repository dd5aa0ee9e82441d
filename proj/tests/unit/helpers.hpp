#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "framerepeat/features.hpp"
#include "framerepeat/numerics.hpp"

namespace testutil {

using framerepeat::numerics::DenseArray;

inline DenseArray random_array(std::vector<std::size_t> shape, std::mt19937_64& rng,
                               double scale = 1.0) {
  DenseArray a(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : a.data()) v = dist(rng);
  return a;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Random sample with sims consistent with frames and pooled, rounded to f32.
inline framerepeat::features::SampleRecord random_sample(std::size_t n, std::size_t d, std::size_t l,
                                                         std::uint64_t seed,
                                                         const std::string& id = "s") {
  std::mt19937_64 rng(seed);
  framerepeat::features::SampleRecord r;
  r.sample_id = id;
  r.features.frames = random_array({n, d}, rng);
  r.question.tokens = random_array({l, d}, rng);
  r.question.pooled = random_vector(d, rng);
  r.n_options = 4;
  r.answer_id = static_cast<int>(seed % 4);
  r.features.sims.assign(n, 0.0);
  framerepeat::features::quantize_to_f32(r);
  for (std::size_t i = 0; i < n; ++i)
    r.features.sims[i] = static_cast<float>(
        framerepeat::features::cosine(r.features.frames.row(i), r.question.pooled));
  return r;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("framerepeat-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testutil

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "framerepeat/numerics.hpp"

namespace framerepeat::features {

using numerics::DenseArray;

inline constexpr int kSampleFormatVersion = 1;

// Per-video frame embeddings (N x d) and the cosine similarity of each frame
// to the pooled question embedding.
struct FrameFeatureSet {
  DenseArray frames;
  std::vector<double> sims;

  std::size_t n_frames() const noexcept { return frames.rows(); }
  std::size_t dim() const noexcept { return frames.cols(); }
};

// Question token embeddings (L x d) plus the pooled text embedding.
struct QuestionEncoding {
  DenseArray tokens;
  std::vector<double> pooled;

  std::size_t n_tokens() const noexcept { return tokens.rows(); }
  std::size_t dim() const noexcept { return tokens.cols(); }
};

struct SampleRecord {
  std::string sample_id;
  FrameFeatureSet features;
  QuestionEncoding question;
  int answer_id = 0;
  int n_options = 2;

  std::size_t n_frames() const noexcept { return features.n_frames(); }
  std::size_t dim() const noexcept { return features.dim(); }
};

// Tolerance for the stored-vs-recomputed similarity check.
inline constexpr double kSimConsistencyTol = 1e-5;

double cosine(std::span<const double> a, std::span<const double> b);

// Throws LoadError describing the first violated invariant.
void validate(const SampleRecord& record);

// Accepts either the manifest path or the sample directory.
SampleRecord load_sample(const std::filesystem::path& manifest_path);

// Writes manifest.json plus four float32 blobs into dir; returns the manifest
// path. Values are narrowed to float32.
std::filesystem::path save_sample(const SampleRecord& record, const std::filesystem::path& dir);

// Rounds every stored value through float32 so that save/load is lossless.
void quantize_to_f32(SampleRecord& record);

// Raw little-endian float32 blob helpers, shared with the checkpoint writer.
std::vector<char> encode_f32(std::span<const double> values);
std::vector<double> decode_f32(std::span<const char> bytes);

}  // namespace framerepeat::features

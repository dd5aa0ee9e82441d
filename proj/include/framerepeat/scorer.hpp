#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "framerepeat/features.hpp"
#include "framerepeat/numerics.hpp"
#include "framerepeat/tape.hpp"

namespace framerepeat::scorer {

using numerics::DenseArray;
using numerics::Tape;
using numerics::Var;

struct ScorerConfig {
  std::size_t dim = 768;
  std::size_t n_heads = 8;
  std::size_t ffn_hidden = 768;
  double prior_weight = 5.0;
  double ln_eps = 1e-5;
  std::uint64_t seed = 0;
  // Only switched off by tests that check frame-permutation equivariance.
  bool positional_encoding = true;

  std::size_t head_dim() const noexcept { return dim / n_heads; }
  std::size_t score_hidden() const noexcept { return dim / 4; }
  void validate() const;
};

// Weights are stored input-major (d_in x d_out) and applied as x * W + b to
// row vectors.
struct ScorerParams {
  DenseArray w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  DenseArray ln1_gain, ln1_bias;
  DenseArray ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  DenseArray ln2_gain, ln2_bias;
  DenseArray head_w1, head_b1, head_w2, head_b2;

  // Stable order used by the optimizer and the checkpoint format.
  std::vector<std::pair<std::string, DenseArray*>> named();
  std::vector<std::pair<std::string, const DenseArray*>> named() const;
  std::vector<DenseArray> tensors() const;
  void assign(std::vector<DenseArray> tensors);

  std::size_t count() const;
  friend bool operator==(const ScorerParams& a, const ScorerParams& b);
};

std::size_t count_params(const ScorerConfig& config);

// Glorot-uniform weights, zero biases, unit LayerNorm gains. The last head
// layer is zero so fresh scores equal the similarity prior alone.
ScorerParams init_params(const ScorerConfig& config, std::uint64_t seed);

// Sinusoidal table: row i holds sin/cos(i / 10000^(2j/d)) in columns 2j/2j+1.
DenseArray positional_table(std::size_t n, std::size_t dim);
DenseArray positional_encode(const DenseArray& frames);

DenseArray cross_attention(const DenseArray& frames_pe, const DenseArray& tokens,
                           const ScorerParams& params, const ScorerConfig& config);

// Parameter leaves of one forward pass, in ScorerParams::named() order.
struct ScoreGraph {
  Var scores;  // rank 1, length N
  std::vector<Var> params;
};

ScoreGraph build_scores(Tape& tape, const features::SampleRecord& sample,
                        const ScorerParams& params, const ScorerConfig& config);

std::vector<double> forward(const features::SampleRecord& sample, const ScorerParams& params,
                            const ScorerConfig& config);

// lambda * (sims - mean(sims))
std::vector<double> similarity_prior(std::span<const double> sims, double prior_weight);

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const ScorerParams& params, const ScorerConfig& config,
                     const std::filesystem::path& path);
std::pair<ScorerParams, ScorerConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace framerepeat::scorer

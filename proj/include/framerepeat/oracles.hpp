#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "framerepeat/aoi.hpp"
#include "framerepeat/features.hpp"
#include "framerepeat/oracle.hpp"

namespace framerepeat::oracles {

// Parameters of the synthetic world. Defaults are calibrated for N = 32,
// d = 32 so that mean |gain| is about 0.1 and the per-sample best-minus-worst
// gain gap is about 0.33.
struct SyntheticOracleSpec {
  std::uint64_t seed = 7;
  std::size_t n_frames = 32;
  std::size_t dim = 32;
  std::size_t n_tokens = 8;
  std::size_t n_key_frames = 0;  // 0 means max(1, N / 8)
  double gain_scale = 0.3;       // weight of <u, v_i> in the gain
  double noise = 0.01;           // per-frame gain noise std
  double sample_offset = 0.1;    // std of a per-sample gain offset shared by all frames
  int saturation = 4;            // repeats beyond saturation - 1 extra copies add nothing
  double temperature = 1.0;      // default answer temperature
  double key_strength = 1.0;     // weight of u in key-frame features
  double alignment = 0.3;        // how much u leans toward the question itself
  double token_noise = 0.3;
  double feature_scale = 0.0;    // stored vector norm; 0 means sqrt(dim)
  int n_options = 4;

  std::size_t key_frames() const noexcept;
  double scale() const noexcept;
  void validate() const;
};

nlohmann::json to_json(const SyntheticOracleSpec& spec);
SyntheticOracleSpec spec_from_json(const nlohmann::json& j);

// Hidden ground truth for one synthetic sample.
struct SampleTruth {
  std::string sample_id;
  double base_logprob = 0.0;
  std::vector<double> gains;
  std::vector<std::size_t> key_frames;  // ascending
  int answer_id = 0;
};

nlohmann::json to_json(const SampleTruth& truth);
SampleTruth truth_from_json(const nlohmann::json& j);

struct SyntheticDataset {
  std::vector<features::SampleRecord> samples;
  std::vector<SampleTruth> truth;
};

// Samples first_index .. first_index + n_samples - 1; sample i depends only on
// (spec, i), so disjoint index ranges give independent held-out sets.
SyntheticDataset generate_synthetic_dataset(const SyntheticOracleSpec& spec, std::size_t n_samples,
                                            std::size_t first_index = 0);

std::string synthetic_sample_id(std::size_t index);

// Closed-form oracle: logprob = base + sum_i gain_i * min(count_i - 1, c_max - 1),
// clamped to <= 0.
class SyntheticOracle final : public Oracle {
 public:
  SyntheticOracle(SyntheticOracleSpec spec, const std::vector<SampleTruth>& truth);

  std::string oracle_id() const override;
  double logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                 int answer_id) override;
  int sample_answer(const std::string& sample_id, std::span<const std::size_t> sequence,
                    double temperature) override;

  // Pre-clamp value of the same formula.
  double raw_logprob(const std::string& sample_id, std::span<const std::size_t> sequence) const;
  const SampleTruth& truth(const std::string& sample_id) const;

 private:
  SyntheticOracleSpec spec_;
  std::unordered_map<std::string, SampleTruth> samples_;
  std::mutex draw_mutex_;
  std::unordered_map<std::string, std::uint64_t> draws_;
};

// Answers only baseline and single-repeat requests found in persisted records.
class ReplayOracle final : public Oracle {
 public:
  explicit ReplayOracle(std::vector<aoi::RepeatGainRecord> records);
  static ReplayOracle from_directory(const std::filesystem::path& dir);

  std::string oracle_id() const override { return oracle_id_; }
  double logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                 int answer_id) override;
  int sample_answer(const std::string& sample_id, std::span<const std::size_t> sequence,
                    double temperature) override;

 private:
  std::map<std::string, aoi::RepeatGainRecord> records_;
  std::string oracle_id_;
};

// Forwards to another oracle and counts the calls it makes.
class CountingOracle final : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner) : inner_(inner) {}

  std::string oracle_id() const override { return inner_.oracle_id(); }
  double logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                 int answer_id) override {
    ++logprob_calls_;
    return inner_.logprob(sample_id, sequence, answer_id);
  }
  int sample_answer(const std::string& sample_id, std::span<const std::size_t> sequence,
                    double temperature) override {
    ++answer_calls_;
    return inner_.sample_answer(sample_id, sequence, temperature);
  }

  std::size_t logprob_calls() const noexcept { return logprob_calls_; }
  std::size_t answer_calls() const noexcept { return answer_calls_; }

 private:
  Oracle& inner_;
  std::atomic<std::size_t> logprob_calls_{0};
  std::atomic<std::size_t> answer_calls_{0};
};

}  // namespace framerepeat::oracles

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "framerepeat/aoi.hpp"
#include "framerepeat/features.hpp"
#include "framerepeat/losses.hpp"
#include "framerepeat/oracle.hpp"
#include "framerepeat/oracles.hpp"
#include "framerepeat/scorer.hpp"

namespace framerepeat::trainer {

struct TrainConfig {
  // Learning rate at the reference width. The Adam step actually used is
  // lr * lr_reference_dim / dim (1/width scaling); 0 disables the scaling.
  double lr = 1e-4;
  std::size_t lr_reference_dim = 768;
  std::size_t epochs = 1;
  std::size_t accumulation = 4;
  std::size_t k = 16;  // candidate half-width
  losses::LossConfig loss;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // Multi-epoch runs: reuse the first epoch's candidate sets instead of
  // re-selecting from the current scores.
  bool freeze_candidates = false;
  std::size_t max_in_flight = 1;
  std::size_t checkpoint_every = 0;  // optimizer steps; 0 disables
  std::filesystem::path checkpoint_dir;

  void validate() const;
  double effective_lr(std::size_t dim) const;
};

nlohmann::json to_json(const TrainConfig& config);

struct TrainLogEntry {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::optional<double> loss;  // empty when every sample in the window was skipped
  std::optional<double> regression;
  std::optional<double> ranking;
  double score_std = 0.0;  // mean over the window's samples of std(scores over N frames)
  std::size_t samples = 0;
  std::size_t skipped = 0;
  double wall_seconds = 0.0;
  std::size_t oracle_calls = 0;  // cumulative logprob calls
  std::size_t cache_hits = 0;    // cumulative
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;
  std::size_t oracle_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t skipped = 0;

  void write_jsonl(const std::filesystem::path& path) const;
};

nlohmann::json to_json(const TrainLogEntry& entry);

// RepeatGainRecords keyed by (sample_id, oracle_id). A lookup succeeds when the
// stored record already covers every requested frame. With a directory the
// cache is loaded from and written through to one JSON file per sample.
class RecordCache {
 public:
  RecordCache() = default;
  explicit RecordCache(std::filesystem::path dir);

  const aoi::RepeatGainRecord* find(const std::string& sample_id, const std::string& oracle_id) const;
  // First record for the sample under any oracle.
  const aoi::RepeatGainRecord* find_any(const std::string& sample_id) const;
  void store(const aoi::RepeatGainRecord& record);
  std::size_t size() const noexcept { return records_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, aoi::RepeatGainRecord> records_;
  std::optional<std::filesystem::path> dir_;
};

struct TrainResult {
  scorer::ScorerParams params;
  TrainLog log;
};

// One pass per epoch: scores -> candidates -> repeat gains (cache or oracle)
// -> loss -> gradient accumulation -> Adam. `oracle` may be null when every
// needed record is cached.
TrainResult train(std::span<const features::SampleRecord> dataset, Oracle* oracle,
                  scorer::ScorerParams params, const scorer::ScorerConfig& scorer_config,
                  const TrainConfig& config, RecordCache& cache);

// Spearman rank correlation with average ranks for ties; 0 if either side is
// constant.
double spearman(std::span<const double> a, std::span<const double> b);

struct RankingMetrics {
  std::size_t n_samples = 0;
  std::size_t k = 0;
  double spearman = 0.0;
  std::optional<double> recall_at_k;  // empty without planted key frames
  double mean_topk_gain = 0.0;
  double mean_randomk_gain = 0.0;
  double randomk_gain_sem = 0.0;  // standard error of the random-k mean
  double mean_bottomk_gain = 0.0;
};

nlohmann::json to_json(const RankingMetrics& metrics);

// Per-frame true gains, from synthetic ground truth or a full-frame scan.
struct FrameTruth {
  std::vector<double> gains;
  std::vector<std::size_t> key_frames;
};

FrameTruth truth_from_synthetic(const oracles::SampleTruth& truth);
// Requires a complete record covering all N frames.
FrameTruth truth_from_record(const aoi::RepeatGainRecord& record);

// Scores every sample and compares against the truth for the same sample_id.
// Random-k baselines average `random_trials` seeded draws per sample.
RankingMetrics evaluate_ranking(std::span<const features::SampleRecord> dataset,
                                const std::map<std::string, FrameTruth>& truth,
                                const scorer::ScorerParams& params,
                                const scorer::ScorerConfig& config, std::size_t k,
                                std::uint64_t seed = 0, std::size_t random_trials = 3);

// Same metrics for externally supplied scores (one vector per sample).
RankingMetrics evaluate_scores(std::span<const features::SampleRecord> dataset,
                               std::span<const std::vector<double>> scores,
                               const std::map<std::string, FrameTruth>& truth, std::size_t k,
                               std::uint64_t seed = 0, std::size_t random_trials = 3);

}  // namespace framerepeat::trainer

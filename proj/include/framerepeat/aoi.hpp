#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "framerepeat/features.hpp"
#include "framerepeat/oracle.hpp"

namespace framerepeat::aoi {

FrameMultiset baseline_multiset(std::size_t n_frames);

// [0, ..., i, i, ..., N-1]: the copy sits right after the original.
FrameMultiset repeat_multiset(std::size_t n_frames, std::size_t frame);

// Returns the repeated frame if `sequence` has the single-repeat form for
// n_frames, nullopt otherwise.
std::optional<std::size_t> repeated_frame(std::span<const std::size_t> sequence,
                                          std::size_t n_frames);

struct GainEntry {
  std::size_t frame = 0;
  double logprob = 0.0;
  double gain = 0.0;  // logprob - baseline, exactly
};

struct RepeatGainRecord {
  std::string sample_id;
  std::string oracle_id;
  std::size_t n_frames = 0;
  double baseline_logprob = 0.0;
  std::vector<std::size_t> candidates;  // ascending
  std::vector<GainEntry> entries;       // ascending by frame
  std::vector<std::size_t> failed;      // candidates whose oracle call failed
  bool complete = false;

  const GainEntry* find(std::size_t frame) const;
  bool covers(std::span<const std::size_t> frames) const;
  // Adds entries of `other` that are missing here. Both must share the
  // sample, oracle and baseline.
  void merge(const RepeatGainRecord& other);
};

nlohmann::json to_json(const RepeatGainRecord& record);
RepeatGainRecord record_from_json(const nlohmann::json& j);
void save_record(const RepeatGainRecord& record, const std::filesystem::path& path);
RepeatGainRecord load_record(const std::filesystem::path& path);

double baseline_logprob(const features::SampleRecord& sample, Oracle& oracle);

struct ScanOptions {
  // Upper bound on concurrently issued oracle calls.
  std::size_t max_in_flight = 1;
};

// One baseline call plus one call per candidate. Failed candidate calls leave
// the record incomplete with the failing frames listed; a failed baseline
// call throws.
RepeatGainRecord scan_repeat_gains(const features::SampleRecord& sample,
                                   std::span<const std::size_t> candidates, Oracle& oracle,
                                   const ScanOptions& options = {});

// Re-queries the failed frames of an incomplete record, reusing its baseline.
RepeatGainRecord resume_scan(const RepeatGainRecord& partial, const features::SampleRecord& sample,
                             Oracle& oracle, const ScanOptions& options = {});

// Indices of the k largest scores, ties to the lower index, in rank order.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

struct CandidateSet {
  std::vector<std::size_t> top;     // rank order
  std::vector<std::size_t> random;  // draw order
  std::vector<std::size_t> all() const;  // ascending
};

// Top-K by score plus min(K, N-K) uniform draws from the remaining frames.
CandidateSet select_candidates(std::span<const double> scores, std::size_t k, std::uint64_t seed);

// Uniform draw of `count` distinct indices from `pool` (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t count, std::uint64_t seed);

struct FilterResult {
  std::vector<features::SampleRecord> retained;
  std::vector<int> correct_counts;  // per input sample, -1 when skipped
  std::size_t n_failed = 0;
};

// Keeps samples answered correctly in some but not all of `trials` draws.
FilterResult filter_dataset(std::span<const features::SampleRecord> samples, Oracle& oracle,
                            int trials = 5, double temperature = 1.0);

}  // namespace framerepeat::aoi

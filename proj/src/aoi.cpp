#include "framerepeat/aoi.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "framerepeat/errors.hpp"
#include "parallel.hpp"

namespace framerepeat::aoi {

namespace fs = std::filesystem;
using json = nlohmann::json;

FrameMultiset baseline_multiset(std::size_t n_frames) {
  FrameMultiset out(n_frames);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

FrameMultiset repeat_multiset(std::size_t n_frames, std::size_t frame) {
  if (frame >= n_frames) {
    throw DimensionError("repeat_multiset: frame " + std::to_string(frame) + " outside [0, " +
                         std::to_string(n_frames) + ")");
  }
  FrameMultiset out;
  out.reserve(n_frames + 1);
  for (std::size_t i = 0; i < n_frames; ++i) {
    out.push_back(i);
    if (i == frame) out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> repeated_frame(std::span<const std::size_t> sequence,
                                          std::size_t n_frames) {
  if (n_frames == 0 || sequence.size() != n_frames + 1) return std::nullopt;
  std::optional<std::size_t> dup;
  std::size_t expect = 0;
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    if (sequence[k] == expect) {
      ++expect;
    } else if (!dup && expect > 0 && sequence[k] == expect - 1) {
      dup = expect - 1;
    } else {
      return std::nullopt;
    }
  }
  return expect == n_frames ? dup : std::nullopt;
}

const GainEntry* RepeatGainRecord::find(std::size_t frame) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), frame,
                             [](const GainEntry& e, std::size_t f) { return e.frame < f; });
  return it != entries.end() && it->frame == frame ? &*it : nullptr;
}

bool RepeatGainRecord::covers(std::span<const std::size_t> frames) const {
  return std::all_of(frames.begin(), frames.end(), [&](std::size_t f) { return find(f) != nullptr; });
}

void RepeatGainRecord::merge(const RepeatGainRecord& other) {
  if (other.sample_id != sample_id || other.oracle_id != oracle_id ||
      other.baseline_logprob != baseline_logprob) {
    throw InternalError("merge: records for '" + sample_id + "' disagree on sample/oracle/baseline");
  }
  for (const auto& e : other.entries)
    if (!find(e.frame)) entries.push_back(e);
  std::sort(entries.begin(), entries.end(),
            [](const GainEntry& a, const GainEntry& b) { return a.frame < b.frame; });
  std::set<std::size_t> cand(candidates.begin(), candidates.end());
  cand.insert(other.candidates.begin(), other.candidates.end());
  candidates.assign(cand.begin(), cand.end());
  std::vector<std::size_t> still_failed;
  for (std::size_t f : candidates)
    if (!find(f)) still_failed.push_back(f);
  failed = std::move(still_failed);
  complete = failed.empty();
}

json to_json(const RepeatGainRecord& r) {
  json entries = json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"frame", e.frame}, {"logprob", e.logprob}, {"gain", e.gain}});
  return {{"sample_id", r.sample_id},   {"oracle_id", r.oracle_id},
          {"n_frames", r.n_frames},     {"baseline_logprob", r.baseline_logprob},
          {"candidates", r.candidates}, {"entries", entries},
          {"failed", r.failed},         {"complete", r.complete}};
}

RepeatGainRecord record_from_json(const json& j) {
  try {
    RepeatGainRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.oracle_id = j.at("oracle_id").get<std::string>();
    r.n_frames = j.value("n_frames", std::size_t{0});
    r.baseline_logprob = j.at("baseline_logprob").get<double>();
    r.complete = j.at("complete").get<bool>();
    for (const auto& e : j.at("entries"))
      r.entries.push_back({e.at("frame").get<std::size_t>(), e.at("logprob").get<double>(),
                           e.at("gain").get<double>()});
    std::sort(r.entries.begin(), r.entries.end(),
              [](const GainEntry& a, const GainEntry& b) { return a.frame < b.frame; });
    if (j.contains("candidates")) {
      r.candidates = j["candidates"].get<std::vector<std::size_t>>();
    } else {
      for (const auto& e : r.entries) r.candidates.push_back(e.frame);
    }
    r.failed = j.value("failed", std::vector<std::size_t>{});
    for (const auto& e : r.entries) {
      if (e.gain != e.logprob - r.baseline_logprob)
        throw LoadError(LoadError::Kind::Range, "record '" + r.sample_id + "': gain of frame " +
                                                    std::to_string(e.frame) + " != logprob - baseline");
    }
    return r;
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::Format, std::string("repeat-gain record: ") + e.what());
  }
}

void save_record(const RepeatGainRecord& record, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(record).dump(2) << "\n";
  if (!out) throw IoError("short write to " + path.string());
}

RepeatGainRecord load_record(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadError::Kind::MissingFile, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError(LoadError::Kind::Format, path.string() + ": " + e.what());
  }
  return record_from_json(j);
}

double baseline_logprob(const features::SampleRecord& sample, Oracle& oracle) {
  const FrameMultiset seq = baseline_multiset(sample.n_frames());
  try {
    return oracle.logprob(sample.sample_id, seq, sample.answer_id);
  } catch (const OracleError& e) {
    throw OracleError("baseline logprob for sample '" + sample.sample_id + "': " + e.what());
  }
}

namespace {

std::vector<std::size_t> checked_candidates(std::span<const std::size_t> candidates, std::size_t n) {
  if (candidates.empty()) throw ConfigError("scan: candidate set is empty");
  std::vector<std::size_t> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ConfigError("scan: candidate set contains a duplicate frame");
  if (sorted.back() >= n) throw DimensionError("scan: candidate frame outside [0, N)");
  return sorted;
}

void scan_into(RepeatGainRecord& record, const features::SampleRecord& sample,
               std::span<const std::size_t> frames, Oracle& oracle, const ScanOptions& options) {
  const std::size_t n = sample.n_frames();
  std::vector<std::optional<double>> results(frames.size());
  detail::bounded_parallel_for(frames.size(), options.max_in_flight, [&](std::size_t k) {
    try {
      const FrameMultiset seq = repeat_multiset(n, frames[k]);
      results[k] = oracle.logprob(sample.sample_id, seq, sample.answer_id);
    } catch (const Error&) {
      results[k].reset();
    }
  });
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (!results[k]) continue;
    record.entries.push_back({frames[k], *results[k], *results[k] - record.baseline_logprob});
  }
  std::sort(record.entries.begin(), record.entries.end(),
            [](const GainEntry& a, const GainEntry& b) { return a.frame < b.frame; });
  record.failed.clear();
  for (std::size_t f : record.candidates)
    if (!record.find(f)) record.failed.push_back(f);
  record.complete = record.failed.empty();
}

}  // namespace

RepeatGainRecord scan_repeat_gains(const features::SampleRecord& sample,
                                   std::span<const std::size_t> candidates, Oracle& oracle,
                                   const ScanOptions& options) {
  RepeatGainRecord record;
  record.sample_id = sample.sample_id;
  record.oracle_id = oracle.oracle_id();
  record.n_frames = sample.n_frames();
  record.candidates = checked_candidates(candidates, sample.n_frames());
  record.baseline_logprob = baseline_logprob(sample, oracle);
  scan_into(record, sample, record.candidates, oracle, options);
  return record;
}

RepeatGainRecord resume_scan(const RepeatGainRecord& partial, const features::SampleRecord& sample,
                             Oracle& oracle, const ScanOptions& options) {
  if (partial.sample_id != sample.sample_id)
    throw InternalError("resume_scan: record/sample mismatch");
  RepeatGainRecord record = partial;
  std::vector<std::size_t> missing;
  for (std::size_t f : record.candidates)
    if (!record.find(f)) missing.push_back(f);
  if (missing.empty()) {
    record.failed.clear();
    record.complete = true;
    return record;
  }
  scan_into(record, sample, missing, oracle, options);
  return record;
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
  if (k > scores.size()) throw ConfigError("top_k: k exceeds the number of frames");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(k);
  return order;
}

std::vector<std::size_t> CandidateSet::all() const {
  std::vector<std::size_t> out(top);
  out.insert(out.end(), random.begin(), random.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t count, std::uint64_t seed) {
  count = std::min(count, pool.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t range = pool.size() - i;
    // Rejection sampling keeps the draw uniform and independent of the
    // standard library's distribution implementation.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    std::swap(pool[i], pool[i + static_cast<std::size_t>(r % range)]);
  }
  pool.resize(count);
  return pool;
}

CandidateSet select_candidates(std::span<const double> scores, std::size_t k, std::uint64_t seed) {
  const std::size_t n = scores.size();
  if (k == 0) throw ConfigError("select_candidates: K must be >= 1");
  if (k > n) throw ConfigError("select_candidates: K exceeds the number of frames");
  CandidateSet c;
  c.top = top_k_indices(scores, k);
  std::vector<bool> taken(n, false);
  for (std::size_t i : c.top) taken[i] = true;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i)
    if (!taken[i]) rest.push_back(i);
  c.random = sample_without_replacement(std::move(rest), k, seed);
  return c;
}

FilterResult filter_dataset(std::span<const features::SampleRecord> samples, Oracle& oracle,
                            int trials, double temperature) {
  if (trials < 1) throw ConfigError("filter_dataset: trials must be >= 1");
  FilterResult result;
  for (const auto& sample : samples) {
    const FrameMultiset seq = baseline_multiset(sample.n_frames());
    int correct = 0;
    try {
      for (int t = 0; t < trials; ++t)
        if (oracle.sample_answer(sample.sample_id, seq, temperature) == sample.answer_id) ++correct;
    } catch (const OracleError&) {
      ++result.n_failed;
      result.correct_counts.push_back(-1);
      continue;
    }
    result.correct_counts.push_back(correct);
    if (correct > 0 && correct < trials) result.retained.push_back(sample);
  }
  return result;
}

}  // namespace framerepeat::aoi

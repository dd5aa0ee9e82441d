#include "framerepeat/planner.hpp"

#include <algorithm>
#include <cmath>

#include "framerepeat/aoi.hpp"
#include "framerepeat/errors.hpp"

namespace framerepeat::planner {

using json = nlohmann::json;

std::size_t default_k(std::size_t n_frames) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(n_frames) / 16.0)));
}

namespace {

std::vector<std::size_t> selected_frames(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw ConfigError("k must be in [1, " + std::to_string(scores.size()) + "], got " +
                      std::to_string(k));
  }
  std::vector<std::size_t> picked = aoi::top_k_indices(scores, k);
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

RepetitionPlan plan_from_scores(const std::string& sample_id, std::span<const double> scores,
                                std::size_t k) {
  RepetitionPlan p;
  p.sample_id = sample_id;
  p.n_frames = scores.size();
  p.k = k;
  p.selected = selected_frames(scores, k);
  p.sequence.reserve(p.n_frames + k);
  std::size_t next = 0;
  for (std::size_t i = 0; i < p.n_frames; ++i) {
    p.sequence.push_back(i);
    if (next < p.selected.size() && p.selected[next] == i) {
      p.sequence.push_back(i);
      ++next;
    }
  }
  return p;
}

RepetitionPlan plan(const features::SampleRecord& sample, const scorer::ScorerParams& params,
                    const scorer::ScorerConfig& config, std::size_t k) {
  const auto scores = scorer::forward(sample, params, config);
  return plan_from_scores(sample.sample_id, scores, k);
}

FrameMultiset select_only_from_scores(std::span<const double> scores, std::size_t k) {
  return selected_frames(scores, k);
}

FrameMultiset plan_select_only(const features::SampleRecord& sample,
                               const scorer::ScorerParams& params,
                               const scorer::ScorerConfig& config, std::size_t k) {
  return select_only_from_scores(scorer::forward(sample, params, config), k);
}

void check_plan(const RepetitionPlan& p) {
  const auto fail = [&](const std::string& what) {
    throw InternalError("plan for '" + p.sample_id + "': " + what);
  };
  if (p.k < 1 || p.k > p.n_frames) fail("k outside [1, N]");
  if (p.selected.size() != p.k) fail("selected has the wrong length");
  for (std::size_t i = 0; i < p.selected.size(); ++i) {
    if (p.selected[i] >= p.n_frames) fail("selected index out of range");
    if (i > 0 && p.selected[i] <= p.selected[i - 1]) fail("selected is not strictly ascending");
  }
  if (p.sequence.size() != p.n_frames + p.k) fail("sequence length != N + k");
  std::vector<std::size_t> counts(p.n_frames, 0);
  for (std::size_t f : p.sequence) {
    if (f >= p.n_frames) fail("sequence index out of range");
    ++counts[f];
  }
  for (std::size_t f = 0; f < p.n_frames; ++f) {
    const bool chosen = std::binary_search(p.selected.begin(), p.selected.end(), f);
    if (counts[f] != (chosen ? 2u : 1u)) fail("frame " + std::to_string(f) + " has the wrong multiplicity");
  }
  // Dropping the second copy of each duplicate must give back 0..N-1, which
  // also forces the copies to be adjacent.
  std::size_t expect = 0;
  for (std::size_t k = 0; k < p.sequence.size(); ++k) {
    if (k > 0 && p.sequence[k] == p.sequence[k - 1]) continue;
    if (p.sequence[k] != expect) fail("sequence is not the in-order base with adjacent copies");
    ++expect;
  }
  if (expect != p.n_frames) fail("sequence does not cover every frame");
}

json to_json(const RepetitionPlan& p) {
  return {{"sample_id", p.sample_id},
          {"n_frames", p.n_frames},
          {"k", p.k},
          {"selected", p.selected},
          {"sequence", p.sequence}};
}

RepetitionPlan plan_from_json(const json& j) {
  RepetitionPlan p;
  p.sample_id = j.at("sample_id").get<std::string>();
  p.n_frames = j.at("n_frames").get<std::size_t>();
  p.k = j.at("k").get<std::size_t>();
  p.selected = j.at("selected").get<std::vector<std::size_t>>();
  p.sequence = j.at("sequence").get<FrameMultiset>();
  return p;
}

}  // namespace framerepeat::planner

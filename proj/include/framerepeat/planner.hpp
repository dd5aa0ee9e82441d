#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "framerepeat/features.hpp"
#include "framerepeat/oracle.hpp"
#include "framerepeat/scorer.hpp"

namespace framerepeat::planner {

struct RepetitionPlan {
  std::string sample_id;
  std::size_t n_frames = 0;
  std::size_t k = 0;
  std::vector<std::size_t> selected;  // ascending
  FrameMultiset sequence;             // length n_frames + k
};

// max(1, round(N / 16)): 8 extra frames on a 128-frame base.
std::size_t default_k(std::size_t n_frames);

// Top-k scores (ties to the earlier frame); every selected frame is emitted
// twice, adjacent, at its original position.
RepetitionPlan plan_from_scores(const std::string& sample_id, std::span<const double> scores,
                                std::size_t k);
RepetitionPlan plan(const features::SampleRecord& sample, const scorer::ScorerParams& params,
                    const scorer::ScorerConfig& config, std::size_t k);

// Ablation: only the top-k frames, ascending, no duplication.
FrameMultiset select_only_from_scores(std::span<const double> scores, std::size_t k);
FrameMultiset plan_select_only(const features::SampleRecord& sample,
                               const scorer::ScorerParams& params,
                               const scorer::ScorerConfig& config, std::size_t k);

// Throws InternalError naming the first violated plan invariant.
void check_plan(const RepetitionPlan& plan);

nlohmann::json to_json(const RepetitionPlan& plan);
RepetitionPlan plan_from_json(const nlohmann::json& j);

}  // namespace framerepeat::planner

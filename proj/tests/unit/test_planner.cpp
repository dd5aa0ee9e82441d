#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "framerepeat/errors.hpp"
#include "framerepeat/planner.hpp"
#include "helpers.hpp"

using namespace framerepeat;
using planner::RepetitionPlan;

namespace {

// Independent reconstruction: the k best by (score desc, index asc).
std::vector<std::size_t> brute_force_selection(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> chosen;
  std::vector<bool> used(scores.size(), false);
  for (std::size_t r = 0; r < k; ++r) {
    std::size_t best = scores.size();
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (!used[i] && (best == scores.size() || scores[i] > scores[best])) best = i;
    used[best] = true;
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

FrameMultiset brute_force_sequence(std::size_t n, const std::vector<std::size_t>& selected) {
  FrameMultiset seq;
  for (std::size_t i = 0; i < n; ++i) {
    seq.push_back(i);
    if (std::find(selected.begin(), selected.end(), i) != selected.end()) seq.push_back(i);
  }
  return seq;
}

}  // namespace

TEST_CASE("plan examples") {
  const RepetitionPlan p = planner::plan_from_scores("s", std::vector<double>{0.1, 0.9, 0.5, 0.9}, 2);
  CHECK(p.selected == std::vector<std::size_t>{1, 3});
  CHECK(p.sequence == FrameMultiset{0, 1, 1, 2, 3, 3});

  const RepetitionPlan all = planner::plan_from_scores("s", std::vector<double>{3, 1, 2}, 3);
  CHECK(all.sequence == FrameMultiset{0, 0, 1, 1, 2, 2});

  CHECK_THROWS_AS(planner::plan_from_scores("s", std::vector<double>{1, 2}, 0), ConfigError);
  CHECK_THROWS_AS(planner::plan_from_scores("s", std::vector<double>{1, 2}, 3), ConfigError);
  CHECK_THROWS_AS(planner::select_only_from_scores(std::vector<double>{1, 2}, 0), ConfigError);

  CHECK(planner::select_only_from_scores(std::vector<double>{4, 2, 9}, 3) == FrameMultiset{0, 1, 2});
  CHECK(planner::select_only_from_scores(std::vector<double>{1, 2, 3, 4, 5}, 2) == FrameMultiset{3, 4});
}

TEST_CASE("default k") {
  CHECK(planner::default_k(128) == 8);
  CHECK(planner::default_k(64) == 4);
  CHECK(planner::default_k(32) == 2);
  CHECK(planner::default_k(4) == 1);
  CHECK(planner::default_k(1) == 1);
  const RepetitionPlan p =
      planner::plan_from_scores("long", std::vector<double>(128, 0.0), planner::default_k(128));
  CHECK(p.sequence.size() == 136);
}

TEST_CASE("planner laws hold for every N <= 10 and k <= N") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coarse(0, 3);  // forces ties
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t k = 1; k <= n; ++k) {
      for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> scores(n);
        for (double& s : scores)
          s = trial % 2 ? double(coarse(rng)) : std::normal_distribution<double>()(rng);
        const RepetitionPlan p = planner::plan_from_scores("x", scores, k);
        CHECK_NOTHROW(planner::check_plan(p));
        CHECK(p.selected == brute_force_selection(scores, k));
        CHECK(p.sequence == brute_force_sequence(n, p.selected));

        // multiset law
        std::map<std::size_t, int> counts;
        for (std::size_t f : p.sequence) ++counts[f];
        for (std::size_t f = 0; f < n; ++f) {
          const bool sel = std::binary_search(p.selected.begin(), p.selected.end(), f);
          CHECK(counts[f] == (sel ? 2 : 1));
        }
        // duplicates adjacent
        for (std::size_t i = 0; i + 1 < p.sequence.size(); ++i)
          if (p.sequence[i] == p.sequence[i + 1])
            CHECK(std::binary_search(p.selected.begin(), p.selected.end(), p.sequence[i]));

        // select-only consistency and determinism
        CHECK(planner::select_only_from_scores(scores, k) == p.selected);
        CHECK(planner::plan_from_scores("x", scores, k).sequence == p.sequence);

        // raising a selected frame keeps the selection
        for (std::size_t s : p.selected) {
          auto raised = scores;
          raised[s] += 1.0;
          CHECK(planner::plan_from_scores("x", raised, k).selected == p.selected);
        }
        // raising an unselected frame above the k-th score swaps exactly one
        if (k < n) {
          double kth = 1e300;
          for (std::size_t s : p.selected) kth = std::min(kth, scores[s]);
          for (std::size_t f = 0; f < n; ++f) {
            if (std::binary_search(p.selected.begin(), p.selected.end(), f)) continue;
            auto raised = scores;
            raised[f] = kth + 0.5;
            const auto after = planner::plan_from_scores("x", raised, k).selected;
            CHECK(std::binary_search(after.begin(), after.end(), f));
            std::vector<std::size_t> common;
            std::set_intersection(after.begin(), after.end(), p.selected.begin(), p.selected.end(),
                                  std::back_inserter(common));
            CHECK(common.size() == k - 1);
          }
        }
      }
    }
  }
}

TEST_CASE("check_plan rejects broken plans") {
  RepetitionPlan good = planner::plan_from_scores("x", std::vector<double>{0.3, 0.1, 0.7, 0.2}, 2);
  CHECK_NOTHROW(planner::check_plan(good));
  RepetitionPlan bad = good;
  std::swap(bad.sequence[1], bad.sequence[2]);
  CHECK_THROWS_AS(planner::check_plan(bad), InternalError);
  bad = good;
  bad.sequence = {0, 1, 2, 3, 0, 2};
  CHECK_THROWS_AS(planner::check_plan(bad), InternalError);
  bad = good;
  bad.selected = {2, 0};
  CHECK_THROWS_AS(planner::check_plan(bad), InternalError);
  bad = good;
  bad.sequence.pop_back();
  CHECK_THROWS_AS(planner::check_plan(bad), InternalError);
}

TEST_CASE("plan json") {
  const RepetitionPlan p = planner::plan_from_scores("clip-7", std::vector<double>{0.3, 0.1, 0.7, 0.2}, 2);
  const auto j = planner::to_json(p);
  CHECK(j.dump() ==
        R"({"k":2,"n_frames":4,"sample_id":"clip-7","selected":[0,2],"sequence":[0,0,1,2,2,3]})");
  const RepetitionPlan back = planner::plan_from_json(j);
  CHECK(back.sequence == p.sequence);
  CHECK(back.selected == p.selected);
}

TEST_CASE("plan from a scorer") {
  scorer::ScorerConfig c;
  c.dim = 8;
  c.n_heads = 2;
  c.ffn_hidden = 8;
  const auto params = scorer::init_params(c, 1);
  const auto sample = testutil::random_sample(10, 8, 3, 4, "from-scorer");
  const RepetitionPlan p = planner::plan(sample, params, c, 3);
  CHECK(p.sample_id == "from-scorer");
  CHECK_NOTHROW(planner::check_plan(p));
  CHECK(planner::plan_select_only(sample, params, c, 3) == p.selected);
  // fresh params score the prior, so the plan picks the most similar frames
  CHECK(p.selected == planner::select_only_from_scores(sample.features.sims, 3));
}

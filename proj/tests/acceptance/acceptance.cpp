// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: acceptance [path-to-cli]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/helpers.hpp"
#include "framerepeat/aoi.hpp"
#include "framerepeat/losses.hpp"
#include "framerepeat/oracles.hpp"
#include "framerepeat/planner.hpp"
#include "framerepeat/scorer.hpp"
#include "framerepeat/trainer.hpp"

using namespace framerepeat;
using numerics::DenseArray;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradient_check() {
  scorer::ScorerConfig c;
  c.dim = 16;
  c.n_heads = 2;
  c.ffn_hidden = 16;
  const std::size_t configs = 12;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < configs; ++seed) {
    const auto sample = testutil::random_sample(8, 16, 5, 1000 + seed);
    scorer::ScorerParams p = scorer::init_params(c, seed);
    std::mt19937_64 rng(seed * 31 + 7);
    // move every tensor off its structured init (unit LN gains, zero biases, zero head)
    for (auto& [name, t] : p.named())
      for (double& v : t->data()) v += std::normal_distribution<double>(0.0, 0.2)(rng);

    std::vector<std::size_t> frames(8);
    std::iota(frames.begin(), frames.end(), std::size_t{0});
    const std::size_t n_cand = 3 + seed % 4;
    auto cand = aoi::sample_without_replacement(frames, n_cand, seed);
    std::sort(cand.begin(), cand.end());
    std::vector<std::size_t> rest;
    for (std::size_t f : frames)
      if (!std::binary_search(cand.begin(), cand.end(), f)) rest.push_back(f);
    const auto extra = aoi::sample_without_replacement(rest, std::min<std::size_t>(2, rest.size()), seed + 1);
    const auto gains = testutil::random_vector(n_cand, rng, 0.1);
    const losses::LossConfig cfg;

    numerics::Tape t;
    const auto g = scorer::build_scores(t, sample, p, c);
    const auto terms = losses::total_loss(t, g.scores, cand, gains, extra, cfg);
    const auto analytic = t.gradients(terms.total, g.params);
    const auto numeric = numerics::finite_diff_grad(
        [&](const std::vector<DenseArray>& ts) {
          scorer::ScorerParams q = p;
          q.assign(ts);
          return losses::total_loss(scorer::forward(sample, q, c), cand, gains, extra, cfg);
        },
        p.tensors(), 1e-5);
    for (std::size_t i = 0; i < analytic.size(); ++i)
      worst = std::max(worst, numerics::max_relative_error(analytic[i], numeric[i], 1e-5));
  }
  return {worst < 1e-4, fmt("max relative error %.2e over %.0f configs (d=16 N=8 L=5 heads=2, step 1e-5), bound 1e-4",
                            worst, double(configs))};
}

// ---------------------------------------------------------------- parameter count

Outcome parameter_count() {
  scorer::ScorerConfig c;
  c.dim = 768;
  c.n_heads = 8;
  c.ffn_hidden = 768;
  const std::size_t counted = scorer::init_params(c, 0).count();
  const std::size_t formula = scorer::count_params(c);
  return {counted == 3694465 && formula == counted,
          "init_params holds " + std::to_string(counted) + " parameters (expected 3694465, about 3.69M)"};
}

// ---------------------------------------------------------------- AOI exactness

Outcome aoi_exactness() {
  oracles::SyntheticOracleSpec spec;
  const auto ds = oracles::generate_synthetic_dataset(spec, 100);
  oracles::SyntheticOracle oracle(spec, ds.truth);
  double worst = 0.0;
  std::size_t checked = 0;
  bool complete = true;
  for (std::size_t s = 0; s < ds.samples.size(); ++s) {
    const auto& sample = ds.samples[s];
    std::vector<std::size_t> all(sample.n_frames());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto rec = aoi::scan_repeat_gains(sample, all, oracle);
    complete = complete && rec.complete && rec.entries.size() == all.size();
    for (const auto& e : rec.entries) {
      worst = std::max(worst, std::abs(e.gain - ds.truth[s].gains[e.frame]));
      ++checked;
    }
  }
  return {complete && worst < 1e-12,
          fmt("max |gain - planted| = %.1e over %.0f frames in 100 samples, bound 1e-12", worst, double(checked))};
}

// ---------------------------------------------------------------- learning

struct LearningRun {
  oracles::SyntheticOracleSpec spec;
  oracles::SyntheticDataset train, held;
  std::map<std::string, trainer::FrameTruth> truth;
  scorer::ScorerConfig sc;
  trainer::TrainConfig tc;
  scorer::ScorerParams trained;
  trainer::RankingMetrics metrics;
  double seconds = 0.0;
};

const LearningRun& learning_run() {
  static std::optional<LearningRun> run;
  if (run) return *run;
  run.emplace();
  LearningRun& r = *run;
  r.spec.n_frames = 32;
  r.spec.dim = 32;
  r.train = oracles::generate_synthetic_dataset(r.spec, 2000, 0);
  r.held = oracles::generate_synthetic_dataset(r.spec, 200, 100000);
  for (const auto& t : r.held.truth) r.truth[t.sample_id] = trainer::truth_from_synthetic(t);
  r.sc.dim = 32;
  r.sc.n_heads = 8;
  r.sc.ffn_hidden = 32;
  r.tc.k = 8;  // lr, epochs, accumulation and loss weights keep their defaults
  oracles::SyntheticOracle oracle(r.spec, r.train.truth);
  trainer::RecordCache cache;
  const auto start = std::chrono::steady_clock::now();
  r.trained = trainer::train(r.train.samples, &oracle, scorer::init_params(r.sc, 0), r.sc, r.tc, cache).params;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.metrics = trainer::evaluate_ranking(r.held.samples, r.truth, r.trained, r.sc, 8);
  return r;
}

Outcome learning_recovery() {
  const LearningRun& r = learning_run();
  const auto& m = r.metrics;

  // untrained, no prior, head randomized so the scores are not constant
  scorer::ScorerConfig null_cfg = r.sc;
  null_cfg.prior_weight = 0.0;
  auto null_params = scorer::init_params(null_cfg, 11);
  std::mt19937_64 rng(11);
  const double limit = std::sqrt(6.0 / double(null_params.head_w2.size() + 1));
  for (double& v : null_params.head_w2.data()) v = std::uniform_real_distribution<double>(-limit, limit)(rng);
  const auto null_m = trainer::evaluate_ranking(r.held.samples, r.truth, null_params, null_cfg, 8);

  const double recall = m.recall_at_k.value_or(0.0);
  const bool pass = m.spearman >= 0.7 && recall >= 0.8 && std::abs(null_m.spearman) <= 0.1;
  return {pass, fmt("held-out spearman %.3f (>= 0.7), recall@8 %.3f (>= 0.8), untrained lambda=0 spearman %+.3f "
                    "(|.| <= 0.1); training %.1fs",
                    m.spearman, recall, null_m.spearman, r.seconds)};
}

void learning_context() {
  const LearningRun& r = learning_run();
  const auto prior = trainer::evaluate_ranking(r.held.samples, r.truth, scorer::init_params(r.sc, 0), r.sc, 8);
  std::printf("INFO  prior only (untrained, lambda=5): spearman %.3f, recall@8 %.3f\n", prior.spearman,
              prior.recall_at_k.value_or(0.0));
  trainer::TrainConfig literal = r.tc;
  literal.lr_reference_dim = 0;
  oracles::SyntheticOracle oracle(r.spec, r.train.truth);
  trainer::RecordCache cache;
  const auto params = trainer::train(r.train.samples, &oracle, scorer::init_params(r.sc, 0), r.sc, literal, cache).params;
  const auto m = trainer::evaluate_ranking(r.held.samples, r.truth, params, r.sc, 8);
  std::printf("INFO  unscaled lr %.0e at d=32 (no width scaling): spearman %.3f, recall@8 %.3f\n", literal.lr,
              m.spearman, m.recall_at_k.value_or(0.0));
  std::printf("INFO  width-scaled lr used above: %.2e\n", r.tc.effective_lr(r.sc.dim));
}

Outcome ordering() {
  const auto& m = learning_run().metrics;
  const double sigma = m.randomk_gain_sem;
  const bool pass = m.mean_topk_gain - m.mean_randomk_gain >= 3 * sigma &&
                    m.mean_randomk_gain - m.mean_bottomk_gain >= 3 * sigma && sigma > 0;
  return {pass, fmt("200 held-out samples, k=8: top %.4f > random %.4f > bottom %.4f, sigma(random) %.4f",
                    m.mean_topk_gain, m.mean_randomk_gain, m.mean_bottomk_gain, sigma) +
                    fmt(", gaps %.1f and %.1f sigma", (m.mean_topk_gain - m.mean_randomk_gain) / sigma,
                        (m.mean_randomk_gain - m.mean_bottomk_gain) / sigma)};
}

// ---------------------------------------------------------------- loss identities

Outcome loss_identities() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.05, 5.0), shift(-10.0, 10.0);
  const losses::LossConfig cfg;
  std::size_t checks = 0, failures = 0;
  auto expect = [&](bool ok) {
    ++checks;
    failures += !ok;
  };
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + trial % 31;
    const auto s = testutil::random_vector(n, rng);
    const auto g = testutil::random_vector(n, rng, 0.1);
    const auto extra = testutil::random_vector(trial % 5, rng);

    // standardization: zero mean, unit variance (up to eps)
    const auto z = losses::standardize(s, cfg.eps);
    expect(std::abs(numerics::mean(z)) < 1e-12);
    expect(std::abs(numerics::stddev(z) - 1.0) < 1e-4);

    // regression: invariant to positive affine maps of either argument. The
    // eps in the denominator rescales the standardized vector by
    // r = (sd + eps) / (sd + eps / a), which moves the loss by at most 4|1 - r|.
    const double reg = losses::regression_loss(s, g, cfg.eps);
    const double a = unit(rng), b = shift(rng);
    std::vector<double> s2 = s, g2 = g;
    for (double& v : s2) v = a * v + b;
    for (double& v : g2) v = a * v + b;
    auto bound = [&](const std::vector<double>& x) {
      const double sd = numerics::stddev(x);
      return 4.0 * std::abs(1.0 - (sd + cfg.eps) / (sd + cfg.eps / a)) + 1e-12;
    };
    expect(std::abs(losses::regression_loss(s2, g, cfg.eps) - reg) <= bound(s));
    expect(std::abs(losses::regression_loss(s, g2, cfg.eps) - reg) <= bound(g));

    // ranking: shift invariance of all scores, zero once the margin holds
    const double rank = losses::ranking_loss(s, g, extra, cfg.margin);
    std::vector<double> s3 = s, e3 = extra;
    for (double& v : s3) v += b;
    for (double& v : e3) v += b;
    expect(std::abs(losses::ranking_loss(s3, g, e3, cfg.margin) - rank) < 1e-12);
    double neg_max = -1e300;
    for (std::size_t i = 0; i < n; ++i)
      if (g[i] < 0) neg_max = std::max(neg_max, s[i]);
    for (double v : extra) neg_max = std::max(neg_max, v);
    std::vector<double> sep = s;
    for (std::size_t i = 0; i < n; ++i)
      if (g[i] > 0) sep[i] = neg_max + cfg.margin + 1e-9 + std::abs(s[i]);
    expect(losses::ranking_loss(sep, g, extra, cfg.margin) == 0.0);

    // total = reg_weight * regression + rank_weight * ranking
    std::vector<std::size_t> cand(n);
    std::iota(cand.begin(), cand.end(), std::size_t{0});
    std::vector<double> all = s;
    all.insert(all.end(), extra.begin(), extra.end());
    std::vector<std::size_t> extra_idx(extra.size());
    std::iota(extra_idx.begin(), extra_idx.end(), n);
    expect(std::abs(losses::total_loss(all, cand, g, extra_idx, cfg) - (reg + 0.1 * rank)) < 1e-12);
  }
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) +
                             " identity checks hold over 2000 random instances (N = 2..32)"};
}

// ---------------------------------------------------------------- planner laws

bool plan_laws_hold(const std::vector<double>& scores, std::size_t k) {
  const std::size_t n = scores.size();
  const auto p = planner::plan_from_scores("x", scores, k);
  try {
    planner::check_plan(p);
  } catch (const std::exception&) {
    return false;
  }
  // independent selection: repeatedly take the highest score, earliest index on ties
  std::vector<std::size_t> expect;
  std::vector<bool> used(n, false);
  for (std::size_t r = 0; r < k; ++r) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i] && (best == n || scores[i] > scores[best])) best = i;
    used[best] = true;
    expect.push_back(best);
  }
  std::sort(expect.begin(), expect.end());
  if (p.selected != expect) return false;
  FrameMultiset seq;
  for (std::size_t i = 0; i < n; ++i) {
    seq.push_back(i);
    if (used[i]) seq.push_back(i);
  }
  if (p.sequence != seq) return false;
  std::vector<int> count(n, 0);
  for (std::size_t f : p.sequence) ++count[f];
  for (std::size_t i = 0; i < n; ++i)
    if (count[i] != (used[i] ? 2 : 1)) return false;
  for (std::size_t i = 0; i + 1 < p.sequence.size(); ++i)
    if (p.sequence[i] == p.sequence[i + 1] && !used[p.sequence[i]]) return false;
  if (planner::select_only_from_scores(scores, k) != p.selected) return false;
  return planner::plan_from_scores("x", scores, k).sequence == p.sequence;
}

Outcome planner_laws() {
  std::size_t cases = 0, failures = 0;
  std::mt19937_64 rng(5);
  for (std::size_t n = 1; n <= 10; ++n) {
    // every score pattern over a 3-level alphabet (all tie structures) for n <= 7,
    // plus continuous and coarse random scores for every n
    std::vector<std::vector<double>> patterns;
    if (n <= 7) {
      std::size_t total = 1;
      for (std::size_t i = 0; i < n; ++i) total *= 3;
      for (std::size_t code = 0; code < total; ++code) {
        std::vector<double> s(n);
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i, c /= 3) s[i] = double(c % 3);
        patterns.push_back(s);
      }
    }
    for (int t = 0; t < 300; ++t) {
      std::vector<double> s(n);
      for (double& v : s)
        v = t % 2 ? double(std::uniform_int_distribution<int>(0, 2)(rng)) : std::normal_distribution<double>()(rng);
      patterns.push_back(s);
    }
    for (const auto& s : patterns)
      for (std::size_t k = 1; k <= n; ++k) {
        ++cases;
        failures += !plan_laws_hold(s, k);
      }
  }
  return {failures == 0, std::to_string(cases - failures) + "/" + std::to_string(cases) +
                             " (scores, k) cases satisfy multiset, adjacency, tie-break and select-only laws, N <= 10"};
}

// ---------------------------------------------------------------- determinism

std::string slurp(const fs::path& p) { return testutil::read_file(p); }

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no cli binary given"};
  testutil::TempDir tmp("acceptance-determinism");
  auto pipeline = [&](const std::string& tag) {
    const fs::path root = tmp.path / tag;
    const std::string q = "\"" + cli + "\"";
    const std::string r = "\"" + root.string() + "\"";
    const std::vector<std::string> steps = {
        q + " synth --out " + r + "/data --n-samples 2000 --frames 32 --dim 32 --seed 7",
        q + " scan --data " + r + "/data --out " + r + "/scan --k 8 --oracle synthetic",
        q + " train --data " + r + "/data --out " + r + "/train --k 8 --seed 7 --oracle synthetic --cache " + r +
            "/scan/records",
        q + " plan --data " + r + "/data --out " + r + "/plan --checkpoint " + r + "/train/checkpoint.ckpt --k 8"};
    for (const auto& s : steps)
      if (std::system((s + " > /dev/null 2>&1").c_str()) != 0) return false;
    return true;
  };
  if (!pipeline("a") || !pipeline("b")) return {false, "a pipeline step exited nonzero"};
  const auto ck_a = slurp(tmp.path / "a" / "train" / "checkpoint.ckpt");
  const auto ck_b = slurp(tmp.path / "b" / "train" / "checkpoint.ckpt");
  const auto pl_a = slurp(tmp.path / "a" / "plan" / "plans.json");
  const auto pl_b = slurp(tmp.path / "b" / "plan" / "plans.json");
  const bool same = !ck_a.empty() && !pl_a.empty() && ck_a == ck_b && pl_a == pl_b;
  return {same, "two synth -> scan -> train -> plan runs (2000 samples, N=32, d=32): checkpoints " +
                    std::string(ck_a == ck_b ? "identical" : "differ") + " (" + std::to_string(ck_a.size()) +
                    " bytes), plans " + (pl_a == pl_b ? "identical" : "differ") + " (" +
                    std::to_string(pl_a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"gradient-correctness", 60, gradient_check},
      {"parameter-count", 1, parameter_count},
      {"aoi-exactness", 10, aoi_exactness},
      {"learning-recovery", 900, learning_recovery},
      {"ordering", 300, ordering},
      {"loss-identities", 60, loss_identities},
      {"planner-laws", 60, planner_laws},
      {"determinism", 1800, [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s  %-21s %s [%.1fs of %.0fs]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_seconds);
    std::fflush(stdout);
  }
  learning_context();
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

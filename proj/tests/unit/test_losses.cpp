#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "framerepeat/errors.hpp"
#include "framerepeat/losses.hpp"
#include "framerepeat/scorer.hpp"
#include "helpers.hpp"

using namespace framerepeat;
using numerics::DenseArray;

namespace {

std::vector<double> naive_standardize(const std::vector<double>& x, double eps) {
  const double n = double(x.size());
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / n);
  std::vector<double> z;
  for (double v : x) z.push_back((v - mu) / (sd + eps));
  return z;
}

double naive_ranking(const std::vector<double>& s, const std::vector<double>& g,
                     const std::vector<double>& extra, double m) {
  std::vector<double> pos, neg(extra);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (g[i] > 0) pos.push_back(s[i]);
    if (g[i] < 0) neg.push_back(s[i]);
  }
  if (pos.empty() || neg.empty()) return 0.0;
  double total = 0.0;
  for (double si : pos) {
    double inner = 0.0;
    for (double sj : neg) inner += std::max(0.0, sj - si + m);
    total += inner / double(neg.size());
  }
  return total / double(pos.size());
}

}  // namespace

TEST_CASE("standardize") {
  for (double v : losses::standardize(std::vector<double>{3.0, 3.0}, 1e-6)) CHECK(v == 0.0);
  const auto z = losses::standardize(std::vector<double>{1, 2, 3}, 1e-12);
  CHECK(std::abs(z[0] + 1.22474) < 1e-5);
  CHECK(std::abs(z[1]) < 1e-12);
  CHECK(std::abs(z[2] - 1.22474) < 1e-5);
  CHECK_THROWS_AS(losses::standardize(std::vector<double>{1.0}, 1e-6), DegenerateInputError);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = testutil::random_vector(2 + trial % 10, rng, 2.0);
    const auto zx = losses::standardize(x, 1e-6);
    const auto want = naive_standardize(x, 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(zx[i] - want[i]) < 1e-12);
    const double mu = numerics::mean(zx);
    const double sd = numerics::stddev(zx);
    CHECK(std::abs(mu) < 1e-12);
    CHECK(std::abs(sd - 1.0) < 1e-4);
    // positive affine invariance up to eps
    std::vector<double> y = x;
    for (double& v : y) v = 3.7 * v - 1.1;
    const auto zy = losses::standardize(y, 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(zy[i] - zx[i]) < 1e-4);
  }
}

TEST_CASE("regression loss") {
  const double eps = 1e-9;
  const std::vector<double> gains = {0.3, -0.1, 0.05, 0.2};
  std::vector<double> prop;
  for (double g : gains) prop.push_back(2.0 * g + 1.0);
  CHECK(losses::regression_loss(prop, gains, eps) < 1e-12);

  std::vector<double> neg;
  for (double g : gains) neg.push_back(-g);
  CHECK(std::abs(losses::regression_loss(neg, gains, eps) - 4.0) < 1e-6);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testutil::random_vector(2, rng);
    const auto g = testutil::random_vector(2, rng);
    const double l = losses::regression_loss(s, g, eps);
    const bool same_order = (s[0] < s[1]) == (g[0] < g[1]);
    CHECK(std::abs(l - (same_order ? 0.0 : 4.0)) < 1e-4);
  }

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + trial % 8;
    const auto s = testutil::random_vector(n, rng);
    const auto g = testutil::random_vector(n, rng);
    const double base = losses::regression_loss(s, g, 1e-6);
    std::vector<double> s2 = s, g2 = g;
    for (double& v : s2) v = 0.4 * v + 7.0;
    for (double& v : g2) v = 12.0 * v - 3.0;
    CHECK(std::abs(losses::regression_loss(s2, g, 1e-6) - base) < 1e-4);
    CHECK(std::abs(losses::regression_loss(s, g2, 1e-6) - base) < 1e-4);
  }
  CHECK_THROWS_AS(losses::regression_loss(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}, eps),
                  DimensionError);
}

TEST_CASE("ranking loss") {
  const std::vector<double> gains = {0.1, -0.2};
  CHECK(losses::ranking_loss(std::vector<double>{1.0, 0.5}, gains, {}, 0.2) == 0.0);
  CHECK(std::abs(losses::ranking_loss(std::vector<double>{1.0, 0.5}, gains, {}, 0.7) - 0.2) < 1e-12);
  // empty sides
  CHECK(losses::ranking_loss(std::vector<double>{1, 2}, std::vector<double>{0.1, 0.2}, {}, 0.2) == 0.0);
  CHECK(losses::ranking_loss(std::vector<double>{1, 2}, std::vector<double>{-0.1, 0.0}, {}, 0.2) == 0.0);
  // zero-gain frames sit on neither side
  CHECK(losses::ranking_loss(std::vector<double>{0.0, 5.0}, std::vector<double>{0.1, 0.0}, {}, 0.2) == 0.0);
  // extra frames are negatives
  CHECK(std::abs(losses::ranking_loss(std::vector<double>{0.0}, std::vector<double>{0.1},
                                      std::vector<double>{0.5}, 0.2) -
                 0.7) < 1e-12);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 9;
    const auto s = testutil::random_vector(n, rng);
    const auto g = testutil::random_vector(n, rng);
    const auto extra = testutil::random_vector(trial % 4, rng);
    const double l = losses::ranking_loss(s, g, extra, 0.2);
    CHECK(std::abs(l - naive_ranking(s, g, extra, 0.2)) < 1e-12);

    // shift invariance
    std::vector<double> s2 = s, e2 = extra;
    for (double& v : s2) v += 3.25;
    for (double& v : e2) v += 3.25;
    CHECK(std::abs(losses::ranking_loss(s2, g, e2, 0.2) - l) < 1e-12);

    // satisfied margin
    std::vector<double> sep = s;
    for (std::size_t i = 0; i < n; ++i) sep[i] = g[i] > 0 ? 10.0 + s[i] : s[i];
    std::vector<double> low_extra = extra;
    for (double& v : low_extra) v = std::min(v, 9.0);
    CHECK(losses::ranking_loss(sep, g, low_extra, 0.2) == 0.0);

    // monotone in each side
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> up = s;
      up[i] += 0.3;
      const double lu = losses::ranking_loss(up, g, extra, 0.2);
      if (g[i] > 0) CHECK(lu <= l + 1e-15);
      if (g[i] < 0) CHECK(lu >= l - 1e-15);
    }
    for (std::size_t j = 0; j < extra.size(); ++j) {
      std::vector<double> up = extra;
      up[j] += 0.3;
      CHECK(losses::ranking_loss(s, g, up, 0.2) >= l - 1e-15);
    }
  }
}

TEST_CASE("total loss") {
  std::mt19937_64 rng(4);
  const std::vector<std::size_t> cand = {0, 2, 3, 5};
  const std::vector<std::size_t> extra = {1, 4};
  for (int trial = 0; trial < 30; ++trial) {
    const auto scores = testutil::random_vector(6, rng);
    const auto gains = testutil::random_vector(4, rng, 0.1);
    std::vector<double> cs, es;
    for (std::size_t c : cand) cs.push_back(scores[c]);
    for (std::size_t e : extra) es.push_back(scores[e]);
    losses::LossConfig cfg;
    const double reg = losses::regression_loss(cs, gains, cfg.eps);
    const double rank = losses::ranking_loss(cs, gains, es, cfg.margin);
    CHECK(std::abs(losses::total_loss(scores, cand, gains, extra, cfg) - (reg + 0.1 * rank)) < 1e-12);
    losses::LossConfig no_rank = cfg;
    no_rank.rank_weight = 0.0;
    no_rank.reg_weight = 0.7;
    CHECK(losses::total_loss(scores, cand, gains, extra, no_rank) == 0.7 * reg);
  }
  losses::LossConfig defaults;
  CHECK(defaults.reg_weight == 1.0);
  CHECK(defaults.rank_weight == 0.1);

  // both terms zero: aligned scores with a satisfied margin
  const std::vector<std::size_t> c4 = {0, 1, 2, 3};
  const std::vector<double> g = {-0.1, 0.3, 0.0, 0.4};
  std::vector<double> aligned;
  for (double v : g) aligned.push_back(10.0 * v);
  CHECK(losses::total_loss(aligned, c4, g, {}, defaults) < 1e-9);

  losses::LossConfig bad;
  bad.margin = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.eps = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("total loss gradient through the scorer") {
  scorer::ScorerConfig c;
  c.dim = 16;
  c.n_heads = 2;
  c.ffn_hidden = 16;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto sample = testutil::random_sample(8, 16, 5, seed);
    scorer::ScorerParams p = scorer::init_params(c, seed);
    std::mt19937_64 rng(seed + 77);
    for (double& v : p.head_w2.data()) v = std::normal_distribution<double>(0.0, 0.3)(rng);
    const std::vector<std::size_t> cand = {0, 1, 3, 4, 6, 7};
    const auto gains = testutil::random_vector(cand.size(), rng, 0.1);
    const std::vector<std::size_t> extra = {2, 5};
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
        p.tensors());
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
      worst = std::max(worst, numerics::max_relative_error(analytic[i], numeric[i], 1e-6));
    CHECK(worst < 1e-4);
  }
}

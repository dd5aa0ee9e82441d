#include "framerepeat/losses.hpp"

#include <numeric>

#include "framerepeat/errors.hpp"

namespace framerepeat::losses {

using numerics::DenseArray;

namespace {

Var constant_vector(Tape& t, std::span<const double> xs) {
  return t.constant(DenseArray::vector(std::vector<double>(xs.begin(), xs.end())));
}

}  // namespace

void LossConfig::validate() const {
  if (!(reg_weight >= 0.0) || !(rank_weight >= 0.0)) throw ConfigError("loss weights must be >= 0");
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
  if (!(eps > 0.0)) throw ConfigError("standardization eps must be > 0");
}

std::vector<double> standardize(std::span<const double> x, double eps) {
  Tape t;
  const auto out = t.value(t.standardize(constant_vector(t, x), eps)).data();
  return {out.begin(), out.end()};
}

double regression_loss(std::span<const double> scores, std::span<const double> gains, double eps) {
  if (scores.size() != gains.size()) throw DimensionError("regression_loss: length mismatch");
  Tape t;
  const Var zs = t.standardize(constant_vector(t, scores), eps);
  const Var zg = t.standardize(constant_vector(t, gains), eps);
  return t.value(t.mean_square(t.sub(zs, zg)))[0];
}

double ranking_loss(std::span<const double> scores, std::span<const double> gains,
                    std::span<const double> extra_scores, double margin) {
  if (scores.size() != gains.size()) throw DimensionError("ranking_loss: length mismatch");
  std::vector<double> all(scores.begin(), scores.end());
  all.insert(all.end(), extra_scores.begin(), extra_scores.end());
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (gains[i] > 0.0) pos.push_back(i);
    else if (gains[i] < 0.0) neg.push_back(i);
  }
  for (std::size_t j = 0; j < extra_scores.size(); ++j) neg.push_back(scores.size() + j);
  Tape t;
  return t.value(t.pairwise_hinge(constant_vector(t, all), pos, neg, margin))[0];
}

LossTerms total_loss(Tape& t, Var scores, std::span<const std::size_t> candidates,
                     std::span<const double> gains, std::span<const std::size_t> extra,
                     const LossConfig& config) {
  config.validate();
  if (candidates.size() != gains.size())
    throw DimensionError("total_loss: candidates and gains differ in length");

  const Var candidate_scores = t.gather(scores, candidates);
  const Var zs = t.standardize(candidate_scores, config.eps);
  const Var zg = t.constant(DenseArray::vector(standardize(gains, config.eps)));
  const Var reg = t.mean_square(t.sub(zs, zg));

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (gains[i] > 0.0) pos.push_back(candidates[i]);
    else if (gains[i] < 0.0) neg.push_back(candidates[i]);
  }
  neg.insert(neg.end(), extra.begin(), extra.end());
  const Var rank = t.pairwise_hinge(scores, pos, neg, config.margin);

  const Var total = t.add(t.scale(reg, config.reg_weight), t.scale(rank, config.rank_weight));
  return {total, reg, rank};
}

double total_loss(std::span<const double> scores, std::span<const std::size_t> candidates,
                  std::span<const double> gains, std::span<const std::size_t> extra,
                  const LossConfig& config) {
  Tape t;
  const LossTerms terms = total_loss(t, constant_vector(t, scores), candidates, gains, extra, config);
  return t.value(terms.total)[0];
}

}  // namespace framerepeat::losses

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "framerepeat/tape.hpp"

namespace framerepeat::losses {

using numerics::Tape;
using numerics::Var;

struct LossConfig {
  double reg_weight = 1.0;
  double rank_weight = 0.1;
  double margin = 0.2;
  double eps = 1e-6;
  // Size budget for the extra non-candidate negatives; 0 means "use K".
  std::size_t extra_negatives = 0;

  void validate() const;
};

std::vector<double> standardize(std::span<const double> x, double eps);

// Mean squared difference of the standardized scores and gains.
double regression_loss(std::span<const double> scores, std::span<const double> gains, double eps);

// Hinge over (positive candidate, negative candidate or extra frame) pairs on
// raw scores.
double ranking_loss(std::span<const double> scores, std::span<const double> gains,
                    std::span<const double> extra_scores, double margin);

struct LossTerms {
  Var total;
  Var regression;
  Var ranking;
};

// scores: rank-1 node over all N frames. candidates/gains describe the AOI
// candidate set; extra lists non-candidate frame indices used as negatives.
LossTerms total_loss(Tape& tape, Var scores, std::span<const std::size_t> candidates,
                     std::span<const double> gains, std::span<const std::size_t> extra,
                     const LossConfig& config);

double total_loss(std::span<const double> scores, std::span<const std::size_t> candidates,
                  std::span<const double> gains, std::span<const std::size_t> extra,
                  const LossConfig& config);

}  // namespace framerepeat::losses

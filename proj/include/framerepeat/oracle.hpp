#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace framerepeat {

// Ordered frame indices in the exact presentation order fed to the answering
// model. The unmodified input is [0, 1, ..., N-1].
using FrameMultiset = std::vector<std::size_t>;

// Stand-in for the frozen answering model. Implementations must be safe to
// call from several threads at once; logprob must be deterministic.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual std::string oracle_id() const = 0;

  // log P(answer_id | frames in `sequence`, question of sample_id); <= 0.
  virtual double logprob(const std::string& sample_id, std::span<const std::size_t> sequence,
                         int answer_id) = 0;

  // Draws one answer with stochastic decoding at `temperature`.
  virtual int sample_answer(const std::string& sample_id, std::span<const std::size_t> sequence,
                            double temperature) = 0;
};

}  // namespace framerepeat

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "framerepeat/numerics.hpp"

namespace framerepeat::numerics {

// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

// Reverse-mode tape over DenseArray-valued nodes. Nodes are appended in
// evaluation order, so every input of a node has a smaller id than the node.
// A Tape is a single-threaded builder; build one per forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseArray value);
  // Leaf whose gradient can be requested from gradients().
  Var parameter(DenseArray value);

  const DenseArray& value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  // a * transpose(b)
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  // Adds a bias row (rank 1, length cols) to every row of m.
  Var add_row(Var m, Var bias);
  Var scale(Var a, double factor);
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps);
  // tanh approximation
  Var gelu(Var a);
  Var relu(Var a);
  // Picks flat elements; result is rank 1.
  Var gather(Var a, std::span<const std::size_t> indices);
  Var sum(Var a);
  Var mean_square(Var a);
  // (x - mean) / (population std + eps) over a rank-1 input.
  Var standardize(Var x, double eps);
  // mean over i in pos of mean over j in neg of max(0, s_j - s_i + margin);
  // zero when either side is empty.
  Var pairwise_hinge(Var scores, std::span<const std::size_t> pos,
                     std::span<const std::size_t> neg, double margin);

  // Exact reverse-mode gradients of a scalar (size 1) node with respect to
  // the listed nodes. Nodes the loss does not reach get zero gradients.
  std::vector<DenseArray> gradients(Var loss, std::span<const Var> wrt) const;

 private:
  using Backward = std::function<void(const DenseArray& grad_out, std::vector<DenseArray>& grads)>;

  struct Node {
    DenseArray value;
    std::vector<std::size_t> inputs;
    Backward backward;
  };

  Var push(DenseArray value, std::vector<std::size_t> inputs, Backward backward);
  static void accumulate(std::vector<DenseArray>& grads, std::size_t id, const DenseArray& delta,
                         const DenseArray& like);

  std::vector<Node> nodes_;
};

}  // namespace framerepeat::numerics

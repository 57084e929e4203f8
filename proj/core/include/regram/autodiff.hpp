#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "regram/tensor.hpp"

namespace regram::ad {

enum class Mode { kTrain, kEval };

// Contiguous half-open row ranges partitioning [0, rows) of a tensor; used to
// apply attention ops per target over variable-length neighbor groups.
// Ranges must be ascending and back-to-back; empty ranges are allowed.
using Segments = std::vector<std::pair<size_t, size_t>>;

// Running statistics of one batch-normalization site (the learnable scale and
// shift live in the parameter set like any other tensor).
struct BnStats {
  std::vector<double>* running_mean = nullptr;
  std::vector<double>* running_var = nullptr;
  double eps = 1e-5;
  double momentum = 0.1;
};

using NodeId = size_t;

// Reverse-mode tape over dense tensors.  Node ids are creation-ordered, which
// is a topological order; backward walks it once in reverse.  Every operation
// verifies all produced values are finite and throws naming the op otherwise.
class Tape {
 public:
  struct Node {
    size_t rows = 0, cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void(Tape&)> backward;  // null for leaves
    const char* op = "leaf";
  };

  NodeId leaf(const Tensor& t);
  NodeId leaf(size_t rows, size_t cols, const std::vector<double>& data);
  NodeId zeros(size_t rows, size_t cols);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId a, double factor);

  // C = opA(A)·opB(B) where op transposes when the flag is set.
  NodeId matmul(NodeId a, NodeId b, bool trans_a = false, bool trans_b = false);

  NodeId mish(NodeId a);
  NodeId leaky_relu(NodeId a, double slope = 0.01);
  NodeId relu(NodeId a);
  NodeId tanh(NodeId a);

  // axis 0 stacks rows (equal cols), axis 1 stacks cols (equal rows).
  NodeId concat(NodeId a, NodeId b, int axis);
  NodeId hconcat(const std::vector<NodeId>& parts);
  NodeId vconcat(const std::vector<NodeId>& parts);

  // Builds a matrix whose row r is the concatenation, over all sources, of
  // row source.row_of_output[r] of the source node.  The workhorse for
  // assembling per-edge / per-member inputs from shared encodings.
  struct GatherSource {
    NodeId node;
    std::vector<size_t> row_of_output;
  };
  NodeId gather_hconcat(const std::vector<GatherSource>& sources);

  NodeId rowwise_sum(NodeId a);  // (R x C) -> (R x 1)
  NodeId sum(NodeId a);          // -> (1 x 1)
  NodeId mean(NodeId a);         // -> (1 x 1)
  NodeId weighted_sum(NodeId values, NodeId weights);  // same shape -> (1 x 1)

  // Temperature softmax over all entries of a vector (n x 1 or 1 x n).
  NodeId softmax_temperature(NodeId logits, double tau);
  // Independent temperature softmax per row.
  NodeId rowwise_softmax_temperature(NodeId logits, double tau);
  // Per column, softmax within each row segment; empty segments stay empty.
  NodeId segment_softmax_temperature(NodeId logits, const Segments& segments, double tau);

  // out[s] = Σ_{r in segment s} weights[r] · values[r, :]  -> (S x C).
  NodeId segment_weighted_sum_rows(NodeId values, NodeId weights, const Segments& segments);

  // Batch normalization over rows (features = columns).  Train mode requires
  // batch ≥ 2, normalizes with biased batch variance and updates the running
  // stats (unbiased variance, torch-style); eval mode uses the running stats.
  NodeId batchnorm_1d(NodeId x, NodeId gamma, NodeId beta, const BnStats& stats, Mode mode);

  void backward(NodeId loss);

  size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<double>& value(NodeId id) const { return nodes_.at(id).value; }
  const std::vector<double>& grad(NodeId id) const { return nodes_.at(id).grad; }
  double scalar(NodeId id) const;
  std::pair<size_t, size_t> shape(NodeId id) const {
    const Node& n = nodes_.at(id);
    return {n.rows, n.cols};
  }

 private:
  friend struct TapeAccess;
  NodeId push(size_t rows, size_t cols, std::vector<double> value, const char* op,
              std::function<void(Tape&)> bw);
  void check_finite(const Node& n) const;
  std::vector<double>& grad_buf(NodeId id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Overflow-safe ln(1 + e^x) and the Mish activation x·tanh(softplus(x)).
double softplus(double x);
double mish_scalar(double x);

}  // namespace regram::ad

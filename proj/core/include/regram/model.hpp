#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "regram/autodiff.hpp"
#include "regram/encoding.hpp"
#include "regram/graph.hpp"
#include "regram/tensor.hpp"

namespace regram {

struct ModelConfig {
  int d_m = 256;
  int kernels = 8;  // K
  int heads = 8;    // H
  double tau = 30.0;
  int d_e = 0;  // environment feature width, fixed by the fitted Normalizer
  int d_o = 0;  // object feature width
  bool use_neighbor_relation = true;  // neighbor relation embedding path
  bool use_neighbor_price = true;     // preliminary neighbor-price path
  bool use_community = true;          // community aggregation path

  int d_x() const { return 2 * d_m + 1; }
  int d_xt() const { return d_m + 1; }
  int adaptor_in() const { return 4 * d_m; }
};

struct Param {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

// Ordered, named parameter collection; registration order doubles as the
// deterministic initialization draw order and the persistence order.
class ParamSet {
 public:
  Tensor& add(const std::string& name, size_t rows, size_t cols, bool trainable = true,
              size_t fan_in_override = 0);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }
  size_t size() const { return params_.size(); }

  std::vector<Tensor*> trainable_tensors();
  void zero_grads();
  size_t fan_in(size_t param_index) const;  // columns unless overridden

 private:
  std::vector<Param> params_;
  std::vector<size_t> fan_in_override_;
  std::unordered_map<std::string, size_t> index_;
};

// Encoded city dataset: one row per record, shared by all targets in a batch.
struct EncodedStore {
  std::vector<std::string> ids;
  std::unordered_map<std::string, size_t> slot_of;
  size_t d_e = 0;
  size_t d_o = 0;
  std::vector<double> env;             // n x d_e, row-major
  std::vector<double> obj;             // n x d_o
  std::vector<double> price_norm;      // n
  std::vector<double> price_currency;  // n

  static EncodedStore build(const std::vector<TransactionRecord>& records,
                            const Normalizer& normalizer);
  size_t size() const { return ids.size(); }
};

// One target with its context resolved to store slots.
struct TargetRef {
  std::string id;
  size_t slot = 0;
  double truth_norm = 0.0;
  std::vector<size_t> neighbor_slots;
  std::vector<std::string> neighbor_ids;  // parallel to neighbor_slots
  struct Community {
    std::string id;
    std::vector<size_t> member_slots;
  };
  std::vector<Community> communities;
};

// Throws when the context references an id missing from the store.
TargetRef resolve_target(const TransactionRecord& target, const NeighborContext& ctx,
                         const EncodedStore& store);

struct Prediction {
  double p_hat = 0.0;    // normalized
  double p_tilde = 0.0;  // normalized
  std::vector<std::pair<std::string, double>> neighbor_attention;
  std::vector<double> kernel_attention;
  std::vector<std::pair<std::string, double>> community_attention;
};

class Model {
 public:
  Model(ModelConfig cfg, uint64_t seed);  // deterministic random initialization

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Node handles of one batched forward pass.
  struct Batch {
    static constexpr ad::NodeId kNone = size_t(-1);
    ad::NodeId p_hat = kNone;       // (T x 1)
    ad::NodeId p_tilde = kNone;     // (T x 1)
    ad::NodeId edge_alpha = kNone;   // (E x 1), head-averaged
    ad::NodeId edge_delta = kNone;   // (E x 1), learned neighbor price offset
    ad::NodeId member_beta = kNone;  // (M x 1), within-community attention
    ad::NodeId pair_alpha = kNone;   // (J x 1), across-community attention
    ad::NodeId kernel_pi = kNone;    // (T x K)
    ad::Segments edge_segments;      // per target over edge rows
    ad::Segments member_segments;    // per (target, community) over member rows
    ad::Segments pair_segments;      // per target over community pairs
    std::vector<std::pair<size_t, ad::NodeId>> param_leaves;  // param index -> leaf node
  };

  // Builds the full computation for `targets` on `tape`.  Train mode updates
  // the batch-norm running statistics (and requires ≥ 2 targets, and ≥ 2
  // edges when any target has neighbors).
  Batch forward(ad::Tape& tape, const EncodedStore& store, const std::vector<TargetRef>& targets,
                ad::Mode mode);

  // Accumulates leaf gradients of a backward-run tape into parameter buffers.
  void accumulate_grads(const ad::Tape& tape, const Batch& batch);

  // Eval-mode single-target forward with attention diagnostics.
  Prediction predict(const EncodedStore& store, const TargetRef& target);

 private:
  void register_params();
  void init_params(uint64_t seed);

  ModelConfig cfg_;
  ParamSet params_;
};

}  // namespace regram

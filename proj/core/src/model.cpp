#include "regram/model.hpp"

#include <cmath>
#include <stdexcept>

#include "regram/rng.hpp"

namespace regram {

// ------------------------------------------------------------------ params

Tensor& ParamSet::add(const std::string& name, size_t rows, size_t cols, bool trainable,
                      size_t fan_in_override) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter name '" + name + "'");
  index_[name] = params_.size();
  params_.push_back({name, Tensor(rows, cols), trainable});
  fan_in_override_.push_back(fan_in_override);
  return params_.back().tensor;
}

Tensor& ParamSet::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return params_[it->second].tensor;
}

const Tensor& ParamSet::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return params_[it->second].tensor;
}

std::vector<Tensor*> ParamSet::trainable_tensors() {
  std::vector<Tensor*> out;
  for (auto& p : params_) {
    if (p.trainable) out.push_back(&p.tensor);
  }
  return out;
}

void ParamSet::zero_grads() {
  for (auto& p : params_) {
    p.tensor.ensure_grad();
    p.tensor.zero_grad();
  }
}

size_t ParamSet::fan_in(size_t param_index) const {
  const size_t override = fan_in_override_.at(param_index);
  return override ? override : params_[param_index].tensor.cols;
}

// ------------------------------------------------------------------- store

EncodedStore EncodedStore::build(const std::vector<TransactionRecord>& records,
                                 const Normalizer& normalizer) {
  EncodedStore store;
  store.d_e = normalizer.env_dim();
  store.d_o = normalizer.obj_dim();
  store.ids.reserve(records.size());
  store.env.reserve(records.size() * store.d_e);
  store.obj.reserve(records.size() * store.d_o);
  for (const auto& rec : records) {
    const FeatureVec f = normalizer.encode(rec);
    if (!store.slot_of.emplace(rec.id, store.ids.size()).second) {
      throw std::runtime_error("duplicate record id '" + rec.id + "' in store");
    }
    store.ids.push_back(rec.id);
    store.env.insert(store.env.end(), f.s_env.begin(), f.s_env.end());
    store.obj.insert(store.obj.end(), f.s_obj.begin(), f.s_obj.end());
    store.price_norm.push_back(f.p_norm);
    store.price_currency.push_back(rec.unit_price);
  }
  return store;
}

TargetRef resolve_target(const TransactionRecord& target, const NeighborContext& ctx,
                         const EncodedStore& store) {
  auto slot = [&store](const std::string& id) {
    const auto it = store.slot_of.find(id);
    if (it == store.slot_of.end()) {
      throw std::runtime_error("missing historical id '" + id + "' in encoded store");
    }
    return it->second;
  };
  TargetRef ref;
  ref.id = target.id;
  ref.slot = slot(target.id);
  ref.truth_norm = store.price_norm[ref.slot];
  for (const auto& id : ctx.txn_neighbors) {
    ref.neighbor_slots.push_back(slot(id));
    ref.neighbor_ids.push_back(id);
  }
  for (const auto& hood : ctx.neighbor_communities) {
    TargetRef::Community c;
    c.id = hood.community_id;
    for (const auto& id : hood.member_ids) c.member_slots.push_back(slot(id));
    ref.communities.push_back(std::move(c));
  }
  return ref;
}

// ------------------------------------------------------------------- model

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg_.d_m < 1 || cfg_.kernels < 1 || cfg_.heads < 1 || !(cfg_.tau > 0.0) || cfg_.d_e < 1 ||
      cfg_.d_o < 1) {
    throw std::invalid_argument("ModelConfig: d_m, K, H, d_e, d_o must be >= 1 and tau > 0");
  }
  register_params();
  init_params(seed);
}

void Model::register_params() {
  const size_t d_m = size_t(cfg_.d_m);
  const size_t d_e = size_t(cfg_.d_e);
  const size_t d_o = size_t(cfg_.d_o);
  const size_t d_x = size_t(cfg_.d_x());
  const size_t d_xt = size_t(cfg_.d_xt());
  const size_t H = size_t(cfg_.heads);
  const size_t K = size_t(cfg_.kernels);

  params_.add("W_e1", 2 * d_m, d_e);
  params_.add("W_e2", d_m, 2 * d_m);
  params_.add("W_o1", d_m, d_o);
  params_.add("W_o2", d_m, d_m);
  params_.add("W_x", d_m, 2 * d_m);
  params_.add("W_r", d_m, 2 * d_x);
  for (size_t h = 1; h <= H; ++h) params_.add("w_a_" + std::to_string(h), 1, d_m);
  params_.add("w_d", 1, d_m);
  params_.add("W_u1", d_m, d_xt);
  params_.add("v_u", 1, d_m);
  params_.add("W_u2", d_m, d_xt);
  params_.add("W_c1", d_m, 2 * d_m);
  params_.add("v_c", 1, d_m);
  params_.add("W_c2", d_m, d_m);
  params_.add("W_r1", d_m, 4 * d_m);
  for (size_t k = 1; k <= K; ++k) params_.add("w_k_" + std::to_string(k), 1, d_m);
  for (size_t k = 1; k <= K; ++k) params_.add("kernel_W_" + std::to_string(k), 1, 4 * d_m + 1);
  // Kernel biases pair with their 4d_m+1-wide linear maps; same init scale.
  for (size_t k = 1; k <= K; ++k) {
    params_.add("kernel_b_" + std::to_string(k), 1, 1, true, 4 * d_m + 1);
  }
  params_.add("bn_beta.gamma", 1, H);
  params_.add("bn_beta.beta", 1, H);
  params_.add("bn_z.gamma", 1, K);
  params_.add("bn_z.beta", 1, K);
  params_.add("bn_beta.running_mean", 1, H, /*trainable=*/false);
  params_.add("bn_beta.running_var", 1, H, /*trainable=*/false);
  params_.add("bn_z.running_mean", 1, K, /*trainable=*/false);
  params_.add("bn_z.running_var", 1, K, /*trainable=*/false);
}

void Model::init_params(uint64_t seed) {
  Rng rng(seed);
  for (size_t i = 0; i < params_.size(); ++i) {
    Param& p = params_.all()[i];
    if (p.name.rfind("bn_", 0) == 0) {
      const bool ones = p.name.ends_with(".gamma") || p.name.ends_with(".running_var");
      for (auto& v : p.tensor.data) v = ones ? 1.0 : 0.0;
      continue;
    }
    const double bound = std::sqrt(1.0 / double(params_.fan_in(i)));
    for (auto& v : p.tensor.data) v = rng.uniform(-bound, bound);
  }
}

namespace {

// Single-column matrix holding the given values.
std::vector<double> column_of(const std::vector<double>& values) { return values; }

}  // namespace

Model::Batch Model::forward(ad::Tape& tape, const EncodedStore& store,
                            const std::vector<TargetRef>& targets, ad::Mode mode) {
  if (targets.empty()) throw std::invalid_argument("forward: batch must contain >= 1 target");
  if (store.d_e != size_t(cfg_.d_e) || store.d_o != size_t(cfg_.d_o)) {
    throw std::invalid_argument("forward: store feature widths (" + std::to_string(store.d_e) +
                                "," + std::to_string(store.d_o) +
                                ") do not match model config (" + std::to_string(cfg_.d_e) + "," +
                                std::to_string(cfg_.d_o) + ")");
  }
  const size_t T = targets.size();
  const size_t K = size_t(cfg_.kernels);
  const size_t H = size_t(cfg_.heads);
  const size_t d_m = size_t(cfg_.d_m);
  const bool neighbor_path = cfg_.use_neighbor_relation || cfg_.use_neighbor_price;

  // ---- local row assembly: only rows the batch touches --------------------
  std::vector<size_t> local_slots;
  std::unordered_map<size_t, size_t> local_of;
  auto local = [&](size_t slot) {
    const auto [it, inserted] = local_of.try_emplace(slot, local_slots.size());
    if (inserted) local_slots.push_back(slot);
    return it->second;
  };

  std::vector<size_t> tgt_rows(T);
  for (size_t t = 0; t < T; ++t) tgt_rows[t] = local(targets[t].slot);

  Batch batch;
  std::vector<size_t> edge_tgt_rows, edge_nb_rows;
  if (neighbor_path) {
    for (size_t t = 0; t < T; ++t) {
      const size_t begin = edge_nb_rows.size();
      for (const size_t slot : targets[t].neighbor_slots) {
        edge_tgt_rows.push_back(tgt_rows[t]);
        edge_nb_rows.push_back(local(slot));
      }
      batch.edge_segments.push_back({begin, edge_nb_rows.size()});
    }
  }

  std::vector<size_t> pair_tgt_rows, member_rows;
  ad::Segments& member_segments = batch.member_segments;
  if (cfg_.use_community) {
    for (size_t t = 0; t < T; ++t) {
      const size_t begin = pair_tgt_rows.size();
      for (const auto& community : targets[t].communities) {
        pair_tgt_rows.push_back(tgt_rows[t]);
        const size_t m_begin = member_rows.size();
        for (const size_t slot : community.member_slots) member_rows.push_back(local(slot));
        if (member_rows.size() == m_begin) {
          throw std::invalid_argument("forward: community '" + community.id +
                                      "' has no usable members");
        }
        member_segments.push_back({m_begin, member_rows.size()});
      }
      batch.pair_segments.push_back({begin, pair_tgt_rows.size()});
    }
  }

  // ---- feature leaves ------------------------------------------------------
  const size_t n = local_slots.size();
  std::vector<double> env(n * store.d_e), obj(n * store.d_o), price(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t slot = local_slots[i];
    std::copy_n(store.env.begin() + slot * store.d_e, store.d_e, env.begin() + i * store.d_e);
    std::copy_n(store.obj.begin() + slot * store.d_o, store.d_o, obj.begin() + i * store.d_o);
    price[i] = store.price_norm[slot];
  }
  const ad::NodeId S_env = tape.leaf(n, store.d_e, env);
  const ad::NodeId S_obj = tape.leaf(n, store.d_o, obj);
  const ad::NodeId P = tape.leaf(n, 1, column_of(price));

  // ---- parameter leaves ----------------------------------------------------
  std::unordered_map<std::string, ad::NodeId> pnode;
  for (size_t i = 0; i < params_.size(); ++i) {
    const Param& p = params_.all()[i];
    const ad::NodeId id = tape.leaf(p.tensor);
    pnode[p.name] = id;
    if (p.trainable) batch.param_leaves.push_back({i, id});
  }
  auto W = [&pnode](const std::string& name) { return pnode.at(name); };

  ad::BnStats bn_beta_stats{&params_.at("bn_beta.running_mean").data,
                            &params_.at("bn_beta.running_var").data};
  ad::BnStats bn_z_stats{&params_.at("bn_z.running_mean").data,
                         &params_.at("bn_z.running_var").data};

  // ---- shared encodings: e, o', o per local row ----------------------------
  const ad::NodeId E =
      tape.matmul(tape.mish(tape.matmul(S_env, W("W_e1"), false, true)), W("W_e2"), false, true);
  const ad::NodeId O_pre =
      tape.matmul(tape.mish(tape.matmul(S_obj, W("W_o1"), false, true)), W("W_o2"), false, true);
  const ad::NodeId O =
      tape.matmul(tape.mish(tape.hconcat({O_pre, E})), W("W_x"), false, true);

  // ---- neighbor aggregation -------------------------------------------------
  ad::NodeId R_emb, P_tilde;
  const size_t n_edges = edge_nb_rows.size();
  if (neighbor_path && n_edges > 0) {
    const ad::NodeId Zero_price = tape.zeros(n, 1);
    // Per edge: x_target ⊕ x_neighbor with x = e ⊕ o ⊕ price (target price 0).
    const ad::NodeId EdgeIn = tape.gather_hconcat({{E, edge_tgt_rows},
                                                   {O, edge_tgt_rows},
                                                   {Zero_price, edge_tgt_rows},
                                                   {E, edge_nb_rows},
                                                   {O, edge_nb_rows},
                                                   {P, edge_nb_rows}});
    const ad::NodeId R = tape.matmul(EdgeIn, W("W_r"), false, true);  // (E x d_m)
    const ad::NodeId MR = tape.mish(R);

    std::vector<ad::NodeId> head_rows;
    for (size_t h = 1; h <= H; ++h) head_rows.push_back(W("w_a_" + std::to_string(h)));
    const ad::NodeId Wa = tape.vconcat(head_rows);  // (H x d_m)
    const ad::NodeId Scores = tape.leaky_relu(tape.matmul(MR, Wa, false, true));  // (E x H)
    const ad::NodeId Normed =
        tape.batchnorm_1d(Scores, W("bn_beta.gamma"), W("bn_beta.beta"), bn_beta_stats, mode);
    const ad::NodeId HeadAlpha =
        tape.segment_softmax_temperature(Normed, batch.edge_segments, cfg_.tau);  // (E x H)
    const ad::NodeId Alpha = tape.scale(tape.rowwise_sum(HeadAlpha), 1.0 / double(H));
    batch.edge_alpha = Alpha;

    const ad::NodeId D = tape.matmul(MR, W("w_d"), false, true);            // (E x 1)
    batch.edge_delta = D;
    const ad::NodeId NbPrice = tape.gather_hconcat({{P, edge_nb_rows}});    // (E x 1)
    const ad::NodeId PpD = tape.add(NbPrice, D);
    P_tilde = tape.segment_weighted_sum_rows(PpD, Alpha, batch.edge_segments);  // (T x 1)
    R_emb = tape.segment_weighted_sum_rows(R, Alpha, batch.edge_segments);      // (T x d_m)

    if (!cfg_.use_neighbor_relation) R_emb = tape.zeros(T, d_m);
    if (!cfg_.use_neighbor_price) P_tilde = tape.zeros(T, 1);
  } else {
    R_emb = tape.zeros(T, d_m);
    P_tilde = tape.zeros(T, 1);
  }

  // ---- community aggregation -------------------------------------------------
  ad::NodeId C;
  const size_t n_pairs = pair_tgt_rows.size();
  if (cfg_.use_community && n_pairs > 0) {
    const ad::NodeId Xt = tape.gather_hconcat({{E, member_rows}, {P, member_rows}});  // (M x d_xt)
    const ad::NodeId Bu = tape.matmul(tape.tanh(tape.matmul(Xt, W("W_u1"), false, true)),
                                      W("v_u"), false, true);  // (M x 1)
    const ad::NodeId Au = tape.segment_softmax_temperature(Bu, member_segments, 1.0);
    batch.member_beta = Au;
    const ad::NodeId AggX = tape.segment_weighted_sum_rows(Xt, Au, member_segments);  // (J x d_xt)
    const ad::NodeId U = tape.relu(tape.matmul(AggX, W("W_u2"), false, true));        // (J x d_m)

    const ad::NodeId O_pair = tape.gather_hconcat({{O, pair_tgt_rows}});  // (J x d_m)
    const ad::NodeId Gamma = tape.matmul(
        tape.tanh(tape.matmul(tape.hconcat({O_pair, U}), W("W_c1"), false, true)), W("v_c"),
        false, true);  // (J x 1)
    const ad::NodeId Ac = tape.segment_softmax_temperature(Gamma, batch.pair_segments, 1.0);
    batch.pair_alpha = Ac;
    const ad::NodeId AggU = tape.segment_weighted_sum_rows(U, Ac, batch.pair_segments);  // (T x d_m)
    C = tape.relu(tape.matmul(AggU, W("W_c2"), false, true));
  } else {
    C = tape.zeros(T, d_m);
  }

  // ---- dynamic kernel adaptor -------------------------------------------------
  const ad::NodeId O_t = tape.gather_hconcat({{O, tgt_rows}});
  const ad::NodeId E_t = tape.gather_hconcat({{E, tgt_rows}});
  const ad::NodeId H_pre = tape.hconcat({O_t, E_t, R_emb, C});  // (T x 4d_m)

  std::vector<ad::NodeId> wk_rows, kernel_w_rows, kernel_b_rows;
  for (size_t k = 1; k <= K; ++k) {
    wk_rows.push_back(W("w_k_" + std::to_string(k)));
    kernel_w_rows.push_back(W("kernel_W_" + std::to_string(k)));
    kernel_b_rows.push_back(W("kernel_b_" + std::to_string(k)));
  }
  const ad::NodeId Wk = tape.vconcat(wk_rows);               // (K x d_m)
  const ad::NodeId KernelW = tape.vconcat(kernel_w_rows);    // (K x 4d_m+1)
  const ad::NodeId KernelB = tape.vconcat(kernel_b_rows);    // (K x 1)

  const ad::NodeId Z = tape.matmul(tape.mish(tape.matmul(H_pre, W("W_r1"), false, true)), Wk,
                                   false, true);  // (T x K)
  const ad::NodeId Zn = tape.batchnorm_1d(Z, W("bn_z.gamma"), W("bn_z.beta"), bn_z_stats, mode);
  const ad::NodeId Pi = tape.rowwise_softmax_temperature(Zn, cfg_.tau);  // (T x K)
  batch.kernel_pi = Pi;

  const ad::NodeId W_hat = tape.matmul(Pi, KernelW);  // (T x 4d_m+1)
  const ad::NodeId B_hat = tape.matmul(Pi, KernelB);  // (T x 1)
  const ad::NodeId H_full = tape.hconcat({H_pre, P_tilde});  // (T x 4d_m+1)

  batch.p_tilde = P_tilde;
  batch.p_hat = tape.add(tape.rowwise_sum(tape.mul(W_hat, H_full)), B_hat);  // (T x 1)
  return batch;
}

void Model::accumulate_grads(const ad::Tape& tape, const Batch& batch) {
  for (const auto& [param_index, node] : batch.param_leaves) {
    Tensor& t = params_.all()[param_index].tensor;
    t.ensure_grad();
    const auto& g = tape.grad(node);
    if (g.size() != t.grad.size()) {
      throw std::logic_error("gradient shape mismatch for parameter '" +
                             params_.all()[param_index].name + "'");
    }
    for (size_t i = 0; i < g.size(); ++i) t.grad[i] += g[i];
  }
}

Prediction Model::predict(const EncodedStore& store, const TargetRef& target) {
  ad::Tape tape;
  const Batch batch = forward(tape, store, {target}, ad::Mode::kEval);

  Prediction pred;
  pred.p_hat = tape.value(batch.p_hat)[0];
  pred.p_tilde = tape.value(batch.p_tilde)[0];
  if (batch.edge_alpha != Batch::kNone) {
    const auto& alpha = tape.value(batch.edge_alpha);
    for (size_t i = 0; i < target.neighbor_ids.size(); ++i) {
      pred.neighbor_attention.push_back({target.neighbor_ids[i], alpha[i]});
    }
  }
  if (batch.pair_alpha != Batch::kNone) {
    const auto& ac = tape.value(batch.pair_alpha);
    for (size_t j = 0; j < target.communities.size(); ++j) {
      pred.community_attention.push_back({target.communities[j].id, ac[j]});
    }
  }
  pred.kernel_attention = tape.value(batch.kernel_pi);
  return pred;
}

}  // namespace regram

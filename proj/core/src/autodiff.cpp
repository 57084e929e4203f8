#include "regram/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regram::ad {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string("op '") + op + "': " + detail);
}

std::string dims(size_t r, size_t c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

// C (m x p) += A (m x n) · B (n x p), all row-major.
void mm_acc(const double* A, const double* B, double* C, size_t m, size_t n, size_t p) {
  for (size_t i = 0; i < m; ++i) {
    const double* a_row = A + i * n;
    double* c_row = C + i * p;
    for (size_t k = 0; k < n; ++k) {
      const double a = a_row[k];
      const double* b_row = B + k * p;
      for (size_t j = 0; j < p; ++j) c_row[j] += a * b_row[j];
    }
  }
}

std::vector<double> transposed(const std::vector<double>& src, size_t r, size_t c) {
  std::vector<double> out(src.size());
  for (size_t i = 0; i < r; ++i) {
    for (size_t j = 0; j < c; ++j) out[j * r + i] = src[i * c + j];
  }
  return out;
}

// acc (m x p) += opA(A) · opB(B); op transposes the stored matrix when set.
void mm_trans_acc(const std::vector<double>& A, size_t ar, size_t ac, bool ta,
                  const std::vector<double>& B, size_t br, size_t bc, bool tb,
                  std::vector<double>& acc) {
  const size_t m = ta ? ac : ar;
  const size_t n = ta ? ar : ac;
  const size_t p = tb ? br : bc;
  const std::vector<double>* a = &A;
  const std::vector<double>* b = &B;
  std::vector<double> a_t, b_t;
  if (ta) {
    a_t = transposed(A, ar, ac);
    a = &a_t;
  }
  if (tb) {
    b_t = transposed(B, br, bc);
    b = &b_t;
  }
  mm_acc(a->data(), b->data(), acc.data(), m, n, p);
}

void validate_segments(const char* op, const Segments& segments, size_t rows) {
  size_t cursor = 0;
  for (const auto& [begin, end] : segments) {
    if (begin != cursor || end < begin) shape_error(op, "segments must be contiguous ascending");
    cursor = end;
  }
  if (cursor != rows) shape_error(op, "segments must cover all rows");
}

}  // namespace

double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double mish_scalar(double x) { return x * std::tanh(softplus(x)); }

// ----------------------------------------------------------------- plumbing

NodeId Tape::push(size_t rows, size_t cols, std::vector<double> value, const char* op,
                  std::function<void(Tape&)> bw) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.value = std::move(value);
  n.backward = std::move(bw);
  n.op = op;
  check_finite(n);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

void Tape::check_finite(const Node& n) const {
  for (size_t i = 0; i < n.value.size(); ++i) {
    if (!std::isfinite(n.value[i])) {
      throw std::runtime_error(std::string("op '") + n.op + "' produced a non-finite value at flat index " +
                               std::to_string(i) + ", shape " + dims(n.rows, n.cols));
    }
  }
}

NodeId Tape::leaf(const Tensor& t) { return leaf(t.rows, t.cols, t.data); }

NodeId Tape::leaf(size_t rows, size_t cols, const std::vector<double>& data) {
  if (data.size() != rows * cols) shape_error("leaf", "data length does not match shape");
  return push(rows, cols, data, "leaf", nullptr);
}

NodeId Tape::zeros(size_t rows, size_t cols) {
  return push(rows, cols, std::vector<double>(rows * cols, 0.0), "zeros", nullptr);
}

double Tape::scalar(NodeId id) const {
  const Node& n = nodes_.at(id);
  if (n.value.size() != 1) {
    throw std::invalid_argument("scalar(): node has shape " + dims(n.rows, n.cols));
  }
  return n.value[0];
}

void Tape::backward(NodeId loss) {
  if (backward_done_) throw std::logic_error("backward already run on this tape");
  const Node& l = nodes_.at(loss);
  if (l.value.size() != 1) {
    shape_error("backward", "loss must be scalar, got " + dims(l.rows, l.cols));
  }
  backward_done_ = true;
  for (NodeId id = 0; id <= loss; ++id) nodes_[id].grad.assign(nodes_[id].value.size(), 0.0);
  nodes_[loss].grad[0] = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    if (nodes_[id].backward) nodes_[id].backward(*this);
  }
}

// -------------------------------------------------------------- arithmetic

NodeId Tape::add(NodeId a, NodeId b) {
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  if (na.rows != nb.rows || na.cols != nb.cols) {
    shape_error("add", dims(na.rows, na.cols) + " vs " + dims(nb.rows, nb.cols));
  }
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = na.value[i] + nb.value[i];
  const NodeId out = push(na.rows, na.cols, std::move(v), "add", nullptr);
  nodes_[out].backward = [out, a, b](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    auto& ga = t.nodes_[a].grad;
    auto& gb = t.nodes_[b].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  };
  return out;
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  if (na.rows != nb.rows || na.cols != nb.cols) {
    shape_error("sub", dims(na.rows, na.cols) + " vs " + dims(nb.rows, nb.cols));
  }
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = na.value[i] - nb.value[i];
  const NodeId out = push(na.rows, na.cols, std::move(v), "sub", nullptr);
  nodes_[out].backward = [out, a, b](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    auto& ga = t.nodes_[a].grad;
    auto& gb = t.nodes_[b].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  };
  return out;
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  if (na.rows != nb.rows || na.cols != nb.cols) {
    shape_error("mul", dims(na.rows, na.cols) + " vs " + dims(nb.rows, nb.cols));
  }
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = na.value[i] * nb.value[i];
  const NodeId out = push(na.rows, na.cols, std::move(v), "mul", nullptr);
  nodes_[out].backward = [out, a, b](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    const auto& va = t.nodes_[a].value;
    const auto& vb = t.nodes_[b].value;
    auto& ga = t.nodes_[a].grad;
    auto& gb = t.nodes_[b].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  };
  return out;
}

NodeId Tape::scale(NodeId a, double factor) {
  const Node& na = nodes_[a];
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = na.value[i] * factor;
  const NodeId out = push(na.rows, na.cols, std::move(v), "scale", nullptr);
  nodes_[out].backward = [out, a, factor](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    auto& ga = t.nodes_[a].grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  };
  return out;
}

NodeId Tape::matmul(NodeId a, NodeId b, bool trans_a, bool trans_b) {
  const Node& na = nodes_[a];
  const Node& nb = nodes_[b];
  const size_t m = trans_a ? na.cols : na.rows;
  const size_t n = trans_a ? na.rows : na.cols;
  const size_t n2 = trans_b ? nb.cols : nb.rows;
  const size_t p = trans_b ? nb.rows : nb.cols;
  if (n != n2) {
    shape_error("matmul", dims(na.rows, na.cols) + (trans_a ? "^T" : "") + " x " +
                              dims(nb.rows, nb.cols) + (trans_b ? "^T" : "") +
                              " have incompatible inner dimensions");
  }
  std::vector<double> v(m * p, 0.0);
  mm_trans_acc(na.value, na.rows, na.cols, trans_a, nb.value, nb.rows, nb.cols, trans_b, v);
  const NodeId out = push(m, p, std::move(v), "matmul", nullptr);
  nodes_[out].backward = [out, a, b, trans_a, trans_b, m, p](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    const Node& A = t.nodes_[a];
    const Node& B = t.nodes_[b];
    if (!trans_a) {
      mm_trans_acc(g, m, p, false, B.value, B.rows, B.cols, !trans_b, t.nodes_[a].grad);
    } else {
      mm_trans_acc(B.value, B.rows, B.cols, trans_b, g, m, p, true, t.nodes_[a].grad);
    }
    if (!trans_b) {
      mm_trans_acc(A.value, A.rows, A.cols, !trans_a, g, m, p, false, t.nodes_[b].grad);
    } else {
      mm_trans_acc(g, m, p, true, A.value, A.rows, A.cols, trans_a, t.nodes_[b].grad);
    }
  };
  return out;
}

// -------------------------------------------------------------- activations

NodeId Tape::mish(NodeId a) {
  const Node& na = nodes_[a];
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = mish_scalar(na.value[i]);
  const NodeId out = push(na.rows, na.cols, std::move(v), "mish", nullptr);
  nodes_[out].backward = [out, a](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    const auto& x = t.nodes_[a].value;
    auto& ga = t.nodes_[a].grad;
    for (size_t i = 0; i < g.size(); ++i) {
      const double th = std::tanh(softplus(x[i]));
      ga[i] += g[i] * (th + x[i] * (1.0 - th * th) * sigmoid(x[i]));
    }
  };
  return out;
}

NodeId Tape::leaky_relu(NodeId a, double slope) {
  const Node& na = nodes_[a];
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) {
    v[i] = na.value[i] > 0.0 ? na.value[i] : slope * na.value[i];
  }
  const NodeId out = push(na.rows, na.cols, std::move(v), "leaky_relu", nullptr);
  nodes_[out].backward = [out, a, slope](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    const auto& x = t.nodes_[a].value;
    auto& ga = t.nodes_[a].grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (x[i] > 0.0 ? 1.0 : slope);
  };
  return out;
}

NodeId Tape::relu(NodeId a) {
  const Node& na = nodes_[a];
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::max(0.0, na.value[i]);
  const NodeId out = push(na.rows, na.cols, std::move(v), "relu", nullptr);
  nodes_[out].backward = [out, a](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    const auto& x = t.nodes_[a].value;
    auto& ga = t.nodes_[a].grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : 0.0;
  };
  return out;
}

NodeId Tape::tanh(NodeId a) {
  const Node& na = nodes_[a];
  std::vector<double> v(na.value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(na.value[i]);
  const NodeId out = push(na.rows, na.cols, std::move(v), "tanh", nullptr);
  nodes_[out].backward = [out, a](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    const auto& y = t.nodes_[out].value;
    auto& ga = t.nodes_[a].grad;
    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  };
  return out;
}

// ------------------------------------------------------------ rearrangement

NodeId Tape::concat(NodeId a, NodeId b, int axis) {
  if (axis == 0) return vconcat({a, b});
  if (axis == 1) return hconcat({a, b});
  shape_error("concat", "axis must be 0 or 1");
}

NodeId Tape::hconcat(const std::vector<NodeId>& parts) {
  if (parts.empty()) shape_error("hconcat", "needs at least one input");
  const size_t rows = nodes_[parts[0]].rows;
  size_t cols = 0;
  for (const NodeId p : parts) {
    if (nodes_[p].rows != rows) shape_error("hconcat", "inputs disagree on row count");
    cols += nodes_[p].cols;
  }
  std::vector<double> v(rows * cols);
  size_t offset = 0;
  for (const NodeId p : parts) {
    const Node& n = nodes_[p];
    for (size_t r = 0; r < rows; ++r) {
      std::copy_n(n.value.begin() + r * n.cols, n.cols, v.begin() + r * cols + offset);
    }
    offset += n.cols;
  }
  const NodeId out = push(rows, cols, std::move(v), "hconcat", nullptr);
  nodes_[out].backward = [out, parts, rows, cols](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    size_t offset = 0;
    for (const NodeId p : parts) {
      Node& n = t.nodes_[p];
      for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < n.cols; ++c) n.grad[r * n.cols + c] += g[r * cols + offset + c];
      }
      offset += n.cols;
    }
  };
  return out;
}

NodeId Tape::vconcat(const std::vector<NodeId>& parts) {
  if (parts.empty()) shape_error("vconcat", "needs at least one input");
  const size_t cols = nodes_[parts[0]].cols;
  size_t rows = 0;
  for (const NodeId p : parts) {
    if (nodes_[p].cols != cols) shape_error("vconcat", "inputs disagree on column count");
    rows += nodes_[p].rows;
  }
  std::vector<double> v;
  v.reserve(rows * cols);
  for (const NodeId p : parts) {
    const Node& n = nodes_[p];
    v.insert(v.end(), n.value.begin(), n.value.end());
  }
  const NodeId out = push(rows, cols, std::move(v), "vconcat", nullptr);
  nodes_[out].backward = [out, parts](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    size_t offset = 0;
    for (const NodeId p : parts) {
      Node& n = t.nodes_[p];
      for (size_t i = 0; i < n.grad.size(); ++i) n.grad[i] += g[offset + i];
      offset += n.grad.size();
    }
  };
  return out;
}

NodeId Tape::gather_hconcat(const std::vector<GatherSource>& sources) {
  if (sources.empty()) shape_error("gather_hconcat", "needs at least one source");
  const size_t rows = sources[0].row_of_output.size();
  size_t cols = 0;
  for (const auto& s : sources) {
    if (s.row_of_output.size() != rows) {
      shape_error("gather_hconcat", "sources disagree on output row count");
    }
    for (const size_t r : s.row_of_output) {
      if (r >= nodes_[s.node].rows) shape_error("gather_hconcat", "row index out of range");
    }
    cols += nodes_[s.node].cols;
  }
  std::vector<double> v(rows * cols);
  size_t offset = 0;
  for (const auto& s : sources) {
    const Node& n = nodes_[s.node];
    for (size_t r = 0; r < rows; ++r) {
      std::copy_n(n.value.begin() + s.row_of_output[r] * n.cols, n.cols,
                  v.begin() + r * cols + offset);
    }
    offset += n.cols;
  }
  const NodeId out = push(rows, cols, std::move(v), "gather_hconcat", nullptr);
  nodes_[out].backward = [out, sources, rows, cols](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    size_t offset = 0;
    for (const auto& s : sources) {
      Node& n = t.nodes_[s.node];
      for (size_t r = 0; r < rows; ++r) {
        double* dst = n.grad.data() + s.row_of_output[r] * n.cols;
        const double* src = g.data() + r * cols + offset;
        for (size_t c = 0; c < n.cols; ++c) dst[c] += src[c];
      }
      offset += n.cols;
    }
  };
  return out;
}

// --------------------------------------------------------------- reductions

NodeId Tape::rowwise_sum(NodeId a) {
  const Node& na = nodes_[a];
  std::vector<double> v(na.rows, 0.0);
  for (size_t r = 0; r < na.rows; ++r) {
    for (size_t c = 0; c < na.cols; ++c) v[r] += na.value[r * na.cols + c];
  }
  const NodeId out = push(na.rows, 1, std::move(v), "rowwise_sum", nullptr);
  nodes_[out].backward = [out, a](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    Node& n = t.nodes_[a];
    for (size_t r = 0; r < n.rows; ++r) {
      for (size_t c = 0; c < n.cols; ++c) n.grad[r * n.cols + c] += g[r];
    }
  };
  return out;
}

NodeId Tape::sum(NodeId a) {
  const Node& na = nodes_[a];
  double total = 0.0;
  for (const double v : na.value) total += v;
  const NodeId out = push(1, 1, {total}, "sum", nullptr);
  nodes_[out].backward = [out, a](Tape& t) {
    const double g = t.nodes_[out].grad[0];
    for (auto& gv : t.nodes_[a].grad) gv += g;
  };
  return out;
}

NodeId Tape::mean(NodeId a) {
  const Node& na = nodes_[a];
  if (na.value.empty()) shape_error("mean", "input is empty");
  double total = 0.0;
  for (const double v : na.value) total += v;
  const double inv = 1.0 / double(na.value.size());
  const NodeId out = push(1, 1, {total * inv}, "mean", nullptr);
  nodes_[out].backward = [out, a, inv](Tape& t) {
    const double g = t.nodes_[out].grad[0] * inv;
    for (auto& gv : t.nodes_[a].grad) gv += g;
  };
  return out;
}

NodeId Tape::weighted_sum(NodeId values, NodeId weights) {
  const Node& nv = nodes_[values];
  const Node& nw = nodes_[weights];
  if (nv.rows != nw.rows || nv.cols != nw.cols) {
    shape_error("weighted_sum", dims(nv.rows, nv.cols) + " vs " + dims(nw.rows, nw.cols));
  }
  double total = 0.0;
  for (size_t i = 0; i < nv.value.size(); ++i) total += nv.value[i] * nw.value[i];
  const NodeId out = push(1, 1, {total}, "weighted_sum", nullptr);
  nodes_[out].backward = [out, values, weights](Tape& t) {
    const double g = t.nodes_[out].grad[0];
    const auto& v = t.nodes_[values].value;
    const auto& w = t.nodes_[weights].value;
    auto& gv = t.nodes_[values].grad;
    auto& gw = t.nodes_[weights].grad;
    for (size_t i = 0; i < v.size(); ++i) {
      gv[i] += g * w[i];
      gw[i] += g * v[i];
    }
  };
  return out;
}

// ------------------------------------------------------------------ softmax

namespace {

// Softmax with temperature into out[begin..end) from logits values.
void softmax_span(const std::vector<double>& logits, size_t begin, size_t end, size_t stride,
                  double tau, std::vector<double>& out) {
  double max_logit = -HUGE_VAL;
  for (size_t i = begin; i < end; i += stride) max_logit = std::max(max_logit, logits[i]);
  double denom = 0.0;
  for (size_t i = begin; i < end; i += stride) {
    out[i] = std::exp((logits[i] - max_logit) / tau);
    denom += out[i];
  }
  for (size_t i = begin; i < end; i += stride) out[i] /= denom;
}

// dL/dlogit for one softmax group given output y and incoming grad g.
void softmax_backward_span(const std::vector<double>& y, const std::vector<double>& g,
                           size_t begin, size_t end, size_t stride, double tau,
                           std::vector<double>& glogits) {
  double dot = 0.0;
  for (size_t i = begin; i < end; i += stride) dot += g[i] * y[i];
  for (size_t i = begin; i < end; i += stride) {
    glogits[i] += y[i] / tau * (g[i] - dot);
  }
}

}  // namespace

NodeId Tape::softmax_temperature(NodeId logits, double tau) {
  const Node& nl = nodes_[logits];
  if (!(tau > 0.0)) shape_error("softmax_temperature", "tau must be positive");
  if (nl.value.empty()) shape_error("softmax_temperature", "empty logits");
  if (nl.rows != 1 && nl.cols != 1) {
    shape_error("softmax_temperature", "input must be a vector, got " + dims(nl.rows, nl.cols));
  }
  std::vector<double> v(nl.value.size());
  softmax_span(nl.value, 0, nl.value.size(), 1, tau, v);
  const NodeId out = push(nl.rows, nl.cols, std::move(v), "softmax_temperature", nullptr);
  nodes_[out].backward = [out, logits, tau](Tape& t) {
    const Node& o = t.nodes_[out];
    softmax_backward_span(o.value, o.grad, 0, o.value.size(), 1, tau, t.nodes_[logits].grad);
  };
  return out;
}

NodeId Tape::rowwise_softmax_temperature(NodeId logits, double tau) {
  const Node& nl = nodes_[logits];
  if (!(tau > 0.0)) shape_error("rowwise_softmax_temperature", "tau must be positive");
  if (nl.cols == 0) shape_error("rowwise_softmax_temperature", "empty rows");
  std::vector<double> v(nl.value.size());
  for (size_t r = 0; r < nl.rows; ++r) {
    softmax_span(nl.value, r * nl.cols, (r + 1) * nl.cols, 1, tau, v);
  }
  const NodeId out = push(nl.rows, nl.cols, std::move(v), "rowwise_softmax_temperature", nullptr);
  nodes_[out].backward = [out, logits, tau](Tape& t) {
    const Node& o = t.nodes_[out];
    for (size_t r = 0; r < o.rows; ++r) {
      softmax_backward_span(o.value, o.grad, r * o.cols, (r + 1) * o.cols, 1, tau,
                            t.nodes_[logits].grad);
    }
  };
  return out;
}

NodeId Tape::segment_softmax_temperature(NodeId logits, const Segments& segments, double tau) {
  const Node& nl = nodes_[logits];
  if (!(tau > 0.0)) shape_error("segment_softmax_temperature", "tau must be positive");
  validate_segments("segment_softmax_temperature", segments, nl.rows);
  std::vector<double> v(nl.value.size());
  for (const auto& [begin, end] : segments) {
    if (begin == end) continue;
    for (size_t c = 0; c < nl.cols; ++c) {
      softmax_span(nl.value, begin * nl.cols + c, end * nl.cols + c, nl.cols, tau, v);
    }
  }
  const NodeId out = push(nl.rows, nl.cols, std::move(v), "segment_softmax_temperature", nullptr);
  nodes_[out].backward = [out, logits, segments, tau](Tape& t) {
    const Node& o = t.nodes_[out];
    for (const auto& [begin, end] : segments) {
      if (begin == end) continue;
      for (size_t c = 0; c < o.cols; ++c) {
        softmax_backward_span(o.value, o.grad, begin * o.cols + c, end * o.cols + c, o.cols, tau,
                              t.nodes_[logits].grad);
      }
    }
  };
  return out;
}

NodeId Tape::segment_weighted_sum_rows(NodeId values, NodeId weights, const Segments& segments) {
  const Node& nv = nodes_[values];
  const Node& nw = nodes_[weights];
  if (nw.cols != 1 || nw.rows != nv.rows) {
    shape_error("segment_weighted_sum_rows", "weights must be " + dims(nv.rows, 1) + ", got " +
                                                 dims(nw.rows, nw.cols));
  }
  validate_segments("segment_weighted_sum_rows", segments, nv.rows);
  std::vector<double> v(segments.size() * nv.cols, 0.0);
  for (size_t s = 0; s < segments.size(); ++s) {
    for (size_t r = segments[s].first; r < segments[s].second; ++r) {
      const double w = nw.value[r];
      for (size_t c = 0; c < nv.cols; ++c) v[s * nv.cols + c] += w * nv.value[r * nv.cols + c];
    }
  }
  const NodeId out = push(segments.size(), nv.cols, std::move(v), "segment_weighted_sum_rows", nullptr);
  nodes_[out].backward = [out, values, weights, segments](Tape& t) {
    const Node& o = t.nodes_[out];
    const auto& vv = t.nodes_[values].value;
    const auto& wv = t.nodes_[weights].value;
    auto& gv = t.nodes_[values].grad;
    auto& gw = t.nodes_[weights].grad;
    for (size_t s = 0; s < segments.size(); ++s) {
      const double* go = o.grad.data() + s * o.cols;
      for (size_t r = segments[s].first; r < segments[s].second; ++r) {
        double dot = 0.0;
        for (size_t c = 0; c < o.cols; ++c) {
          gv[r * o.cols + c] += wv[r] * go[c];
          dot += vv[r * o.cols + c] * go[c];
        }
        gw[r] += dot;
      }
    }
  };
  return out;
}

// --------------------------------------------------------------- batch norm

NodeId Tape::batchnorm_1d(NodeId x, NodeId gamma, NodeId beta, const BnStats& stats, Mode mode) {
  const Node& nx = nodes_[x];
  const Node& ng = nodes_[gamma];
  const Node& nb = nodes_[beta];
  const size_t batch = nx.rows;
  const size_t features = nx.cols;
  if (ng.rows != 1 || ng.cols != features || nb.rows != 1 || nb.cols != features) {
    shape_error("batchnorm_1d", "scale/shift must be " + dims(1, features));
  }
  if (!stats.running_mean || !stats.running_var || stats.running_mean->size() != features ||
      stats.running_var->size() != features) {
    shape_error("batchnorm_1d", "running statistics must have one entry per feature");
  }
  if (mode == Mode::kTrain && batch < 2) {
    throw std::invalid_argument("op 'batchnorm_1d': train mode requires batch >= 2, got " +
                                std::to_string(batch));
  }
  if (batch == 0) {
    // Empty pass-through; nothing to normalize, stats untouched.
    return push(0, features, {}, "batchnorm_1d", nullptr);
  }

  std::vector<double> inv_std(features);
  std::vector<double> xhat(batch * features);
  if (mode == Mode::kTrain) {
    for (size_t f = 0; f < features; ++f) {
      double mean = 0.0;
      for (size_t r = 0; r < batch; ++r) mean += nx.value[r * features + f];
      mean /= double(batch);
      double var = 0.0;
      for (size_t r = 0; r < batch; ++r) {
        const double d = nx.value[r * features + f] - mean;
        var += d * d;
      }
      var /= double(batch);  // biased, used for normalization
      inv_std[f] = 1.0 / std::sqrt(var + stats.eps);
      for (size_t r = 0; r < batch; ++r) {
        xhat[r * features + f] = (nx.value[r * features + f] - mean) * inv_std[f];
      }
      const double unbiased = var * double(batch) / double(batch - 1);
      (*stats.running_mean)[f] = (1.0 - stats.momentum) * (*stats.running_mean)[f] + stats.momentum * mean;
      (*stats.running_var)[f] = (1.0 - stats.momentum) * (*stats.running_var)[f] + stats.momentum * unbiased;
    }
  } else {
    for (size_t f = 0; f < features; ++f) {
      inv_std[f] = 1.0 / std::sqrt((*stats.running_var)[f] + stats.eps);
      for (size_t r = 0; r < batch; ++r) {
        xhat[r * features + f] = (nx.value[r * features + f] - (*stats.running_mean)[f]) * inv_std[f];
      }
    }
  }

  std::vector<double> v(batch * features);
  for (size_t r = 0; r < batch; ++r) {
    for (size_t f = 0; f < features; ++f) {
      v[r * features + f] = ng.value[f] * xhat[r * features + f] + nb.value[f];
    }
  }
  const NodeId out = push(batch, features, std::move(v), "batchnorm_1d", nullptr);
  nodes_[out].backward = [out, x, gamma, beta, mode, batch, features, inv_std,
                          xhat](Tape& t) {
    const auto& g = t.nodes_[out].grad;
    const auto& gamma_v = t.nodes_[gamma].value;
    auto& gx = t.nodes_[x].grad;
    auto& ggamma = t.nodes_[gamma].grad;
    auto& gbeta = t.nodes_[beta].grad;
    for (size_t f = 0; f < features; ++f) {
      double sum_g = 0.0;
      double sum_g_xhat = 0.0;
      for (size_t r = 0; r < batch; ++r) {
        sum_g += g[r * features + f];
        sum_g_xhat += g[r * features + f] * xhat[r * features + f];
      }
      ggamma[f] += sum_g_xhat;
      gbeta[f] += sum_g;
      if (mode == Mode::kTrain) {
        const double inv_b = 1.0 / double(batch);
        for (size_t r = 0; r < batch; ++r) {
          gx[r * features + f] += gamma_v[f] * inv_std[f] *
                                  (g[r * features + f] - sum_g * inv_b -
                                   xhat[r * features + f] * sum_g_xhat * inv_b);
        }
      } else {
        for (size_t r = 0; r < batch; ++r) {
          gx[r * features + f] += gamma_v[f] * inv_std[f] * g[r * features + f];
        }
      }
    }
  };
  return out;
}

}  // namespace regram::ad

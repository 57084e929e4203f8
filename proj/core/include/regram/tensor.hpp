#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace regram {

// Dense 2-D row-major tensor of 64-bit floats with an optional gradient
// buffer of identical shape.  Vectors are represented as (n x 1) or (1 x n)
// as the math requires.
struct Tensor {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until ensure_grad()

  Tensor() = default;
  Tensor(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Tensor row(std::initializer_list<double> values) {
    Tensor t(1, values.size());
    size_t i = 0;
    for (double v : values) t.data[i++] = v;
    return t;
  }
  static Tensor column(std::initializer_list<double> values) {
    Tensor t(values.size(), 1);
    size_t i = 0;
    for (double v : values) t.data[i++] = v;
    return t;
  }

  size_t size() const { return rows * cols; }
  double& at(size_t r, size_t c) { return data[r * cols + c]; }
  double at(size_t r, size_t c) const { return data[r * cols + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { grad.assign(data.size(), 0.0); }

  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

}  // namespace regram

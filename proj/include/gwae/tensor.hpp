#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "gwae/errors.hpp"

namespace gwae {

// Dense row-major matrix of doubles. Everything that flows through the
// autodiff tape is rank-2; scalars are 1x1 and vectors 1xn.
struct Tensor {
  std::size_t nrows = 0;
  std::size_t ncols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : nrows(r), ncols(c), data(r * c, 0.0) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> v)
      : nrows(r), ncols(c), data(std::move(v)) {
    if (data.size() != r * c) throw ConfigError("tensor data size does not match shape");
  }

  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c); }
  static Tensor full(std::size_t r, std::size_t c, double v) {
    Tensor t(r, c);
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor(1, 1, {v}); }
  static Tensor row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor(1, n, std::move(v));
  }
  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t.data[i * n + i] = 1.0;
    return t;
  }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return nrows == o.nrows && ncols == o.ncols; }
  bool is_scalar() const { return nrows == 1 && ncols == 1; }

  double& at(std::size_t r, std::size_t c) { return data[r * ncols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * ncols + c]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

}  // namespace gwae

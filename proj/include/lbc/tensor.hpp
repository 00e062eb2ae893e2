#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lbc {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<std::size_t>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

/// Dense row-major tensor. The flat `data` vector always holds exactly
/// shape_numel(shape) values.
template <typename Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;

  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), Real{0}) {}

  Tensor(Shape s, std::vector<Real> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape)) {
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    }
  }

  std::size_t numel() const { return data.size(); }
  bool empty() const { return data.empty() && shape.empty(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t extent(std::size_t axis) const {
    if (axis >= shape.size()) {
      throw std::out_of_range("tensor axis " + std::to_string(axis) + " out of range for shape " +
                              shape_str(shape));
    }
    return shape[axis];
  }

  // 2-D accessors; most of the group/score math lives on matrices.
  Real& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  const Real& at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  // 4-D accessor for conv weights/activations, layout (a, b, c, d) row-major.
  Real& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }
  const Real& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return data[((a * shape[1] + b) * shape[2] + c) * shape[3] + d];
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

template <typename Real>
Tensor<Real> zeros_like(const Tensor<Real>& t) {
  return Tensor<Real>(t.shape);
}

/// NaN/Inf anywhere is treated as a hard error state, not a value.
template <typename Real>
void check_finite(const Tensor<Real>& t, const std::string& context) {
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    if (!std::isfinite(static_cast<double>(t.data[i]))) {
      throw std::runtime_error("non-finite value at flat index " + std::to_string(i) + " in " +
                               context);
    }
  }
}

template <typename Real>
void fill_normal(Tensor<Real>& t, std::mt19937_64& rng, double stddev, double mean = 0.0) {
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& v : t.data) v = static_cast<Real>(dist(rng));
}

template <typename Real>
void fill_uniform(Tensor<Real>& t, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : t.data) v = static_cast<Real>(dist(rng));
}

}  // namespace lbc

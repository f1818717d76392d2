#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "amqc/error.hpp"

namespace amqc {

// Dense row-major numeric array; the carrier for images, activations, weights
// and gradients. The scalar type selects the precision mode: float for the
// production path, double for gradient verification.
template <typename T>
struct TensorT {
  std::vector<size_t> shape;
  std::vector<T> data;

  TensorT() = default;

  explicit TensorT(std::vector<size_t> s) : shape(std::move(s)), data(count(shape), T(0)) {}

  TensorT(std::vector<size_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape))
      fail(ErrorKind::shape, "tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str());
  }

  static size_t count(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
  }

  size_t size() const { return data.size(); }
  size_t rank() const { return shape.size(); }
  size_t dim(size_t i) const { return shape.at(i); }

  T& operator[](size_t i) { return data[i]; }
  const T& operator[](size_t i) const { return data[i]; }

  // Reshape without copying; element count must match.
  TensorT reshaped(std::vector<size_t> s) const {
    if (count(s) != data.size())
      fail(ErrorKind::shape, "reshape from " + shape_str() + " changes element count");
    return TensorT(std::move(s), data);
  }

  std::string shape_str() const {
    std::string out = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(shape[i]);
    }
    out += ")";
    return out;
  }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

}  // namespace amqc

#include "scriptor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scriptor/errors.hpp"

namespace scriptor {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape_) : shape(std::move(shape_)) {
  for (std::size_t e : shape)
    if (e == 0) throw shape_error("tensor extent must be positive: " + shape_string(shape));
  data.assign(shape_product(shape), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  for (std::size_t e : shape)
    if (e == 0) throw shape_error("tensor extent must be positive: " + shape_string(shape));
  if (data.size() != shape_product(shape))
    throw shape_error("tensor data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_string(shape));
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace scriptor

#include "trip/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace trip {

Tensor::Tensor(std::vector<int> dims, double fill)
    : shape(std::move(dims)), data(numel(shape), fill) {}

Tensor::Tensor(std::vector<int> dims, std::vector<double> values)
    : shape(std::move(dims)), data(std::move(values)) {
  if (data.size() != numel(shape)) {
    throw std::invalid_argument("tensor data does not match shape " + shape_string());
  }
}

std::size_t Tensor::numel(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

void Tensor::fill(double value) { std::fill(data.begin(), data.end(), value); }

bool Tensor::all_zero() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return v == 0.0; });
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace trip

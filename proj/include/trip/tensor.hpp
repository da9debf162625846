#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trip {

/// Dense row-major tensor of doubles. Shapes are small vectors of extents.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);
  Tensor(std::vector<int> dims, std::vector<double> values);

  static std::size_t numel(const std::vector<int>& dims);

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  int dim(std::size_t axis) const { return shape.at(axis); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  void fill(double value);
  bool all_zero() const;
  std::string shape_string() const;
};

}  // namespace trip

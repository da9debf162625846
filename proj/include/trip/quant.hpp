#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trip/tensor.hpp"

namespace trip::net {

/// 4-bit signed weights sharing one power-of-two scale: w = q * 2^s.
struct QuantTensor {
  std::vector<int> shape;
  int scale_exponent = 0;
  std::size_t count = 0;
  std::vector<std::uint8_t> packed;  // two values per byte, low nibble first

  std::vector<std::int8_t> values() const;
  Tensor dequantize() const;

  friend bool operator==(const QuantTensor&, const QuantTensor&) = default;
};

struct QuantStrategy {
  std::optional<int> forced_exponent;  // unset: smallest s with max|w| / 2^s <= 7.5
};

inline constexpr int kQuantMin = -8;
inline constexpr int kQuantMax = 7;

/// Smallest integer s with max_abs / 2^s <= 7.5; 0 for an all-zero layer.
int auto_scale_exponent(double max_abs);

QuantTensor quantize_layer(const Tensor& weights, const QuantStrategy& strategy = {});

std::vector<std::uint8_t> pack_nibbles(std::span<const std::int8_t> values);
std::vector<std::int8_t> unpack_nibbles(std::span<const std::uint8_t> bytes, std::size_t count);

}  // namespace trip::net

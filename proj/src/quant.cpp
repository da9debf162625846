#include "trip/quant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trip/error.hpp"

namespace trip::net {

int auto_scale_exponent(double max_abs) {
  if (!std::isfinite(max_abs)) throw Error(ErrorKind::ValueOutOfRange, "non-finite weight");
  if (max_abs == 0.0) return 0;
  int s = static_cast<int>(std::ceil(std::log2(max_abs / 7.5)));
  while (max_abs / std::ldexp(1.0, s) > 7.5) ++s;
  while (max_abs / std::ldexp(1.0, s - 1) <= 7.5) --s;
  if (s < -128 || s > 127) throw Error(ErrorKind::ValueOutOfRange, "scale exponent " + std::to_string(s) + " exceeds i8");
  return s;
}

QuantTensor quantize_layer(const Tensor& weights, const QuantStrategy& strategy) {
  double max_abs = 0.0;
  for (double w : weights.data) max_abs = std::max(max_abs, std::abs(w));
  QuantTensor q;
  q.shape = weights.shape;
  q.count = weights.size();
  q.scale_exponent = strategy.forced_exponent ? *strategy.forced_exponent : auto_scale_exponent(max_abs);
  std::vector<std::int8_t> values(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    // nearbyint rounds half to even in the default rounding mode.
    const double r = std::nearbyint(std::ldexp(weights[i], -q.scale_exponent));
    values[i] = static_cast<std::int8_t>(std::clamp(r, static_cast<double>(kQuantMin), static_cast<double>(kQuantMax)));
  }
  q.packed = pack_nibbles(values);
  return q;
}

std::vector<std::int8_t> QuantTensor::values() const { return unpack_nibbles(packed, count); }

Tensor QuantTensor::dequantize() const {
  Tensor t(shape);
  const auto q = values();
  for (std::size_t i = 0; i < q.size(); ++i) t[i] = std::ldexp(static_cast<double>(q[i]), scale_exponent);
  return t;
}

std::vector<std::uint8_t> pack_nibbles(std::span<const std::int8_t> values) {
  std::vector<std::uint8_t> out((values.size() + 1) / 2, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int v = values[i];
    if (v < kQuantMin || v > kQuantMax) {
      throw Error(ErrorKind::ValueOutOfRange, "value " + std::to_string(v) + " does not fit 4 bits");
    }
    const std::uint8_t nib = static_cast<std::uint8_t>(v) & 0x0F;
    out[i / 2] |= (i % 2 == 0) ? nib : static_cast<std::uint8_t>(nib << 4);
  }
  return out;
}

std::vector<std::int8_t> unpack_nibbles(std::span<const std::uint8_t> bytes, std::size_t count) {
  if (count > bytes.size() * 2) {
    throw Error(ErrorKind::ValueOutOfRange, "need " + std::to_string(count) + " nibbles, have " + std::to_string(bytes.size() * 2));
  }
  std::vector<std::int8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int nib = (i % 2 == 0) ? (bytes[i / 2] & 0x0F) : (bytes[i / 2] >> 4);
    out[i] = static_cast<std::int8_t>(nib >= 8 ? nib - 16 : nib);
  }
  return out;
}

}  // namespace trip::net

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trip/model.hpp"

namespace trip::net {

/// Serializes to TRPW. Layers that are not frozen yet are quantized on the way out.
std::vector<std::uint8_t> save_weights(const Model& model);

/// Parses TRPW against the layer stack of `spec`. Every weight layer comes back
/// frozen with its stored 4-bit values.
Model load_weights(std::span<const std::uint8_t> bytes, const NetworkSpec& spec);

}  // namespace trip::net

#pragma once

#include <cstdint>
#include <vector>

#include "trip/events.hpp"

namespace trip::synth {

/// Generator settings for the noisy-digit dataset.
struct SynthConfig {
  int canvas = 128;
  double scale_min = 1.0;
  double scale_max = 2.0;
  int noise_fragments = 8;
  int fragment_size = 8;
  int timebins = 32;
  int glyph_size = 34;
  std::uint32_t duration_us = 100000;
  int events_per_pixel = 2;
  double stroke_jitter = 1.0;  // endpoint jitter in base-glyph pixels
  int forced_label = -1;       // -1 draws the label from the seed

  void validate() const;
};

struct BoundingBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct SyntheticEvents {
  events::EventStreamHeader header;
  std::vector<events::Event> events;
  int label = 0;
  BoundingBox bbox;
  /// Placement of the glyph box normalized to [0,1] over the valid area.
  double placement_u = 0, placement_v = 0;
};

struct SyntheticSample {
  events::BinnedSample sample;
  int label = 0;
  BoundingBox bbox;
};

/// Rasterized glyph mask for `digit` in a `size` x `size` box. Strokes follow a
/// seven-segment layout; jitter perturbs segment endpoints.
std::vector<std::uint8_t> render_glyph(int digit, int size, double jitter, std::uint64_t seed);

SyntheticEvents generate_synthetic_events(std::uint64_t seed, const SynthConfig& config);

SyntheticSample generate_synthetic_sample(std::uint64_t seed, const SynthConfig& config);

}  // namespace trip::synth

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "trip/tensor.hpp"

namespace trip::events {

/// One sensor event. `t` is in microseconds.
struct Event {
  std::uint32_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t p = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStreamHeader {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint64_t count = 0;

  friend bool operator==(const EventStreamHeader&, const EventStreamHeader&) = default;
};

/// Dense per-timebin counts, layout [polarity][y][x].
struct TimebinFrame {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  TimebinFrame() = default;
  TimebinFrame(int w, int h) : width(w), height(h), values(2 * static_cast<std::size_t>(w) * h, 0.0) {}

  std::size_t index(int p, int y, int x) const {
    return (static_cast<std::size_t>(p) * height + y) * width + x;
  }
  double& at(int p, int y, int x) { return values[index(p, y, x)]; }
  double at(int p, int y, int x) const { return values[index(p, y, x)]; }

  bool all_zero() const;
  /// Number of nonzero (polarity, pixel) cells.
  std::size_t nonzero_count() const;
  /// Copy as a [2, height, width] tensor.
  Tensor to_tensor() const;
  static TimebinFrame from_tensor(const Tensor& t);
};

struct BinnedSample {
  std::vector<TimebinFrame> frames;
  std::optional<int> label;
};

inline constexpr std::size_t kEventHeaderBytes = 16;
inline constexpr std::size_t kEventRecordBytes = 10;

/// Parses an EVT1 byte stream. Throws BadMagic, TruncatedFile or OutOfBoundsEvent.
std::pair<EventStreamHeader, std::vector<Event>> read_event_stream(std::span<const std::uint8_t> bytes);

/// Serializes to EVT1. The header's count field is taken from `events.size()`.
std::vector<std::uint8_t> write_event_stream(const EventStreamHeader& header, std::span<const Event> events);

/// Accumulates time-sorted events into `timebins` equal-duration bins spanning
/// [t_min, t_max]; the last bin is closed on the right.
BinnedSample timebin(std::span<const Event> events, const EventStreamHeader& header, int timebins);

/// k x k max pooling per polarity. Non-divisible extents are zero-padded on the
/// right/bottom, so the output is ceil(width/k) x ceil(height/k).
TimebinFrame maxpool_downsample(const TimebinFrame& frame, int k);

}  // namespace trip::events

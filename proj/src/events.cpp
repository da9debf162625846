#include "trip/events.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "trip/error.hpp"

namespace trip::events {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'T', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

void check_bounds(const Event& e, std::uint16_t width, std::uint16_t height, std::size_t index) {
  if (e.x >= width || e.y >= height || e.p > 1) {
    throw Error(ErrorKind::OutOfBoundsEvent,
                "event " + std::to_string(index) + " at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                    ",p=" + std::to_string(e.p) + ") outside " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

}  // namespace

bool TimebinFrame::all_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::size_t TimebinFrame::nonzero_count() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v != 0.0; }));
}

Tensor TimebinFrame::to_tensor() const { return Tensor({2, height, width}, values); }

TimebinFrame TimebinFrame::from_tensor(const Tensor& t) {
  if (t.shape.size() != 3 || t.shape[0] != 2) {
    throw Error(ErrorKind::ShapeMismatch, "expected a [2,H,W] tensor, got " + t.shape_string());
  }
  TimebinFrame f(t.shape[2], t.shape[1]);
  f.values = t.data;
  return f;
}

std::pair<EventStreamHeader, std::vector<Event>> read_event_stream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::BadMagic, "missing EVT1 magic");
  }
  if (bytes.size() < kEventHeaderBytes) {
    throw Error(ErrorKind::TruncatedFile, "header needs 16 bytes, have " + std::to_string(bytes.size()));
  }
  EventStreamHeader header;
  header.width = get_le<std::uint16_t>(bytes.data() + 4);
  header.height = get_le<std::uint16_t>(bytes.data() + 6);
  header.count = get_le<std::uint64_t>(bytes.data() + 8);

  const std::size_t available = (bytes.size() - kEventHeaderBytes) / kEventRecordBytes;
  if (header.count > available) {
    throw Error(ErrorKind::TruncatedFile, "header declares " + std::to_string(header.count) + " events, file holds " +
                                              std::to_string(available));
  }

  std::vector<Event> events;
  events.reserve(static_cast<std::size_t>(header.count));
  const std::uint8_t* p = bytes.data() + kEventHeaderBytes;
  for (std::size_t i = 0; i < header.count; ++i, p += kEventRecordBytes) {
    Event e;
    e.t = get_le<std::uint32_t>(p);
    e.x = get_le<std::uint16_t>(p + 4);
    e.y = get_le<std::uint16_t>(p + 6);
    e.p = p[8];
    check_bounds(e, header.width, header.height, i);
    events.push_back(e);
  }
  return {header, std::move(events)};
}

std::vector<std::uint8_t> write_event_stream(const EventStreamHeader& header, std::span<const Event> events) {
  std::vector<std::uint8_t> out;
  out.reserve(kEventHeaderBytes + events.size() * kEventRecordBytes);
  out.insert(out.end(), kMagic, kMagic + 4);
  put_le<std::uint16_t>(out, header.width);
  put_le<std::uint16_t>(out, header.height);
  put_le<std::uint64_t>(out, events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    check_bounds(e, header.width, header.height, i);
    put_le<std::uint32_t>(out, e.t);
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    out.push_back(e.p);
    out.push_back(0);
  }
  return out;
}

BinnedSample timebin(std::span<const Event> events, const EventStreamHeader& header, int timebins) {
  if (timebins < 1) {
    throw Error(ErrorKind::ConfigInvalid, "timebins must be >= 1");
  }
  if (events.empty()) {
    throw Error(ErrorKind::EmptyStream, "no events to bin");
  }
  BinnedSample sample;
  sample.frames.assign(static_cast<std::size_t>(timebins), TimebinFrame(header.width, header.height));

  const std::uint64_t t_min = events.front().t;
  const std::uint64_t t_max = events.back().t;
  const std::uint64_t span = t_max - t_min;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    check_bounds(e, header.width, header.height, i);
    std::uint64_t bin = 0;
    if (span > 0) {
      bin = std::min<std::uint64_t>((e.t - t_min) * static_cast<std::uint64_t>(timebins) / span,
                                    static_cast<std::uint64_t>(timebins - 1));
    }
    sample.frames[bin].at(e.p, e.y, e.x) += 1.0;
  }
  return sample;
}

TimebinFrame maxpool_downsample(const TimebinFrame& frame, int k) {
  if (k < 1) {
    throw Error(ErrorKind::ConfigInvalid, "pool size must be >= 1");
  }
  const int out_w = (frame.width + k - 1) / k;
  const int out_h = (frame.height + k - 1) / k;
  TimebinFrame out(out_w, out_h);
  for (int p = 0; p < 2; ++p) {
    for (int y = 0; y < frame.height; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        double& cell = out.at(p, y / k, x / k);
        // Padding cells are zero and counts are non-negative, so starting from 0 is the padded max.
        cell = std::max(cell, frame.at(p, y, x));
      }
    }
  }
  return out;
}

}  // namespace trip::events

#include "trip/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "trip/error.hpp"

namespace trip::synth {

namespace {

// Segment order: a (top), b (upper right), c (lower right), d (bottom),
// e (lower left), f (upper left), g (middle).
constexpr std::array<std::uint8_t, 10> kSegments = {
    0b0111111,  // 0: abcdef
    0b0000110,  // 1: bc
    0b1011011,  // 2: abdeg
    0b1001111,  // 3: abcdg
    0b1100110,  // 4: bcfg
    0b1101101,  // 5: acdfg
    0b1111101,  // 6: acdefg
    0b0000111,  // 7: abc
    0b1111111,  // 8
    0b1101111,  // 9: abcdfg
};

struct Point {
  double x, y;
};

// Corner anchors of the base 34 px glyph box.
constexpr Point kTL{9, 4}, kTR{25, 4}, kML{9, 17}, kMR{25, 17}, kBL{9, 30}, kBR{25, 30};

void stamp_segment(std::vector<std::uint8_t>& mask, int size, Point a, Point b, double radius) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  const int r = static_cast<int>(std::ceil(radius));
  for (int s = 0; s <= steps; ++s) {
    const double u = static_cast<double>(s) / steps;
    const double cx = a.x + u * (b.x - a.x);
    const double cy = a.y + u * (b.y - a.y);
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int px = static_cast<int>(std::lround(cx)) + dx;
        const int py = static_cast<int>(std::lround(cy)) + dy;
        if (px < 0 || py < 0 || px >= size || py >= size) continue;
        if (std::hypot(px - cx, py - cy) <= radius) {
          mask[static_cast<std::size_t>(py) * size + px] = 1;
        }
      }
    }
  }
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorKind::ConfigInvalid, what); };
  if (canvas < 1 || canvas > 65535) fail("canvas must be in [1, 65535]");
  if (!(scale_min > 0) || scale_max < scale_min) fail("scale range must satisfy 0 < min <= max");
  if (noise_fragments < 0) fail("noise fragment count must be >= 0");
  if (fragment_size < 1) fail("fragment size must be >= 1");
  if (timebins < 1) fail("timebins must be >= 1");
  if (glyph_size < 8) fail("glyph size must be >= 8");
  if (static_cast<int>(std::lround(glyph_size * scale_max)) > canvas) fail("scaled glyph does not fit the canvas");
  if (fragment_size > canvas || fragment_size > glyph_size) fail("fragment larger than canvas or glyph");
  if (events_per_pixel < 1) fail("events per pixel must be >= 1");
  if (duration_us < 1) fail("duration must be >= 1 us");
  if (forced_label < -1 || forced_label > 9) fail("forced label must be -1 or a digit");
}

std::vector<std::uint8_t> render_glyph(int digit, int size, double jitter, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jit(-jitter, jitter);
  const double k = static_cast<double>(size) / 34.0;
  auto place = [&](Point p) {
    const double jx = jitter > 0 ? jit(rng) : 0.0;
    const double jy = jitter > 0 ? jit(rng) : 0.0;
    return Point{std::clamp((p.x + jx) * k, 0.0, size - 1.0), std::clamp((p.y + jy) * k, 0.0, size - 1.0)};
  };
  const Point tl = place(kTL), tr = place(kTR), ml = place(kML), mr = place(kMR), bl = place(kBL), br = place(kBR);
  const std::array<std::pair<Point, Point>, 7> segs = {{
      {tl, tr}, {tr, mr}, {mr, br}, {bl, br}, {ml, bl}, {tl, ml}, {ml, mr},
  }};
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
  const double radius = 1.3 * k;
  const std::uint8_t bits = kSegments.at(static_cast<std::size_t>(digit));
  for (int s = 0; s < 7; ++s) {
    if (bits & (1u << s)) stamp_segment(mask, size, segs[s].first, segs[s].second, radius);
  }
  return mask;
}

SyntheticEvents generate_synthetic_events(std::uint64_t seed, const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SyntheticEvents out;
  out.header.width = static_cast<std::uint16_t>(config.canvas);
  out.header.height = static_cast<std::uint16_t>(config.canvas);
  out.label = config.forced_label >= 0 ? config.forced_label : static_cast<int>(rng() % 10);

  const double scale = config.scale_min + (config.scale_max - config.scale_min) * unit(rng);
  const int size = std::min(config.canvas, static_cast<int>(std::lround(config.glyph_size * scale)));
  const int room = config.canvas - size;
  const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(room + 1));
  const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(room + 1));
  out.bbox = {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x0 + size),
              static_cast<double>(y0 + size)};
  out.placement_u = room > 0 ? static_cast<double>(x0) / room : 0.5;
  out.placement_v = room > 0 ? static_cast<double>(y0) / room : 0.5;

  std::vector<std::uint8_t> lit(static_cast<std::size_t>(config.canvas) * config.canvas, 0);
  auto blit = [&](const std::vector<std::uint8_t>& mask, int mask_size, int sx, int sy, int w, int h, int dx,
                  int dy) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!mask[static_cast<std::size_t>(sy + y) * mask_size + sx + x]) continue;
        const int cx = dx + x, cy = dy + y;
        if (cx < 0 || cy < 0 || cx >= config.canvas || cy >= config.canvas) continue;
        lit[static_cast<std::size_t>(cy) * config.canvas + cx] = 1;
      }
    }
  };

  const auto digit = render_glyph(out.label, size, config.stroke_jitter * scale, rng());
  blit(digit, size, 0, 0, size, size, x0, y0);

  const int fs = config.fragment_size;
  for (int f = 0; f < config.noise_fragments; ++f) {
    const int other = static_cast<int>(rng() % 10);
    const auto glyph = render_glyph(other, config.glyph_size, config.stroke_jitter, rng());
    int sx = 0, sy = 0;
    // Prefer a crop that actually holds strokes.
    for (int attempt = 0; attempt < 16; ++attempt) {
      sx = static_cast<int>(rng() % static_cast<std::uint64_t>(config.glyph_size - fs + 1));
      sy = static_cast<int>(rng() % static_cast<std::uint64_t>(config.glyph_size - fs + 1));
      bool any = false;
      for (int y = 0; y < fs && !any; ++y)
        for (int x = 0; x < fs && !any; ++x) any = glyph[static_cast<std::size_t>(sy + y) * config.glyph_size + sx + x];
      if (any) break;
    }
    const int px = static_cast<int>(rng() % static_cast<std::uint64_t>(config.canvas - fs + 1));
    const int py = static_cast<int>(rng() % static_cast<std::uint64_t>(config.canvas - fs + 1));
    blit(glyph, config.glyph_size, sx, sy, fs, fs, px, py);
  }

  std::uniform_int_distribution<std::uint32_t> when(0, config.duration_us - 1);
  for (int y = 0; y < config.canvas; ++y) {
    for (int x = 0; x < config.canvas; ++x) {
      if (!lit[static_cast<std::size_t>(y) * config.canvas + x]) continue;
      for (int k = 0; k < config.events_per_pixel; ++k) {
        events::Event e;
        e.t = when(rng);
        e.x = static_cast<std::uint16_t>(x);
        e.y = static_cast<std::uint16_t>(y);
        e.p = static_cast<std::uint8_t>(rng() & 1u);
        out.events.push_back(e);
      }
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const events::Event& a, const events::Event& b) { return a.t < b.t; });
  out.header.count = out.events.size();
  return out;
}

SyntheticSample generate_synthetic_sample(std::uint64_t seed, const SynthConfig& config) {
  SyntheticEvents ev = generate_synthetic_events(seed, config);
  SyntheticSample s;
  s.sample = events::timebin(ev.events, ev.header, config.timebins);
  s.sample.label = ev.label;
  s.label = ev.label;
  s.bbox = ev.bbox;
  return s;
}

}  // namespace trip::synth

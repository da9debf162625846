#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trip/attention.hpp"
#include "trip/events.hpp"

namespace trip::ppm {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kGray{128, 128, 128};
inline constexpr Rgb kYellow{255, 255, 0};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill = kBlack) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  Rgb at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

std::vector<std::uint8_t> encode_p6(const Image& img);
Image decode_p6(std::span<const std::uint8_t> bytes);

/// Events on black: polarity 1 white, polarity 0 gray (polarity 1 wins where both fire).
Image render_frame(const events::TimebinFrame& frame);

/// Pixel bounds [x0, x1] x [y0, y1] of a region, rounded to the nearest pixel
/// (unclipped; drawing clips).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};
PixelRect rounded_rect(const attention::DapRegion& region);

/// One-pixel outline, clipped to the image.
void draw_rect(Image& img, const PixelRect& rect, Rgb color);

}  // namespace trip::ppm

#include "trip/ppm.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "trip/error.hpp"

namespace trip::ppm {

std::vector<std::uint8_t> encode_p6(const Image& img) {
  const std::string head = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.reserve(out.size() + img.pixels.size() * 3);
  for (const Rgb& p : img.pixels) {
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

Image decode_p6(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw Error(ErrorKind::TruncatedFile, "bad PPM header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw Error(ErrorKind::BadMagic, "not a P6 image");
  pos = 2;
  const long w = number(), h = number(), maxval = number();
  if (maxval != 255) throw Error(ErrorKind::ValueOutOfRange, "only 8-bit PPM is supported");
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() < pos + need) throw Error(ErrorKind::TruncatedFile, "PPM raster is short");
  Image img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = {bytes[pos + 3 * i], bytes[pos + 3 * i + 1], bytes[pos + 3 * i + 2]};
  }
  return img;
}

Image render_frame(const events::TimebinFrame& frame) {
  Image img(frame.width, frame.height);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      if (frame.at(1, y, x) != 0.0) img.at(x, y) = kWhite;
      else if (frame.at(0, y, x) != 0.0) img.at(x, y) = kGray;
    }
  return img;
}

PixelRect rounded_rect(const attention::DapRegion& region) {
  auto r = [](double v) { return static_cast<int>(std::lround(v)); };
  return {r(region.x_min), r(region.y_min), r(region.x_max), r(region.y_max)};
}

void draw_rect(Image& img, const PixelRect& rect, Rgb color) {
  auto put = [&](int x, int y) {
    if (x >= 0 && x < img.width && y >= 0 && y < img.height) img.at(x, y) = color;
  };
  for (int x = rect.x0; x <= rect.x1; ++x) {
    put(x, rect.y0);
    put(x, rect.y1);
  }
  for (int y = rect.y0; y <= rect.y1; ++y) {
    put(rect.x0, y);
    put(rect.x1, y);
  }
}

}  // namespace trip::ppm

#include <algorithm>
#include <map>
#include <random>

#include "common.hpp"
#include "doctest.h"
#include "trip/error.hpp"
#include "trip/events.hpp"
#include "trip/synth.hpp"

using namespace trip;
using events::Event;
using events::EventStreamHeader;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::IoError;
}

std::vector<Event> random_events(std::mt19937_64& rng, int n, int w, int h) {
  std::vector<Event> evs(static_cast<std::size_t>(n));
  std::uint32_t t = 0;
  for (auto& e : evs) {
    t += static_cast<std::uint32_t>(rng() % 50);
    e = {t, static_cast<std::uint16_t>(rng() % w), static_cast<std::uint16_t>(rng() % h),
         static_cast<std::uint8_t>(rng() % 2)};
  }
  return evs;
}

}  // namespace

TEST_SUITE("events") {
  TEST_CASE("EVT1 layout of a single record is bit exact") {
    const std::vector<Event> one{{5, 3, 7, 1}};
    const auto bytes = events::write_event_stream({128, 128, 1}, one);
    const std::vector<std::uint8_t> golden{'E', 'V', 'T', '1', 0x80, 0x00, 0x80, 0x00, 1, 0, 0, 0, 0, 0, 0, 0,
                                           5,   0,   0,   0,   3,    0,    7,    0,    1, 0};
    CHECK(bytes == golden);
    const auto [header, evs] = events::read_event_stream(bytes);
    CHECK(header == EventStreamHeader{128, 128, 1});
    REQUIRE(evs.size() == 1);
    CHECK(evs[0] == one[0]);
  }

  TEST_CASE("empty stream reads back as an empty list") {
    const auto bytes = events::write_event_stream({128, 128, 0}, {});
    CHECK(bytes.size() == events::kEventHeaderBytes);
    const auto [header, evs] = events::read_event_stream(bytes);
    CHECK(header.count == 0);
    CHECK(evs.empty());
  }

  TEST_CASE("10k random events round-trip byte-identically") {
    std::mt19937_64 rng(11);
    const auto evs = random_events(rng, 10000, 346, 224);
    const auto bytes = events::write_event_stream({346, 224, 10000}, evs);
    CHECK(bytes.size() == events::kEventHeaderBytes + 10000 * events::kEventRecordBytes);
    const auto [header, back] = events::read_event_stream(bytes);
    CHECK(back == evs);
    CHECK(events::write_event_stream(header, back) == bytes);
  }

  TEST_CASE("reader rejects malformed files") {
    const std::vector<Event> one{{5, 3, 7, 1}};
    auto bytes = events::write_event_stream({16, 16, 1}, one);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK(kind_of([&] { events::read_event_stream(bad); }) == ErrorKind::BadMagic);

    auto cut = bytes;
    cut.pop_back();
    CHECK(kind_of([&] { events::read_event_stream(cut); }) == ErrorKind::TruncatedFile);
    CHECK(kind_of([&] { events::read_event_stream(std::span(bytes).first(10)); }) == ErrorKind::TruncatedFile);

    auto oob = bytes;
    oob[events::kEventHeaderBytes + 4] = 16;  // x = 16 on a 16-wide sensor
    CHECK(kind_of([&] { events::read_event_stream(oob); }) == ErrorKind::OutOfBoundsEvent);

    auto pol = bytes;
    pol[events::kEventHeaderBytes + 8] = 2;
    CHECK(kind_of([&] { events::read_event_stream(pol); }) == ErrorKind::OutOfBoundsEvent);
  }

  TEST_CASE("writer rejects out-of-bounds events") {
    const std::vector<Event> evs{{0, 4, 0, 0}};
    CHECK(kind_of([&] { events::write_event_stream({4, 4, 1}, evs); }) == ErrorKind::OutOfBoundsEvent);
  }

  TEST_CASE("timebin examples") {
    const EventStreamHeader h{8, 8, 0};
    SUBCASE("one event lands in the first bin") {
      const std::vector<Event> evs{{0, 2, 3, 1}};
      const auto s = events::timebin(evs, h, 4);
      REQUIRE(s.frames.size() == 4);
      CHECK(s.frames[0].at(1, 3, 2) == 1.0);
      CHECK(s.frames[0].nonzero_count() == 1);
      for (int t = 1; t < 4; ++t) CHECK(s.frames[t].all_zero());
    }
    SUBCASE("same pixel twice in one bin counts two") {
      const std::vector<Event> evs{{0, 1, 1, 0}, {1, 1, 1, 0}, {100, 5, 5, 1}};
      const auto s = events::timebin(evs, h, 2);
      CHECK(s.frames[0].at(0, 1, 1) == 2.0);
      CHECK(s.frames[1].at(1, 5, 5) == 1.0);
    }
    SUBCASE("no events") { CHECK(kind_of([&] { events::timebin({}, h, 4); }) == ErrorKind::EmptyStream); }
  }

  TEST_CASE("timebin matches a brute-force histogram and conserves counts") {
    std::mt19937_64 rng(5);
    const auto evs = random_events(rng, 1000, 32, 24);
    const EventStreamHeader h{32, 24, 1000};
    const int T = 32;
    const auto s = events::timebin(evs, h, T);
    const std::uint64_t t0 = evs.front().t, span = evs.back().t - t0;
    std::map<std::tuple<int, int, int, int>, int> hist;
    int per_pol[2] = {0, 0};
    for (const auto& e : evs) {
      const int bin = std::min<int>(T - 1, static_cast<int>((e.t - t0) * T / span));
      ++hist[{bin, e.p, e.y, e.x}];
      ++per_pol[e.p];
    }
    double total[2] = {0, 0};
    bool match = true;
    for (int t = 0; t < T; ++t)
      for (int p = 0; p < 2; ++p)
        for (int y = 0; y < 24; ++y)
          for (int x = 0; x < 32; ++x) {
            const double v = s.frames[t].at(p, y, x);
            total[p] += v;
            auto it = hist.find({t, p, y, x});
            if (v != (it == hist.end() ? 0 : it->second)) match = false;
          }
    CHECK(match);
    CHECK(total[0] == per_pol[0]);
    CHECK(total[1] == per_pol[1]);
  }

  TEST_CASE("maxpool_downsample") {
    SUBCASE("all zero stays zero") {
      const auto out = events::maxpool_downsample(events::TimebinFrame(128, 128), 8);
      CHECK(out.width == 16);
      CHECK(out.height == 16);
      CHECK(out.all_zero());
    }
    SUBCASE("single count moves to its block") {
      events::TimebinFrame f(128, 128);
      f.at(1, 77, 45) = 3;
      const auto out = events::maxpool_downsample(f, 8);
      CHECK(out.at(1, 77 / 8, 45 / 8) == 3);
      CHECK(out.nonzero_count() == 1);
    }
    SUBCASE("random frame matches a naive double loop, including ragged borders") {
      std::mt19937_64 rng(3);
      for (auto [w, h, k] : {std::tuple{64, 64, 4}, std::tuple{346, 224, 8}, std::tuple{10, 7, 4}}) {
        const auto f = testutil::random_frame(rng, w, h, 0.2);
        const auto out = events::maxpool_downsample(f, k);
        CHECK(out.width == (w + k - 1) / k);
        CHECK(out.height == (h + k - 1) / k);
        bool ok = true;
        for (int p = 0; p < 2; ++p)
          for (int oy = 0; oy < out.height; ++oy)
            for (int ox = 0; ox < out.width; ++ox) {
              double m = 0;
              for (int y = oy * k; y < std::min(h, oy * k + k); ++y)
                for (int x = ox * k; x < std::min(w, ox * k + k); ++x) m = std::max(m, f.at(p, y, x));
              if (out.at(p, oy, ox) != m) ok = false;
            }
        CHECK(ok);
      }
    }
    SUBCASE("k = 1 is the identity and pooling is monotone") {
      std::mt19937_64 rng(4);
      auto f = testutil::random_frame(rng, 20, 20, 0.3);
      CHECK(events::maxpool_downsample(f, 1).values == f.values);
      const auto before = events::maxpool_downsample(f, 4);
      f.at(0, 9, 9) += 5;
      const auto after = events::maxpool_downsample(f, 4);
      bool monotone = true;
      for (std::size_t i = 0; i < before.values.size(); ++i) monotone &= after.values[i] >= before.values[i];
      CHECK(monotone);
    }
  }

  TEST_CASE("generator: noise-free fixed-scale digits stay inside their box") {
    synth::SynthConfig cfg;
    cfg.noise_fragments = 0;
    cfg.scale_min = cfg.scale_max = 1.0;
    cfg.timebins = 8;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto s = synth::generate_synthetic_sample(seed, cfg);
      bool inside = true;
      for (const auto& f : s.sample.frames)
        for (int p = 0; p < 2; ++p)
          for (int y = 0; y < f.height; ++y)
            for (int x = 0; x < f.width; ++x)
              if (f.at(p, y, x) != 0 && !s.bbox.contains(x, y)) inside = false;
      CHECK(inside);
      CHECK(s.bbox.x1 - s.bbox.x0 == doctest::Approx(cfg.glyph_size));
    }
  }

  TEST_CASE("generator is deterministic per seed") {
    synth::SynthConfig cfg;
    cfg.timebins = 4;
    const auto a = synth::generate_synthetic_events(99, cfg);
    const auto b = synth::generate_synthetic_events(99, cfg);
    const auto c = synth::generate_synthetic_events(100, cfg);
    CHECK(a.events == b.events);
    CHECK(a.label == b.label);
    CHECK(a.events != c.events);
  }

  TEST_CASE("generator placement is uniform (chi-square over a 4x4 grid)") {
    synth::SynthConfig cfg;
    cfg.timebins = 2;
    cfg.noise_fragments = 0;
    int cells[16] = {};
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      const auto s = synth::generate_synthetic_events(static_cast<std::uint64_t>(i) * 7919 + 1, cfg);
      const int cx = std::min(3, static_cast<int>(s.placement_u * 4));
      const int cy = std::min(3, static_cast<int>(s.placement_v * 4));
      ++cells[cy * 4 + cx];
    }
    double chi2 = 0;
    for (int c : cells) chi2 += (c - n / 16.0) * (c - n / 16.0) / (n / 16.0);
    // 99th percentile of chi-square with 15 degrees of freedom
    CHECK(chi2 < 30.578);
  }

  TEST_CASE("generator rejects invalid configs") {
    synth::SynthConfig cfg;
    cfg.canvas = 40;  // a 2x glyph no longer fits
    CHECK(kind_of([&] { synth::generate_synthetic_sample(1, cfg); }) == ErrorKind::ConfigInvalid);
    cfg = {};
    cfg.timebins = 0;
    CHECK(kind_of([&] { synth::generate_synthetic_sample(1, cfg); }) == ErrorKind::ConfigInvalid);
  }
}

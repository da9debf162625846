#include <random>

#include "common.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracle.hpp"
#include "trip/config.hpp"
#include "trip/error.hpp"
#include "trip/pipesim.hpp"

using namespace trip;
using namespace trip::pipesim;

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

CostModel default_cost() { return CostModel::load(testutil::config_path("cost_model.cfg")); }

events::BinnedSample random_sample(std::mt19937_64& rng, int w, int h, int T, double density) {
  events::BinnedSample s;
  for (int t = 0; t < T; ++t) s.frames.push_back(testutil::random_frame(rng, w, h, density));
  return s;
}

TripModel gesture_model(std::uint64_t seed) {
  auto m = TripModel::init(testutil::load_config_spec("dvsgesture.spec"), seed);
  // a nonzero roi head so the predicted region moves between timebins
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (double& v : m.roi.layers.back().weight.data) v = u(rng);
  return m;
}

}  // namespace

TEST_SUITE("pipesim") {
  TEST_CASE("pipeline algebra") {
    std::vector<std::vector<double>> busy{std::vector<double>(10, 3e-3), std::vector<double>(10, 2e-3)};
    CHECK(sequential_latency(busy) == doctest::Approx(50e-3));
    CHECK(pipelined_latency(busy) == doctest::Approx(32e-3));

    CHECK(pipelined_latency({{5.0}}) == sequential_latency({{5.0}}));
    CHECK(pipelined_latency({}) == 0.0);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 200; ++k) {
      const int S = 1 + static_cast<int>(rng() % 9), T = 1 + static_cast<int>(rng() % 12);
      std::vector<std::vector<double>> b(S, std::vector<double>(T));
      double max_stage = 0;
      for (auto& row : b) {
        double s = 0;
        for (double& v : row) s += v = u(rng);
        max_stage = std::max(max_stage, s);
      }
      const double pipe = pipelined_latency(b), seq = sequential_latency(b);
      CHECK(pipe <= seq * (1 + 1e-12));
      CHECK(pipe >= max_stage * (1 - 1e-12));
      if (S > 1 && T > 1) CHECK(pipe < seq);
    }
  }

  TEST_CASE("default core maps") {
    const auto trip = TripModel::init(testutil::load_config_spec("dvsgesture.spec"), 1);
    const auto map = CoreMap::for_trip(trip);
    REQUIRE(map.cores.size() == 9);
    const std::vector<CoreRole> roles{CoreRole::roi_conv, CoreRole::roi_conv, CoreRole::roi_conv,
                                      CoreRole::roi_rnn_out, CoreRole::roi_gen, CoreRole::cls_conv,
                                      CoreRole::cls_conv, CoreRole::cls_fc, CoreRole::cls_out};
    for (std::size_t c = 0; c < 9; ++c) CHECK(map.cores[c].role == roles[c]);
    CHECK_NOTHROW(map.validate(trip));

    const auto base = net::Model::init(*testutil::load_config_spec("hw_baseline.spec").classifier, 2);
    const auto bmap = CoreMap::for_network(base);
    CHECK(bmap.cores.size() == 6);
    CHECK_NOTHROW(bmap.validate(base));
  }

  TEST_CASE("invalid mappings") {
    const auto trip = TripModel::init(testutil::load_config_spec("dvsgesture.spec"), 1);
    auto map = CoreMap::for_trip(trip);
    auto dropped = map;
    dropped.cores.erase(dropped.cores.begin() + 1);
    CHECK(kind_of([&] { dropped.validate(trip); }) == ErrorKind::MappingInvalid);
    auto two_gen = map;
    two_gen.cores.insert(two_gen.cores.begin() + 5, CoreDesc{CoreRole::roi_gen, NetId::roi, {}});
    CHECK(kind_of([&] { two_gen.validate(trip); }) == ErrorKind::MappingInvalid);
    auto swapped = map;
    std::swap(swapped.cores[0].stages, swapped.cores[1].stages);
    CHECK(kind_of([&] { swapped.validate(trip); }) == ErrorKind::MappingInvalid);
    auto twice = map;
    twice.cores[6].stages.push_back(twice.cores[6].stages.back());
    CHECK(kind_of([&] { twice.validate(trip); }) == ErrorKind::MappingInvalid);
    events::BinnedSample s;
    s.frames.assign(1, events::TimebinFrame(128, 128));
    CHECK(kind_of([&] { simulate(trip, s, dropped, default_cost(), Schedule::sequential); }) ==
          ErrorKind::MappingInvalid);
  }

  TEST_CASE("cost model file") {
    const auto c = default_cost();
    CHECK(c.time_per_mac > 0);
    CHECK(c.static_power_per_core > 0);
    CHECK(kind_of([] { CostModel::from_config(config::KeyValues::parse("time_per_mac = -1\n")); }) ==
          ErrorKind::ConfigInvalid);
    CHECK(kind_of([] { CostModel::from_config(config::KeyValues::parse("time_per_flop = 1\n")); }) ==
          ErrorKind::ConfigInvalid);
  }

  TEST_CASE("zero-event sample costs only static energy") {
    const auto trip = gesture_model(3);
    events::BinnedSample s;
    s.frames.assign(4, events::TimebinFrame(128, 128));
    for (auto sched : {Schedule::sequential, Schedule::pipelined}) {
      const auto r = simulate(trip, s, CoreMap::for_trip(trip), default_cost(), sched);
      CHECK(r.total_macs == 0);
      CHECK(r.dynamic_energy_j == 0.0);
      CHECK(r.energy_j == r.static_energy_j);
      for (const auto& tb : r.timebins)
        for (const auto& c : tb.cores) CHECK(c.busy_s == 0.0);
    }
  }

  TEST_CASE("trip simulation: counters, totals, schedules") {
    std::mt19937_64 rng(4);
    const auto trip = gesture_model(4);
    const auto sample = random_sample(rng, 128, 128, 4, 0.02);
    const auto map = CoreMap::for_trip(trip);
    const auto cost = default_cost();
    const auto seq = simulate(trip, sample, map, cost, Schedule::sequential);
    const auto pipe = simulate(trip, sample, map, cost, Schedule::pipelined);

    CHECK(pipe.latency_s <= seq.latency_s);
    CHECK(pipe.total_macs == seq.total_macs);
    CHECK(pipe.dynamic_energy_j == seq.dynamic_energy_j);
    CHECK(pipe.energy_j <= seq.energy_j);

    // one extra leading warm-up class, then the sequential sequence
    REQUIRE(pipe.classes.size() == seq.classes.size() + 1);
    CHECK(std::equal(seq.classes.begin(), seq.classes.end(), pipe.classes.begin() + 1));
    CHECK(pipe.predicted == seq.predicted);

    // energy additivity and per-timebin totals
    double dyn = 0;
    for (const auto& tb : seq.timebins) {
      double e = 0, b = 0;
      std::uint64_t m = 0;
      for (const auto& c : tb.cores) {
        e += c.energy_j;
        b += c.busy_s;
        m += c.macs;
        CHECK(c.busy_s == doctest::Approx(c.macs * cost.time_per_mac + (c.events_in + c.events_out) * cost.time_per_event_io));
      }
      CHECK(tb.energy_j == doctest::Approx(e));
      CHECK(tb.busy_s == doctest::Approx(b));
      CHECK(tb.macs == m);
      dyn += e;
    }
    CHECK(seq.energy_j == doctest::Approx(dyn + cost.static_power_per_core * 9 * seq.latency_s));

    // per-core MACs equal standalone forward_sparse counters
    const auto inf = infer(trip, sample, {CropMode::dap, true});
    net::RecurrentState hr, hc;
    for (std::size_t t = 0; t < sample.frames.size(); ++t) {
      net::MacCounter rc, cc;
      hr = net::forward_sparse(trip.roi, net::SparseActivations::from_dense(sample.frames[t].to_tensor()), hr, rc).state;
      hc = net::forward_sparse(trip.classifier, net::SparseActivations::from_dense(inf.steps[t].crop.to_tensor()), hc, cc).state;
      for (std::size_t c = 0; c < map.cores.size(); ++c) {
        const auto& cd = map.cores[c];
        if (cd.role == CoreRole::roi_gen) {
          CHECK(seq.timebins[t].cores[c].macs == inf.steps[t].crop_ops);
          continue;
        }
        const auto& counter = cd.net == NetId::roi ? rc : cc;
        std::uint64_t m = 0;
        for (int s : cd.stages) m += counter.stages[s].macs;
        CHECK(seq.timebins[t].cores[c].macs == m);
      }
    }

    // determinism and report formats
    CHECK(simulate(trip, sample, map, cost, Schedule::sequential).trace_csv() == seq.trace_csv());
    const auto csv = seq.trace_csv();
    CHECK(csv.rfind("timebin,core_id,macs,events_in,events_out,busy_s,energy_j\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 9);
    const auto j = nlohmann::json::parse(pipe.summary());
    CHECK(j["schedule"] == "pipelined");
    CHECK(j["cores"] == 9);
    CHECK(j["total_macs"] == pipe.total_macs);
  }

  TEST_CASE("single network simulation matches its counters") {
    std::mt19937_64 rng(5);
    auto spec = testutil::load_config_spec("baseline16.spec");
    const auto& ns = spec.classifier ? *spec.classifier : *spec.roi;
    const auto m = net::Model::init(ns, 6);
    const auto sample = random_sample(rng, ns.width, ns.height, 3, 0.05);
    const auto map = CoreMap::for_network(m);
    const auto r = simulate_network(m, sample, map, default_cost(), Schedule::pipelined);
    net::RecurrentState h;
    for (std::size_t t = 0; t < 3; ++t) {
      net::MacCounter c;
      h = net::forward_sparse(m, net::SparseActivations::from_dense(sample.frames[t].to_tensor()), h, c).state;
      std::uint64_t sum = 0;
      for (const auto& tc : r.timebins[t].cores) sum += tc.macs;
      CHECK(sum == c.total_macs());
    }
    CHECK(r.latency_s <= simulate_network(m, sample, map, default_cost(), Schedule::sequential).latency_s);
  }

  TEST_CASE("depth-first schedule") {
    const auto spec = *net::parse_spec_file(
                           "net classifier 12x12\nlayer conv in=2 out=3 k=3 pad=1\nlayer conv in=3 out=2 k=3 pad=1\n"
                           "layer maxpool k=2\nlayer output in=72 units=4\n")
                           .classifier;
    auto m = net::Model::init(spec, 7);
    for (auto& p : m.layers) p.bias.fill(0.0);
    for (double& v : m.layers[0].weight.data) v = std::abs(v);
    for (double& v : m.layers[1].weight.data) v = std::abs(v);

    SUBCASE("single event alternates between the layers") {
      Tensor in({2, 12, 12});
      in.data[5 * 12 + 6] = 1.0;
      net::MacCounter c;
      std::vector<net::SparseActivations> levels;
      net::forward_sparse(m, net::SparseActivations::from_dense(in), {}, c, &levels);
      REQUIRE(levels[1].entries.size() > 1);
      REQUIRE(!levels[2].entries.empty());
      const auto ops = depth_first_schedule(m, levels);
      CHECK(validate_schedule(m, levels, ops));
      for (std::size_t i = 0; i + 1 < ops.size(); i += 2) {
        CHECK(ops[i].kind == ScheduleOp::produce);
        CHECK(ops[i + 1].kind == ScheduleOp::consume);
        CHECK(ops[i + 1].level == ops[i].level);
        CHECK(ops[i + 1].event == ops[i].event);
      }
      std::size_t first_l2 = ops.size(), last_l1 = 0;
      for (std::size_t i = 0; i < ops.size(); ++i) {
        if (ops[i].level == 2) first_l2 = std::min(first_l2, i);
        if (ops[i].level == 1) last_l1 = i;
      }
      CHECK(first_l2 < last_l1);
    }
    SUBCASE("empty input gives an empty trace") {
      CHECK(depth_first_schedule(m, {}).empty());
      CHECK(validate_schedule(m, {}, {}));
    }
    SUBCASE("random inputs replay cleanly; tampered traces do not") {
      std::mt19937_64 rng(8);
      for (int k = 0; k < 10; ++k) {
        auto in = testutil::random_tensor(rng, {2, 12, 12}, 0.0, 1.0);
        testutil::sparsify(rng, in, 0.9);
        net::MacCounter c;
        std::vector<net::SparseActivations> levels;
        net::forward_sparse(m, net::SparseActivations::from_dense(in), {}, c, &levels);
        const auto ops = depth_first_schedule(m, levels);
        std::size_t events = 0;
        for (const auto& l : levels) events += l.entries.size();
        CHECK(ops.size() == 2 * events);
        std::string why;
        CHECK(validate_schedule(m, levels, ops, &why));
        INFO(why);

        // moving the last op (an output event) to the front breaks its dependencies
        auto bad = ops;
        std::rotate(bad.begin(), bad.end() - 2, bad.end());
        if (bad.front().level > 0) CHECK_FALSE(validate_schedule(m, levels, bad));
        auto dup = ops;
        dup.push_back(ops.front());
        CHECK_FALSE(validate_schedule(m, levels, dup));
      }
    }
  }
}

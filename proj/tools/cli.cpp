#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "trip/bytes.hpp"
#include "trip/error.hpp"
#include "trip/events.hpp"
#include "trip/pipeline.hpp"
#include "trip/pipesim.hpp"
#include "trip/ppm.hpp"
#include "trip/run_settings.hpp"
#include "trip/train.hpp"
#include "trip/weights_io.hpp"

namespace fs = std::filesystem;

namespace trip::cli {
namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <class F>
void parallel_for(int n, int jobs, F&& body) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  bytes::write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::string& path) {
  const auto data = bytes::read_file(path);
  return std::string(data.begin(), data.end());
}

struct LoadedSample {
  ManifestRow row;
  events::BinnedSample sample;
};

events::BinnedSample load_sample(const std::string& path, int timebins) {
  const auto data = bytes::read_file(path);
  const auto [header, evs] = events::read_event_stream(data);
  return events::timebin(evs, header, timebins);
}

std::vector<LoadedSample> load_dir(const std::string& dir, int timebins, int jobs) {
  const auto rows = parse_manifest(read_text((fs::path(dir) / "manifest.csv").string()));
  std::vector<LoadedSample> out(rows.size());
  parallel_for(static_cast<int>(rows.size()), jobs, [&](int i) {
    out[i].row = rows[i];
    out[i].sample = load_sample((fs::path(dir) / rows[i].filename).string(), timebins);
    out[i].sample.label = rows[i].label;
  });
  return out;
}

grad::Dataset to_dataset(const std::vector<LoadedSample>& loaded) {
  grad::Dataset d;
  for (const auto& s : loaded) d.push_back({s.sample, s.row.label, s.row.bbox});
  return d;
}

TripModel load_trip(const std::string& spec_path, const std::string& weights_dir, std::uint64_t seed) {
  const net::SpecFile spec = net::load_spec_file(spec_path);
  TripModel::require_complete(spec);
  if (weights_dir.empty()) return TripModel::init(spec, seed);
  TripModel m;
  m.roi = net::load_weights(bytes::read_file((fs::path(weights_dir) / "roi.trpw").string()), *spec.roi);
  m.classifier = net::load_weights(bytes::read_file((fs::path(weights_dir) / "cls.trpw").string()), *spec.classifier);
  m.attention = *spec.attention;
  return m;
}

void save_trip(const TripModel& m, const std::string& dir) {
  ensure_dir(dir);
  bytes::write_file((fs::path(dir) / "roi.trpw").string(), net::save_weights(m.roi));
  bytes::write_file((fs::path(dir) / "cls.trpw").string(), net::save_weights(m.classifier));
}

const net::NetworkSpec& single_net(const net::SpecFile& spec, const std::string& path) {
  if (spec.roi && spec.classifier) throw Error(ErrorKind::ConfigInvalid, path + ": baseline spec must hold a single net");
  if (spec.classifier) return *spec.classifier;
  if (spec.roi) return *spec.roi;
  throw Error(ErrorKind::ConfigInvalid, path + ": no net defined");
}

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::ConfigInvalid, "--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::uint64_t seed = 42;
  std::string out_dir;
  int count = 64;
  int canvas = 128;
  int noise = 8;
  int timebins = 32;
  bool random_labels = false;
  int jobs = 1;
};

int cmd_gen_data(const GenDataArgs& a) {
  synth::SynthConfig cfg;
  cfg.canvas = a.canvas;
  cfg.noise_fragments = a.noise;
  cfg.timebins = a.timebins;
  cfg.validate();
  if (a.count < 0) throw Error(ErrorKind::ConfigInvalid, "--count must be >= 0");
  ensure_dir(a.out_dir);
  std::vector<ManifestRow> rows(static_cast<std::size_t>(a.count));
  parallel_for(a.count, a.jobs, [&](int i) {
    synth::SynthConfig c = cfg;
    if (!a.random_labels) c.forced_label = i % 10;
    const auto ev = synth::generate_synthetic_events(grad::sample_seed(a.seed, i), c);
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05d.evt", i);
    bytes::write_file((fs::path(a.out_dir) / name).string(), events::write_event_stream(ev.header, ev.events));
    rows[i] = {name, ev.label, ev.bbox};
  });
  write_text((fs::path(a.out_dir) / "manifest.csv").string(), write_manifest(rows));
  std::cout << "wrote " << a.count << " samples to " << a.out_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string config;
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string data, test_data;
  std::string out;
  std::string mode = "tgk";
  bool qat = false;
  int jobs = 1;
};

int cmd_train(const TrainArgs& a) {
  auto overrides = parse_overrides(a.sets);
  if (a.seed) overrides.emplace_back("seed", std::to_string(*a.seed));
  RunSettings rs = RunSettings::load(a.config, overrides);
  if (!a.spec.empty()) rs.spec = a.spec;
  if (rs.spec.empty()) throw Error(ErrorKind::ConfigInvalid, "no network spec given (config key 'spec' or --spec)");
  const CropMode mode = parse_crop_mode(a.mode);
  rs.train.validate();

  const grad::Dataset train_set = a.data.empty() ? grad::make_dataset(rs.data_seed, rs.train_count, rs.synth)
                                                 : to_dataset(load_dir(a.data, rs.synth.timebins, a.jobs));
  const grad::Dataset test_set = !a.test_data.empty() ? to_dataset(load_dir(a.test_data, rs.synth.timebins, a.jobs))
                                                      : grad::make_dataset(rs.test_seed, rs.test_count, rs.synth);
  const grad::Dataset* test = test_set.empty() ? nullptr : &test_set;

  const net::SpecFile spec = net::load_spec_file(rs.spec);
  TripModel model = TripModel::init(spec, rs.train.seed);
  ensure_dir(a.out);
  const grad::TrainLog log = grad::train(model, train_set, test, rs.train, CropMode::tgk);
  write_text((fs::path(a.out) / "metrics.csv").string(), log.to_csv());
  if (a.qat) {
    const auto qlog = grad::qat_finetune(model, train_set, test, rs.train, CropMode::tgk);
    write_text((fs::path(a.out) / "qat_metrics.csv").string(), qlog.to_csv());
  }
  if (mode == CropMode::dap) {
    const auto dlog = grad::dap_finetune(model, train_set, test, rs.train);
    write_text((fs::path(a.out) / "dap_metrics.csv").string(), dlog.to_csv());
  }
  save_trip(model, a.out);

  const auto tr = grad::evaluate(model, train_set, mode);
  std::cout << "train_acc " << short_num(tr.accuracy) << " roi_center_distance " << short_num(tr.mean_center_distance);
  if (test) std::cout << " test_acc " << short_num(grad::evaluate(model, *test, mode).accuracy);
  std::cout << " mode " << to_string(mode) << "\n";
  return 0;
}

struct InferArgs {
  std::string spec, weights, data, out;
  std::string mode = "dap";
  std::string path = "sparse";
  int timebins = 32;
  std::uint64_t seed = 42;
  int jobs = 1;
};

int cmd_infer(const InferArgs& a) {
  const CropMode mode = parse_crop_mode(a.mode);
  if (a.path != "sparse" && a.path != "dense") throw Error(ErrorKind::ConfigInvalid, "--path must be sparse or dense");
  const TripModel model = load_trip(a.spec, a.weights, a.seed);
  const auto samples = load_dir(a.data, a.timebins, a.jobs);
  std::vector<int> predicted(samples.size());
  parallel_for(static_cast<int>(samples.size()), a.jobs, [&](int i) {
    predicted[i] = infer(model, samples[i].sample, {mode, a.path == "sparse"}).predicted;
  });
  std::ostringstream csv;
  csv << "filename,label,predicted\n";
  int correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    csv << samples[i].row.filename << ',' << samples[i].row.label << ',' << predicted[i] << '\n';
    correct += predicted[i] == samples[i].row.label;
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(a.out, csv.str());
    std::cout << "accuracy " << short_num(samples.empty() ? 0.0 : static_cast<double>(correct) / samples.size()) << " ("
              << correct << "/" << samples.size() << ")\n";
  }
  return 0;
}

struct BenchArgs {
  std::string spec, weights, baseline, baseline_weights, cost_model, data, out;
  std::string mode = "dap";
  std::string sched = "pipe";
  int timebins = 32;
  int count = 8;
  int canvas = 128;
  int noise = 8;
  std::uint64_t seed = 42;
  int jobs = 1;
};

struct BenchRow {
  std::string name;
  pipesim::SimResult trip, base;
};

int cmd_bench(const BenchArgs& a) {
  const CropMode mode = parse_crop_mode(a.mode);
  const pipesim::Schedule sched = pipesim::parse_schedule(a.sched);
  const pipesim::CostModel cost = pipesim::CostModel::load(a.cost_model);
  const TripModel model = load_trip(a.spec, a.weights, a.seed);
  const pipesim::CoreMap map = pipesim::CoreMap::for_trip(model);

  std::optional<net::Model> base;
  std::optional<pipesim::CoreMap> base_map;
  if (!a.baseline.empty()) {
    const net::SpecFile bfile = net::load_spec_file(a.baseline);
    const net::NetworkSpec& bspec = single_net(bfile, a.baseline);
    base = a.baseline_weights.empty() ? net::Model::init(bspec, a.seed)
                                      : net::load_weights(bytes::read_file(a.baseline_weights), bspec);
    base_map = pipesim::CoreMap::for_network(*base);
  }

  std::vector<LoadedSample> samples;
  if (!a.data.empty()) {
    samples = load_dir(a.data, a.timebins, a.jobs);
  } else {
    if (a.count < 0) throw Error(ErrorKind::ConfigInvalid, "--count must be >= 0");
    synth::SynthConfig cfg;
    cfg.canvas = a.canvas;
    cfg.noise_fragments = a.noise;
    cfg.timebins = a.timebins;
    cfg.validate();
    const grad::Dataset d = grad::make_dataset(a.seed, a.count, cfg);
    for (int i = 0; i < a.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "synthetic_%05d", i);
      samples.push_back({{name, d[i].label, d[i].bbox}, d[i].sample});
    }
  }

  std::vector<BenchRow> rows(samples.size());
  parallel_for(static_cast<int>(samples.size()), a.jobs, [&](int i) {
    rows[i].name = fs::path(samples[i].row.filename).stem().string();
    rows[i].trip = pipesim::simulate(model, samples[i].sample, map, cost, sched, mode);
    if (base) rows[i].base = pipesim::simulate_network(*base, samples[i].sample, *base_map, cost, sched);
  });

  std::ostringstream csv;
  csv << "filename,macs,latency_s,energy_j";
  if (base) csv << ",baseline_macs,baseline_latency_s,baseline_energy_j";
  csv << '\n';
  double macs = 0, lat = 0, en = 0, bmacs = 0, blat = 0, ben = 0;
  std::size_t bins = 0;
  for (const auto& r : rows) {
    csv << r.name << ',' << r.trip.total_macs << ',' << num(r.trip.latency_s) << ',' << num(r.trip.energy_j);
    if (base) csv << ',' << r.base.total_macs << ',' << num(r.base.latency_s) << ',' << num(r.base.energy_j);
    csv << '\n';
    macs += static_cast<double>(r.trip.total_macs);
    lat += r.trip.latency_s;
    en += r.trip.energy_j;
    bmacs += static_cast<double>(r.base.total_macs);
    blat += r.base.latency_s;
    ben += r.base.energy_j;
    bins += r.trip.timebins.size();
  }
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_text((fs::path(a.out) / "bench.csv").string(), csv.str());
    for (const auto& r : rows) {
      write_text((fs::path(a.out) / (r.name + ".trace.csv")).string(), r.trip.trace_csv());
      write_text((fs::path(a.out) / (r.name + ".summary.json")).string(), r.trip.summary());
      if (base) {
        write_text((fs::path(a.out) / (r.name + ".baseline.trace.csv")).string(), r.base.trace_csv());
        write_text((fs::path(a.out) / (r.name + ".baseline.summary.json")).string(), r.base.summary());
      }
    }
  }

  const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  const double per_bin = bins ? macs / static_cast<double>(bins) : 0.0;
  std::cout << "samples " << rows.size() << " timebins " << a.timebins << " schedule " << pipesim::to_string(sched)
            << " mode " << to_string(mode) << "\n";
  std::cout << "trip cores " << map.cores.size() << " effective_macs_per_timebin " << short_num(per_bin)
            << " total_macs " << num(macs) << " mean_latency_s " << short_num(lat / n) << " mean_energy_j "
            << short_num(en / n) << "\n";
  if (base) {
    const double bper_bin = bins ? bmacs / static_cast<double>(bins) : 0.0;
    std::cout << "baseline cores " << base_map->cores.size() << " effective_macs_per_timebin " << short_num(bper_bin)
              << " total_macs " << num(bmacs) << " mean_latency_s " << short_num(blat / n) << " mean_energy_j "
              << short_num(ben / n) << "\n";
    auto ratio = [](double b, double t) { return t > 0 ? short_num(b / t) : std::string("inf"); };
    std::cout << "baseline/trip macs " << ratio(bmacs, macs) << " latency " << ratio(blat, lat) << " energy "
              << ratio(ben, en) << "\n";
  }
  return 0;
}

struct VizArgs {
  std::string spec, weights, input, out;
  std::string mode = "dap";
  int timebins = 32;
  std::uint64_t seed = 42;
};

int cmd_viz(const VizArgs& a) {
  const CropMode mode = parse_crop_mode(a.mode);
  const TripModel model = load_trip(a.spec, a.weights, a.seed);
  const events::BinnedSample sample = load_sample(a.input, a.timebins);
  const InferenceResult res = infer(model, sample, {mode, false});
  ensure_dir(a.out);
  const std::string stem = fs::path(a.input).stem().string();
  for (std::size_t t = 0; t < sample.frames.size(); ++t) {
    ppm::Image img = ppm::render_frame(sample.frames[t]);
    ppm::draw_rect(img, ppm::rounded_rect(res.steps[t].region), ppm::kYellow);
    char name[32];
    std::snprintf(name, sizeof name, "_t%03zu.ppm", t);
    bytes::write_file((fs::path(a.out) / (stem + name)).string(), ppm::encode_p6(img));
  }
  std::cout << "wrote " << sample.frames.size() << " frames to " << a.out << " predicted " << res.predicted << "\n";
  return 0;
}

bool is_config_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::ValueOutOfRange:
    case ErrorKind::MappingInvalid:
    case ErrorKind::ScheduleIncomplete:
    case ErrorKind::DisconnectedLoss:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string write_manifest(const std::vector<ManifestRow>& rows) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& r : rows) {
    out << r.filename << ',' << r.label << ',' << num(r.bbox.x0) << ',' << num(r.bbox.y0) << ',' << num(r.bbox.x1) << ','
        << num(r.bbox.y1) << '\n';
  }
  return out.str();
}

std::vector<ManifestRow> parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw Error(ErrorKind::IoError, "manifest header must be '" + std::string(kManifestHeader) + "'");
  }
  std::vector<ManifestRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    try {
      if (f.size() != 6) throw std::invalid_argument("field count");
      std::size_t used = 0;
      ManifestRow r;
      r.filename = f[0];
      r.label = std::stoi(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument("label");
      double* box[4] = {&r.bbox.x0, &r.bbox.y0, &r.bbox.x1, &r.bbox.y1};
      for (int k = 0; k < 4; ++k) {
        *box[k] = std::stod(f[2 + k], &used);
        if (used != f[2 + k].size()) throw std::invalid_argument("bbox");
      }
      if (r.filename.empty() || r.filename.find('/') != std::string::npos) throw std::invalid_argument("filename");
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw Error(ErrorKind::IoError, "malformed manifest line " + std::to_string(lineno) + ": " + line);
    }
  }
  return rows;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Event-based hard-attention classification pipeline"};
  app.name("trip");
  app.require_subcommand(1);
  app.set_version_flag("--version", "trip 1.0");

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic noisy-digit dataset (EVT1 files + manifest.csv)");
  g->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  g->add_option("--out-dir,--out", gen.out_dir, "Output directory")->required();
  g->add_option("--count", gen.count, "Number of samples")->capture_default_str();
  g->add_option("--canvas", gen.canvas, "Canvas width and height")->capture_default_str();
  g->add_option("--noise", gen.noise, "Noise fragments per sample")->capture_default_str();
  g->add_option("--timebins", gen.timebins, "Timebins the strokes are spread over")->capture_default_str();
  g->add_flag("--random-labels", gen.random_labels, "Draw labels from the seed instead of cycling 0..9");
  g->add_option("--jobs", gen.jobs, "Parallel workers")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train both nets end to end and write roi.trpw, cls.trpw and metrics.csv");
  t->add_option("--config", tr.config, "Run config (key = value)")->required();
  t->add_option("--spec", tr.spec, "Network spec (overrides the config)");
  t->add_option("--seed", tr.seed, "Training seed (overrides the config)");
  t->add_option("--set", tr.sets, "Config override key=value (repeatable)");
  t->add_option("--data", tr.data, "Training set directory (default: synthesize from the config)");
  t->add_option("--test-data", tr.test_data, "Test set directory (default: synthesize from the config)");
  t->add_option("--out,--weights", tr.out, "Output directory")->required();
  t->add_option("--mode", tr.mode, "tgk, or dap to fine-tune the classifier on DAP crops afterwards")
      ->capture_default_str();
  t->add_flag("--qat", tr.qat, "Quantization-aware fine-tuning after training");
  t->add_option("--jobs", tr.jobs, "Parallel workers for loading data")->capture_default_str();

  InferArgs inf;
  auto* i = app.add_subcommand("infer", "Classify a dataset directory and write predictions CSV");
  i->add_option("--spec", inf.spec, "Network spec")->required();
  i->add_option("--weights", inf.weights, "Directory holding roi.trpw and cls.trpw (default: random init)");
  i->add_option("--data", inf.data, "Dataset directory with manifest.csv")->required();
  i->add_option("--out", inf.out, "Predictions CSV (default: stdout)");
  i->add_option("--mode", inf.mode, "tgk|dap")->capture_default_str();
  i->add_option("--path", inf.path, "sparse|dense")->capture_default_str();
  i->add_option("--timebins", inf.timebins, "Timebins per sample")->capture_default_str();
  i->add_option("--seed", inf.seed, "Init seed when no weights are given")->capture_default_str();
  i->add_option("--jobs", inf.jobs, "Parallel workers")->capture_default_str();

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Effective MACs, simulated latency and energy, optionally against a baseline");
  b->add_option("--spec", be.spec, "Network spec")->required();
  b->add_option("--weights", be.weights, "Directory holding roi.trpw and cls.trpw (default: random init)");
  b->add_option("--baseline", be.baseline, "Single-net baseline spec");
  b->add_option("--baseline-weights", be.baseline_weights, "Baseline TRPW file (default: random init)");
  b->add_option("--cost-model", be.cost_model, "Cost model config")->required();
  b->add_option("--data", be.data, "Dataset directory (default: synthesize --count samples)");
  b->add_option("--out", be.out, "Directory for bench.csv and per-sample traces");
  b->add_option("--mode", be.mode, "tgk|dap")->capture_default_str();
  b->add_option("--sched", be.sched, "seq|pipe")->capture_default_str();
  b->add_option("--timebins", be.timebins, "Timebins per sample")->capture_default_str();
  b->add_option("--count", be.count, "Synthetic samples when --data is absent")->capture_default_str();
  b->add_option("--canvas", be.canvas, "Synthetic canvas size")->capture_default_str();
  b->add_option("--noise", be.noise, "Synthetic noise fragments")->capture_default_str();
  b->add_option("--seed", be.seed, "Data and init seed")->capture_default_str();
  b->add_option("--jobs", be.jobs, "Parallel workers")->capture_default_str();

  VizArgs vz;
  auto* v = app.add_subcommand("viz", "Write one PPM per timebin with the ROI rectangle overlaid");
  v->add_option("--spec", vz.spec, "Network spec")->required();
  v->add_option("--weights", vz.weights, "Directory holding roi.trpw and cls.trpw (default: random init)");
  v->add_option("--input", vz.input, "EVT1 file")->required();
  v->add_option("--out", vz.out, "Output directory")->required();
  v->add_option("--mode", vz.mode, "tgk|dap")->capture_default_str();
  v->add_option("--timebins", vz.timebins, "Timebins")->capture_default_str();
  v->add_option("--seed", vz.seed, "Init seed when no weights are given")->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR " << to_string(ErrorKind::ConfigInvalid) << ": " << e.what() << "\n";
    return 2;
  }

  try {
    if (g->parsed()) return cmd_gen_data(gen);
    if (t->parsed()) return cmd_train(tr);
    if (i->parsed()) return cmd_infer(inf);
    if (b->parsed()) return cmd_bench(be);
    if (v->parsed()) return cmd_viz(vz);
  } catch (const Error& e) {
    std::cerr << "ERROR " << to_string(e.kind()) << ": " << e.detail() << "\n";
    return is_config_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "ERROR " << to_string(ErrorKind::IoError) << ": " << e.what() << "\n";
    return 3;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args);
}

}  // namespace trip::cli

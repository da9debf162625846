#include "trip/run_settings.hpp"

#include <filesystem>

#include "trip/error.hpp"

namespace trip {

RunSettings RunSettings::from_config(const config::KeyValues& kv) {
  kv.require_known({"spec", "seed", "data_seed", "test_seed", "train_count", "test_count", "canvas", "noise",
                    "timebins", "scale_min", "scale_max", "events_per_pixel", "duration_us", "lr", "optimizer",
                    "lambda", "lambda_warmup", "epochs", "batch_size", "train_roi", "train_classifier",
                    "bn_momentum", "stop_train_acc", "eval_every", "qat_schedule", "qat_epochs", "dap_epochs",
                    "dap_lr", "augment_shift", "roi_lr_scale"});
  RunSettings r;
  r.spec = kv.get("spec");
  r.data_seed = kv.get_u64("data_seed", r.data_seed);
  r.test_seed = kv.get_u64("test_seed", r.test_seed);
  r.train_count = kv.get_int("train_count", r.train_count);
  r.test_count = kv.get_int("test_count", r.test_count);
  auto& s = r.synth;
  s.canvas = kv.get_int("canvas", s.canvas);
  s.noise_fragments = kv.get_int("noise", s.noise_fragments);
  s.timebins = kv.get_int("timebins", s.timebins);
  s.scale_min = kv.get_double("scale_min", s.scale_min);
  s.scale_max = kv.get_double("scale_max", s.scale_max);
  s.events_per_pixel = kv.get_int("events_per_pixel", s.events_per_pixel);
  s.duration_us = static_cast<std::uint32_t>(kv.get_u64("duration_us", s.duration_us));
  s.validate();
  auto& t = r.train;
  t.seed = kv.get_u64("seed", t.seed);
  t.lr = kv.get_double("lr", t.lr);
  const std::string opt = kv.get("optimizer", "adam");
  if (opt == "adam") t.optimizer = grad::Optimizer::adam;
  else if (opt == "sgd") t.optimizer = grad::Optimizer::sgd;
  else throw Error(ErrorKind::ConfigInvalid, "optimizer must be adam or sgd, got '" + opt + "'");
  t.lambda = kv.get_double("lambda", t.lambda);
  t.lambda_warmup = kv.get_double("lambda_warmup", t.lambda_warmup);
  t.epochs = kv.get_int("epochs", t.epochs);
  t.batch_size = kv.get_int("batch_size", t.batch_size);
  t.train_roi = kv.get_bool("train_roi", t.train_roi);
  t.train_classifier = kv.get_bool("train_classifier", t.train_classifier);
  t.bn_momentum = kv.get_double("bn_momentum", t.bn_momentum);
  t.stop_train_acc = kv.get_double("stop_train_acc", t.stop_train_acc);
  t.eval_every = kv.get_int("eval_every", t.eval_every);
  for (const auto& ref : kv.get_list("qat_schedule")) t.qat_schedule.push_back(grad::LayerRef::parse(ref));
  t.qat_epochs = kv.get_int("qat_epochs", t.qat_epochs);
  t.dap_epochs = kv.get_int("dap_epochs", t.dap_epochs);
  t.dap_lr = kv.get_double("dap_lr", t.dap_lr);
  t.augment_shift = kv.get_int("augment_shift", t.augment_shift);
  t.roi_lr_scale = kv.get_double("roi_lr_scale", t.roi_lr_scale);
  t.validate();
  if (r.train_count < 0 || r.test_count < 0) throw Error(ErrorKind::ConfigInvalid, "sample counts must be >= 0");
  return r;
}

RunSettings RunSettings::load(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  config::KeyValues kv = config::KeyValues::load(path);
  for (const auto& [k, v] : overrides) kv.set(k, v);
  RunSettings r = from_config(kv);
  if (!r.spec.empty() && std::filesystem::path(r.spec).is_relative()) {
    r.spec = (std::filesystem::path(path).parent_path() / r.spec).string();
  }
  return r;
}

}  // namespace trip

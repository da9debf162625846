#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "trip/config.hpp"
#include "trip/train.hpp"

namespace trip {

/// Everything a training run reads from its `key = value` config file.
struct RunSettings {
  std::string spec;  // network spec path, relative to the config file unless absolute
  synth::SynthConfig synth;
  grad::TrainConfig train;
  std::uint64_t data_seed = 42;
  std::uint64_t test_seed = 4242;
  int train_count = 64;
  int test_count = 256;

  static RunSettings from_config(const config::KeyValues& kv);
  /// Loads a config file, applies `overrides` on top and resolves `spec` against
  /// the file's directory.
  static RunSettings load(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});
};

}  // namespace trip

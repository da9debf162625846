#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trip/attention.hpp"
#include "trip/events.hpp"
#include "trip/model.hpp"

namespace trip {

enum class CropMode { tgk, dap };

const char* to_string(CropMode mode);
CropMode parse_crop_mode(const std::string& name);

/// ROI-prediction net, classifier and the attention geometry that links them.
struct TripModel {
  net::Model roi;
  net::Model classifier;
  net::AttentionSettings attention;

  int width() const { return roi.spec.width; }
  int height() const { return roi.spec.height; }
  int grid() const { return attention.grid.grid; }
  attention::DecodeConfig decode_config() const;

  static TripModel init(const net::SpecFile& spec, std::uint64_t seed);
  /// Throws ConfigInvalid unless the spec file carries both nets and attention settings.
  static void require_complete(const net::SpecFile& spec);
};

/// Per-timebin record of one inference.
struct TimebinResult {
  attention::RawRoiOutput raw;
  attention::RoiParams roi;
  attention::DapRegion region;
  attention::RoiFrame crop;
  std::vector<double> logits;
  bool roi_triggered = false;
  bool classifier_triggered = false;
  /// Counters of the two nets (sparse path only) and the crop's multiply/add count.
  net::MacCounter roi_counter;
  net::MacCounter classifier_counter;
  std::uint64_t crop_ops = 0;
  std::uint64_t crop_events_in = 0;
  std::uint64_t crop_events_out = 0;
};

struct InferenceResult {
  std::vector<TimebinResult> steps;
  std::vector<double> mean_logits;
  int predicted = 0;

  int step_class(std::size_t t) const;
};

struct InferenceOptions {
  CropMode mode = CropMode::tgk;
  bool sparse = false;
};

/// Sequential evaluation: each timebin is cropped with the ROI predicted from
/// that same timebin. Prediction is the argmax of the mean logits.
InferenceResult infer(const TripModel& model, const events::BinnedSample& sample, const InferenceOptions& opts = {});

/// Evaluation of the crop for already decoded ROI parameters.
attention::RoiFrame generate_roi(const TripModel& model, const events::TimebinFrame& frame,
                                 const attention::RoiParams& roi, CropMode mode, std::uint64_t* ops = nullptr);

int argmax(const std::vector<double>& v);

}  // namespace trip

#include "trip/pipeline.hpp"

#include <algorithm>

#include "trip/error.hpp"

namespace trip {

const char* to_string(CropMode mode) { return mode == CropMode::tgk ? "tgk" : "dap"; }

CropMode parse_crop_mode(const std::string& name) {
  if (name == "tgk") return CropMode::tgk;
  if (name == "dap") return CropMode::dap;
  throw Error(ErrorKind::ConfigInvalid, "mode must be tgk or dap, got '" + name + "'");
}

attention::DecodeConfig TripModel::decode_config() const {
  attention::DecodeConfig cfg;
  cfg.width = width();
  cfg.height = height();
  cfg.scale = attention.scale_for(width());
  return cfg;
}

void TripModel::require_complete(const net::SpecFile& spec) {
  if (!spec.roi || !spec.classifier || !spec.attention) {
    throw Error(ErrorKind::ConfigInvalid, "spec must define a roi net, a classifier net and attention settings");
  }
}

TripModel TripModel::init(const net::SpecFile& spec, std::uint64_t seed) {
  require_complete(spec);
  TripModel m;
  m.roi = net::Model::init(*spec.roi, seed);
  m.classifier = net::Model::init(*spec.classifier, seed ^ 0x9e3779b97f4a7c15ULL);
  m.attention = *spec.attention;
  return m;
}

int argmax(const std::vector<double>& v) {
  return v.empty() ? 0 : static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

int InferenceResult::step_class(std::size_t t) const { return argmax(steps.at(t).logits); }

attention::RoiFrame generate_roi(const TripModel& model, const events::TimebinFrame& frame,
                                 const attention::RoiParams& roi, CropMode mode, std::uint64_t* ops) {
  const auto& cfg = model.attention.grid;
  if (mode == CropMode::tgk) {
    const auto weights = attention::kernel_weights(attention::kernel_centers(roi, cfg), cfg, frame.width, frame.height);
    attention::CropStats stats;
    auto out = attention::crop_tgk(frame, weights, &stats);
    if (ops) *ops += stats.total();
    return out;
  }
  return attention::crop_dap(frame, attention::dap_region(roi, cfg), cfg.grid, ops);
}

InferenceResult infer(const TripModel& model, const events::BinnedSample& sample, const InferenceOptions& opts) {
  InferenceResult res;
  res.mean_logits.assign(static_cast<std::size_t>(model.classifier.plan.output_size), 0.0);
  net::RecurrentState roi_state, cls_state;
  const auto dcfg = model.decode_config();
  for (const auto& frame : sample.frames) {
    if (frame.width != model.width() || frame.height != model.height()) {
      throw Error(ErrorKind::ShapeMismatch, "frame " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
                                                " does not match roi net input " + std::to_string(model.width()) + "x" +
                                                std::to_string(model.height()));
    }
    TimebinResult step;
    const Tensor input = frame.to_tensor();
    net::ForwardResult roi_out;
    if (opts.sparse) {
      roi_out = net::forward_sparse(model.roi, net::SparseActivations::from_dense(input), roi_state, step.roi_counter);
    } else {
      roi_out = net::forward_dense(model.roi, input, roi_state);
    }
    roi_state = roi_out.state;
    step.roi_triggered = roi_out.triggered;
    step.raw = {roi_out.output[0], roi_out.output[1], roi_out.output[2]};
    step.roi = attention::decode_roi(step.raw, dcfg);
    step.region = attention::dap_region(step.roi, model.attention.grid);
    step.crop_events_in = frame.nonzero_count();
    step.crop = generate_roi(model, frame, step.roi, opts.mode, &step.crop_ops);
    const Tensor crop = step.crop.to_tensor();
    step.crop_events_out = static_cast<std::uint64_t>(std::count_if(crop.data.begin(), crop.data.end(), [](double v) { return v != 0.0; }));
    net::ForwardResult cls_out;
    if (opts.sparse) {
      cls_out = net::forward_sparse(model.classifier, net::SparseActivations::from_dense(crop), cls_state,
                                    step.classifier_counter);
    } else {
      cls_out = net::forward_dense(model.classifier, crop, cls_state);
    }
    cls_state = cls_out.state;
    step.classifier_triggered = cls_out.triggered;
    step.logits = cls_out.output;
    for (std::size_t i = 0; i < step.logits.size(); ++i) res.mean_logits[i] += step.logits[i];
    res.steps.push_back(std::move(step));
  }
  if (!res.steps.empty()) {
    for (double& v : res.mean_logits) v /= static_cast<double>(res.steps.size());
  }
  res.predicted = argmax(res.mean_logits);
  return res;
}

}  // namespace trip

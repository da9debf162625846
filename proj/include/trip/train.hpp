#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "trip/ops.hpp"
#include "trip/pipeline.hpp"
#include "trip/synth.hpp"

namespace trip::grad {

enum class Optimizer { sgd, adam };

/// Reference to one layer of the model pair, written "roi:<index>" or "cls:<index>".
struct LayerRef {
  bool roi = false;
  int layer = 0;

  static LayerRef parse(const std::string& text);
  std::string str() const;
  friend bool operator==(const LayerRef&, const LayerRef&) = default;
};

struct TrainConfig {
  double lr = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda = 1e-4;
  double lambda_warmup = 0.1;  // fraction of epochs over which lambda ramps up linearly
  int epochs = 200;
  int batch_size = 8;
  std::uint64_t seed = 42;
  bool train_roi = true;
  bool train_classifier = true;
  double bn_momentum = 0.1;
  /// Stop once the post-epoch train accuracy reaches this value; 0 disables.
  double stop_train_acc = 0.0;
  /// Test accuracy is evaluated every this many epochs (and after the last one).
  int eval_every = 1;
  /// Random whole-scene translation of each training sample per epoch, at most
  /// this many pixels per axis and never pushing the digit box off the canvas. 0 disables.
  int augment_shift = 0;
  double roi_lr_scale = 1.0;  // multiplies lr for the roi net's parameters
  std::vector<LayerRef> qat_schedule;  // empty: every weight layer, roi net first
  int qat_epochs = 2;
  int dap_epochs = 10;
  double dap_lr = 0.0;  // 0 reuses lr

  void validate() const;
};

struct LabeledSample {
  events::BinnedSample sample;
  int label = 0;
  synth::BoundingBox bbox;
};

using Dataset = std::vector<LabeledSample>;

/// Translates every frame and the box by (dx, dy); vacated pixels are zero.
LabeledSample shift_sample(const LabeledSample& s, int dx, int dy);

/// `count` generator samples seeded from `seed`; labels cycle 0..9 when `balanced`.
/// Generator seed of sample `index` in a dataset drawn with `seed`.
std::uint64_t sample_seed(std::uint64_t seed, int index);

Dataset make_dataset(std::uint64_t seed, int count, const synth::SynthConfig& cfg, bool balanced = true);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0;
  double train_acc = 0;
  double test_acc = -1;  // negative when not evaluated this epoch
  std::vector<double> sparsity;  // fraction of zero activations per ReLU stage
};

struct TrainLog {
  std::string header;  // echoed seed and config
  std::vector<std::string> sparsity_names;
  std::vector<EpochMetrics> rows;

  std::string to_csv() const;
};

struct EvalResult {
  double accuracy = 0;
  /// Mean distance between the ROI center and the digit box center over all timebins.
  double mean_center_distance = 0;
  /// Same, using only the last timebin of each sample.
  double final_center_distance = 0;
};

EvalResult evaluate(const TripModel& model, const Dataset& data, CropMode mode);

/// End-to-end training of both nets through the differentiable tGK crop
/// (or, in DAP mode, of the classifier on DAP crops).
TrainLog train(TripModel& model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
               CropMode mode = CropMode::tgk);

/// Quantizes and freezes layers in schedule order, training the remaining ones
/// for `qat_epochs` after each step. Throws ScheduleIncomplete if any weight
/// layer is left in full precision.
TrainLog qat_finetune(TripModel& model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
                      CropMode mode = CropMode::tgk);

/// Quantizes every weight layer without further training.
void post_training_quantize(TripModel& model);

/// Freezes the roi net and fine-tunes the classifier on DAP crops for `dap_epochs`.
TrainLog dap_finetune(TripModel& model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg);

// Graph construction, shared by training and gradient checks.

struct ParamNodes {
  std::vector<NodeId> weight, bias, gamma, beta;
};

/// Registers the model's parameters; frozen layers and untrainable models become constants.
ParamNodes register_params(Tape& t, const net::Model& model, bool trainable);

/// Parameter tensors in registration order (weight, bias, gamma, beta per layer),
/// skipping frozen weights.
std::vector<Tensor*> parameter_tensors(net::Model& model);
std::vector<NodeId> parameter_nodes(const net::Model& model, const ParamNodes& nodes);

/// Per-channel pre-batchnorm statistics gathered during a training forward.
struct BnStats {
  std::vector<std::vector<double>> mean_sum, var_sum;
  std::vector<int> count;
};

struct NetGraph {
  NodeId output = -1;
  NodeId hidden = -1;
  std::vector<NodeId> activations;
  bool triggered = false;
};

NetGraph forward_graph(Tape& t, const net::Model& model, const ParamNodes& params, NodeId input, NodeId hidden,
                       BnStats* stats = nullptr);

struct SampleGraph {
  NodeId loss = -1;
  std::vector<NodeId> logits;
  /// (slot, node) for every ReLU output; slots number the roi net's ReLU stages
  /// first, then the classifier's.
  std::vector<std::pair<int, NodeId>> activations;
  std::vector<attention::RoiParams> rois;
  int predicted = 0;
};

/// Loss = CE(mean_t logits_t, label) + lambda / T * sum_t L1(ReLU outputs of both nets).
SampleGraph build_sample_graph(Tape& t, const TripModel& model, const ParamNodes& roi, const ParamNodes& cls,
                               const events::BinnedSample& sample, int label, CropMode mode, double lambda,
                               BnStats* roi_stats = nullptr, BnStats* cls_stats = nullptr);

// Finite-difference checking.

struct GradCheckOptions {
  double h = 1e-4;
  double rel_tol = 1e-4;
  double abs_tol = 1e-7;
  int refinements = 4;  // step shrinks by 10x while the stencil crosses a kink
};

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;  // every step size crossed a kink
  double max_abs_err = 0;
  double max_rel_err = 0;

  bool ok() const { return failed == 0 && checked > 0; }
};

struct BuiltLoss {
  NodeId loss = -1;
  std::vector<NodeId> wrt;  // one node per entry of `params`
};

/// Compares tape gradients with central differences. `build` must read the
/// current contents of `params` every time it is called.
GradCheckResult check_gradients(const std::vector<Tensor*>& params, const std::function<BuiltLoss(Tape&)>& build,
                                const GradCheckOptions& opts = {});

}  // namespace trip::grad

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trip/network_spec.hpp"
#include "trip/quant.hpp"
#include "trip/tensor.hpp"

namespace trip::net {

/// Parameters of one spec layer. Which fields are populated depends on the kind:
/// conv/fc/output carry weight+bias, relu_rnn carries weight [U, I+U] (input and
/// recurrent matrices side by side) + bias, batchnorm carries gamma/beta/mean/var.
struct LayerParams {
  Tensor weight;
  Tensor bias;
  Tensor gamma, beta, mean, var;
  /// Set once the layer is quantized and frozen; `weight` then holds its dequantized values.
  std::optional<QuantTensor> frozen;

  bool has_weight() const { return !weight.empty(); }
};

struct Model {
  NetworkSpec spec;
  Plan plan;
  std::vector<LayerParams> layers;

  /// Seeded random initialization. ROI heads start with a zero output layer so
  /// the decoded ROI begins at the image center.
  static Model init(const NetworkSpec& spec, std::uint64_t seed);

  /// Replaces the weights of `layer` with their 4-bit dequantized values and freezes them.
  void freeze_quantized(int layer, const QuantStrategy& strategy = {});
  bool fully_quantized() const;
  std::vector<int> weight_layers() const;
  std::size_t parameter_count() const;
};

/// H_t of a relu_rnn layer; empty means all-zero.
struct RecurrentState {
  std::vector<double> h;
};

struct ForwardResult {
  std::vector<double> output;
  RecurrentState state;
  /// ReLU outputs of every ReLU-terminated stage, in stage order. Empty when
  /// the network was not triggered.
  std::vector<Tensor> activations;
  bool triggered = false;
};

/// Reference forward pass over a dense [C, H, W] input. An input without any
/// nonzero entry does not trigger the event-driven network: the output is zero
/// and the recurrent state is carried over unchanged.
ForwardResult forward_dense(const Model& model, const Tensor& input, const RecurrentState& state);

struct SparseEntry {
  int c = 0, y = 0, x = 0;
  double value = 0;
};

struct SparseActivations {
  Shape shape;
  std::vector<SparseEntry> entries;

  static SparseActivations from_dense(const Tensor& t);
  Tensor to_dense() const;
};

struct StageCounters {
  std::uint64_t macs = 0;
  std::uint64_t events_in = 0;
  std::uint64_t events_out = 0;
};

/// Per-stage effective-MAC and event tallies.
struct MacCounter {
  std::vector<StageCounters> stages;

  void ensure(std::size_t n) {
    if (stages.size() < n) stages.resize(n);
  }
  std::uint64_t total_macs() const;
};

/// Event-driven forward pass: every nonzero input is consumed once and its
/// contributions scattered to the outputs it reaches. Counts, per conv stage,
/// footprint x out_channels MACs per input event; per FC/RNN stage, nonzero
/// inputs x units. `stage_events`, when given, receives the input events followed
/// by the output events of every stage.
ForwardResult forward_sparse(const Model& model, const SparseActivations& input, const RecurrentState& state,
                             MacCounter& counter, std::vector<SparseActivations>* stage_events = nullptr);

/// lambda * sum |a| over the given activations.
double l1_activation_loss(std::span<const Tensor> activations, double lambda);

}  // namespace trip::net

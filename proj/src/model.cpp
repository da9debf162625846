#include "trip/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "trip/error.hpp"
#include "trip/kernels.hpp"

namespace trip::net {

namespace {

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-bound, bound);
  for (double& v : t.data) v = d(rng);
}

int stride_or(int stride, int fallback) { return stride > 0 ? stride : fallback; }

// Shared tail of a conv block: BatchNorm -> MaxPool -> ReLU.
Tensor finish_conv_block(const Model& model, const Stage& st, Tensor y) {
  if (st.bn >= 0) {
    const auto& p = model.layers[st.bn];
    y = kernels::batchnorm(y, p.gamma, p.beta, p.mean, p.var);
  }
  if (st.pool >= 0) {
    const auto& pl = model.spec.layers[st.pool];
    y = kernels::maxpool2d(y, pl.kernel, stride_or(pl.stride, pl.kernel));
  }
  kernels::relu_inplace(y);
  return y;
}

void check_input(const Model& model, const std::vector<int>& shape) {
  const Shape& in = model.plan.input;
  if (shape != std::vector<int>{in.c, in.h, in.w}) {
    throw Error(ErrorKind::ShapeMismatch, "input does not match network geometry " + std::to_string(in.c) + "x" +
                                              std::to_string(in.h) + "x" + std::to_string(in.w));
  }
}

std::vector<double> initial_hidden(const Model& model, const RecurrentState& state) {
  if (!model.plan.recurrent_units) return {};
  if (state.h.empty()) return std::vector<double>(static_cast<std::size_t>(model.plan.recurrent_units), 0.0);
  if (state.h.size() != static_cast<std::size_t>(model.plan.recurrent_units)) {
    throw Error(ErrorKind::ShapeMismatch, "recurrent state has wrong size");
  }
  return state.h;
}

}  // namespace

Model Model::init(const NetworkSpec& spec, std::uint64_t seed) {
  Model m;
  m.spec = spec;
  m.plan = compile(spec);
  m.layers.resize(spec.layers.size());
  std::mt19937_64 rng(seed);
  for (const Stage& st : m.plan.stages) {
    switch (st.kind) {
      case StageKind::downsample:
        break;
      case StageKind::conv_block: {
        const LayerSpec& ls = spec.layers[st.conv];
        auto& p = m.layers[st.conv];
        p.weight = Tensor({ls.out, ls.in, ls.kernel, ls.kernel});
        fill_uniform(p.weight, std::sqrt(6.0 / (ls.in * ls.kernel * ls.kernel)), rng);
        p.bias = Tensor({ls.out});
        if (st.bn >= 0) {
          auto& b = m.layers[st.bn];
          b.gamma = Tensor({ls.out}, 1.0);
          b.beta = Tensor({ls.out}, 0.0);
          b.mean = Tensor({ls.out}, 0.0);
          b.var = Tensor({ls.out}, 1.0);
        }
        break;
      }
      case StageKind::recurrent: {
        const LayerSpec& ls = spec.layers[st.layer];
        auto& p = m.layers[st.layer];
        p.weight = Tensor({ls.units, ls.in + ls.units});
        std::uniform_real_distribution<double> in_d(-std::sqrt(3.0 / ls.in), std::sqrt(3.0 / ls.in));
        std::uniform_real_distribution<double> rec_d(-0.5 / std::sqrt(ls.units), 0.5 / std::sqrt(ls.units));
        for (int u = 0; u < ls.units; ++u) {
          for (int j = 0; j < ls.in + ls.units; ++j) {
            p.weight[static_cast<std::size_t>(u) * (ls.in + ls.units) + j] = j < ls.in ? in_d(rng) : rec_d(rng);
          }
        }
        p.bias = Tensor({ls.units});
        break;
      }
      case StageKind::hidden_fc:
      case StageKind::output_fc: {
        const LayerSpec& ls = spec.layers[st.layer];
        auto& p = m.layers[st.layer];
        p.weight = Tensor({ls.units, ls.in});
        p.bias = Tensor({ls.units});
        if (st.kind == StageKind::hidden_fc) {
          fill_uniform(p.weight, std::sqrt(6.0 / ls.in), rng);
        } else if (spec.role == NetRole::classification) {
          fill_uniform(p.weight, std::sqrt(6.0 / (ls.in + ls.units)), rng);
        }
        break;
      }
    }
  }
  return m;
}

void Model::freeze_quantized(int layer, const QuantStrategy& strategy) {
  auto& p = layers.at(static_cast<std::size_t>(layer));
  if (!p.has_weight()) throw Error(ErrorKind::ConfigInvalid, "layer " + std::to_string(layer) + " has no weights");
  p.frozen = quantize_layer(p.weight, strategy);
  p.weight = p.frozen->dequantize();
}

bool Model::fully_quantized() const {
  return std::all_of(layers.begin(), layers.end(), [](const LayerParams& p) { return !p.has_weight() || p.frozen; });
}

std::vector<int> Model::weight_layers() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].has_weight()) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : layers) n += p.weight.size() + p.bias.size() + p.gamma.size() + p.beta.size();
  return n;
}

ForwardResult forward_dense(const Model& model, const Tensor& input, const RecurrentState& state) {
  check_input(model, input.shape);
  ForwardResult r;
  r.state = state;
  if (input.all_zero()) {
    r.output.assign(static_cast<std::size_t>(model.plan.output_size), 0.0);
    return r;
  }
  r.triggered = true;
  std::vector<double> h = initial_hidden(model, state);
  Tensor x = input;
  for (const Stage& st : model.plan.stages) {
    switch (st.kind) {
      case StageKind::downsample: {
        const auto& pl = model.spec.layers[st.pool];
        x = kernels::maxpool2d(x, pl.kernel, stride_or(pl.stride, pl.kernel));
        break;
      }
      case StageKind::conv_block: {
        const auto& ls = model.spec.layers[st.conv];
        const auto& p = model.layers[st.conv];
        x = finish_conv_block(model, st, kernels::conv2d(x, p.weight, p.bias, ls.pad, stride_or(ls.stride, 1)));
        r.activations.push_back(x);
        break;
      }
      case StageKind::recurrent: {
        const auto& ls = model.spec.layers[st.layer];
        const auto& p = model.layers[st.layer];
        Tensor y({ls.units, 1, 1}, p.bias.data);
        kernels::linear_accumulate(x.data, p.weight, 0, y.data);
        kernels::linear_accumulate(h, p.weight, ls.in, y.data);
        kernels::relu_inplace(y);
        h = y.data;
        r.activations.push_back(y);
        x = std::move(y);
        break;
      }
      case StageKind::hidden_fc:
      case StageKind::output_fc: {
        const auto& ls = model.spec.layers[st.layer];
        const auto& p = model.layers[st.layer];
        Tensor y({ls.units, 1, 1}, p.bias.data);
        kernels::linear_accumulate(x.data, p.weight, 0, y.data);
        if (st.kind == StageKind::hidden_fc) {
          kernels::relu_inplace(y);
          r.activations.push_back(y);
        }
        x = std::move(y);
        break;
      }
    }
  }
  r.output = x.data;
  r.state.h = std::move(h);
  return r;
}

SparseActivations SparseActivations::from_dense(const Tensor& t) {
  SparseActivations s;
  if (t.shape.size() == 3) s.shape = {t.dim(0), t.dim(1), t.dim(2)};
  else s.shape = {static_cast<int>(t.size()), 1, 1};
  for (int c = 0; c < s.shape.c; ++c)
    for (int y = 0; y < s.shape.h; ++y)
      for (int x = 0; x < s.shape.w; ++x) {
        const double v = t[(static_cast<std::size_t>(c) * s.shape.h + y) * s.shape.w + x];
        if (v != 0.0) s.entries.push_back({c, y, x, v});
      }
  return s;
}

Tensor SparseActivations::to_dense() const {
  Tensor t({shape.c, shape.h, shape.w});
  for (const auto& e : entries) t[(static_cast<std::size_t>(e.c) * shape.h + e.y) * shape.w + e.x] = e.value;
  return t;
}

std::uint64_t MacCounter::total_macs() const {
  std::uint64_t n = 0;
  for (const auto& s : stages) n += s.macs;
  return n;
}

ForwardResult forward_sparse(const Model& model, const SparseActivations& input, const RecurrentState& state,
                             MacCounter& counter, std::vector<SparseActivations>* stage_events) {
  check_input(model, {input.shape.c, input.shape.h, input.shape.w});
  counter.ensure(model.plan.stages.size());
  ForwardResult r;
  r.state = state;
  if (input.entries.empty()) {
    r.output.assign(static_cast<std::size_t>(model.plan.output_size), 0.0);
    if (stage_events) stage_events->clear();
    return r;
  }
  r.triggered = true;
  std::vector<double> h = initial_hidden(model, state);
  SparseActivations events = input;
  if (stage_events) stage_events->assign(1, input);
  Tensor dense;
  for (std::size_t si = 0; si < model.plan.stages.size(); ++si) {
    const Stage& st = model.plan.stages[si];
    StageCounters& ctr = counter.stages[si];
    ctr.events_in += events.entries.size();
    switch (st.kind) {
      case StageKind::downsample: {
        const auto& pl = model.spec.layers[st.pool];
        dense = kernels::maxpool2d(events.to_dense(), pl.kernel, stride_or(pl.stride, pl.kernel));
        break;
      }
      case StageKind::conv_block: {
        const auto& ls = model.spec.layers[st.conv];
        const auto& p = model.layers[st.conv];
        const int K = ls.kernel, pad = ls.pad, stride = stride_or(ls.stride, 1);
        const int C = st.in.c, O = ls.out, Ho = st.pre_pool.h, Wo = st.pre_pool.w;
        Tensor y({O, Ho, Wo});
        for (const SparseEntry& e : events.entries) {
          for (int ky = 0; ky < K; ++ky) {
            const int ny = e.y + pad - ky;
            if (ny < 0 || ny % stride != 0 || ny / stride >= Ho) continue;
            const int oy = ny / stride;
            for (int kx = 0; kx < K; ++kx) {
              const int nx = e.x + pad - kx;
              if (nx < 0 || nx % stride != 0 || nx / stride >= Wo) continue;
              const int ox = nx / stride;
              for (int o = 0; o < O; ++o) {
                y[(static_cast<std::size_t>(o) * Ho + oy) * Wo + ox] +=
                    p.weight[((static_cast<std::size_t>(o) * C + e.c) * K + ky) * K + kx] * e.value;
              }
              ctr.macs += static_cast<std::uint64_t>(O);
            }
          }
        }
        for (int o = 0; o < O; ++o) {
          for (int i = 0; i < Ho * Wo; ++i) y[static_cast<std::size_t>(o) * Ho * Wo + i] += p.bias[o];
        }
        dense = finish_conv_block(model, st, std::move(y));
        r.activations.push_back(dense);
        break;
      }
      case StageKind::recurrent:
      case StageKind::hidden_fc:
      case StageKind::output_fc: {
        const auto& ls = model.spec.layers[st.layer];
        const auto& p = model.layers[st.layer];
        const int U = ls.units;
        const int cols = p.weight.dim(1);
        Tensor y({U, 1, 1}, p.bias.data);
        for (const SparseEntry& e : events.entries) {
          const int j = (e.c * events.shape.h + e.y) * events.shape.w + e.x;
          for (int u = 0; u < U; ++u) y[u] += p.weight[static_cast<std::size_t>(u) * cols + j] * e.value;
          ctr.macs += static_cast<std::uint64_t>(U);
        }
        if (st.kind == StageKind::recurrent) {
          for (std::size_t k = 0; k < h.size(); ++k) {
            if (h[k] == 0.0) continue;
            for (int u = 0; u < U; ++u) y[u] += p.weight[static_cast<std::size_t>(u) * cols + ls.in + k] * h[k];
            ctr.macs += static_cast<std::uint64_t>(U);
            ++ctr.events_in;
          }
        }
        if (st.has_relu()) {
          kernels::relu_inplace(y);
          r.activations.push_back(y);
        }
        if (st.kind == StageKind::recurrent) h = y.data;
        dense = std::move(y);
        break;
      }
    }
    events = SparseActivations::from_dense(dense);
    ctr.events_out += events.entries.size();
    if (stage_events) stage_events->push_back(events);
  }
  r.output = dense.data;
  r.state.h = std::move(h);
  return r;
}

double l1_activation_loss(std::span<const Tensor> activations, double lambda) {
  double s = 0.0;
  for (const Tensor& t : activations)
    for (double v : t.data) s += std::abs(v);
  return lambda * s;
}

}  // namespace trip::net

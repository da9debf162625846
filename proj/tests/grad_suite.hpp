#pragma once

// Finite-difference checks of every differentiable primitive and of the full
// toy pipeline (16x16 input, 4x4 grid, two-conv classifier).

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "trip/ops.hpp"
#include "trip/pipeline.hpp"
#include "trip/synth.hpp"
#include "trip/tape.hpp"
#include "trip/train.hpp"

namespace testutil {

inline constexpr const char* kToySpec = R"(net roi 16x16
layer maxpool k=2
layer conv in=2 out=3 k=3 pad=1
layer maxpool k=2
layer batchnorm in=3
layer relu_rnn in=48 units=5
layer output in=5 units=3

net classifier 4x4
layer conv in=2 out=3 k=3 pad=1
layer batchnorm in=3
layer conv in=3 out=4 k=3 pad=1
layer maxpool k=2
layer output in=16 units=10

attention grid=4 sigma=2 theta=6 scale=2
)";

inline trip::synth::SynthConfig toy_synth(int timebins = 3) {
  trip::synth::SynthConfig c;
  c.canvas = 16;
  c.glyph_size = 8;
  c.scale_min = 1.0;
  c.scale_max = 1.5;
  c.noise_fragments = 1;
  c.fragment_size = 3;
  c.timebins = timebins;
  c.duration_us = 3000;
  return c;
}

/// Values in [lo, hi] with random sign, bounded away from zero.
inline trip::Tensor away_from_zero(std::mt19937_64& rng, std::vector<int> dims, double lo = 0.1, double hi = 1.0) {
  trip::Tensor t(std::move(dims));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data) v = (rng() & 1 ? 1.0 : -1.0) * u(rng);
  return t;
}

using CheckList = std::vector<std::pair<std::string, trip::grad::GradCheckResult>>;

namespace detail {

using trip::Tensor;
using trip::grad::BuiltLoss;
using trip::grad::NodeId;
using trip::grad::Tape;
namespace ops = trip::grad::ops;

// Reduces any node to a scalar through a fixed random projection.
inline NodeId project(Tape& t, NodeId y, const Tensor& proj) {
  return ops::linear(t, y, t.constant(proj), -1);
}

inline Tensor projection(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor p({1, static_cast<int>(n)});
  for (double& v : p.data) v = u(rng);
  return p;
}

struct Check {
  std::vector<Tensor> params;
  std::function<NodeId(Tape&, const std::vector<NodeId>&)> body;
};

inline trip::grad::GradCheckResult run(Check c, const trip::grad::GradCheckOptions& opts) {
  std::vector<Tensor*> ptrs;
  for (auto& p : c.params) ptrs.push_back(&p);
  return trip::grad::check_gradients(
      ptrs,
      [&](Tape& t) {
        std::vector<NodeId> ids;
        for (auto& p : c.params) ids.push_back(t.variable(p));
        return BuiltLoss{c.body(t, ids), ids};
      },
      opts);
}

}  // namespace detail

/// Runs every check for one seed.
inline CheckList run_grad_suite(std::uint64_t seed, const trip::grad::GradCheckOptions& opts = {}) {
  using namespace detail;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CheckList out;
  auto add = [&](const std::string& name, Check c) { out.emplace_back(name, run(std::move(c), opts)); };

  {
    const int pad = static_cast<int>(rng() % 2), stride = 1 + static_cast<int>(rng() % 2);
    Tensor x = away_from_zero(rng, {2, 6, 5}), w = away_from_zero(rng, {3, 2, 3, 3}), b = away_from_zero(rng, {3});
    const int ho = (6 + 2 * pad - 3) / stride + 1, wo = (5 + 2 * pad - 3) / stride + 1;
    const Tensor proj = projection(rng, static_cast<std::size_t>(3 * ho * wo));
    add("conv2d", {{x, w, b}, [=](Tape& t, const std::vector<NodeId>& v) {
                     return project(t, ops::conv2d(t, v[0], v[1], v[2], pad, stride), proj);
                   }});
  }
  {
    Tensor x = away_from_zero(rng, {3, 4, 4}), g = away_from_zero(rng, {3}), be = away_from_zero(rng, {3});
    const Tensor mean = away_from_zero(rng, {3}, 0.0, 0.3);
    Tensor var({3});
    for (double& v : var.data) v = 0.5 + 0.5 * (u(rng) + 1.0);
    const Tensor proj = projection(rng, 48);
    add("batchnorm", {{x, g, be}, [=](Tape& t, const std::vector<NodeId>& v) {
                        return project(t, ops::batchnorm(t, v[0], v[1], v[2], mean, var), proj);
                      }});
  }
  {
    Tensor x = away_from_zero(rng, {2, 7, 6});
    const bool overlap = rng() & 1;
    const int stride = overlap ? 1 : 2;
    const int ho = (7 - 2) / stride + 1, wo = (6 - 2) / stride + 1;
    const Tensor proj = projection(rng, static_cast<std::size_t>(2 * ho * wo));
    add("maxpool", {{x}, [=](Tape& t, const std::vector<NodeId>& v) {
                      return project(t, ops::maxpool(t, v[0], 2, stride), proj);
                    }});
  }
  {
    Tensor x = away_from_zero(rng, {3, 3, 3});
    const Tensor proj = projection(rng, 27);
    add("relu", {{x}, [=](Tape& t, const std::vector<NodeId>& v) { return project(t, ops::relu(t, v[0]), proj); }});
  }
  {
    Tensor x = away_from_zero(rng, {7}), w = away_from_zero(rng, {4, 7}), b = away_from_zero(rng, {4});
    const Tensor proj = projection(rng, 4);
    add("linear", {{x, w, b}, [=](Tape& t, const std::vector<NodeId>& v) {
                     return project(t, ops::linear(t, v[0], v[1], v[2]), proj);
                   }});
  }
  {
    Tensor x = away_from_zero(rng, {6}), h = away_from_zero(rng, {4}, 0.0, 1.0), w = away_from_zero(rng, {4, 10}),
           b = away_from_zero(rng, {4});
    for (double& v : h.data) v = std::abs(v);
    const Tensor proj = projection(rng, 4);
    add("rnn_step", {{x, h, w, b}, [=](Tape& t, const std::vector<NodeId>& v) {
                       return project(t, ops::relu(t, ops::linear(t, ops::concat(t, v[0], v[1]), v[2], v[3])), proj);
                     }});
  }
  {
    Tensor a = away_from_zero(rng, {5}), b = away_from_zero(rng, {5}), c = away_from_zero(rng, {3});
    const double s = u(rng) * 3;
    const Tensor proj = projection(rng, 8);
    add("add_scale_sum_concat", {{a, b, c}, [=](Tape& t, const std::vector<NodeId>& v) {
                                   const NodeId ab = ops::sum(t, {ops::add(t, v[0], v[1]), ops::scale(t, v[0], s)});
                                   return project(t, ops::concat(t, ab, v[2]), proj);
                                 }});
  }
  {
    Tensor z = away_from_zero(rng, {6}, 0.0, 3.0);
    const int label = static_cast<int>(rng() % 6);
    add("cross_entropy",
        {{z}, [=](Tape& t, const std::vector<NodeId>& v) { return ops::cross_entropy(t, v[0], label); }});
  }
  {
    Tensor x = away_from_zero(rng, {2, 3, 3});
    add("l1", {{x}, [=](Tape& t, const std::vector<NodeId>& v) { return ops::l1(t, v[0]); }});
  }
  {
    Tensor raw({3}, std::vector<double>{2 * u(rng), 2 * u(rng), 2 * u(rng)});
    const trip::attention::DecodeConfig dc{16, 12, 2.5};
    const Tensor proj = projection(rng, 3);
    add("decode_roi", {{raw}, [=](Tape& t, const std::vector<NodeId>& v) {
                         return project(t, ops::decode_roi(t, v[0], dc), proj);
                       }});
  }
  {
    Tensor roi({3}, std::vector<double>{8 + 4 * u(rng), 8 + 4 * u(rng), 2 + u(rng)});
    const Tensor proj = projection(rng, 8);
    add("kernel_centers", {{roi}, [=](Tape& t, const std::vector<NodeId>& v) {
                             return project(t, ops::kernel_centers(t, v[0], 4), proj);
                           }});
  }
  {
    Tensor c({2, 4});
    for (double& v : c.data) v = 8 + 7 * u(rng);
    const trip::attention::KernelGridConfig kc{4, 1.5 + u(rng), 6.0};
    const int axis = static_cast<int>(rng() % 2);
    const Tensor proj = projection(rng, 4 * 16);
    add("gaussian_weights", {{c}, [=](Tape& t, const std::vector<NodeId>& v) {
                               return project(t, ops::gaussian_weights(t, v[0], axis, kc, 16), proj);
                             }});
  }
  {
    Tensor frame = away_from_zero(rng, {2, 5, 6}), fx = away_from_zero(rng, {3, 6}), fy = away_from_zero(rng, {3, 5});
    const Tensor proj = projection(rng, 18);
    add("bilinear_crop", {{frame, fx, fy}, [=](Tape& t, const std::vector<NodeId>& v) {
                            return project(t, ops::bilinear_crop(t, v[0], v[1], v[2]), proj);
                          }});
  }
  {
    // decode -> centers -> truncated Gaussian rows -> crop, w.r.t. the raw head output
    Tensor raw({3}, std::vector<double>{0.5 * u(rng), 0.5 * u(rng), u(rng)});
    Tensor frame({2, 16, 16});
    for (double& v : frame.data) v = (rng() % 4 == 0) ? 1.0 + (rng() % 3) : 0.0;
    const trip::attention::DecodeConfig dc{16, 16, 2.0};
    const trip::attention::KernelGridConfig kc{4, 2.0, 6.0};
    const Tensor proj = projection(rng, 32);
    add("roi_generation", {{raw}, [=](Tape& t, const std::vector<NodeId>& v) {
                             const NodeId c = ops::kernel_centers(t, ops::decode_roi(t, v[0], dc), 4);
                             const NodeId fx = ops::gaussian_weights(t, c, 0, kc, 16);
                             const NodeId fy = ops::gaussian_weights(t, c, 1, kc, 16);
                             return project(t, ops::bilinear_crop(t, t.constant(frame), fx, fy), proj);
                           }});
  }
  {
    // full toy pipeline, every parameter of both nets
    auto model = trip::TripModel::init(trip::net::parse_spec_file(kToySpec), seed);
    for (auto& p : model.roi.layers.back().weight.data) p = 0.3 * u(rng);
    for (auto* net : {&model.roi, &model.classifier}) {
      for (auto& p : net->layers) {
        for (double& v : p.bias.data) v = 0.1 * u(rng);
        for (double& v : p.beta.data) v = 0.1 * u(rng);
        for (double& v : p.gamma.data) v = 1.0 + 0.3 * u(rng);
        for (double& v : p.mean.data) v = 0.1 * u(rng);
        for (double& v : p.var.data) v = 1.0 + 0.3 * u(rng);
      }
    }
    const auto s = trip::synth::generate_synthetic_sample(seed * 31 + 7, toy_synth());
    std::vector<Tensor*> params = trip::grad::parameter_tensors(model.roi);
    for (Tensor* p : trip::grad::parameter_tensors(model.classifier)) params.push_back(p);
    const auto r = trip::grad::check_gradients(
        params,
        [&](Tape& t) {
          const auto rp = trip::grad::register_params(t, model.roi, true);
          const auto cp = trip::grad::register_params(t, model.classifier, true);
          const auto g = trip::grad::build_sample_graph(t, model, rp, cp, s.sample, s.label, trip::CropMode::tgk, 0.01);
          auto wrt = trip::grad::parameter_nodes(model.roi, rp);
          for (NodeId id : trip::grad::parameter_nodes(model.classifier, cp)) wrt.push_back(id);
          return BuiltLoss{g.loss, wrt};
        },
        opts);
    out.emplace_back("toy_pipeline", r);
  }
  return out;
}

}  // namespace testutil

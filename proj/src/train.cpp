#include "trip/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "trip/error.hpp"
#include "trip/kernels.hpp"

namespace trip::grad {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool layer_trainable(const net::LayerParams& p) { return !p.frozen; }

int relu_stage_count(const net::Model& m) {
  int n = 0;
  for (const auto& st : m.plan.stages) n += st.has_relu() ? 1 : 0;
  return n;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void check_frames(const TripModel& model, const events::BinnedSample& sample) {
  for (const auto& f : sample.frames) {
    if (f.width != model.width() || f.height != model.height()) {
      throw Error(ErrorKind::ShapeMismatch, "sample frame " + std::to_string(f.width) + "x" + std::to_string(f.height) +
                                                " does not match the roi net input");
    }
  }
}

struct OptimizerState {
  std::vector<Tensor> m, v;
  long step = 0;
};

void apply_step(const TrainConfig& cfg, double base_lr, const std::vector<Tensor*>& params, const std::vector<double>& lr_scale,
                const std::vector<Tensor>& grads, OptimizerState& st) {
  if (cfg.optimizer == Optimizer::sgd) {
    for (std::size_t k = 0; k < params.size(); ++k)
      for (std::size_t i = 0; i < params[k]->size(); ++i) (*params[k])[i] -= base_lr * lr_scale[k] * grads[k][i];
    return;
  }
  if (st.m.empty()) {
    for (const Tensor* p : params) {
      st.m.emplace_back(p->shape);
      st.v.emplace_back(p->shape);
    }
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const double lr = base_lr * lr_scale[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[k][i];
      double& m = st.m[k][i];
      double& v = st.v[k][i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      p[i] -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
    }
  }
}

BnStats make_stats(const net::Model& m) {
  BnStats s;
  s.mean_sum.resize(m.layers.size());
  s.var_sum.resize(m.layers.size());
  s.count.assign(m.layers.size(), 0);
  return s;
}

void update_running_stats(net::Model& m, const BnStats& s, double momentum) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    if (!s.count[l]) continue;
    auto& p = m.layers[l];
    for (std::size_t c = 0; c < p.mean.size(); ++c) {
      p.mean[c] = (1.0 - momentum) * p.mean[c] + momentum * s.mean_sum[l][c] / s.count[l];
      p.var[c] = (1.0 - momentum) * p.var[c] + momentum * s.var_sum[l][c] / s.count[l];
    }
  }
}

void append_log(TrainLog& into, const TrainLog& from, int& epoch_offset) {
  if (into.header.empty()) into.header = from.header;
  if (into.sparsity_names.empty()) into.sparsity_names = from.sparsity_names;
  for (EpochMetrics r : from.rows) {
    r.epoch += epoch_offset;
    into.rows.push_back(std::move(r));
  }
  epoch_offset += static_cast<int>(from.rows.size());
}

}  // namespace

LayerRef LayerRef::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::ConfigInvalid, "layer reference must be roi:<i> or cls:<i>, got '" + text + "'");
  const std::string net = text.substr(0, colon);
  LayerRef r;
  if (net == "roi") r.roi = true;
  else if (net != "cls") throw Error(ErrorKind::ConfigInvalid, "unknown net '" + net + "' in layer reference");
  try {
    std::size_t used = 0;
    r.layer = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigInvalid, "bad layer index in '" + text + "'");
  }
  return r;
}

std::string LayerRef::str() const { return std::string(roi ? "roi:" : "cls:") + std::to_string(layer); }

void TrainConfig::validate() const {
  if (!(lr >= 0) || !std::isfinite(lr)) throw Error(ErrorKind::ConfigInvalid, "lr must be >= 0");
  if (!(lambda >= 0)) throw Error(ErrorKind::ConfigInvalid, "lambda must be >= 0");
  if (lambda_warmup < 0 || lambda_warmup > 1) throw Error(ErrorKind::ConfigInvalid, "lambda_warmup must be in [0,1]");
  if (epochs < 0) throw Error(ErrorKind::ConfigInvalid, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorKind::ConfigInvalid, "batch_size must be >= 1");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw Error(ErrorKind::ConfigInvalid, "adam betas must be in [0,1)");
  if (bn_momentum < 0 || bn_momentum > 1) throw Error(ErrorKind::ConfigInvalid, "bn_momentum must be in [0,1]");
  if (!(roi_lr_scale >= 0) || !std::isfinite(roi_lr_scale)) throw Error(ErrorKind::ConfigInvalid, "roi_lr_scale must be >= 0");
  if (augment_shift < 0) throw Error(ErrorKind::ConfigInvalid, "augment_shift must be >= 0");
  if (eval_every < 1) throw Error(ErrorKind::ConfigInvalid, "eval_every must be >= 1");
  if (qat_epochs < 0 || dap_epochs < 0) throw Error(ErrorKind::ConfigInvalid, "epoch counts must be >= 0");
  if (dap_lr < 0) throw Error(ErrorKind::ConfigInvalid, "dap_lr must be >= 0");
}

std::uint64_t sample_seed(std::uint64_t seed, int index) {
  return splitmix64(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(index));
}

Dataset make_dataset(std::uint64_t seed, int count, const synth::SynthConfig& cfg, bool balanced) {
  if (count < 0) throw Error(ErrorKind::ConfigInvalid, "dataset size must be >= 0");
  Dataset data;
  data.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    synth::SynthConfig c = cfg;
    if (balanced) c.forced_label = i % 10;
    auto s = synth::generate_synthetic_sample(sample_seed(seed, i), c);
    s.sample.label = s.label;
    data.push_back({std::move(s.sample), s.label, s.bbox});
  }
  return data;
}

LabeledSample shift_sample(const LabeledSample& s, int dx, int dy) {
  LabeledSample out;
  out.label = s.label;
  out.sample.label = s.sample.label;
  out.bbox = {s.bbox.x0 + dx, s.bbox.y0 + dy, s.bbox.x1 + dx, s.bbox.y1 + dy};
  for (const auto& f : s.sample.frames) {
    events::TimebinFrame g(f.width, f.height);
    for (int p = 0; p < 2; ++p)
      for (int y = std::max(0, dy); y < std::min(f.height, f.height + dy); ++y)
        for (int x = std::max(0, dx); x < std::min(f.width, f.width + dx); ++x) g.at(p, y, x) = f.at(p, y - dy, x - dx);
    out.sample.frames.push_back(std::move(g));
  }
  return out;
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  if (!header.empty()) os << "# " << header << '\n';
  os << "epoch,loss,train_acc,test_acc";
  for (const auto& n : sparsity_names) os << ',' << n;
  os << '\n';
  for (const auto& r : rows) {
    os << r.epoch << ',' << fmt_double(r.loss) << ',' << fmt_double(r.train_acc) << ',';
    if (r.test_acc >= 0) os << fmt_double(r.test_acc);
    for (double s : r.sparsity) os << ',' << fmt_double(s);
    os << '\n';
  }
  return os.str();
}

EvalResult evaluate(const TripModel& model, const Dataset& data, CropMode mode) {
  EvalResult r;
  if (data.empty()) return r;
  int correct = 0;
  double dist_sum = 0, final_sum = 0;
  long dist_n = 0, final_n = 0;
  for (const auto& s : data) {
    const auto res = infer(model, s.sample, {mode, false});
    correct += res.predicted == s.label ? 1 : 0;
    double last = -1;
    for (const auto& st : res.steps) {
      if (!st.roi_triggered) continue;
      const double d = std::hypot(st.roi.gx - s.bbox.center_x(), st.roi.gy - s.bbox.center_y());
      dist_sum += d;
      ++dist_n;
      last = d;
    }
    if (last >= 0) {
      final_sum += last;
      ++final_n;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  r.mean_center_distance = dist_n ? dist_sum / dist_n : 0.0;
  r.final_center_distance = final_n ? final_sum / final_n : 0.0;
  return r;
}

ParamNodes register_params(Tape& t, const net::Model& model, bool trainable) {
  ParamNodes n;
  const std::size_t L = model.layers.size();
  n.weight.assign(L, -1);
  n.bias.assign(L, -1);
  n.gamma.assign(L, -1);
  n.beta.assign(L, -1);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& p = model.layers[l];
    const bool var = trainable && layer_trainable(p);
    auto reg = [&](const Tensor& v) { return var ? t.variable(v) : t.constant(v); };
    if (p.has_weight()) n.weight[l] = reg(p.weight);
    if (!p.bias.empty()) n.bias[l] = reg(p.bias);
    if (!p.gamma.empty()) n.gamma[l] = reg(p.gamma);
    if (!p.beta.empty()) n.beta[l] = reg(p.beta);
  }
  return n;
}

std::vector<Tensor*> parameter_tensors(net::Model& model) {
  std::vector<Tensor*> out;
  for (auto& p : model.layers) {
    if (!layer_trainable(p)) continue;
    for (Tensor* t : {&p.weight, &p.bias, &p.gamma, &p.beta})
      if (!t->empty()) out.push_back(t);
  }
  return out;
}

std::vector<NodeId> parameter_nodes(const net::Model& model, const ParamNodes& nodes) {
  std::vector<NodeId> out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (!layer_trainable(model.layers[l])) continue;
    for (NodeId id : {nodes.weight[l], nodes.bias[l], nodes.gamma[l], nodes.beta[l]})
      if (id >= 0) out.push_back(id);
  }
  return out;
}

NetGraph forward_graph(Tape& t, const net::Model& model, const ParamNodes& params, NodeId input, NodeId hidden,
                       BnStats* stats) {
  NetGraph g;
  g.hidden = hidden;
  const Tensor& in = t.value(input);
  const auto& pin = model.plan.input;
  if (in.size() != static_cast<std::size_t>(pin.size())) {
    throw Error(ErrorKind::ShapeMismatch, "graph input " + in.shape_string() + " does not match network geometry");
  }
  if (in.all_zero()) {
    g.output = t.constant(Tensor({model.plan.output_size}));
    return g;
  }
  g.triggered = true;
  NodeId x = input;
  for (const auto& st : model.plan.stages) {
    switch (st.kind) {
      case net::StageKind::downsample: {
        const auto& pl = model.spec.layers[st.pool];
        x = ops::maxpool(t, x, pl.kernel, pl.stride > 0 ? pl.stride : pl.kernel);
        break;
      }
      case net::StageKind::conv_block: {
        const auto& ls = model.spec.layers[st.conv];
        NodeId y = ops::conv2d(t, x, params.weight[st.conv], params.bias[st.conv], ls.pad, ls.stride > 0 ? ls.stride : 1);
        if (st.bn >= 0) {
          const auto& bp = model.layers[st.bn];
          if (stats) {
            const Tensor& yv = t.value(y);
            const int C = yv.dim(0);
            const std::size_t plane = yv.size() / C;
            auto& ms = stats->mean_sum[st.bn];
            auto& vs = stats->var_sum[st.bn];
            ms.resize(C, 0.0);
            vs.resize(C, 0.0);
            for (int c = 0; c < C; ++c) {
              double s = 0, s2 = 0;
              for (std::size_t i = 0; i < plane; ++i) {
                const double v = yv[c * plane + i];
                s += v;
                s2 += v * v;
              }
              const double mean = s / plane;
              ms[c] += mean;
              vs[c] += std::max(0.0, s2 / plane - mean * mean);
            }
            ++stats->count[st.bn];
          }
          y = ops::batchnorm(t, y, params.gamma[st.bn], params.beta[st.bn], bp.mean, bp.var);
        }
        if (st.pool >= 0) {
          const auto& pl = model.spec.layers[st.pool];
          y = ops::maxpool(t, y, pl.kernel, pl.stride > 0 ? pl.stride : pl.kernel);
        }
        x = ops::relu(t, y);
        g.activations.push_back(x);
        break;
      }
      case net::StageKind::recurrent: {
        const auto& ls = model.spec.layers[st.layer];
        NodeId h = hidden >= 0 ? hidden : t.constant(Tensor({ls.units}));
        x = ops::relu(t, ops::linear(t, ops::concat(t, x, h), params.weight[st.layer], params.bias[st.layer]));
        g.hidden = x;
        g.activations.push_back(x);
        break;
      }
      case net::StageKind::hidden_fc:
        x = ops::relu(t, ops::linear(t, x, params.weight[st.layer], params.bias[st.layer]));
        g.activations.push_back(x);
        break;
      case net::StageKind::output_fc:
        x = ops::linear(t, x, params.weight[st.layer], params.bias[st.layer]);
        break;
    }
  }
  g.output = x;
  return g;
}

SampleGraph build_sample_graph(Tape& t, const TripModel& model, const ParamNodes& roi, const ParamNodes& cls,
                               const events::BinnedSample& sample, int label, CropMode mode, double lambda,
                               BnStats* roi_stats, BnStats* cls_stats) {
  if (sample.frames.empty()) throw Error(ErrorKind::ConfigInvalid, "sample has no timebins");
  check_frames(model, sample);
  SampleGraph sg;
  const auto dcfg = model.decode_config();
  const auto& gcfg = model.attention.grid;
  const int roi_slots = relu_stage_count(model.roi);
  NodeId h_roi = -1, h_cls = -1;
  std::vector<NodeId> l1_terms;
  for (const auto& frame : sample.frames) {
    const NodeId x = t.constant(frame.to_tensor());
    const NetGraph r = forward_graph(t, model.roi, roi, x, h_roi, roi_stats);
    h_roi = r.hidden;
    const Tensor& raw = t.value(r.output);
    sg.rois.push_back(attention::decode_roi({raw[0], raw[1], raw[2]}, dcfg));
    NodeId crop;
    if (mode == CropMode::tgk) {
      const NodeId d = ops::decode_roi(t, r.output, dcfg);
      const NodeId c = ops::kernel_centers(t, d, gcfg.grid);
      const NodeId fx = ops::gaussian_weights(t, c, 0, gcfg, frame.width);
      const NodeId fy = ops::gaussian_weights(t, c, 1, gcfg, frame.height);
      crop = ops::bilinear_crop(t, x, fx, fy);
    } else {
      crop = t.constant(generate_roi(model, frame, sg.rois.back(), CropMode::dap).to_tensor());
    }
    const NetGraph c = forward_graph(t, model.classifier, cls, crop, h_cls, cls_stats);
    h_cls = c.hidden;
    sg.logits.push_back(c.output);
    for (std::size_t k = 0; k < r.activations.size(); ++k) sg.activations.emplace_back(static_cast<int>(k), r.activations[k]);
    for (std::size_t k = 0; k < c.activations.size(); ++k)
      sg.activations.emplace_back(roi_slots + static_cast<int>(k), c.activations[k]);
  }
  const double T = static_cast<double>(sample.frames.size());
  const NodeId mean_logits = ops::scale(t, ops::sum(t, sg.logits), 1.0 / T);
  sg.predicted = argmax(t.value(mean_logits).data);
  NodeId loss = ops::cross_entropy(t, mean_logits, label);
  if (lambda > 0 && !sg.activations.empty()) {
    for (const auto& [slot, id] : sg.activations) l1_terms.push_back(ops::l1(t, id));
    loss = ops::add(t, loss, ops::scale(t, ops::sum(t, l1_terms), lambda / T));
  }
  sg.loss = loss;
  return sg;
}

TrainLog train(TripModel& model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
               CropMode mode) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorKind::ConfigInvalid, "training set is empty");
  TrainLog log;
  {
    std::ostringstream h;
    h << "seed=" << cfg.seed << " mode=" << to_string(mode) << " lr=" << cfg.lr
      << " optimizer=" << (cfg.optimizer == Optimizer::adam ? "adam" : "sgd") << " lambda=" << cfg.lambda
      << " lambda_warmup=" << cfg.lambda_warmup << " epochs=" << cfg.epochs << " batch_size=" << cfg.batch_size
      << " train_roi=" << cfg.train_roi << " train_classifier=" << cfg.train_classifier << " samples=" << train_set.size();
    log.header = h.str();
  }
  const int roi_slots = relu_stage_count(model.roi);
  const int slots = roi_slots + relu_stage_count(model.classifier);
  for (int k = 0; k < slots; ++k) log.sparsity_names.push_back("sparsity_layer_" + std::to_string(k));

  std::vector<Tensor*> params;
  std::vector<double> lr_scale;
  if (cfg.train_roi) {
    for (Tensor* p : parameter_tensors(model.roi)) {
      params.push_back(p);
      lr_scale.push_back(cfg.roi_lr_scale);
    }
  }
  if (cfg.train_classifier) {
    for (Tensor* p : parameter_tensors(model.classifier)) {
      params.push_back(p);
      lr_scale.push_back(1.0);
    }
  }
  OptimizerState opt;
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double warm = cfg.lambda_warmup * cfg.epochs;
    const double lambda = warm > 0 ? cfg.lambda * std::min(1.0, epoch / warm) : cfg.lambda;
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix64(cfg.seed ^ (static_cast<std::uint64_t>(epoch) << 32)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0;
    std::vector<double> zero_frac(slots, 0.0);
    std::vector<long> zero_n(slots, 0);
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Tensor> grads;
      for (const Tensor* p : params) grads.emplace_back(p->shape);
      BnStats roi_stats = make_stats(model.roi), cls_stats = make_stats(model.classifier);
      for (std::size_t bi = b0; bi < b1; ++bi) {
        LabeledSample shifted;
        const LabeledSample* sp = &train_set[order[bi]];
        if (cfg.augment_shift > 0) {
          const auto& b = sp->bbox;
          const int w = model.width(), h = model.height();
          const int lox = std::max(-cfg.augment_shift, static_cast<int>(std::ceil(-b.x0)));
          const int hix = std::min(cfg.augment_shift, static_cast<int>(std::floor(w - b.x1)));
          const int loy = std::max(-cfg.augment_shift, static_cast<int>(std::ceil(-b.y0)));
          const int hiy = std::min(cfg.augment_shift, static_cast<int>(std::floor(h - b.y1)));
          const int dx = hix > lox ? lox + static_cast<int>(rng() % static_cast<std::uint64_t>(hix - lox + 1)) : 0;
          const int dy = hiy > loy ? loy + static_cast<int>(rng() % static_cast<std::uint64_t>(hiy - loy + 1)) : 0;
          shifted = shift_sample(*sp, dx, dy);
          sp = &shifted;
        }
        const LabeledSample& s = *sp;
        Tape t;
        const ParamNodes rp = register_params(t, model.roi, cfg.train_roi);
        const ParamNodes cp = register_params(t, model.classifier, cfg.train_classifier);
        const SampleGraph sg = build_sample_graph(t, model, rp, cp, s.sample, s.label, mode, lambda,
                                                  cfg.train_roi ? &roi_stats : nullptr,
                                                  cfg.train_classifier ? &cls_stats : nullptr);
        loss_sum += t.value(sg.loss)[0];
        for (const auto& [slot, id] : sg.activations) {
          const Tensor& a = t.value(id);
          zero_frac[slot] += static_cast<double>(std::count(a.data.begin(), a.data.end(), 0.0)) / a.size();
          ++zero_n[slot];
        }
        if (!t.requires_grad(sg.loss)) continue;
        t.backward(sg.loss);
        std::vector<NodeId> nodes;
        if (cfg.train_roi) nodes = parameter_nodes(model.roi, rp);
        if (cfg.train_classifier) {
          for (NodeId id : parameter_nodes(model.classifier, cp)) nodes.push_back(id);
        }
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          if (!t.has_grad(nodes[k])) continue;
          const Tensor& g = t.grad(nodes[k]);
          for (std::size_t i = 0; i < g.size(); ++i) grads[k][i] += g[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(b1 - b0);
      for (Tensor& g : grads)
        for (double& v : g.data) v *= inv;
      if (cfg.lr > 0) {
        apply_step(cfg, cfg.lr, params, lr_scale, grads, opt);
        if (cfg.train_roi) update_running_stats(model.roi, roi_stats, cfg.bn_momentum);
        if (cfg.train_classifier) update_running_stats(model.classifier, cls_stats, cfg.bn_momentum);
      }
    }
    EpochMetrics row;
    row.epoch = epoch;
    row.loss = loss_sum / static_cast<double>(train_set.size());
    row.train_acc = evaluate(model, train_set, mode).accuracy;
    if (test_set && !test_set->empty() && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      row.test_acc = evaluate(model, *test_set, mode).accuracy;
    }
    for (int k = 0; k < slots; ++k) row.sparsity.push_back(zero_n[k] ? zero_frac[k] / zero_n[k] : 1.0);
    log.rows.push_back(std::move(row));
    if (cfg.stop_train_acc > 0 && log.rows.back().train_acc >= cfg.stop_train_acc) break;
  }
  return log;
}

void post_training_quantize(TripModel& model) {
  for (net::Model* m : {&model.roi, &model.classifier})
    for (int l : m->weight_layers())
      if (!m->layers[l].frozen) m->freeze_quantized(l);
}

TrainLog qat_finetune(TripModel& model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg,
                      CropMode mode) {
  cfg.validate();
  std::vector<LayerRef> schedule = cfg.qat_schedule;
  if (schedule.empty()) {
    for (int l : model.roi.weight_layers()) schedule.push_back({true, l});
    for (int l : model.classifier.weight_layers()) schedule.push_back({false, l});
  }
  TrainConfig sub = cfg;
  sub.epochs = cfg.qat_epochs;
  sub.lambda_warmup = 0;
  sub.stop_train_acc = 0;
  TrainLog log;
  int offset = 0;
  for (const LayerRef& ref : schedule) {
    net::Model& m = ref.roi ? model.roi : model.classifier;
    if (ref.layer < 0 || ref.layer >= static_cast<int>(m.layers.size()) || !m.layers[ref.layer].has_weight()) {
      throw Error(ErrorKind::ConfigInvalid, "qat schedule entry " + ref.str() + " is not a weight layer");
    }
    m.freeze_quantized(ref.layer);
    if (sub.epochs == 0) continue;
    const bool roi_left = !model.roi.fully_quantized();
    const bool cls_left = !model.classifier.fully_quantized();
    if (!roi_left && !cls_left) continue;
    TrainConfig step = sub;
    step.train_roi = cfg.train_roi && roi_left;
    step.train_classifier = cfg.train_classifier && cls_left;
    if (!step.train_roi && !step.train_classifier) continue;
    append_log(log, train(model, train_set, test_set, step, mode), offset);
  }
  if (!model.roi.fully_quantized() || !model.classifier.fully_quantized()) {
    throw Error(ErrorKind::ScheduleIncomplete, "qat schedule leaves full-precision weight layers");
  }
  return log;
}

TrainLog dap_finetune(TripModel& model, const Dataset& train_set, const Dataset* test_set, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.dap_epochs == 0) return {};
  TrainConfig sub = cfg;
  sub.train_roi = false;
  sub.train_classifier = true;
  sub.epochs = cfg.dap_epochs;
  sub.lr = cfg.dap_lr > 0 ? cfg.dap_lr : cfg.lr;
  sub.lambda_warmup = 0;
  sub.stop_train_acc = 0;
  return train(model, train_set, test_set, sub, CropMode::dap);
}

GradCheckResult check_gradients(const std::vector<Tensor*>& params, const std::function<BuiltLoss(Tape&)>& build,
                                const GradCheckOptions& opts) {
  GradCheckResult res;
  Tape base;
  const BuiltLoss bl = build(base);
  if (bl.wrt.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "gradient check: wrt/params size mismatch");
  base.backward(bl.loss);
  const auto base_sig = base.signature;
  auto eval = [&](std::vector<std::int64_t>& sig) {
    Tape t;
    const BuiltLoss b = build(t);
    sig = t.signature;
    return t.value(b.loss)[0];
  };
  std::vector<std::int64_t> sp, sm;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const bool has = base.has_grad(bl.wrt[k]);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double analytic = has ? base.grad(bl.wrt[k])[i] : 0.0;
      const double orig = p[i];
      double step = opts.h;
      bool done = false;
      for (int r = 0; r <= opts.refinements && !done; ++r, step /= 10) {
        p[i] = orig + step;
        const double lp = eval(sp);
        p[i] = orig - step;
        const double lm = eval(sm);
        p[i] = orig;
        if (sp != base_sig || sm != base_sig) continue;
        done = true;
        const double fd = (lp - lm) / (2 * step);
        const double abs_err = std::abs(fd - analytic);
        const double denom = std::max(std::abs(fd), std::abs(analytic));
        const double rel_err = denom > 0 ? abs_err / denom : 0.0;
        ++res.checked;
        res.max_abs_err = std::max(res.max_abs_err, abs_err);
        if (abs_err > opts.abs_tol) res.max_rel_err = std::max(res.max_rel_err, rel_err);
        if (abs_err > opts.abs_tol && rel_err > opts.rel_tol) ++res.failed;
      }
      if (!done) ++res.skipped;
    }
  }
  return res;
}

}  // namespace trip::grad

#include <random>

#include "common.hpp"
#include "doctest.h"
#include "grad_suite.hpp"
#include "trip/error.hpp"
#include "trip/ops.hpp"
#include "trip/tape.hpp"
#include "trip/train.hpp"

using namespace trip;
using namespace trip::grad;

namespace {

TripModel toy_model(std::uint64_t seed) {
  auto m = TripModel::init(net::parse_spec_file(testutil::kToySpec), seed);
  for (std::size_t i = 0; i < m.roi.layers.back().weight.size(); ++i) m.roi.layers.back().weight[i] = 0.05 * std::sin(1.7 * i);
  return m;
}

std::vector<std::vector<double>> snapshot(const TripModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto* net : {&m.roi, &m.classifier})
    for (const auto& p : net->layers)
      for (const Tensor* t : {&p.weight, &p.bias, &p.gamma, &p.beta, &p.mean, &p.var}) out.push_back(t->data);
  return out;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.lr = 0.01;
  c.epochs = 3;
  c.batch_size = 4;
  c.lambda = 1e-3;
  c.seed = 5;
  c.qat_epochs = 1;
  c.dap_epochs = 1;
  return c;
}

}  // namespace

TEST_SUITE("grad") {
  TEST_CASE("every primitive and the toy pipeline match finite differences") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      for (const auto& [name, r] : testutil::run_grad_suite(seed)) {
        INFO(name, " seed ", seed, " max_rel ", r.max_rel_err, " max_abs ", r.max_abs_err);
        CHECK(r.checked > 0);
        CHECK(r.failed == 0);
        CHECK(r.skipped * 20 <= r.checked);
      }
    }
  }

  TEST_CASE("loss equal to one parameter has unit gradient") {
    Tape t;
    const NodeId a = t.variable(Tensor({1}, std::vector<double>{3.0}));
    const NodeId b = t.variable(Tensor({2}, std::vector<double>{1.0, 2.0}));
    t.backward(a);
    CHECK(t.grad(a)[0] == 1.0);
    CHECK_FALSE(t.has_grad(b));
  }

  TEST_CASE("backward rejects disconnected or non-scalar losses") {
    Tape t;
    const NodeId c = t.constant(Tensor({1}, std::vector<double>{1.0}));
    const NodeId v = t.variable(Tensor({2}));
    auto kind = [&](NodeId id) {
      try {
        t.backward(id);
      } catch (const Error& e) {
        return e.kind();
      }
      return ErrorKind::IoError;
    };
    CHECK(kind(ops::scale(t, c, 2.0)) == ErrorKind::DisconnectedLoss);
    CHECK(kind(v) == ErrorKind::DisconnectedLoss);
  }

  TEST_CASE("events at the kernel centers give zero center gradient") {
    Tape t;
    const NodeId roi = t.variable(Tensor({3}, std::vector<double>{8.0, 8.0, 4.0}));
    Tensor frame({2, 16, 16});
    for (int y : {6, 10})
      for (int x : {6, 10}) frame[static_cast<std::size_t>(y) * 16 + x] = 1.0;
    const attention::KernelGridConfig kc{2, 2.0, 6.0};
    const NodeId c = ops::kernel_centers(t, roi, 2);
    const NodeId v = ops::bilinear_crop(t, t.constant(frame), ops::gaussian_weights(t, c, 0, kc, 16),
                                        ops::gaussian_weights(t, c, 1, kc, 16));
    t.backward(ops::l1(t, v));
    CHECK(t.value(v)[0] == 1.0);
    CHECK(t.grad(roi)[0] == 0.0);
    CHECK(t.grad(roi)[1] == 0.0);
    CHECK(t.grad(roi)[2] == 0.0);
  }

  TEST_CASE("maxpool routes the gradient to the first maximum") {
    Tape t;
    const NodeId x = t.variable(Tensor({1, 2, 2}, std::vector<double>{0.5, 0.9, 0.9, 0.1}));
    t.backward(ops::l1(t, ops::maxpool(t, x, 2, 2)));
    CHECK(t.grad(x).data == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  }

  TEST_CASE("L1 on ReLU outputs has gradient lambda at active units") {
    Tape t;
    const NodeId x = t.variable(Tensor({4}, std::vector<double>{-1.0, 0.5, 0.0, 2.0}));
    t.backward(ops::scale(t, ops::l1(t, ops::relu(t, x)), 0.25));
    CHECK(t.grad(x).data == std::vector<double>{0.0, 0.25, 0.0, 0.25});
  }

  TEST_CASE("training with lr = 0 leaves every parameter unchanged") {
    const auto data = make_dataset(3, 6, testutil::toy_synth());
    auto m = toy_model(11);
    const auto before = snapshot(m);
    auto cfg = quick_config();
    cfg.lr = 0;
    cfg.lambda = 0;
    cfg.epochs = 1;
    train(m, data, nullptr, cfg);
    CHECK(snapshot(m) == before);
  }

  TEST_CASE("training is deterministic") {
    const auto data = make_dataset(3, 8, testutil::toy_synth());
    const auto test = make_dataset(4, 4, testutil::toy_synth());
    auto a = toy_model(12), b = toy_model(12);
    auto cfg = quick_config();
    cfg.augment_shift = 2;
    const auto la = train(a, data, &test, cfg);
    const auto lb = train(b, data, &test, cfg);
    CHECK(la.to_csv() == lb.to_csv());
    CHECK(snapshot(a) == snapshot(b));
    CHECK(la.rows.size() == 3);
    CHECK(la.rows.back().test_acc >= 0);
  }

  TEST_CASE("metrics CSV layout") {
    const auto data = make_dataset(3, 4, testutil::toy_synth());
    auto m = toy_model(13);
    auto cfg = quick_config();
    cfg.epochs = 1;
    const auto csv = train(m, data, nullptr, cfg).to_csv();
    CHECK(csv.rfind("# ", 0) == 0);
    CHECK(csv.find("\nepoch,loss,train_acc,test_acc,sparsity_") != std::string::npos);
  }

  TEST_CASE("a larger sparsity coefficient lowers the active fraction") {
    const auto data = make_dataset(3, 16, testutil::toy_synth());
    auto active = [&](double lambda) {
      auto m = toy_model(14);
      auto cfg = quick_config();
      cfg.epochs = 6;
      cfg.lambda = lambda;
      cfg.lambda_warmup = 0;
      const auto log = train(m, data, nullptr, cfg);
      double s = 0;
      for (double v : log.rows.back().sparsity) s += 1.0 - v;
      return s / static_cast<double>(log.rows.back().sparsity.size());
    };
    const double lo = active(0.01), hi = active(0.1);
    INFO("active fraction ", lo, " vs ", hi);
    CHECK(hi < lo);
  }

  TEST_CASE("qat freezes layers for good and ends fully quantized") {
    const auto data = make_dataset(3, 8, testutil::toy_synth());
    auto m = toy_model(15);
    auto cfg = quick_config();
    cfg.qat_schedule = {LayerRef::parse("roi:1"), LayerRef::parse("cls:0")};
    CHECK_THROWS_AS(qat_finetune(m, data, nullptr, cfg), Error);

    auto q = toy_model(15);
    train(q, data, nullptr, cfg);
    cfg.qat_schedule.clear();
    // remember the first frozen layer's nibbles after the first schedule step
    auto probe = q;
    probe.roi.freeze_quantized(1);
    const auto first = probe.roi.layers[1].frozen->packed;
    qat_finetune(q, data, nullptr, cfg);
    CHECK(q.roi.fully_quantized());
    CHECK(q.classifier.fully_quantized());
    CHECK(q.roi.layers[1].frozen->packed == first);
    for (const auto* net : {&q.roi, &q.classifier})
      for (int l : net->weight_layers()) CHECK(net->layers[l].weight.data == net->layers[l].frozen->dequantize().data);
  }

  TEST_CASE("qat without fine-tune epochs equals post-training quantization") {
    const auto data = make_dataset(3, 4, testutil::toy_synth());
    auto a = toy_model(16), b = toy_model(16);
    auto cfg = quick_config();
    cfg.qat_epochs = 0;
    qat_finetune(a, data, nullptr, cfg);
    post_training_quantize(b);
    CHECK(snapshot(a) == snapshot(b));
  }

  TEST_CASE("schedule entries must name weight layers") {
    const auto data = make_dataset(3, 4, testutil::toy_synth());
    auto m = toy_model(17);
    auto cfg = quick_config();
    cfg.qat_schedule = {LayerRef::parse("roi:0")};  // the input downsample
    try {
      qat_finetune(m, data, nullptr, cfg);
      FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigInvalid);
    }
    CHECK(LayerRef::parse("cls:3").str() == "cls:3");
    CHECK_THROWS_AS(LayerRef::parse("abc:1"), Error);
  }

  TEST_CASE("dap fine-tune touches only the classifier") {
    const auto data = make_dataset(3, 8, testutil::toy_synth());
    auto m = toy_model(18);
    auto cfg = quick_config();
    train(m, data, nullptr, cfg);
    const auto roi_before = m.roi.layers;
    const auto cls_before = m.classifier.layers;

    cfg.dap_epochs = 0;
    auto same = m;
    dap_finetune(same, data, nullptr, cfg);
    CHECK(snapshot(same) == snapshot(m));

    cfg.dap_epochs = 2;
    dap_finetune(m, data, nullptr, cfg);
    for (std::size_t l = 0; l < roi_before.size(); ++l) {
      CHECK(m.roi.layers[l].weight.data == roi_before[l].weight.data);
      CHECK(m.roi.layers[l].mean.data == roi_before[l].mean.data);
    }
    bool changed = false;
    for (std::size_t l = 0; l < cls_before.size(); ++l) changed |= m.classifier.layers[l].weight.data != cls_before[l].weight.data;
    CHECK(changed);
    const auto r = evaluate(m, data, CropMode::dap);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
  }

  TEST_CASE("invalid training configs") {
    auto bad = [](auto mutate) {
      TrainConfig c;
      mutate(c);
      try {
        c.validate();
      } catch (const Error& e) {
        return e.kind() == ErrorKind::ConfigInvalid;
      }
      return false;
    };
    CHECK(bad([](TrainConfig& c) { c.lr = -1; }));
    CHECK(bad([](TrainConfig& c) { c.lambda = -0.1; }));
    CHECK(bad([](TrainConfig& c) { c.batch_size = 0; }));
    CHECK(bad([](TrainConfig& c) { c.augment_shift = -2; }));
  }

  TEST_CASE("shifted samples move frames and box together") {
    auto s = make_dataset(3, 1, testutil::toy_synth())[0];
    const auto moved = shift_sample(s, 2, -1);
    CHECK(moved.bbox.x0 == s.bbox.x0 + 2);
    CHECK(moved.bbox.y1 == s.bbox.y1 - 1);
    const auto& a = s.sample.frames[0];
    const auto& b = moved.sample.frames[0];
    bool ok = true;
    for (int p = 0; p < 2; ++p)
      for (int y = 1; y < 16; ++y)
        for (int x = 0; x < 14; ++x) ok &= b.at(p, y - 1, x + 2) == a.at(p, y, x);
    CHECK(ok);
  }
}

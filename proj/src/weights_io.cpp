#include "trip/weights_io.hpp"

#include <fstream>
#include <iterator>

#include "trip/bytes.hpp"
#include "trip/error.hpp"

namespace trip::bytes {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path);
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) throw Error(ErrorKind::IoError, "short write to " + path);
}

}  // namespace trip::bytes

namespace trip::net {

namespace {

constexpr char kMagic[4] = {'T', 'R', 'P', 'W'};

std::vector<int> expected_weight_shape(const LayerSpec& ls) {
  switch (ls.kind) {
    case LayerKind::conv: return {ls.out, ls.in, ls.kernel, ls.kernel};
    case LayerKind::relu_rnn: return {ls.units, ls.in + ls.units};
    case LayerKind::fully_connected:
    case LayerKind::output: return {ls.units, ls.in};
    default: return {};
  }
}

std::vector<const Tensor*> aux_tensors(const LayerParams& p, LayerKind kind) {
  if (kind == LayerKind::batchnorm) return {&p.gamma, &p.beta, &p.mean, &p.var};
  if (kind == LayerKind::maxpool) return {};
  return {&p.bias};
}

int aux_channels(const LayerSpec& ls) {
  switch (ls.kind) {
    case LayerKind::conv: return ls.out;
    case LayerKind::batchnorm: return ls.in > 0 ? ls.in : ls.out;
    case LayerKind::relu_rnn:
    case LayerKind::fully_connected:
    case LayerKind::output: return ls.units;
    default: return 0;
  }
}

}  // namespace

std::vector<std::uint8_t> save_weights(const Model& model) {
  if (model.layers.empty()) throw Error(ErrorKind::LayerCountMismatch, "model has no layers");
  if (model.layers.size() != model.spec.layers.size()) {
    throw Error(ErrorKind::LayerCountMismatch, "parameter list does not match the layer stack");
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  bytes::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(model.layers.size()));
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerParams& p = model.layers[i];
    const LayerKind kind = model.spec.layers[i].kind;
    bytes::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
    if (p.has_weight()) {
      const QuantTensor q = p.frozen ? *p.frozen : quantize_layer(p.weight);
      bytes::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(q.shape.size()));
      for (int d : q.shape) bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
      bytes::put_le<std::int8_t>(out, static_cast<std::int8_t>(q.scale_exponent));
      bytes::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(q.packed.size()));
      out.insert(out.end(), q.packed.begin(), q.packed.end());
    } else {
      bytes::put_le<std::uint8_t>(out, 0);
      bytes::put_le<std::int8_t>(out, 0);
      bytes::put_le<std::uint32_t>(out, 0);
    }
    std::uint32_t aux_len = 0;
    for (const Tensor* t : aux_tensors(p, kind)) aux_len += static_cast<std::uint32_t>(t->size());
    bytes::put_le<std::uint32_t>(out, aux_len);
    for (const Tensor* t : aux_tensors(p, kind))
      for (double v : t->data) bytes::put_le<float>(out, static_cast<float>(v));
  }
  return out;
}

Model load_weights(std::span<const std::uint8_t> data, const NetworkSpec& spec) {
  if (data.size() < 4 || !std::equal(kMagic, kMagic + 4, data.begin())) {
    throw Error(ErrorKind::BadMagic, "not a TRPW file");
  }
  bytes::Reader in(data.subspan(4));
  const auto count = in.get<std::uint16_t>();
  if (count == 0) throw Error(ErrorKind::LayerCountMismatch, "weight file holds no layers");
  if (count != spec.layers.size()) {
    throw Error(ErrorKind::LayerCountMismatch, "file has " + std::to_string(count) + " layers, spec has " +
                                                   std::to_string(spec.layers.size()));
  }
  Model m;
  m.spec = spec;
  m.plan = compile(spec);
  m.layers.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const LayerSpec& ls = spec.layers[i];
    LayerParams& p = m.layers[i];
    const auto kind = in.get<std::uint8_t>();
    if (kind != static_cast<std::uint8_t>(ls.kind)) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " kind " + std::to_string(kind) +
                                                " does not match spec kind " + to_string(ls.kind));
    }
    const auto rank = in.get<std::uint8_t>();
    std::vector<int> dims(rank);
    for (auto& d : dims) d = static_cast<int>(in.get<std::uint32_t>());
    const auto scale = in.get<std::int8_t>();
    const auto packed_len = in.get<std::uint32_t>();
    const auto packed = in.take(packed_len);
    const std::vector<int> want = expected_weight_shape(ls);
    if (dims != want) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " weight shape does not match spec");
    }
    if (!want.empty()) {
      QuantTensor q;
      q.shape = dims;
      q.scale_exponent = scale;
      q.count = Tensor::numel(dims);
      if (packed_len != (q.count + 1) / 2) {
        throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " packed length " +
                                                  std::to_string(packed_len) + " for " + std::to_string(q.count) +
                                                  " weights");
      }
      q.packed.assign(packed.begin(), packed.end());
      p.weight = q.dequantize();
      p.frozen = std::move(q);
    } else if (packed_len != 0) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " carries unexpected weights");
    }
    const auto aux_len = in.get<std::uint32_t>();
    const int ch = aux_channels(ls);
    const std::size_t groups = ls.kind == LayerKind::batchnorm ? 4 : (ch > 0 ? 1 : 0);
    if (aux_len != groups * static_cast<std::size_t>(ch)) {
      throw Error(ErrorKind::ShapeMismatch, "layer " + std::to_string(i) + " has " + std::to_string(aux_len) +
                                                " auxiliary values, expected " + std::to_string(groups * ch));
    }
    auto read_vec = [&](Tensor& t) {
      t = Tensor({ch});
      for (double& v : t.data) v = in.get<float>();
    };
    if (ls.kind == LayerKind::batchnorm) {
      read_vec(p.gamma);
      read_vec(p.beta);
      read_vec(p.mean);
      read_vec(p.var);
    } else if (groups) {
      read_vec(p.bias);
    }
  }
  if (in.remaining() != 0) throw Error(ErrorKind::ShapeMismatch, "trailing bytes after the last layer");
  return m;
}

}  // namespace trip::net

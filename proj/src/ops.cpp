#include "trip/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "trip/error.hpp"
#include "trip/kernels.hpp"

namespace trip::grad::ops {

namespace k = trip::net::kernels;

namespace {

std::int64_t mix(std::int64_t h, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(h);
  u ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (u << 6) + (u >> 2);
  return static_cast<std::int64_t>(u);
}

void accumulate(Tape& t, NodeId id, const Tensor& g) {
  if (!t.requires_grad(id)) return;
  Tensor& dst = t.grad(id);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Inclusive [lo, hi] range of nonzero entries in each row; empty rows give lo > hi.
void row_ranges(const Tensor& f, std::vector<int>& lo, std::vector<int>& hi) {
  const int rows = f.dim(0), cols = f.dim(1);
  lo.assign(rows, 1);
  hi.assign(rows, 0);
  for (int r = 0; r < rows; ++r) {
    const double* row = f.data.data() + static_cast<std::size_t>(r) * cols;
    int a = 0;
    while (a < cols && row[a] == 0.0) ++a;
    if (a == cols) continue;
    int b = cols - 1;
    while (row[b] == 0.0) --b;
    lo[r] = a;
    hi[r] = b;
  }
}

}  // namespace

NodeId conv2d(Tape& t, NodeId x, NodeId w, NodeId b, int pad, int stride) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  Tensor y = k::conv2d(xv, wv, b >= 0 ? t.value(b) : Tensor(), pad, stride);
  return t.record(std::move(y), {x, w, b >= 0 ? b : w}, [x, w, b, pad, stride](Tape& tp, const Tensor& g) {
    Tensor* gx = tp.requires_grad(x) ? &tp.grad(x) : nullptr;
    Tensor* gw = tp.requires_grad(w) ? &tp.grad(w) : nullptr;
    Tensor* gb = b >= 0 && tp.requires_grad(b) ? &tp.grad(b) : nullptr;
    k::conv2d_backward(tp.value(x), tp.value(w), g, pad, stride, gx, gw, gb);
  });
}

NodeId batchnorm(Tape& t, NodeId x, NodeId gamma, NodeId beta, const Tensor& mean, const Tensor& var) {
  Tensor y = k::batchnorm(t.value(x), t.value(gamma), t.value(beta), mean, var);
  return t.record(std::move(y), {x, gamma, beta}, [x, gamma, beta, mean, var](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    const Tensor& gv = tp.value(gamma);
    const int C = xv.dim(0);
    const std::size_t plane = xv.size() / C;
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(var[c] + k::kBatchNormEps);
      double sg = 0.0, sgx = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t idx = c * plane + i;
        sg += g[idx];
        sgx += g[idx] * (xv[idx] - mean[c]) * inv;
        if (tp.requires_grad(x)) tp.grad(x)[idx] += g[idx] * gv[c] * inv;
      }
      if (tp.requires_grad(gamma)) tp.grad(gamma)[c] += sgx;
      if (tp.requires_grad(beta)) tp.grad(beta)[c] += sg;
    }
  });
}

NodeId maxpool(Tape& t, NodeId x, int kernel, int stride) {
  std::vector<int> arg;
  Tensor y = k::maxpool2d(t.value(x), kernel, stride, &arg);
  std::int64_t h = 0x51;
  for (int a : arg) h = mix(h, a);
  t.signature.push_back(h);
  return t.record(std::move(y), {x}, [x, arg = std::move(arg)](Tape& tp, const Tensor& g) {
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += g[i];
  });
}

NodeId relu(Tape& t, NodeId x) {
  Tensor y = t.value(x);
  k::relu_inplace(y);
  std::int64_t h = 0x72;
  for (std::size_t i = 0; i < y.size(); ++i) h = mix(h, y[i] > 0.0 ? static_cast<std::int64_t>(i) : -1);
  t.signature.push_back(h);
  return t.record(std::move(y), {x}, [x](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

NodeId linear(Tape& t, NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const int U = wv.dim(0), I = wv.dim(1);
  if (static_cast<int>(xv.size()) != I) {
    throw Error(ErrorKind::ShapeMismatch, "linear expects " + std::to_string(I) + " inputs, got " + std::to_string(xv.size()));
  }
  Tensor y({U}, b >= 0 ? t.value(b).data : std::vector<double>(U, 0.0));
  k::linear_accumulate(xv.data, wv, 0, y.data);
  return t.record(std::move(y), {x, w, b >= 0 ? b : w}, [x, w, b](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    const Tensor& wv = tp.value(w);
    const int U = wv.dim(0), I = wv.dim(1);
    if (tp.requires_grad(w)) {
      Tensor& gw = tp.grad(w);
      for (int u = 0; u < U; ++u) {
        if (g[u] == 0.0) continue;
        double* row = gw.data.data() + static_cast<std::size_t>(u) * I;
        for (int i = 0; i < I; ++i) row[i] += g[u] * xv[i];
      }
    }
    if (b >= 0 && tp.requires_grad(b)) {
      Tensor& gb = tp.grad(b);
      for (int u = 0; u < U; ++u) gb[u] += g[u];
    }
    if (tp.requires_grad(x)) {
      Tensor& gx = tp.grad(x);
      for (int u = 0; u < U; ++u) {
        if (g[u] == 0.0) continue;
        const double* row = wv.data.data() + static_cast<std::size_t>(u) * I;
        for (int i = 0; i < I; ++i) gx[i] += g[u] * row[i];
      }
    }
  });
}

NodeId concat(Tape& t, NodeId a, NodeId b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  std::vector<double> v = av.data;
  v.insert(v.end(), bv.data.begin(), bv.data.end());
  const int n = static_cast<int>(v.size());
  const std::size_t na = av.size();
  return t.record(Tensor({n}, std::move(v)), {a, b}, [a, b, na](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) {
      Tensor& ga = tp.grad(a);
      for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      Tensor& gb = tp.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
    }
  });
}

NodeId add(Tape& t, NodeId a, NodeId b) {
  Tensor y = t.value(a);
  const Tensor& bv = t.value(b);
  if (bv.size() != y.size()) throw Error(ErrorKind::ShapeMismatch, "add of " + y.shape_string() + " and " + bv.shape_string());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return t.record(std::move(y), {a, b}, [a, b](Tape& tp, const Tensor& g) {
    accumulate(tp, a, g);
    accumulate(tp, b, g);
  });
}

NodeId scale(Tape& t, NodeId a, double s) {
  Tensor y = t.value(a);
  for (double& v : y.data) v *= s;
  return t.record(std::move(y), {a}, [a, s](Tape& tp, const Tensor& g) {
    Tensor& ga = tp.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

NodeId sum(Tape& t, const std::vector<NodeId>& xs) {
  if (xs.empty()) throw Error(ErrorKind::ShapeMismatch, "sum of no nodes");
  Tensor y = t.value(xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& v = t.value(xs[k]);
    if (v.size() != y.size()) throw Error(ErrorKind::ShapeMismatch, "sum of mismatched shapes");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
  }
  return t.record(std::move(y), xs, [xs](Tape& tp, const Tensor& g) {
    for (NodeId x : xs) accumulate(tp, x, g);
  });
}

NodeId cross_entropy(Tape& t, NodeId logits, int label) {
  const Tensor& z = t.value(logits);
  if (label < 0 || label >= static_cast<int>(z.size())) {
    throw Error(ErrorKind::ValueOutOfRange, "label " + std::to_string(label) + " outside " + std::to_string(z.size()) + " classes");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z.data) mx = std::max(mx, v);
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] - mx);
  for (double& v : p) v /= s;
  const double loss = std::log(s) + mx - z[label];
  return t.record(Tensor({1}, {loss}), {logits}, [logits, label, p = std::move(p)](Tape& tp, const Tensor& g) {
    Tensor& gz = tp.grad(logits);
    for (std::size_t i = 0; i < p.size(); ++i) gz[i] += g[0] * (p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0));
  });
}

NodeId l1(Tape& t, NodeId x) {
  double s = 0.0;
  for (double v : t.value(x).data) s += std::abs(v);
  return t.record(Tensor({1}, {s}), {x}, [x](Tape& tp, const Tensor& g) {
    const Tensor& xv = tp.value(x);
    Tensor& gx = tp.grad(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[0] * (xv[i] > 0.0 ? 1.0 : xv[i] < 0.0 ? -1.0 : 0.0);
  });
}

NodeId decode_roi(Tape& t, NodeId raw, const attention::DecodeConfig& cfg) {
  const Tensor& r = t.value(raw);
  if (r.size() != 3) throw Error(ErrorKind::ShapeMismatch, "roi head must produce 3 values");
  const attention::RoiParams roi = attention::decode_roi({r[0], r[1], r[2]}, cfg);
  return t.record(Tensor({3}, {roi.gx, roi.gy, roi.delta}), {raw}, [raw, cfg](Tape& tp, const Tensor& g) {
    const Tensor& r = tp.value(raw);
    Tensor& gr = tp.grad(raw);
    const double tx = std::tanh(r[0]), ty = std::tanh(r[1]), sd = sigmoid(r[2]);
    gr[0] += g[0] * cfg.width / 2.0 * (1.0 - tx * tx);
    gr[1] += g[1] * cfg.height / 2.0 * (1.0 - ty * ty);
    gr[2] += g[2] * cfg.scale * sd * (1.0 - sd);
  });
}

NodeId kernel_centers(Tape& t, NodeId roi, int grid) {
  const Tensor& r = t.value(roi);
  const attention::KernelGrid kg = attention::kernel_centers({r[0], r[1], r[2]}, {grid, 1.0, 1.0});
  std::vector<double> v = kg.mu_x;
  v.insert(v.end(), kg.mu_y.begin(), kg.mu_y.end());
  return t.record(Tensor({2, grid}, std::move(v)), {roi}, [roi, grid](Tape& tp, const Tensor& g) {
    Tensor& gr = tp.grad(roi);
    const double mid = (grid - 1) / 2.0;
    for (int i = 0; i < grid; ++i) {
      gr[0] += g[i];
      gr[1] += g[grid + i];
      gr[2] += (i - mid) * (g[i] + g[grid + i]);
    }
  });
}

NodeId gaussian_weights(Tape& t, NodeId centers, int axis, const attention::KernelGridConfig& cfg, int extent) {
  const Tensor& c = t.value(centers);
  const int n_grid = c.dim(1);
  std::vector<double> mu(c.data.begin() + static_cast<std::ptrdiff_t>(axis) * n_grid,
                         c.data.begin() + static_cast<std::ptrdiff_t>(axis + 1) * n_grid);
  attention::KernelAxis ax = attention::axis_weights(mu, cfg, extent);
  std::int64_t h = 0x67 + axis;
  for (int i = 0; i < n_grid; ++i) h = mix(mix(h, ax.lo[i]), ax.hi[i]);
  t.signature.push_back(h);
  Tensor f({n_grid, extent}, ax.weights);
  const double sigma = cfg.sigma;
  return t.record(std::move(f), {centers},
                  [centers, axis, n_grid, extent, sigma, ax = std::move(ax), mu = std::move(mu)](Tape& tp, const Tensor& g) {
                    Tensor& gc = tp.grad(centers);
                    for (int i = 0; i < n_grid; ++i) {
                      double s = 0.0;
                      for (int n = ax.lo[i]; n <= ax.hi[i]; ++n) {
                        const std::size_t idx = static_cast<std::size_t>(i) * extent + n;
                        s += g[idx] * ax.weights[idx] * (n - mu[i]) / sigma;
                      }
                      gc[static_cast<std::size_t>(axis) * n_grid + i] += s;
                    }
                  });
}

NodeId bilinear_crop(Tape& t, NodeId frame, NodeId fx, NodeId fy) {
  const Tensor& I = t.value(frame);
  const Tensor& Fx = t.value(fx);
  const Tensor& Fy = t.value(fy);
  const int B = I.dim(1), A = I.dim(2), N = Fx.dim(0);
  if (I.dim(0) != 2 || Fx.dim(1) != A || Fy.dim(1) != B || Fy.dim(0) != N) {
    throw Error(ErrorKind::ShapeMismatch, "crop shapes " + I.shape_string() + " " + Fx.shape_string() + " " + Fy.shape_string());
  }
  std::vector<int> xlo, xhi, ylo, yhi;
  row_ranges(Fx, xlo, xhi);
  row_ranges(Fy, ylo, yhi);
  Tensor v({2, N, N});
  const std::size_t plane = static_cast<std::size_t>(A) * B;
  for (int p = 0; p < 2; ++p) {
    const double* ip = I.data.data() + p * plane;
    for (int j = 0; j < N; ++j) {
      for (int i = 0; i < N; ++i) {
        double acc = 0.0;
        for (int m = ylo[j]; m <= yhi[j]; ++m) {
          const double wy = Fy[static_cast<std::size_t>(j) * B + m];
          const double* row = ip + static_cast<std::size_t>(m) * A;
          for (int n = xlo[i]; n <= xhi[i]; ++n) acc += wy * Fx[static_cast<std::size_t>(i) * A + n] * row[n];
        }
        v[(static_cast<std::size_t>(p) * N + j) * N + i] = acc;
      }
    }
  }
  return t.record(std::move(v), {frame, fx, fy},
                  [frame, fx, fy, A, B, N, xlo, xhi, ylo, yhi](Tape& tp, const Tensor& g) {
                    const Tensor& I = tp.value(frame);
                    const Tensor& Fx = tp.value(fx);
                    const Tensor& Fy = tp.value(fy);
                    const std::size_t plane = static_cast<std::size_t>(A) * B;
                    auto gv = [&](int p, int j, int i) { return g[(static_cast<std::size_t>(p) * N + j) * N + i]; };
                    if (tp.requires_grad(fx)) {
                      // R[j][n] = sum_m Fy[j][m] I[m][n]
                      Tensor& gfx = tp.grad(fx);
                      std::vector<double> R(static_cast<std::size_t>(N) * A);
                      for (int p = 0; p < 2; ++p) {
                        std::fill(R.begin(), R.end(), 0.0);
                        const double* ip = I.data.data() + p * plane;
                        for (int j = 0; j < N; ++j)
                          for (int m = ylo[j]; m <= yhi[j]; ++m) {
                            const double wy = Fy[static_cast<std::size_t>(j) * B + m];
                            const double* row = ip + static_cast<std::size_t>(m) * A;
                            double* r = R.data() + static_cast<std::size_t>(j) * A;
                            for (int n = 0; n < A; ++n) r[n] += wy * row[n];
                          }
                        for (int i = 0; i < N; ++i)
                          for (int j = 0; j < N; ++j) {
                            const double s = gv(p, j, i);
                            if (s == 0.0) continue;
                            const double* r = R.data() + static_cast<std::size_t>(j) * A;
                            double* dst = gfx.data.data() + static_cast<std::size_t>(i) * A;
                            for (int n = 0; n < A; ++n) dst[n] += s * r[n];
                          }
                      }
                    }
                    if (tp.requires_grad(fy)) {
                      // Q[i][m] = sum_n Fx[i][n] I[m][n]
                      Tensor& gfy = tp.grad(fy);
                      std::vector<double> Q(static_cast<std::size_t>(N) * B);
                      for (int p = 0; p < 2; ++p) {
                        std::fill(Q.begin(), Q.end(), 0.0);
                        const double* ip = I.data.data() + p * plane;
                        for (int i = 0; i < N; ++i)
                          for (int m = 0; m < B; ++m) {
                            const double* row = ip + static_cast<std::size_t>(m) * A;
                            double s = 0.0;
                            for (int n = xlo[i]; n <= xhi[i]; ++n) s += Fx[static_cast<std::size_t>(i) * A + n] * row[n];
                            Q[static_cast<std::size_t>(i) * B + m] = s;
                          }
                        for (int j = 0; j < N; ++j)
                          for (int i = 0; i < N; ++i) {
                            const double s = gv(p, j, i);
                            if (s == 0.0) continue;
                            const double* q = Q.data() + static_cast<std::size_t>(i) * B;
                            double* dst = gfy.data.data() + static_cast<std::size_t>(j) * B;
                            for (int m = 0; m < B; ++m) dst[m] += s * q[m];
                          }
                      }
                    }
                    if (tp.requires_grad(frame)) {
                      Tensor& gi = tp.grad(frame);
                      for (int p = 0; p < 2; ++p)
                        for (int j = 0; j < N; ++j)
                          for (int i = 0; i < N; ++i) {
                            const double s = gv(p, j, i);
                            for (int m = ylo[j]; m <= yhi[j]; ++m) {
                              const double wy = s * Fy[static_cast<std::size_t>(j) * B + m];
                              double* dst = gi.data.data() + p * plane + static_cast<std::size_t>(m) * A;
                              for (int n = xlo[i]; n <= xhi[i]; ++n) dst[n] += wy * Fx[static_cast<std::size_t>(i) * A + n];
                            }
                          }
                    }
                  });
}

}  // namespace trip::grad::ops

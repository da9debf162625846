#include "trip/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "trip/error.hpp"

namespace trip::net::kernels {

namespace {

// Output range [lo, hi) along one axis for kernel tap `k`.
void tap_range(int k, int pad, int stride, int in_extent, int out_extent, int& lo, int& hi) {
  // in = o * stride + k - pad must lie in [0, in_extent)
  lo = 0;
  while (lo < out_extent && lo * stride + k - pad < 0) ++lo;
  hi = out_extent;
  while (hi > lo && (hi - 1) * stride + k - pad >= in_extent) --hi;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad, int stride) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int O = w.dim(0), K = w.dim(2);
  if (w.dim(1) != C) throw Error(ErrorKind::ShapeMismatch, "conv input channels " + x.shape_string() + " vs " + w.shape_string());
  const int Ho = (H + 2 * pad - K) / stride + 1;
  const int Wo = (W + 2 * pad - K) / stride + 1;
  Tensor y({O, Ho, Wo});
  for (int o = 0; o < O; ++o) {
    double* yo = y.data.data() + static_cast<std::size_t>(o) * Ho * Wo;
    std::fill(yo, yo + static_cast<std::size_t>(Ho) * Wo, b.empty() ? 0.0 : b[o]);
    for (int c = 0; c < C; ++c) {
      const double* xc = x.data.data() + static_cast<std::size_t>(c) * H * W;
      for (int ky = 0; ky < K; ++ky) {
        int oy0, oy1;
        tap_range(ky, pad, stride, H, Ho, oy0, oy1);
        for (int kx = 0; kx < K; ++kx) {
          int ox0, ox1;
          tap_range(kx, pad, stride, W, Wo, ox0, ox1);
          const double wv = w[((static_cast<std::size_t>(o) * C + c) * K + ky) * K + kx];
          for (int oy = oy0; oy < oy1; ++oy) {
            const double* xr = xc + static_cast<std::size_t>(oy * stride + ky - pad) * W;
            double* yr = yo + static_cast<std::size_t>(oy) * Wo;
            for (int ox = ox0; ox < ox1; ++ox) yr[ox] += wv * xr[ox * stride + kx - pad];
          }
        }
      }
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int pad, int stride, Tensor* gx,
                     Tensor* gw, Tensor* gb) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int O = w.dim(0), K = w.dim(2);
  const int Ho = gout.dim(1), Wo = gout.dim(2);
  for (int o = 0; o < O; ++o) {
    const double* go = gout.data.data() + static_cast<std::size_t>(o) * Ho * Wo;
    if (gb) {
      double s = 0.0;
      for (int i = 0; i < Ho * Wo; ++i) s += go[i];
      (*gb)[o] += s;
    }
    for (int c = 0; c < C; ++c) {
      const double* xc = x.data.data() + static_cast<std::size_t>(c) * H * W;
      double* gxc = gx ? gx->data.data() + static_cast<std::size_t>(c) * H * W : nullptr;
      for (int ky = 0; ky < K; ++ky) {
        int oy0, oy1;
        tap_range(ky, pad, stride, H, Ho, oy0, oy1);
        for (int kx = 0; kx < K; ++kx) {
          int ox0, ox1;
          tap_range(kx, pad, stride, W, Wo, ox0, ox1);
          const std::size_t widx = ((static_cast<std::size_t>(o) * C + c) * K + ky) * K + kx;
          const double wv = w[widx];
          double gacc = 0.0;
          for (int oy = oy0; oy < oy1; ++oy) {
            const std::size_t xrow = static_cast<std::size_t>(oy * stride + ky - pad) * W;
            const double* gr = go + static_cast<std::size_t>(oy) * Wo;
            for (int ox = ox0; ox < ox1; ++ox) {
              const std::size_t xi = xrow + ox * stride + kx - pad;
              gacc += gr[ox] * xc[xi];
              if (gxc) gxc[xi] += wv * gr[ox];
            }
          }
          if (gw) (*gw)[widx] += gacc;
        }
      }
    }
  }
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean, const Tensor& var) {
  const int C = x.dim(0);
  const std::size_t plane = x.size() / C;
  Tensor y(x.shape);
  for (int c = 0; c < C; ++c) {
    const double scale = gamma[c] / std::sqrt(var[c] + kBatchNormEps);
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t k = c * plane + i;
      y[k] = scale * (x[k] - mean[c]) + beta[c];
    }
  }
  return y;
}

Tensor maxpool2d(const Tensor& x, int k, int stride, std::vector<int>* argmax) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int Ho = H < k ? 0 : (H - k) / stride + 1;
  const int Wo = W < k ? 0 : (W - k) / stride + 1;
  Tensor y({C, Ho, Wo});
  if (argmax) argmax->assign(y.size(), 0);
  std::size_t out = 0;
  for (int c = 0; c < C; ++c) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox, ++out) {
        int best = (c * H + oy * stride) * W + ox * stride;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) {
            const int idx = (c * H + oy * stride + dy) * W + ox * stride + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        y[out] = x[best];
        if (argmax) (*argmax)[out] = best;
      }
    }
  }
  return y;
}

void linear_accumulate(std::span<const double> x, const Tensor& w, int offset, std::span<double> y) {
  const int U = w.dim(0), I = w.dim(1);
  for (int u = 0; u < U; ++u) {
    const double* row = w.data.data() + static_cast<std::size_t>(u) * I + offset;
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += row[j] * x[j];
    y[u] += s;
  }
}

void relu_inplace(Tensor& t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

}  // namespace trip::net::kernels

#pragma once

#include <span>
#include <vector>

#include "trip/tensor.hpp"

// Dense layer primitives shared by the reference forward pass and the tape.
// Activations are [C, H, W]; conv weights [O, C, k, k]; linear weights [U, I].
namespace trip::net::kernels {

inline constexpr double kBatchNormEps = 1e-5;

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad, int stride);

/// Accumulates into whichever of gx/gw/gb is non-null.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int pad, int stride, Tensor* gx,
                     Tensor* gw, Tensor* gb);

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean, const Tensor& var);

/// Floor-mode max pooling. `argmax` receives the flat input index of each
/// output's maximum (first index wins ties, row-major).
Tensor maxpool2d(const Tensor& x, int k, int stride, std::vector<int>* argmax = nullptr);

/// y = W[:, offset:offset+x.size()] * x, accumulated into y.
void linear_accumulate(std::span<const double> x, const Tensor& w, int offset, std::span<double> y);

void relu_inplace(Tensor& t);

}  // namespace trip::net::kernels

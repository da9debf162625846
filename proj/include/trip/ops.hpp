#pragma once

#include <vector>

#include "trip/attention.hpp"
#include "trip/tape.hpp"

// Differentiable primitives. Activations are [C, H, W]; linear layers flatten their input.
namespace trip::grad::ops {

NodeId conv2d(Tape& t, NodeId x, NodeId w, NodeId b, int pad, int stride);
/// Inference-form batchnorm with constant running statistics; gamma and beta are differentiable.
NodeId batchnorm(Tape& t, NodeId x, NodeId gamma, NodeId beta, const Tensor& mean, const Tensor& var);
NodeId maxpool(Tape& t, NodeId x, int k, int stride);
NodeId relu(Tape& t, NodeId x);
/// y = W x + b for W [U, I]; b may be -1.
NodeId linear(Tape& t, NodeId x, NodeId w, NodeId b);
/// Flattened concatenation [a..., b...].
NodeId concat(Tape& t, NodeId a, NodeId b);
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId scale(Tape& t, NodeId a, double s);
/// Elementwise sum of equally shaped nodes.
NodeId sum(Tape& t, const std::vector<NodeId>& xs);
/// Softmax cross-entropy of a logit vector against a class index.
NodeId cross_entropy(Tape& t, NodeId logits, int label);
/// Sum of absolute values.
NodeId l1(Tape& t, NodeId x);

/// Raw [3] head output -> [gx, gy, delta].
NodeId decode_roi(Tape& t, NodeId raw, const attention::DecodeConfig& cfg);
/// [gx, gy, delta] -> [2, N] with row 0 the x centers and row 1 the y centers.
NodeId kernel_centers(Tape& t, NodeId roi, int grid);
/// Truncated Gaussian rows [N, extent] from row `axis` of a centers node. The
/// truncation window is a constant of the evaluation point.
NodeId gaussian_weights(Tape& t, NodeId centers, int axis, const attention::KernelGridConfig& cfg, int extent);
/// v[p][j][i] = sum_m sum_n Fx[i][n] I[p][m][n] Fy[j][m] for frame [2, B, A], Fx [N, A], Fy [N, B].
NodeId bilinear_crop(Tape& t, NodeId frame, NodeId fx, NodeId fy);

}  // namespace trip::grad::ops

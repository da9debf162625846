#pragma once

#include <cstdint>
#include <vector>

#include "trip/events.hpp"

namespace trip::attention {

/// Unconstrained ROI-head outputs.
struct RawRoiOutput {
  double gx_hat = 0, gy_hat = 0, delta_hat = 0;
};

struct DecodeConfig {
  int width = 128;
  int height = 128;
  double scale = 16.0;  // distance scaling factor; width / 8 by default

  void validate() const;
};

/// Center of the receptive field (pixels) and spacing between adjacent kernels.
struct RoiParams {
  double gx = 0, gy = 0, delta = 0;
};

struct KernelGridConfig {
  int grid = 12;        // N, even
  double sigma = 2.0;   // Gaussian variance
  double theta = 6.0;   // truncation width in pixels

  void validate() const;
};

struct KernelGrid {
  std::vector<double> mu_x;
  std::vector<double> mu_y;
};

/// Truncated Gaussian weights along one axis: `rows` x `extent`, with the
/// inclusive nonzero support [lo[i], hi[i]] of each row (empty when lo > hi).
struct KernelAxis {
  int rows = 0;
  int extent = 0;
  std::vector<double> weights;
  std::vector<int> lo;
  std::vector<int> hi;

  double at(int row, int n) const { return weights[static_cast<std::size_t>(row) * extent + n]; }
  int support_size(int row) const { return hi[row] >= lo[row] ? hi[row] - lo[row] + 1 : 0; }
};

struct KernelWeights {
  KernelAxis x;
  KernelAxis y;
};

/// Fixed-resolution ROI, layout [polarity][j][i] with j the row (y) index.
struct RoiFrame {
  int grid = 0;
  std::vector<double> values;

  explicit RoiFrame(int n = 0) : grid(n), values(2 * static_cast<std::size_t>(n) * n, 0.0) {}
  double& at(int p, int j, int i) { return values[(static_cast<std::size_t>(p) * grid + j) * grid + i]; }
  double at(int p, int j, int i) const { return values[(static_cast<std::size_t>(p) * grid + j) * grid + i]; }
  Tensor to_tensor() const { return Tensor({2, grid, grid}, values); }
};

/// Square pooling window derived from the ROI parameters.
struct DapRegion {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  double k_dap = 0;
};

/// Multiply tallies of one crop. `weight_products` forms the 2D kernel weight
/// Fx*Fy once per (cell, support pixel); `macs` accumulates weight * value per
/// polarity channel.
struct CropStats {
  std::uint64_t weight_products = 0;
  std::uint64_t macs = 0;
  std::uint64_t total() const { return weight_products + macs; }
};

RoiParams decode_roi(const RawRoiOutput& raw, const DecodeConfig& cfg);

/// Kernel centers placed symmetrically about (gx, gy): mu_i = g + (i - (N-1)/2) * delta.
KernelGrid kernel_centers(const RoiParams& roi, const KernelGridConfig& cfg);

/// Support of a kernel centered at `mu`: integers in [ceil(mu - theta/2), floor(mu + theta/2)]
/// clipped to [0, extent - 1].
void kernel_support(double mu, double theta, int extent, int& lo, int& hi);

KernelAxis axis_weights(const std::vector<double>& mu, const KernelGridConfig& cfg, int extent);

KernelWeights kernel_weights(const KernelGrid& grid, const KernelGridConfig& cfg, int width, int height);

/// v[p][j][i] = sum_m sum_n Fx_i[n] * I_p[m][n] * Fy_j[m], visiting only the
/// truncated support of each output cell and skipping empty pixels.
RoiFrame crop_tgk(const events::TimebinFrame& frame, const KernelWeights& weights, CropStats* stats = nullptr);

/// The same crop with untruncated Gaussian rows over the full image (O(AB) per cell).
RoiFrame crop_gaussian_full(const events::TimebinFrame& frame, const KernelGrid& grid, const KernelGridConfig& cfg);

DapRegion dap_region(const RoiParams& roi, const KernelGridConfig& cfg);

/// Non-overlapping average pooling over the region. Each pixel maps to the cell
/// floor((x - x_min) / k_dap); averages divide by the in-bounds pixel count.
RoiFrame crop_dap(const events::TimebinFrame& frame, const DapRegion& region, int grid,
                  std::uint64_t* accumulations = nullptr);

/// Number of integer pixels in [0, extent) that fall in each of the `grid` cells along one axis.
std::vector<int> dap_axis_counts(double lo, double k_dap, int grid, int extent);

}  // namespace trip::attention

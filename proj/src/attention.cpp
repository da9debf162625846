#include "trip/attention.hpp"

#include <cmath>
#include <string>

#include "trip/error.hpp"

namespace trip::attention {

namespace {

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double gaussian(double n, double mu, double sigma) {
  const double d = n - mu;
  return std::exp(-(d * d) / (2.0 * sigma));
}

int dap_cell(double coord, double lo, double k_dap) {
  const double u = std::floor((coord - lo) / k_dap);
  if (u < -1.0) return -1;
  if (u > 1e9) return 1 << 30;
  return static_cast<int>(u);
}

}  // namespace

void DecodeConfig::validate() const {
  if (width < 1 || height < 1) throw Error(ErrorKind::ConfigInvalid, "decode geometry must be >= 1");
  if (!(scale > 0) || !std::isfinite(scale)) throw Error(ErrorKind::ConfigInvalid, "distance scale must be > 0");
}

void KernelGridConfig::validate() const {
  if (grid < 2 || grid % 2 != 0) throw Error(ErrorKind::ConfigInvalid, "grid size must be even and >= 2");
  if (!(sigma > 0)) throw Error(ErrorKind::ConfigInvalid, "sigma must be > 0");
  if (!(theta > 0)) throw Error(ErrorKind::ConfigInvalid, "theta must be > 0");
}

RoiParams decode_roi(const RawRoiOutput& raw, const DecodeConfig& cfg) {
  RoiParams roi;
  roi.gx = cfg.width / 2.0 * (std::tanh(raw.gx_hat) + 1.0);
  roi.gy = cfg.height / 2.0 * (std::tanh(raw.gy_hat) + 1.0);
  roi.delta = cfg.scale * (sigmoid(raw.delta_hat) + 1.0);
  return roi;
}

KernelGrid kernel_centers(const RoiParams& roi, const KernelGridConfig& cfg) {
  KernelGrid grid;
  grid.mu_x.resize(static_cast<std::size_t>(cfg.grid));
  grid.mu_y.resize(static_cast<std::size_t>(cfg.grid));
  const double mid = (cfg.grid - 1) / 2.0;
  for (int i = 0; i < cfg.grid; ++i) {
    grid.mu_x[i] = roi.gx + (i - mid) * roi.delta;
    grid.mu_y[i] = roi.gy + (i - mid) * roi.delta;
  }
  return grid;
}

void kernel_support(double mu, double theta, int extent, int& lo, int& hi) {
  const double a = std::ceil(mu - theta / 2.0);
  const double b = std::floor(mu + theta / 2.0);
  lo = static_cast<int>(std::max(a, 0.0));
  hi = static_cast<int>(std::min(b, static_cast<double>(extent - 1)));
  if (a > extent - 1 || b < 0) {
    lo = 1;
    hi = 0;
  }
}

KernelAxis axis_weights(const std::vector<double>& mu, const KernelGridConfig& cfg, int extent) {
  KernelAxis axis;
  axis.rows = static_cast<int>(mu.size());
  axis.extent = extent;
  axis.weights.assign(mu.size() * static_cast<std::size_t>(extent), 0.0);
  axis.lo.resize(mu.size());
  axis.hi.resize(mu.size());
  for (int i = 0; i < axis.rows; ++i) {
    kernel_support(mu[i], cfg.theta, extent, axis.lo[i], axis.hi[i]);
    for (int n = axis.lo[i]; n <= axis.hi[i]; ++n) {
      axis.weights[static_cast<std::size_t>(i) * extent + n] = gaussian(n, mu[i], cfg.sigma);
    }
  }
  return axis;
}

KernelWeights kernel_weights(const KernelGrid& grid, const KernelGridConfig& cfg, int width, int height) {
  cfg.validate();
  return {axis_weights(grid.mu_x, cfg, width), axis_weights(grid.mu_y, cfg, height)};
}

RoiFrame crop_tgk(const events::TimebinFrame& frame, const KernelWeights& weights, CropStats* stats) {
  const KernelAxis& fx = weights.x;
  const KernelAxis& fy = weights.y;
  if (fx.extent != frame.width || fy.extent != frame.height || fx.rows != fy.rows) {
    throw Error(ErrorKind::ShapeMismatch, "kernel weights do not match the frame geometry");
  }
  const int n_grid = fx.rows;
  RoiFrame out(n_grid);
  CropStats local;
  const std::size_t plane = static_cast<std::size_t>(frame.width) * frame.height;
  const double* pos = frame.values.data();
  const double* neg = frame.values.data() + plane;
  for (int j = 0; j < n_grid; ++j) {
    for (int i = 0; i < n_grid; ++i) {
      double acc0 = 0.0, acc1 = 0.0;
      for (int m = fy.lo[j]; m <= fy.hi[j]; ++m) {
        const double wy = fy.at(j, m);
        const std::size_t row = static_cast<std::size_t>(m) * frame.width;
        for (int n = fx.lo[i]; n <= fx.hi[i]; ++n) {
          const double v0 = pos[row + n];
          const double v1 = neg[row + n];
          if (v0 == 0.0 && v1 == 0.0) continue;
          const double w = wy * fx.at(i, n);
          ++local.weight_products;
          if (v0 != 0.0) {
            acc0 += w * v0;
            ++local.macs;
          }
          if (v1 != 0.0) {
            acc1 += w * v1;
            ++local.macs;
          }
        }
      }
      out.at(0, j, i) = acc0;
      out.at(1, j, i) = acc1;
    }
  }
  if (stats) {
    stats->weight_products += local.weight_products;
    stats->macs += local.macs;
  }
  return out;
}

RoiFrame crop_gaussian_full(const events::TimebinFrame& frame, const KernelGrid& grid, const KernelGridConfig& cfg) {
  const int n_grid = static_cast<int>(grid.mu_x.size());
  RoiFrame out(n_grid);
  const std::size_t plane = static_cast<std::size_t>(frame.width) * frame.height;
  const double* pos = frame.values.data();
  const double* neg = frame.values.data() + plane;
  std::vector<double> fx(static_cast<std::size_t>(n_grid) * frame.width);
  std::vector<double> fy(static_cast<std::size_t>(n_grid) * frame.height);
  for (int i = 0; i < n_grid; ++i) {
    for (int n = 0; n < frame.width; ++n) fx[static_cast<std::size_t>(i) * frame.width + n] = gaussian(n, grid.mu_x[i], cfg.sigma);
    for (int m = 0; m < frame.height; ++m) fy[static_cast<std::size_t>(i) * frame.height + m] = gaussian(m, grid.mu_y[i], cfg.sigma);
  }
  for (int j = 0; j < n_grid; ++j) {
    for (int i = 0; i < n_grid; ++i) {
      double acc0 = 0.0, acc1 = 0.0;
      for (int m = 0; m < frame.height; ++m) {
        const double wy = fy[static_cast<std::size_t>(j) * frame.height + m];
        const std::size_t row = static_cast<std::size_t>(m) * frame.width;
        for (int n = 0; n < frame.width; ++n) {
          const double w = wy * fx[static_cast<std::size_t>(i) * frame.width + n];
          acc0 += w * pos[row + n];
          acc1 += w * neg[row + n];
        }
      }
      out.at(0, j, i) = acc0;
      out.at(1, j, i) = acc1;
    }
  }
  return out;
}

DapRegion dap_region(const RoiParams& roi, const KernelGridConfig& cfg) {
  const double half = (cfg.grid - 1) / 2.0 * roi.delta + cfg.theta / 2.0;
  DapRegion r;
  r.x_min = roi.gx - half;
  r.x_max = roi.gx + half;
  r.y_min = roi.gy - half;
  r.y_max = roi.gy + half;
  r.k_dap = (r.x_max - r.x_min) / cfg.grid;
  return r;
}

std::vector<int> dap_axis_counts(double lo, double k_dap, int grid, int extent) {
  std::vector<int> counts(static_cast<std::size_t>(grid), 0);
  for (int x = 0; x < extent; ++x) {
    const int c = dap_cell(x, lo, k_dap);
    if (c >= 0 && c < grid) ++counts[c];
  }
  return counts;
}

RoiFrame crop_dap(const events::TimebinFrame& frame, const DapRegion& region, int grid, std::uint64_t* accumulations) {
  if (!(region.k_dap > 0) || !std::isfinite(region.k_dap)) {
    throw Error(ErrorKind::DegenerateRegion, "k_dap must be positive, got " + std::to_string(region.k_dap));
  }
  RoiFrame out(grid);
  const auto cx = dap_axis_counts(region.x_min, region.k_dap, grid, frame.width);
  const auto cy = dap_axis_counts(region.y_min, region.k_dap, grid, frame.height);
  std::uint64_t adds = 0;
  for (int p = 0; p < 2; ++p) {
    for (int y = 0; y < frame.height; ++y) {
      const int j = dap_cell(y, region.y_min, region.k_dap);
      if (j < 0 || j >= grid) continue;
      for (int x = 0; x < frame.width; ++x) {
        const double v = frame.at(p, y, x);
        if (v == 0.0) continue;
        const int i = dap_cell(x, region.x_min, region.k_dap);
        if (i < 0 || i >= grid) continue;
        out.at(p, j, i) += v;
        ++adds;
      }
    }
  }
  for (int p = 0; p < 2; ++p) {
    for (int j = 0; j < grid; ++j) {
      for (int i = 0; i < grid; ++i) {
        const int n = cx[i] * cy[j];
        if (n > 0) out.at(p, j, i) /= n;
      }
    }
  }
  if (accumulations) *accumulations += adds;
  return out;
}

}  // namespace trip::attention

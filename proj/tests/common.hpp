#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trip/events.hpp"
#include "trip/network_spec.hpp"
#include "trip/tensor.hpp"

namespace testutil {

inline std::string config_path(const std::string& name) { return std::string(TRIP_CONFIG_DIR) + "/" + name; }

inline trip::net::SpecFile load_config_spec(const std::string& name) {
  return trip::net::load_spec_file(config_path(name));
}

/// Frame with roughly `density` of its cells set to small positive counts.
inline trip::events::TimebinFrame random_frame(std::mt19937_64& rng, int w, int h, double density) {
  trip::events::TimebinFrame f(w, h);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 4);
  for (double& v : f.values) {
    if (u(rng) < density) v = count(rng);
  }
  return f;
}

inline trip::Tensor random_tensor(std::mt19937_64& rng, std::vector<int> dims, double lo = -1.0, double hi = 1.0) {
  trip::Tensor t(std::move(dims));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.data) v = u(rng);
  return t;
}

/// Zeroes a `sparsity` fraction of the entries.
inline void sparsify(std::mt19937_64& rng, trip::Tensor& t, double sparsity) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : t.data) {
    if (u(rng) < sparsity) v = 0.0;
  }
}

inline bool rel_close(double a, double b, double rel, double abs_tol = 1e-300) {
  return std::fabs(a - b) <= std::max(abs_tol, rel * std::max(std::fabs(a), std::fabs(b)));
}

inline double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double scale = 0;
  for (double v : a) scale = std::max(scale, std::fabs(v));
  for (double v : b) scale = std::max(scale, std::fabs(v));
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return scale > 0 ? worst / scale : worst;
}

}  // namespace testutil

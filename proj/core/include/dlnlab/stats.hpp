#ifndef DLNLAB_STATS_HPP
#define DLNLAB_STATS_HPP

#include <array>
#include <cmath>
#include <vector>

#include "dlnlab/errors.hpp"

namespace dlnlab {

struct Correlation {
  double r = 0.0;
  bool degenerate = false;  // one side constant; r reported as 0
};

inline Correlation pearson(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw ShapeMismatch("pearson: length mismatch or empty");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return {0.0, true};
  return {sxy / std::sqrt(sxx * syy), false};
}

inline double mean_abs_error(const std::vector<double>& x,
                             const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw ShapeMismatch("mean_abs_error: length mismatch or empty");
  }
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

// 20 equal bins over [0,1]; values at 1.0 land in the last bin.
inline std::array<int, 20> histogram20(const std::vector<double>& values) {
  std::array<int, 20> bins{};
  for (double v : values) {
    int b = static_cast<int>(v * 20.0);
    if (b < 0) b = 0;
    if (b > 19) b = 19;
    ++bins[static_cast<size_t>(b)];
  }
  return bins;
}

}  // namespace dlnlab

#endif  // DLNLAB_STATS_HPP

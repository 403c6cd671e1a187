#pragma once

#include <cmath>

#include "tlgen/image.hpp"

namespace tlgen::test {

// Naive metric oracles on the [0,1] rescale, written independently of the
// library versions.

inline double naive_mse(const Frame& a, const Frame& b) {
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    const double d = (a[i] + 1.0) / 2.0 - (b[i] + 1.0) / 2.0;
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// Direct-window SSIM: every valid 11x11 window weighted by a normalized
// Gaussian, statistics summed explicitly.
inline double naive_ssim(const Frame& a, const Frame& b) {
  const int win = 11;
  double w[11][11], wsum = 0.0;
  for (int y = 0; y < win; ++y) {
    for (int x = 0; x < win; ++x) {
      const double dy = y - 5, dx = x - 5;
      w[y][x] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      wsum += w[y][x];
    }
  }
  const Index h = a.dim(0), wd = a.dim(1);
  auto px = [](const Frame& f, Index y, Index x, Index c) {
    return (f[(y * f.dim(1) + x) * 3 + c] + 1.0) / 2.0;
  };
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  for (Index c = 0; c < 3; ++c) {
    double acc = 0.0;
    Index count = 0;
    for (Index oy = 0; oy + win <= h; ++oy) {
      for (Index ox = 0; ox + win <= wd; ++ox) {
        double mx = 0, my = 0;
        for (int y = 0; y < win; ++y) {
          for (int x = 0; x < win; ++x) {
            mx += w[y][x] / wsum * px(a, oy + y, ox + x, c);
            my += w[y][x] / wsum * px(b, oy + y, ox + x, c);
          }
        }
        double vx = 0, vy = 0, cxy = 0;
        for (int y = 0; y < win; ++y) {
          for (int x = 0; x < win; ++x) {
            const double k = w[y][x] / wsum;
            const double dx = px(a, oy + y, ox + x, c) - mx, dy = px(b, oy + y, ox + x, c) - my;
            vx += k * dx * dx;
            vy += k * dy * dy;
            cxy += k * dx * dy;
          }
        }
        acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
    total += acc / static_cast<double>(count);
  }
  return total / 3.0;
}

}  // namespace tlgen::test

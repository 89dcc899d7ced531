#pragma once

// Shared helpers for the test binaries: small model configs, random maps and
// brute-force metric oracles written straight from the metric definitions
// (no histograms, no distance-transform tricks).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "codadapt/config.hpp"
#include "codadapt/gray_map.hpp"

namespace testutil {

using codadapt::GrayMap;

/// Small enough for unit tests: 64 px, D=64, 4 layers in 2 groups.
inline codadapt::ExperimentConfig unit_config() {
  auto c = codadapt::desk_config();
  c.vit.embed_dim = 64;
  c.vit.depth = 4;
  c.vit.num_heads = 2;
  c.vit.interaction_groups = 2;
  c.adapter.channels = 32;
  c.adapter.num_heads = 2;
  c.head.fpn_channels = 32;
  c.train.batch_size = 2;
  c.train.lr = 1e-3;
  return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("codadapt_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline GrayMap random_pred(std::int64_t h, std::int64_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayMap m(h, w);
  for (auto& v : m.values) v = u(rng);
  return m;
}

/// Random blob-ish binary mask with both classes present.
inline GrayMap random_gt(std::int64_t h, std::int64_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (true) {
    GrayMap m(h, w);
    const double cy = u(rng) * h, cx = u(rng) * w;
    const double ry = 1.5 + u(rng) * h / 2.5, rx = 1.5 + u(rng) * w / 2.5;
    for (std::int64_t r = 0; r < h; ++r) {
      for (std::int64_t c = 0; c < w; ++c) {
        const double dy = (r - cy) / ry, dx = (c - cx) / rx;
        bool fg = dy * dy + dx * dx <= 1.0;
        if (u(rng) < 0.05) fg = !fg;  // speckle
        m.at(r, c) = fg ? 1.0 : 0.0;
      }
    }
    double s = 0;
    for (double v : m.values) s += v;
    if (s > 0 && s < static_cast<double>(m.size())) return m;
  }
}

namespace oracle {

constexpr double eps = std::numeric_limits<double>::epsilon();

inline bool fg(double g) { return g > 0.5; }

inline double mean(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : static_cast<double>(s / v.size());
}

inline double mae(const GrayMap& p, const GrayMap& g) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p.values[i] - (fg(g.values[i]) ? 1.0 : 0.0));
  return static_cast<double>(s / p.size());
}

inline double object_score(const std::vector<double>& v) {
  const double m = mean(v);
  double sd = 0;
  if (v.size() >= 2) {
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    sd = std::sqrt(ss / (v.size() - 1.0));
  }
  return 2 * m / (m * m + 1 + sd + eps);
}

inline double ssim(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = mean(x), my = mean(y);
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
    cxy += (x[i] - mx) * (y[i] - my);
  }
  vx /= (n - 1 + eps);
  vy /= (n - 1 + eps);
  cxy /= (n - 1 + eps);
  const double a = 4 * mx * my * cxy;
  const double b = (mx * mx + my * my) * (vx + vy);
  if (a != 0) return a / (b + eps);
  if (b == 0) return 1.0;
  return 0.0;
}

inline double s_measure(const GrayMap& p, const GrayMap& g, double alpha = 0.5) {
  const auto h = g.height, w = g.width;
  const double n = static_cast<double>(g.size());
  std::vector<double> gb(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) gb[i] = fg(g.values[i]) ? 1.0 : 0.0;
  const double y = mean(gb);
  if (y == 0) return 1.0 - mean(p.values);
  if (y == 1) return mean(p.values);

  std::vector<double> in_fg, in_bg;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (gb[i] == 1.0) {
      in_fg.push_back(p.values[i]);
    } else {
      in_bg.push_back(1.0 - p.values[i]);
    }
  }
  const double so = y * object_score(in_fg) + (1 - y) * object_score(in_bg);

  // centroid, 1-based, rounded half up (all values are positive)
  double sr = 0, sc = 0, cnt = 0;
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      if (gb[r * w + c] == 1.0) {
        sr += r + 1;
        sc += c + 1;
        cnt += 1;
      }
    }
  }
  const auto X = static_cast<std::int64_t>(std::floor(sc / cnt + 0.5));
  const auto Y = static_cast<std::int64_t>(std::floor(sr / cnt + 0.5));
  double region = 0;
  for (int q = 0; q < 4; ++q) {
    std::vector<double> xs, ys;
    for (std::int64_t r = 0; r < h; ++r) {
      for (std::int64_t c = 0; c < w; ++c) {
        const bool top = r < Y, left = c < X;
        const int which = (top ? 0 : 2) + (left ? 0 : 1);
        if (which != q) continue;
        xs.push_back(p.at(r, c));
        ys.push_back(gb[r * w + c]);
      }
    }
    if (xs.empty()) continue;
    region += (static_cast<double>(xs.size()) / n) * ssim(xs, ys);
  }
  return std::max(alpha * so + (1 - alpha) * region, 0.0);
}

inline double e_measure_mean(const GrayMap& p, const GrayMap& g) {
  const double n = static_cast<double>(p.size());
  std::vector<double> gb(g.size());
  double gsum = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    gb[i] = fg(g.values[i]) ? 1.0 : 0.0;
    gsum += gb[i];
  }
  double total = 0;
  for (int k = 0; k < 256; ++k) {
    const double t = k / 256.0;
    std::vector<double> fm(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) fm[i] = p.values[i] > t ? 1.0 : 0.0;
    double s = 0;
    if (gsum == 0) {
      for (double f : fm) s += 1.0 - f;
    } else if (gsum == n) {
      for (double f : fm) s += f;
    } else {
      const double mf = mean(fm), mg = gsum / n;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = fm[i] - mf, b = gb[i] - mg;
        const double align = 2 * a * b / (a * a + b * b + eps);
        s += (align + 1) * (align + 1) / 4;
      }
    }
    total += s / n;
  }
  return total / 256.0;
}

inline double weighted_fmeasure(const GrayMap& p, const GrayMap& g) {
  const auto h = g.height, w = g.width;
  const auto n = static_cast<std::int64_t>(g.size());
  std::vector<std::int64_t> fg_idx;
  for (std::int64_t i = 0; i < n; ++i) {
    if (fg(g.values[i])) fg_idx.push_back(i);
  }
  if (fg_idx.empty()) return 0.0;
  std::vector<double> E(n), Et(n), dist(n, 0.0);
  for (std::int64_t i = 0; i < n; ++i) E[i] = std::fabs(p.values[i] - (fg(g.values[i]) ? 1.0 : 0.0));
  Et = E;
  for (std::int64_t i = 0; i < n; ++i) {
    if (fg(g.values[i])) continue;
    const auto r = i / w, c = i % w;
    std::int64_t best = -1, best_d = std::numeric_limits<std::int64_t>::max();
    for (const auto j : fg_idx) {  // ascending index, strict < keeps the lowest on ties
      const auto dr = j / w - r, dc = j % w - c;
      const auto d = dr * dr + dc * dc;
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    Et[i] = E[best];
    dist[i] = std::sqrt(static_cast<double>(best_d));
  }
  double K[7][7], ksum = 0;
  for (int a = 0; a < 7; ++a) {
    for (int b = 0; b < 7; ++b) {
      K[a][b] = std::exp(-((a - 3) * (a - 3) + (b - 3) * (b - 3)) / 50.0);
      ksum += K[a][b];
    }
  }
  std::vector<double> EA(n, 0.0);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      double acc = 0;
      for (int a = 0; a < 7; ++a) {
        for (int b = 0; b < 7; ++b) {
          const auto rr = r + a - 3, cc = c + b - 3;
          if (rr >= 0 && rr < h && cc >= 0 && cc < w) acc += K[a][b] / ksum * Et[rr * w + cc];
        }
      }
      EA[r * w + c] = acc;
    }
  }
  double sum_fg = 0, sum_bg = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (fg(g.values[i])) {
      sum_fg += (EA[i] < E[i]) ? EA[i] : E[i];
    } else {
      const double B = 2 - std::exp(std::log(1 - 0.5) / 5 * dist[i]);
      sum_bg += E[i] * B;
    }
  }
  const double nfg = static_cast<double>(fg_idx.size());
  const double tpw = nfg - sum_fg;
  const double R = 1 - sum_fg / nfg;
  const double P = tpw / (eps + tpw + sum_bg);
  return 2 * R * P / (eps + R + P);
}

}  // namespace oracle
}  // namespace testutil

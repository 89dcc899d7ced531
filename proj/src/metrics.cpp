#include "codadapt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "codadapt/errors.hpp"

namespace codadapt {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_shape(const GrayMap& a, const GrayMap& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidInput(std::string(what) + ": shape mismatch " + std::to_string(a.height) + "x" +
                       std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                       std::to_string(b.width));
  }
}

inline bool is_fg(double g) { return g > 0.5; }

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// --- S-measure pieces -------------------------------------------------------

double object_similarity(const std::vector<double>& vals) {
  const double m = mean_of(vals);
  double sd = 0;
  if (vals.size() > 1) {
    double ss = 0;
    for (double x : vals) ss += (x - m) * (x - m);
    sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
  }
  return 2.0 * m / (m * m + 1.0 + sd + kEps);
}

double s_object(const GrayMap& pred, const GrayMap& gt) {
  std::vector<double> fg, bg;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (is_fg(gt.values[i])) {
      fg.push_back(pred.values[i]);
    } else {
      bg.push_back(1.0 - pred.values[i]);
    }
  }
  const double u = static_cast<double>(fg.size()) / static_cast<double>(gt.size());
  return u * object_similarity(fg) + (1.0 - u) * object_similarity(bg);
}

struct Rect {
  std::int64_t r0, r1, c0, c1;  // half-open
  std::int64_t area() const { return (r1 - r0) * (c1 - c0); }
};

double region_ssim(const GrayMap& pred, const GrayMap& gt, const Rect& rc) {
  const auto n = rc.area();
  if (n == 0) return 0.0;
  double mx = 0, my = 0;
  for (auto r = rc.r0; r < rc.r1; ++r) {
    for (auto c = rc.c0; c < rc.c1; ++c) {
      mx += pred.at(r, c);
      my += is_fg(gt.at(r, c)) ? 1.0 : 0.0;
    }
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sx = 0, sy = 0, sxy = 0;
  for (auto r = rc.r0; r < rc.r1; ++r) {
    for (auto c = rc.c0; c < rc.c1; ++c) {
      const double dx = pred.at(r, c) - mx;
      const double dy = (is_fg(gt.at(r, c)) ? 1.0 : 0.0) - my;
      sx += dx * dx;
      sy += dy * dy;
      sxy += dx * dy;
    }
  }
  const double denom = static_cast<double>(n) - 1.0 + kEps;
  sx /= denom;
  sy /= denom;
  sxy /= denom;
  const double a = 4.0 * mx * my * sxy;
  const double b = (mx * mx + my * my) * (sx + sy);
  if (a != 0.0) return a / (b + kEps);
  return b == 0.0 ? 1.0 : 0.0;
}

double s_region(const GrayMap& pred, const GrayMap& gt) {
  const auto h = gt.height;
  const auto w = gt.width;
  double area = 0, sum_r = 0, sum_c = 0;
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      if (is_fg(gt.at(r, c))) {
        area += 1;
        sum_r += static_cast<double>(r + 1);
        sum_c += static_cast<double>(c + 1);
      }
    }
  }
  std::int64_t x, y;
  if (area == 0) {
    x = std::llround(static_cast<double>(w) / 2.0);
    y = std::llround(static_cast<double>(h) / 2.0);
  } else {
    x = std::llround(sum_c / area);
    y = std::llround(sum_r / area);
  }
  const double total = static_cast<double>(h * w);
  const double w1 = static_cast<double>(x * y) / total;
  const double w2 = static_cast<double>((w - x) * y) / total;
  const double w3 = static_cast<double>(x * (h - y)) / total;
  const double w4 = 1.0 - w1 - w2 - w3;
  const std::array<Rect, 4> q{Rect{0, y, 0, x}, Rect{0, y, x, w}, Rect{y, h, 0, x}, Rect{y, h, x, w}};
  const std::array<double, 4> wt{w1, w2, w3, w4};
  double s = 0;
  for (int i = 0; i < 4; ++i) {
    if (q[i].area() > 0) s += wt[i] * region_ssim(pred, gt, q[i]);
  }
  return s;
}

// --- distance transform -----------------------------------------------------

constexpr double kInf = std::numeric_limits<double>::infinity();

// Squared distance to the nearest finite-cost site along one line
// (lower envelope of parabolas).
void distance_1d(const std::vector<double>& f, std::vector<double>& d) {
  const auto n = static_cast<std::int64_t>(f.size());
  std::vector<std::int64_t> v;
  std::vector<double> z;
  v.reserve(n);
  z.reserve(n + 1);
  for (std::int64_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (v.empty()) {
      v.push_back(q);
      z.push_back(-kInf);
      continue;
    }
    while (true) {
      const auto p = v.back();
      const double s = ((f[q] + double(q * q)) - (f[p] + double(p * p))) / double(2 * q - 2 * p);
      if (s <= z.back()) {
        v.pop_back();
        z.pop_back();
        if (v.empty()) break;
      } else {
        z.push_back(s);
        break;
      }
    }
    if (v.empty()) z.push_back(-kInf);
    v.push_back(q);
  }
  d.assign(n, kInf);
  if (v.empty()) return;
  z.push_back(kInf);
  std::size_t k = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (z[k + 1] < double(q)) ++k;
    const auto p = v[k];
    d[q] = double((q - p) * (q - p)) + f[p];
  }
}

GrayMap squared_distance_to_foreground(const GrayMap& gt) {
  const auto h = gt.height;
  const auto w = gt.width;
  GrayMap cols(h, w, kInf);
  std::vector<double> f(h), d;
  for (std::int64_t c = 0; c < w; ++c) {
    for (std::int64_t r = 0; r < h; ++r) f[r] = is_fg(gt.at(r, c)) ? 0.0 : kInf;
    distance_1d(f, d);
    for (std::int64_t r = 0; r < h; ++r) cols.at(r, c) = d[r];
  }
  GrayMap out(h, w, kInf);
  f.resize(w);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) f[c] = cols.at(r, c);
    distance_1d(f, d);
    for (std::int64_t c = 0; c < w; ++c) out.at(r, c) = d[c];
  }
  return out;
}

std::int64_t isqrt(std::int64_t v) {
  auto s = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
  while (s * s > v) --s;
  while ((s + 1) * (s + 1) <= v) ++s;
  return s;
}

// Lowest row-major foreground pixel at exactly squared distance d2 from (r, c).
std::int64_t nearest_foreground(const GrayMap& gt, std::int64_t r, std::int64_t c, std::int64_t d2) {
  const auto span = isqrt(d2);
  for (auto dr = -span; dr <= span; ++dr) {
    const auto rr = r + dr;
    if (rr < 0 || rr >= gt.height) continue;
    const auto rem = d2 - dr * dr;
    const auto s = isqrt(rem);
    if (s * s != rem) continue;
    for (const auto cc : {c - s, c + s}) {
      if (cc >= 0 && cc < gt.width && is_fg(gt.at(rr, cc))) return rr * gt.width + cc;
    }
  }
  return -1;
}

std::array<double, 49> gaussian_7x7_sigma5() {
  std::array<double, 49> k{};
  double sum = 0;
  for (int y = -3; y <= 3; ++y) {
    for (int x = -3; x <= 3; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * 25.0));
      k[(y + 3) * 7 + (x + 3)] = v;
      sum += v;
    }
  }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace

double mae(const GrayMap& pred, const GrayMap& gt) {
  require_same_shape(pred, gt, "mae");
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s += std::abs(pred.values[i] - (is_fg(gt.values[i]) ? 1.0 : 0.0));
  }
  return pred.size() ? s / static_cast<double>(pred.size()) : 0.0;
}

double s_measure(const GrayMap& pred, const GrayMap& gt, double alpha) {
  require_same_shape(pred, gt, "s_measure");
  std::size_t n_fg = 0;
  for (double g : gt.values) n_fg += is_fg(g);
  if (n_fg == 0) return 1.0 - mean_of(pred.values);
  if (n_fg == gt.size()) return mean_of(pred.values);
  const double q = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
  return std::max(q, 0.0);
}

double e_measure_mean(const GrayMap& pred, const GrayMap& gt) {
  require_same_shape(pred, gt, "e_measure_mean");
  constexpr int kThresholds = 256;
  // bucket[b] counts pixels that are foreground for exactly thresholds k < b
  std::array<std::int64_t, kThresholds + 1> fg_hist{}, bg_hist{};
  std::int64_t n_gt = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double b = std::ceil(pred.values[i] * kThresholds);
    const auto bucket = static_cast<int>(std::clamp(b, 0.0, double(kThresholds)));
    if (is_fg(gt.values[i])) {
      ++fg_hist[bucket];
      ++n_gt;
    } else {
      ++bg_hist[bucket];
    }
  }
  const auto n = static_cast<std::int64_t>(pred.size());
  const double nd = static_cast<double>(n);
  // tp[k] / fp[k]: prediction-foreground pixels at threshold k, split by gt
  std::int64_t tp = 0, fp = 0;
  for (int b = kThresholds; b >= 1; --b) {
    tp += fg_hist[b];
    fp += bg_hist[b];
  }
  double total = 0;
  for (int k = 0; k < kThresholds; ++k) {
    const std::int64_t n_pred = tp + fp;
    double s;
    if (n_gt == 0) {
      s = static_cast<double>(n - n_pred) / nd;
    } else if (n_gt == n) {
      s = static_cast<double>(n_pred) / nd;
    } else {
      const double mu_p = static_cast<double>(n_pred) / nd;
      const double mu_g = static_cast<double>(n_gt) / nd;
      auto enhanced = [&](double p, double g) {
        const double ap = p - mu_p;
        const double ag = g - mu_g;
        const double align = 2.0 * ap * ag / (ap * ap + ag * ag + kEps);
        return (align + 1.0) * (align + 1.0) / 4.0;
      };
      const auto fn = n_gt - tp;
      const auto tn = n - n_gt - fp;
      s = (static_cast<double>(tp) * enhanced(1, 1) + static_cast<double>(fp) * enhanced(1, 0) +
           static_cast<double>(fn) * enhanced(0, 1) + static_cast<double>(tn) * enhanced(0, 0)) /
          nd;
    }
    total += s;
    // move to threshold k + 1: pixels whose bucket is exactly k + 1 drop out
    tp -= fg_hist[k + 1];
    fp -= bg_hist[k + 1];
  }
  return total / kThresholds;
}

double weighted_fmeasure(const GrayMap& pred, const GrayMap& gt, double beta2) {
  require_same_shape(pred, gt, "weighted_fmeasure");
  const auto h = gt.height;
  const auto w = gt.width;
  std::size_t n_fg = 0;
  for (double g : gt.values) n_fg += is_fg(g);
  if (n_fg == 0) return 0.0;

  GrayMap err(h, w);
  for (std::size_t i = 0; i < err.size(); ++i) {
    err.values[i] = std::abs(pred.values[i] - (is_fg(gt.values[i]) ? 1.0 : 0.0));
  }
  const auto dist2 = squared_distance_to_foreground(gt);
  GrayMap et = err;
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      if (is_fg(gt.at(r, c))) continue;
      const auto idx = nearest_foreground(gt, r, c, static_cast<std::int64_t>(dist2.at(r, c)));
      et.at(r, c) = err.values[static_cast<std::size_t>(idx)];
    }
  }
  const auto kernel = gaussian_7x7_sigma5();
  GrayMap ea(h, w);
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      double acc = 0;
      for (int dy = -3; dy <= 3; ++dy) {
        const auto rr = r + dy;
        if (rr < 0 || rr >= h) continue;
        for (int dx = -3; dx <= 3; ++dx) {
          const auto cc = c + dx;
          if (cc < 0 || cc >= w) continue;
          acc += kernel[(dy + 3) * 7 + (dx + 3)] * et.at(rr, cc);
        }
      }
      ea.at(r, c) = acc;
    }
  }
  const double decay = std::log(0.5) / 5.0;
  double sum_ew_fg = 0, sum_ew_bg = 0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    if (is_fg(gt.values[i])) {
      sum_ew_fg += std::min(ea.values[i], err.values[i]);
    } else {
      const double b = 2.0 - std::exp(decay * std::sqrt(dist2.values[i]));
      sum_ew_bg += err.values[i] * b;
    }
  }
  const double tpw = static_cast<double>(n_fg) - sum_ew_fg;
  const double recall = 1.0 - sum_ew_fg / static_cast<double>(n_fg);
  const double precision = tpw / (kEps + tpw + sum_ew_bg);
  return (1.0 + beta2) * recall * precision / (kEps + recall + beta2 * precision);
}

double score(double s_alpha, double e_phi, double f_w_beta, double mae_value) {
  return s_alpha + e_phi + f_w_beta - mae_value;
}

SampleMetrics evaluate_pair(const GrayMap& pred, const GrayMap& gt) {
  return {s_measure(pred, gt), e_measure_mean(pred, gt), weighted_fmeasure(pred, gt), mae(pred, gt)};
}

MetricReport aggregate(const std::vector<SampleMetrics>& samples) {
  MetricReport r;
  r.n_samples = samples.size();
  if (samples.empty()) return r;
  for (const auto& s : samples) {
    r.s_alpha += s.s_alpha;
    r.e_phi += s.e_phi;
    r.f_w_beta += s.f_w_beta;
    r.mae += s.mae;
  }
  const double n = static_cast<double>(samples.size());
  r.s_alpha /= n;
  r.e_phi /= n;
  r.f_w_beta /= n;
  r.mae /= n;
  r.score = score(r.s_alpha, r.e_phi, r.f_w_beta, r.mae);
  return r;
}

nlohmann::json MetricReport::to_json() const {
  return {{"s_alpha", s_alpha}, {"e_phi", e_phi}, {"f_w_beta", f_w_beta},
          {"mae", mae},         {"score", score}, {"n_samples", n_samples}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.s_alpha = j.at("s_alpha").get<double>();
  r.e_phi = j.at("e_phi").get<double>();
  r.f_w_beta = j.at("f_w_beta").get<double>();
  r.mae = j.at("mae").get<double>();
  r.score = j.at("score").get<double>();
  r.n_samples = j.at("n_samples").get<std::size_t>();
  return r;
}

std::string MetricReport::csv_header() { return "s_alpha,e_phi,f_w_beta,mae,score,n_samples"; }

std::string MetricReport::csv_row() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << s_alpha << ',' << e_phi << ',' << f_w_beta << ',' << mae << ',' << score
     << ',' << n_samples;
  return os.str();
}

namespace {

std::map<std::string, std::filesystem::path> images_by_stem(const std::filesystem::path& dir) {
  static const std::set<std::string> exts{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};
  std::map<std::string, std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) {
    throw InvalidInput("evaluate_dataset: not a directory: " + dir.string());
  }
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (exts.count(ext)) out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

}  // namespace

DatasetEvaluation evaluate_dataset(const std::filesystem::path& pred_dir,
                                   const std::filesystem::path& gt_dir) {
  const auto preds = images_by_stem(pred_dir);
  const auto gts = images_by_stem(gt_dir);
  DatasetEvaluation ev;
  std::vector<std::string> common;
  for (const auto& [stem, _] : preds) {
    if (gts.count(stem)) {
      common.push_back(stem);
    } else {
      ev.unmatched.push_back(stem);
    }
  }
  for (const auto& [stem, _] : gts) {
    if (!preds.count(stem)) ev.unmatched.push_back(stem);
  }
  std::sort(ev.unmatched.begin(), ev.unmatched.end());
  if (common.empty()) {
    std::ostringstream os;
    os << "evaluate_dataset: no prediction/ground-truth pairs share a name; unmatched:";
    for (const auto& s : ev.unmatched) os << ' ' << s;
    throw InvalidInput(os.str());
  }
  std::vector<SampleMetrics> per_sample;
  for (const auto& stem : common) {
    try {
      const auto pred = read_gray_map(preds.at(stem));
      const auto gt = read_binary_mask(gts.at(stem));
      if (!pred.same_shape(gt)) {
        ev.sample_errors.emplace_back(
            stem, "size mismatch: prediction " + std::to_string(pred.height) + "x" +
                      std::to_string(pred.width) + ", ground truth " + std::to_string(gt.height) +
                      "x" + std::to_string(gt.width));
        continue;
      }
      per_sample.push_back(evaluate_pair(pred, gt));
    } catch (const std::exception& e) {
      ev.sample_errors.emplace_back(stem, e.what());
    }
  }
  ev.report = aggregate(per_sample);
  return ev;
}

}  // namespace codadapt

#include "trifusion/plots.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "trifusion/objectives_metrics.hpp"
#include "trifusion/png_io.hpp"

namespace trifusion {

namespace {

struct Rgb {
  Scalar r, g, b;
};

class Canvas {
 public:
  Canvas(int w, int h, Rgb bg) : img_(3, h, w) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) put(x, y, bg);
  }
  int width() const { return img_.width; }
  int height() const { return img_.height; }
  void put(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    img_.at(0, y, x) = c.r;
    img_.at(1, y, x) = c.g;
    img_.at(2, y, x) = c.b;
  }
  void disc(int cx, int cy, int rad, Rgb c) {
    for (int y = cy - rad; y <= cy + rad; ++y)
      for (int x = cx - rad; x <= cx + rad; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= rad * rad) put(x, y, c);
  }
  void rect(int x0, int y0, int x1, int y1, Rgb c) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) put(x, y, c);
  }
  void box(int x0, int y0, int x1, int y1, Rgb c) {
    for (int x = x0; x <= x1; ++x) {
      put(x, y0, c);
      put(x, y1, c);
    }
    for (int y = y0; y <= y1; ++y) {
      put(x0, y, c);
      put(x1, y, c);
    }
  }
  void hline(int x0, int x1, int y, Rgb c) {
    for (int x = x0; x <= x1; ++x) put(x, y, c);
  }
  void save(const std::string& path) const { write_png_rgb(path, img_); }

 private:
  Image img_;
};

Rgb palette(size_t i) {
  // evenly spaced hues, fixed saturation/value
  const Scalar h = std::fmod(static_cast<Scalar>(i) * 0.61803398875, 1.0) * 6.0;
  const int k = static_cast<int>(h);
  const Scalar f = h - k;
  const Scalar p = 0.25, q = 0.9 - 0.65 * f, t = 0.25 + 0.65 * f;
  switch (k % 6) {
    case 0: return {0.9, t, p};
    case 1: return {q, 0.9, p};
    case 2: return {p, 0.9, t};
    case 3: return {p, q, 0.9};
    case 4: return {t, p, 0.9};
    default: return {0.9, p, q};
  }
}

}  // namespace

void plot_scatter(const EvalResult& res, const std::string& path) {
  const int W = 360, H = 660, M = 30;
  Canvas cv(W, H, {1, 1, 1});
  cv.box(M, M, W - M, H - M, {0, 0, 0});

  auto to_px = [&](Scalar xn, Scalar yn) {
    const int x = M + static_cast<int>(std::lround(xn * (W - 2 * M)));
    const int y = H - M - static_cast<int>(std::lround(yn * (H - 2 * M)));
    return std::pair<int, int>{x, y};
  };

  std::map<std::pair<long, long>, size_t> loc_color;
  for (const SampleRecord& s : res.samples) {
    const std::pair<long, long> key{std::lround(s.truth.p_xn * 1000),
                                    std::lround(s.truth.p_yn * 1000)};
    const auto [it, fresh] = loc_color.try_emplace(key, loc_color.size());
    const Rgb c = palette(it->second);
    const auto [px, py] = to_px(std::clamp(s.pred.p_xn, 0.0, 1.0),
                                std::clamp(s.pred.p_yn, 0.0, 1.0));
    cv.disc(px, py, 1, c);
    if (fresh) {
      const auto [tx, ty] = to_px(s.truth.p_xn, s.truth.p_yn);
      cv.box(tx - 4, ty - 4, tx + 4, ty + 4, {0, 0, 0});
    }
  }
  cv.save(path);
}

void plot_violin(const EvalResult& res, const std::string& path) {
  const int W = 480, H = 360, M = 30;
  Canvas cv(W, H, {1, 1, 1});
  cv.box(M, M, W - M, H - M, {0, 0, 0});

  constexpr int kBins = 40;
  std::array<std::array<int, kBins>, 3> hist{};
  std::array<std::vector<Scalar>, 3> values;
  for (const SampleRecord& s : res.samples) {
    const size_t t = static_cast<size_t>(std::lround(s.truth.d_n * 2.0));  // 0, 0.5, 1 -> class
    const Scalar v = std::clamp(s.pred.d_n, 0.0, 1.0);
    const int bin = std::min(kBins - 1, static_cast<int>(v * kBins));
    hist[t][static_cast<size_t>(bin)]++;
    values[t].push_back(s.pred.d_n);
  }

  auto y_of = [&](Scalar d) {
    return H - M - static_cast<int>(std::lround(std::clamp(d, 0.0, 1.0) * (H - 2 * M)));
  };
  // decision thresholds
  cv.hline(M, W - M, y_of(0.25), {0.8, 0.8, 0.8});
  cv.hline(M, W - M, y_of(0.75), {0.8, 0.8, 0.8});

  const int col_w = (W - 2 * M) / 3;
  for (size_t t = 0; t < 3; ++t) {
    const int cx = M + static_cast<int>(t) * col_w + col_w / 2;
    int peak = 1;
    for (int n : hist[t]) peak = std::max(peak, n);
    const Rgb c = palette(t);
    for (int b = 0; b < kBins; ++b) {
      const int half = hist[t][static_cast<size_t>(b)] * (col_w / 2 - 6) / peak;
      if (half == 0) continue;
      const int y0 = y_of((b + 1.0) / kBins), y1 = y_of(static_cast<Scalar>(b) / kBins);
      cv.rect(cx - half, y0, cx + half, y1, c);
    }
    if (!values[t].empty()) {
      Scalar mean = 0, lo = values[t][0], hi = values[t][0];
      for (Scalar v : values[t]) {
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      mean /= static_cast<Scalar>(values[t].size());
      cv.hline(cx - col_w / 2 + 6, cx + col_w / 2 - 6, y_of(mean), {0, 0, 0});
      cv.hline(cx - 8, cx + 8, y_of(lo), {0.3, 0.3, 0.3});
      cv.hline(cx - 8, cx + 8, y_of(hi), {0.3, 0.3, 0.3});
    }
  }
  cv.save(path);
}

void plot_confusion(const EvalReport& report, const std::string& path) {
  const int cell = 80, M = 20;
  const int W = 3 * cell + 2 * M, H = 3 * cell + 2 * M;
  Canvas cv(W, H, {1, 1, 1});
  int peak = 1;
  for (const auto& row : report.confusion)
    for (int n : row) peak = std::max(peak, n);
  for (int t = 0; t < 3; ++t)
    for (int p = 0; p < 3; ++p) {
      const Scalar v =
          static_cast<Scalar>(report.confusion[static_cast<size_t>(t)][static_cast<size_t>(p)]) /
          peak;
      const Rgb c{1.0 - 0.85 * v, 1.0 - 0.45 * v, 1.0 - 0.1 * v};
      const int x0 = M + p * cell, y0 = M + t * cell;
      cv.rect(x0, y0, x0 + cell - 1, y0 + cell - 1, c);
      cv.box(x0, y0, x0 + cell - 1, y0 + cell - 1, {0.2, 0.2, 0.2});
    }
  cv.save(path);
}

void plot_fusion_panels(const Dataset& ds, const RigModel& rig, const ExpansionFactors& gamma,
                        int max_panels, const std::string& path) {
  const int n = std::min<int>(max_panels, static_cast<int>(ds.cases().size()));
  if (n == 0) throw DataError("empty dataset, nothing to plot");
  const int S = ds.manifest().image_size;
  const int gap = 4;
  Canvas cv(n * S + (n - 1) * gap, S, {1, 1, 1});

  for (int k = 0; k < n; ++k) {
    // spread the panel picks across the case list
    const size_t ci = static_cast<size_t>(k) * ds.cases().size() / static_cast<size_t>(n);
    const CaseData& cd = ds.cases()[ci];
    if (cd.images.empty() || cd.acoustic_series.empty())
      throw DataError("case " + cd.info.id + " has no frames");
    SensorFrame frame;
    frame.image = cd.images.front();
    frame.acoustic = cd.acoustic_series.front();
    frame.case_triplet = cd.info.triplet;
    const RgbaImage rgba = build_attention(frame, rig, gamma);
    const Image blended = blend_rgba_image(rgba, {1.0, 0.0, 0.0});
    const int x0 = k * (S + gap);
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x)
        cv.put(x0 + x, y, {blended.at(0, y, x), blended.at(1, y, x), blended.at(2, y, x)});
  }
  cv.save(path);
}

}  // namespace trifusion

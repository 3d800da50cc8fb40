#include "scriptor/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "scriptor/errors.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

OtsuResult binarize_otsu(const GrayImage& img) {
  if (img.width <= 0 || img.height <= 0) throw parameter_error("binarize_otsu: empty image");
  std::array<std::size_t, 256> hist{};
  for (std::uint8_t p : img.pixels) ++hist[p];
  const double total = static_cast<double>(img.pixels.size());

  double sum_all = 0.0;
  for (int v = 0; v < 256; ++v) sum_all += static_cast<double>(v) * hist[static_cast<std::size_t>(v)];

  // class 0 = pixels < t (ink), class 1 = pixels >= t
  int best_t = 0;
  double best_var = 0.0;
  double w0 = 0.0, sum0 = 0.0;
  for (int t = 0; t <= 255; ++t) {
    if (t > 0) {
      w0 += static_cast<double>(hist[static_cast<std::size_t>(t - 1)]);
      sum0 += static_cast<double>(t - 1) * hist[static_cast<std::size_t>(t - 1)];
    }
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {  // strict: ties keep the lowest threshold
      best_var = var;
      best_t = t;
    }
  }

  OtsuResult r;
  r.threshold = best_t;
  r.binary.width = img.width;
  r.binary.height = img.height;
  r.binary.mask.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    r.binary.mask[i] = img.pixels[i] < best_t ? 1 : 0;
  return r;
}

InkProbabilityMap ink_probability_map(const BinaryImage& binary, int window) {
  if (window < 1) throw parameter_error("ink_probability_map: window must be >= 1");
  const int w = binary.width, h = binary.height;
  InkProbabilityMap map;
  map.width = w;
  map.height = h;
  map.values.assign(static_cast<std::size_t>(w) * h, 0.0);

  // summed-area table over the ink mask
  std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      sat[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
          static_cast<double>(binary.at(x, y)) +
          sat[static_cast<std::size_t>(y) * (w + 1) + x + 1] +
          sat[static_cast<std::size_t>(y + 1) * (w + 1) + x] -
          sat[static_cast<std::size_t>(y) * (w + 1) + x];

  const int lo = (window - 1) / 2;   // cells left/above the center
  const int hi = window - 1 - lo;    // cells right/below
  const double area = static_cast<double>(window) * window;
  double max_v = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - lo), x1 = std::min(w, x + hi + 1);
      const int y0 = std::max(0, y - lo), y1 = std::min(h, y + hi + 1);
      const double s = sat[static_cast<std::size_t>(y1) * (w + 1) + x1] -
                       sat[static_cast<std::size_t>(y0) * (w + 1) + x1] -
                       sat[static_cast<std::size_t>(y1) * (w + 1) + x0] +
                       sat[static_cast<std::size_t>(y0) * (w + 1) + x0];
      const double v = s / area;  // zero padding outside the page
      map.values[static_cast<std::size_t>(y) * w + x] = v;
      max_v = std::max(max_v, v);
    }
  }
  if (max_v > 0.0)
    for (double& v : map.values) v /= max_v;
  return map;
}

std::vector<SampledPatch> sample_patches(const GrayImage& img, const InkProbabilityMap& map,
                                         const PatchExtractionConfig& cfg) {
  if (map.width != img.width || map.height != img.height)
    throw shape_error("sample_patches: map extents do not match the image");
  if (cfg.n_sub_img < 1) throw parameter_error("sample_patches: N_sub_img must be >= 1");
  const int k = cfg.k_sub_img;
  if (k < 1 || k > img.width || k > img.height)
    throw parameter_error("sample_patches: k_sub_img must fit inside the page");

  const int lo = k / 2;       // patch top-left = center - lo
  const int hi = k - 1 - lo;  // patch bottom-right = center + hi
  std::vector<int> centers;
  std::vector<double> cumulative;
  double total = 0.0;
  for (int y = lo; y + hi < img.height; ++y) {
    for (int x = lo; x + hi < img.width; ++x) {
      const double p = map.at(x, y);
      if (p <= 0.0) continue;
      total += p;
      centers.push_back(y * img.width + x);
      cumulative.push_back(total);
    }
  }
  if (centers.empty()) throw data_error("no ink found");

  std::mt19937_64 rng = make_rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, total);
  std::vector<SampledPatch> patches;
  patches.reserve(static_cast<std::size_t>(cfg.n_sub_img));
  for (int i = 0; i < cfg.n_sub_img; ++i) {
    const double u = uni(rng);
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const std::size_t sel = std::min(idx, centers.size() - 1);
    const int cx = centers[sel] % img.width;
    const int cy = centers[sel] / img.width;
    SampledPatch sp;
    sp.center_x = cx;
    sp.center_y = cy;
    sp.image = GrayImage(k, k);
    for (int y = 0; y < k; ++y)
      for (int x = 0; x < k; ++x) sp.image.at(x, y) = img.at(cx - lo + x, cy - lo + y);
    patches.push_back(std::move(sp));
  }
  return patches;
}

Tensor normalize_patch(const GrayImage& patch) {
  if (patch.width != 64 || patch.height != 64)
    throw shape_error("normalize_patch: expected 64x64, got " + std::to_string(patch.width) + "x" +
                      std::to_string(patch.height));
  Tensor t({1, 64, 64});
  for (std::size_t i = 0; i < patch.pixels.size(); ++i)
    t[i] = (255.0 - static_cast<double>(patch.pixels[i])) / 255.0;
  return t;
}

GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw parameter_error("resize_bilinear: bad output extents");
  GrayImage out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(static_cast<int>(fy), img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(static_cast<int>(fx), img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double v = (1 - wy) * ((1 - wx) * img.at(x0, y0) + wx * img.at(x1, y0)) +
                       wy * ((1 - wx) * img.at(x0, y1) + wx * img.at(x1, y1));
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  return out;
}

}  // namespace scriptor

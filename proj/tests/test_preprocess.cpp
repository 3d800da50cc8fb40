#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <random>

#include "scriptor/errors.hpp"
#include "scriptor/preprocess.hpp"
#include "scriptor/rng.hpp"

using namespace scriptor;

namespace {

// independent oracle: recompute the between-class variance from scratch
// for every candidate threshold
int otsu_oracle(const GrayImage& img) {
  int best_t = 0;
  double best_var = 0.0;
  const double total = static_cast<double>(img.pixels.size());
  for (int t = 0; t <= 255; ++t) {
    double w0 = 0, w1 = 0, sum0 = 0, sum1 = 0;
    for (std::uint8_t p : img.pixels) {
      if (p < t) {
        w0 += 1;
        sum0 += p;
      } else {
        w1 += 1;
        sum1 += p;
      }
    }
    if (w0 == 0 || w1 == 0) continue;
    const double mu0 = sum0 / w0, mu1 = sum1 / w1;
    const double var = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_t = t;
    }
  }
  return best_t;
}

GrayImage image_from(int w, int h, std::vector<std::uint8_t> pixels) {
  GrayImage img(w, h);
  img.pixels = std::move(pixels);
  return img;
}

}  // namespace

TEST_CASE("otsu matches the exhaustive oracle on random images") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    GrayImage img(16, 16);
    std::mt19937_64 rng = make_rng(mix_seed(seed, 0x6f747375ULL));
    std::uniform_int_distribution<int> dist(0, 255);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(dist(rng));
    OtsuResult r = binarize_otsu(img);
    CHECK(r.threshold == otsu_oracle(img));
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      CHECK(r.binary.mask[i] == (img.pixels[i] < r.threshold ? 1 : 0));
  }
}

TEST_CASE("otsu degenerate and tie cases") {
  GrayImage bimodal = image_from(5, 1, {0, 0, 0, 255, 255});
  OtsuResult r = binarize_otsu(bimodal);
  CHECK(r.threshold == 1);  // every t in [1,255] ties, lowest wins
  CHECK(r.binary.mask == std::vector<std::uint8_t>{1, 1, 1, 0, 0});

  GrayImage flat = image_from(3, 3, std::vector<std::uint8_t>(9, 128));
  OtsuResult rf = binarize_otsu(flat);
  CHECK(rf.threshold == 0);  // single-valued page has no ink
  for (std::uint8_t m : rf.binary.mask) CHECK(m == 0);

  CHECK_THROWS_AS(binarize_otsu(GrayImage()), parameter_error);
}

TEST_CASE("ink probability map hand cases") {
  BinaryImage b;
  b.width = 4;
  b.height = 4;
  b.mask = {0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};  // single pixel at (1,1)
  InkProbabilityMap map = ink_probability_map(b, 3);
  // after max normalization the covered 3x3 neighbourhood is exactly 1
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(map.at(x, y) == ((std::abs(x - 1) <= 1 && std::abs(y - 1) <= 1) ? 1.0 : 0.0));

  // window 1 is the identity on the mask
  InkProbabilityMap id = ink_probability_map(b, 1);
  for (std::size_t i = 0; i < b.mask.size(); ++i)
    CHECK(id.values[i] == static_cast<double>(b.mask[i]));

  BinaryImage empty = b;
  empty.mask.assign(16, 0);
  InkProbabilityMap zero = ink_probability_map(empty, 3);
  for (double v : zero.values) CHECK(v == 0.0);

  CHECK_THROWS_AS(ink_probability_map(b, 0), parameter_error);
}

TEST_CASE("ink probability map tracks local ink density") {
  // dense blob left, single dot right: the blob centre must outweigh the dot
  BinaryImage b;
  b.width = 16;
  b.height = 8;
  b.mask.assign(16 * 8, 0);
  for (int y = 2; y <= 5; ++y)
    for (int x = 2; x <= 5; ++x) b.mask[static_cast<std::size_t>(y) * 16 + x] = 1;
  b.mask[4 * 16 + 12] = 1;
  InkProbabilityMap map = ink_probability_map(b, 3);
  CHECK(map.at(3, 3) == 1.0);
  CHECK(map.at(12, 4) < map.at(3, 3));
  CHECK(map.at(12, 4) > 0.0);
  CHECK(map.at(0, 7) == 0.0);
}

TEST_CASE("patch sampling from a single valid center") {
  GrayImage img(4, 4);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(i * 10);
  InkProbabilityMap map;
  map.width = 4;
  map.height = 4;
  map.values.assign(16, 0.0);
  map.values[2 * 4 + 2] = 1.0;  // only valid center for k=4 is (2,2)

  PatchExtractionConfig cfg;
  cfg.n_sub_img = 5;
  cfg.k_sub_img = 4;
  cfg.seed = 1;
  auto patches = sample_patches(img, map, cfg);
  CHECK(patches.size() == 5);
  for (const SampledPatch& p : patches) {
    CHECK(p.center_x == 2);
    CHECK(p.center_y == 2);
    CHECK(p.image.width == 4);
    CHECK(p.image.pixels == img.pixels);
  }
}

TEST_CASE("patch centers follow the map distribution") {
  // 6x6 page, k=3, four weighted centers; compare empirical frequencies
  GrayImage img(6, 6);
  InkProbabilityMap map;
  map.width = 6;
  map.height = 6;
  map.values.assign(36, 0.0);
  std::map<std::pair<int, int>, double> weights = {
      {{1, 1}, 0.1}, {{4, 1}, 0.2}, {{1, 4}, 0.3}, {{4, 4}, 0.4}};
  for (const auto& [pos, w] : weights)
    map.values[static_cast<std::size_t>(pos.second) * 6 + pos.first] = w;

  PatchExtractionConfig cfg;
  cfg.n_sub_img = 100000;
  cfg.k_sub_img = 3;
  cfg.seed = 2;
  auto patches = sample_patches(img, map, cfg);
  std::map<std::pair<int, int>, double> counts;
  for (const SampledPatch& p : patches) counts[{p.center_x, p.center_y}] += 1.0;
  double tv = 0.0;
  for (const auto& [pos, w] : weights) tv += std::abs(counts[pos] / cfg.n_sub_img - w);
  CHECK(tv / 2.0 <= 0.02);
}

TEST_CASE("patches always lie inside the page") {
  GrayImage img(40, 30);
  for (auto& p : img.pixels) p = 200;
  BinaryImage b;
  b.width = 40;
  b.height = 30;
  b.mask.assign(40 * 30, 1);
  InkProbabilityMap map = ink_probability_map(b, 5);
  PatchExtractionConfig cfg;
  cfg.n_sub_img = 500;
  cfg.k_sub_img = 16;
  cfg.seed = 3;
  const int lo = 16 / 2, hi = 16 - 1 - lo;
  for (const SampledPatch& p : sample_patches(img, map, cfg)) {
    CHECK(p.center_x - lo >= 0);
    CHECK(p.center_x + hi < 40);
    CHECK(p.center_y - lo >= 0);
    CHECK(p.center_y + hi < 30);
  }
}

TEST_CASE("sampling without ink mass fails loudly") {
  GrayImage img(8, 8);
  InkProbabilityMap map;
  map.width = 8;
  map.height = 8;
  map.values.assign(64, 0.0);
  PatchExtractionConfig cfg;
  cfg.k_sub_img = 4;
  CHECK_THROWS_AS(sample_patches(img, map, cfg), data_error);
}

TEST_CASE("patch normalization inverts intensity into [0,1]") {
  GrayImage patch(64, 64);
  for (auto& p : patch.pixels) p = 127;
  Tensor t = normalize_patch(patch);
  CHECK(t.shape == std::vector<std::size_t>{1, 64, 64});
  for (double v : t.data) CHECK(v == doctest::Approx(128.0 / 255.0).epsilon(1e-15));

  patch.pixels[0] = 0;
  patch.pixels[1] = 255;
  Tensor t2 = normalize_patch(patch);
  CHECK(t2[0] == 1.0);
  CHECK(t2[1] == 0.0);

  CHECK_THROWS_AS(normalize_patch(GrayImage(32, 32)), shape_error);
}

TEST_CASE("bilinear resize keeps constant images constant") {
  GrayImage img(10, 7);
  for (auto& p : img.pixels) p = 93;
  GrayImage out = resize_bilinear(img, 64, 64);
  CHECK(out.width == 64);
  CHECK(out.height == 64);
  for (auto p : out.pixels) CHECK(p == 93);

  GrayImage same = resize_bilinear(img, 10, 7);
  CHECK(same.pixels == img.pixels);
}

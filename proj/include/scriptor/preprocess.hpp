#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "scriptor/image.hpp"
#include "scriptor/tensor.hpp"

namespace scriptor {

// Binary ink mask: 1 = ink, 0 = background.
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;

  std::uint8_t at(int x, int y) const { return mask[static_cast<std::size_t>(y) * width + x]; }
};

struct OtsuResult {
  BinaryImage binary;
  int threshold = 0;  // pixels < threshold become ink
};

// Global thresholding maximizing between-class variance; ties resolved to
// the lowest threshold, so a single-valued image yields all background.
OtsuResult binarize_otsu(const GrayImage& img);

// Box-filtered (zero-padded) ink density, divided by its maximum.
// All zeros when the page has no ink.
struct InkProbabilityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // in [0,1]

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

InkProbabilityMap ink_probability_map(const BinaryImage& binary, int window);

struct PatchExtractionConfig {
  int n_sub_img = 500;
  int k_sub_img = 64;
  int filter_window = 32;
  std::uint64_t seed = 0;
};

struct SampledPatch {
  GrayImage image;
  int center_x = 0;
  int center_y = 0;
};

// Draws patch centers with probability proportional to the map, restricted
// to centers whose k x k patch lies fully inside the page. Sampling is
// with replacement. Throws data_error when the map carries no ink mass.
std::vector<SampledPatch> sample_patches(const GrayImage& img, const InkProbabilityMap& map,
                                         const PatchExtractionConfig& cfg);

// (255 - intensity)/255, so ink ~ 1 and paper ~ 0. Requires 64x64.
Tensor normalize_patch(const GrayImage& patch);

// Bilinear resample (used to bring isolated-character images to 64x64).
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

}  // namespace scriptor

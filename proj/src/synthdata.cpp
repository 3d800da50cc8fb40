#include "scriptor/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "scriptor/dataset.hpp"
#include "scriptor/errors.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

namespace {

struct Point {
  double x, y;
};

// Writer-independent base skeleton of one glyph: a polyline of 6..8
// control points spanning the patch interior.
std::vector<Point> glyph_skeleton(int glyph_id) {
  std::mt19937_64 rng = make_rng(mix_seed(0x676c796668ULL, static_cast<std::uint64_t>(glyph_id)));
  std::uniform_int_distribution<int> npts_dist(6, 8);
  std::uniform_real_distribution<double> coord(12.0, 52.0);
  const int npts = npts_dist(rng);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(npts));
  for (int i = 0; i < npts; ++i) pts.push_back({coord(rng), coord(rng)});
  // keep consecutive points at least 8px apart so strokes stay visible
  for (int i = 1; i < npts; ++i) {
    double dx = pts[i].x - pts[i - 1].x, dy = pts[i].y - pts[i - 1].y;
    const double len = std::hypot(dx, dy);
    if (len < 8.0) {
      const double s = len > 1e-9 ? 8.0 / len : 0.0;
      pts[i].x = std::clamp(pts[i - 1].x + (len > 1e-9 ? dx * s : 8.0), 4.0, 60.0);
      pts[i].y = std::clamp(pts[i - 1].y + (len > 1e-9 ? dy * s : 0.0), 4.0, 60.0);
    }
  }
  return pts;
}

void stamp_disk(GrayImage& img, double cx, double cy, double radius, std::uint8_t shade) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(cx + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(cy + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r2) img.at(x, y) = std::min(img.at(x, y), shade);
    }
}

// duty < 1 draws dashed strokes: ink is laid down only on the leading
// fraction of each 6px period of arc length
void draw_polyline(GrayImage& img, const std::vector<Point>& pts, double radius,
                   std::uint8_t shade, double duty = 1.0) {
  const double period = 6.0;
  double arc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double dx = pts[i].x - pts[i - 1].x, dy = pts[i].y - pts[i - 1].y;
    const double len = std::hypot(dx, dy);
    const int steps = std::max(1, static_cast<int>(len / 0.4));
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      if (std::fmod(arc + t * len, period) <= duty * period)
        stamp_disk(img, pts[i - 1].x + t * dx, pts[i - 1].y + t * dy, radius, shade);
    }
    arc += len;
  }
}

std::size_t ink_count(const GrayImage& img) {
  std::size_t n = 0;
  for (std::uint8_t p : img.pixels)
    if (p < 128) ++n;
  return n;
}

}  // namespace

WriterStyle make_writer_style(int writer_id, std::uint64_t corpus_seed) {
  std::mt19937_64 rng =
      make_rng(mix_seed(corpus_seed, 0x7374796cULL, static_cast<std::uint64_t>(writer_id)));
  WriterStyle s;
  // writers get high-contrast categorical cues: three ink coverage levels
  // crossed with four darkness levels and two slant directions give 24
  // distinct identities before any id repeats a combination; the seeded
  // wobble keeps corpora distinct across seeds
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  s.density = 0.08 + 0.385 * (writer_id % 3) + 0.01 * unit(rng);
  s.pressure = 0.15 + 0.26 * ((writer_id / 3) % 4) + 0.01 * unit(rng);
  s.slant_deg = ((writer_id / 12) % 2 == 0 ? -22.0 : 18.0) + 4.0 * unit(rng);
  s.thickness = 1 + writer_id % 4;
  s.curvature = -0.5 + std::fmod((writer_id + 1) * 0.7320508075688772 + 0.01 * unit(rng), 1.0);
  s.jitter = std::uniform_real_distribution<double>(0.3, 2.0)(rng);
  s.loop_tendency = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return s;
}

GrayImage render_patch(const WriterStyle& style, int glyph_id, std::uint64_t instance_seed) {
  std::vector<Point> pts = glyph_skeleton(glyph_id);

  const double slant = std::tan(style.slant_deg * std::numbers::pi / 180.0);
  std::mt19937_64 rng = make_rng(mix_seed(instance_seed, 0x6a697474ULL));
  std::normal_distribution<double> noise(0.0, style.jitter);
  for (Point& p : pts) {
    const double rel_y = p.y - 32.0;
    p.x += style.curvature * (rel_y * rel_y) / 64.0;  // quadratic bend
    p.x += slant * (32.0 - p.y) * 0.5;                // shear
    p.x += noise(rng);
    p.y += noise(rng);
    p.x = std::clamp(p.x, 2.0, 61.0);
    p.y = std::clamp(p.y, 2.0, 61.0);
  }

  // terminal loop, radius scaled by the style's loop tendency
  const double loop_r = 2.0 + 5.0 * style.loop_tendency;
  const Point last = pts.back();
  for (int a = 0; a <= 16; ++a) {
    const double ang = 2.0 * std::numbers::pi * a / 16.0;
    pts.push_back({std::clamp(last.x + loop_r * std::cos(ang), 2.0, 61.0),
                   std::clamp(last.y + loop_r * std::sin(ang) - loop_r, 2.0, 61.0)});
  }

  GrayImage img(64, 64, 255);
  // ink darkness and ink coverage are the writer's strongest invariant
  // cues; the pen width class nudges the base stroke radius
  double radius = 0.35 + 0.05 * style.thickness;
  const std::uint8_t shade = static_cast<std::uint8_t>(std::lround(110.0 * (1.0 - style.pressure)));
  draw_polyline(img, pts, radius, shade);
  // steer ink coverage to the writer's budget so it is a stable identity
  // cue while the glyph shape varies; the geometric scale keeps
  // neighbouring budgets a constant ratio apart. Light writers thin out
  // into dashes, heavy writers thicken their strokes.
  const std::size_t budget =
      static_cast<std::size_t>(std::lround(95.0 * std::pow(1985.0 / 95.0, style.density)));
  std::size_t ink = ink_count(img);
  if (ink > budget) {
    double duty = static_cast<double>(budget) / static_cast<double>(ink);
    for (int pass = 0; pass < 3; ++pass) {
      img = GrayImage(64, 64, 255);
      draw_polyline(img, pts, radius, shade, duty);
      ink = ink_count(img);
      duty = std::min(1.0, duty * static_cast<double>(budget) /
                               static_cast<double>(std::max<std::size_t>(ink, 1)));
    }
  } else {
    while (ink < budget && radius < 9.0) {
      radius += 0.15;
      draw_polyline(img, pts, radius, shade);
      ink = ink_count(img);
    }
  }
  return img;
}

void SynthCorpusSpec::validate() const {
  if (num_writers < 1) throw spec_error("corpus: num_writers must be >= 1");
  if (patches_per_writer < 1) throw spec_error("corpus: patches_per_writer must be >= 1");
  if (vocabulary < 3) throw spec_error("corpus: vocabulary must allow three disjoint splits");
  const double sum = train_fraction + val_fraction + test_fraction;
  if (train_fraction <= 0.0 || val_fraction <= 0.0 || test_fraction <= 0.0 ||
      std::abs(sum - 1.0) > 1e-9)
    throw spec_error("corpus: split fractions must be positive and sum to 1");
}

CorpusPaths generate_corpus(const SynthCorpusSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "patches", ec);
  if (ec) throw io_error("cannot create " + (out_dir / "patches").string());

  // glyph ids partitioned across splits: text independence by construction
  const int v = spec.vocabulary;
  int n_train = std::max(1, static_cast<int>(std::lround(v * spec.train_fraction)));
  int n_val = std::max(1, static_cast<int>(std::lround(v * spec.val_fraction)));
  if (n_train + n_val >= v) n_train = v - n_val - 1;
  if (n_train < 1) throw spec_error("corpus: vocabulary too small for the split fractions");
  std::vector<std::vector<int>> split_glyphs(3);
  for (int g = 0; g < v; ++g) {
    if (g < n_train)
      split_glyphs[0].push_back(g);
    else if (g < n_train + n_val)
      split_glyphs[1].push_back(g);
    else
      split_glyphs[2].push_back(g);
  }

  const int per = spec.patches_per_writer;
  int c_train = std::max(1, static_cast<int>(std::lround(per * spec.train_fraction)));
  int c_val = std::max(1, static_cast<int>(std::lround(per * spec.val_fraction)));
  if (c_train + c_val >= per) c_train = per - c_val - 1;
  if (c_train < 1) throw spec_error("corpus: patches_per_writer too small for the splits");
  const int counts[3] = {c_train, c_val, per - c_train - c_val};
  const char* names[3] = {"train", "val", "test"};

  std::vector<std::vector<PatchRecord>> manifests(3);
  for (int w = 0; w < spec.num_writers; ++w) {
    const WriterStyle style = make_writer_style(w, spec.seed);
    int patch_index = 0;
    for (int split = 0; split < 3; ++split) {
      std::mt19937_64 pick =
          make_rng(mix_seed(spec.seed, 0x7069636bULL + static_cast<std::uint64_t>(split),
                            static_cast<std::uint64_t>(w)));
      std::uniform_int_distribution<std::size_t> gdist(0, split_glyphs[split].size() - 1);
      for (int i = 0; i < counts[split]; ++i, ++patch_index) {
        const int glyph = split_glyphs[static_cast<std::size_t>(split)][gdist(pick)];
        const std::uint64_t inst = mix_seed(spec.seed, static_cast<std::uint64_t>(w),
                                            static_cast<std::uint64_t>(patch_index));
        GrayImage patch = render_patch(style, glyph, inst);
        const std::string file = "patches/w" + std::to_string(w) + "_" + names[split] + "_p" +
                                 std::to_string(i) + ".pgm";
        write_pgm(out_dir / file, patch);
        manifests[split].push_back(PatchRecord{file, 32, 32, w});
      }
    }
  }

  CorpusPaths paths;
  paths.train_manifest = out_dir / "manifest_train.tsv";
  paths.val_manifest = out_dir / "manifest_val.tsv";
  paths.test_manifest = out_dir / "manifest_test.tsv";
  write_manifest(paths.train_manifest, manifests[0]);
  write_manifest(paths.val_manifest, manifests[1]);
  write_manifest(paths.test_manifest, manifests[2]);
  return paths;
}

}  // namespace scriptor

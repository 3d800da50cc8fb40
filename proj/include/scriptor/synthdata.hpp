#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scriptor/image.hpp"

namespace scriptor {

// Deterministic stroke style of one synthetic writer, derived from
// (writer id, corpus seed).
struct WriterStyle {
  double slant_deg = 0.0;      // -30..30
  int thickness = 1;           // 1..4, pen width class
  double pressure = 0.5;       // 0.15..0.95, ink darkness
  double density = 0.5;        // 0..1, per-patch ink coverage level
  double curvature = 0.0;      // -0.5..0.5, bends stroke midpoints
  double jitter = 0.0;         // 0..2 pixels, per-instance point noise
  double loop_tendency = 0.0;  // 0..1, scales the terminal loop radius
};

WriterStyle make_writer_style(int writer_id, std::uint64_t corpus_seed);

// Renders one 64x64 patch of the given glyph in the given style.
// Glyph skeletons are shared across writers; the instance seed drives
// only the jitter. Ink fraction stays within [0.02, 0.60].
GrayImage render_patch(const WriterStyle& style, int glyph_id, std::uint64_t instance_seed);

struct SynthCorpusSpec {
  int num_writers = 10;
  int patches_per_writer = 100;
  int vocabulary = 40;  // number of distinct glyphs
  std::uint64_t seed = 0;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;

  void validate() const;
};

struct CorpusPaths {
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path test_manifest;
};

// Writes 64x64 PGM patches plus one manifest per split. Glyph ids are
// partitioned across splits, so test glyphs never appear in training.
CorpusPaths generate_corpus(const SynthCorpusSpec& spec, const std::filesystem::path& out_dir);

}  // namespace scriptor

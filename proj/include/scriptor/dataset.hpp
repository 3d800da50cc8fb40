#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scriptor/tensor.hpp"

namespace scriptor {

// One manifest line: patch file (relative to the manifest), patch center
// in the source page, writer id. Tab-separated.
struct PatchRecord {
  std::string file;
  int center_x = 0;
  int center_y = 0;
  int writer = 0;
};

void write_manifest(const std::filesystem::path& path, const std::vector<PatchRecord>& records);
std::vector<PatchRecord> read_manifest(const std::filesystem::path& path);

// Normalized 64x64 patches grouped by writer.
struct PatchSet {
  std::map<int, std::vector<Tensor>> by_writer;

  std::vector<int> writer_ids() const;
  std::size_t total_patches() const;
  // Keeps the first `writers` writers (ascending id) and at most
  // `patches_per_writer` patches each; 0 = no limit.
  PatchSet subset(int writers, int patches_per_writer) const;
};

PatchSet load_patch_set(const std::filesystem::path& manifest_path);

}  // namespace scriptor

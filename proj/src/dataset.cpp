#include "scriptor/dataset.hpp"

#include <fstream>
#include <sstream>

#include "scriptor/errors.hpp"
#include "scriptor/image.hpp"
#include "scriptor/preprocess.hpp"

namespace scriptor {

void write_manifest(const std::filesystem::path& path, const std::vector<PatchRecord>& records) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  for (const PatchRecord& r : records)
    out << r.file << '\t' << r.center_x << '\t' << r.center_y << '\t' << r.writer << '\n';
  if (!out) throw io_error("failed writing " + path.string());
}

std::vector<PatchRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  std::vector<PatchRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    PatchRecord r;
    std::string cx, cy, writer;
    if (!std::getline(ss, r.file, '\t') || !std::getline(ss, cx, '\t') ||
        !std::getline(ss, cy, '\t') || !std::getline(ss, writer))
      throw io_error(path.string() + ":" + std::to_string(line_no) + ": malformed manifest line");
    r.center_x = std::stoi(cx);
    r.center_y = std::stoi(cy);
    r.writer = std::stoi(writer);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<int> PatchSet::writer_ids() const {
  std::vector<int> ids;
  ids.reserve(by_writer.size());
  for (const auto& [w, _] : by_writer) ids.push_back(w);
  return ids;
}

std::size_t PatchSet::total_patches() const {
  std::size_t n = 0;
  for (const auto& [_, ps] : by_writer) n += ps.size();
  return n;
}

PatchSet PatchSet::subset(int writers, int patches_per_writer) const {
  PatchSet out;
  int taken = 0;
  for (const auto& [w, ps] : by_writer) {
    if (writers > 0 && taken >= writers) break;
    std::vector<Tensor> kept = ps;
    if (patches_per_writer > 0 && static_cast<int>(kept.size()) > patches_per_writer)
      kept.resize(static_cast<std::size_t>(patches_per_writer));
    out.by_writer.emplace(w, std::move(kept));
    ++taken;
  }
  return out;
}

PatchSet load_patch_set(const std::filesystem::path& manifest_path) {
  const std::filesystem::path base = manifest_path.parent_path();
  PatchSet set;
  for (const PatchRecord& r : read_manifest(manifest_path)) {
    GrayImage img = read_image(base / r.file);
    if (img.width != 64 || img.height != 64) img = resize_bilinear(img, 64, 64);
    set.by_writer[r.writer].push_back(normalize_patch(img));
  }
  if (set.by_writer.empty()) throw data_error("manifest " + manifest_path.string() + " is empty");
  return set;
}

}  // namespace scriptor

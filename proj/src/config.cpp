#include "scriptor/config.hpp"

#include <fstream>
#include <sstream>

#include "scriptor/errors.hpp"

namespace scriptor {

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::filesystem::path& path, int line, const std::string& msg) {
  throw config_error(path.string() + ":" + std::to_string(line) + ": " + msg);
}

std::vector<int> parse_int_list(const std::string& value) {
  std::vector<int> out;
  std::istringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(trim(tok)));
  return out;
}

std::vector<std::string> parse_str_list(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
  return out;
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path.string());

  ExperimentConfig cfg;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']') fail(path, line_no, "malformed section header");
      section = stripped.substr(1, stripped.size() - 2);
      if (section != "corpus" && section != "network" && section != "training" &&
          section != "evaluation" && section != "preprocess" && section != "paths")
        fail(path, line_no, "unknown section [" + section + "]");
      continue;
    }
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) fail(path, line_no, "expected key = value");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (section.empty()) fail(path, line_no, "key '" + key + "' outside any section");

    try {
      if (section == "corpus") {
        if (key == "writers") cfg.corpus.num_writers = std::stoi(value);
        else if (key == "patches_per_writer") cfg.corpus.patches_per_writer = std::stoi(value);
        else if (key == "vocabulary") cfg.corpus.vocabulary = std::stoi(value);
        else if (key == "seed") cfg.corpus.seed = std::stoull(value);
        else if (key == "train_fraction") cfg.corpus.train_fraction = std::stod(value);
        else if (key == "val_fraction") cfg.corpus.val_fraction = std::stod(value);
        else if (key == "test_fraction") cfg.corpus.test_fraction = std::stod(value);
        else fail(path, line_no, "unknown key '" + key + "' in [corpus]");
      } else if (section == "network") {
        if (key == "variant") cfg.network.variant = variant_from_name(value);
        else if (key == "filters") cfg.network.block_filters = parse_int_list(value);
        else if (key == "kernel") cfg.network.kernel = std::stoi(value);
        else if (key == "pad") cfg.network.pad = std::stoi(value);
        else if (key == "conv_stride") cfg.network.conv_stride = std::stoi(value);
        else if (key == "pool") cfg.network.pool = std::stoi(value);
        else if (key == "fc_width") cfg.network.fc_width = std::stoi(value);
        else fail(path, line_no, "unknown key '" + key + "' in [network]");
      } else if (section == "training") {
        if (key == "n") cfg.training.n = std::stoi(value);
        else if (key == "p") cfg.training.p = std::stoi(value);
        else if (key == "learning_rate") cfg.training.learning_rate = std::stod(value);
        else if (key == "momentum") cfg.training.momentum = std::stod(value);
        else if (key == "patience") cfg.training.patience = std::stoi(value);
        else if (key == "max_epochs") cfg.training.max_epochs = std::stoi(value);
        else if (key == "seed") cfg.training.seed = std::stoull(value);
        else if (key == "aggregation") cfg.training.agg = aggregation_from_name(value);
        else if (key == "K") cfg.training.agg_k = std::stoi(value);
        else fail(path, line_no, "unknown key '" + key + "' in [training]");
      } else if (section == "evaluation") {
        if (key == "trials") cfg.trials = std::stoi(value);
        else if (key == "k_list") cfg.k_list = parse_int_list(value);
        else if (key == "t") cfg.multi_tuple_t = std::stoi(value);
        else if (key == "sweep_n") cfg.sweep_n = parse_int_list(value);
        else if (key == "sweep_writers") cfg.sweep_writers = parse_int_list(value);
        else if (key == "sweep_patches") cfg.sweep_patches = parse_int_list(value);
        else if (key == "sweep_aggregation") cfg.sweep_aggregation = parse_str_list(value);
        else if (key == "sweep_K") cfg.sweep_k = parse_int_list(value);
        else fail(path, line_no, "unknown key '" + key + "' in [evaluation]");
      } else if (section == "preprocess") {
        if (key == "n_sub_img") cfg.patch_extraction.n_sub_img = std::stoi(value);
        else if (key == "k_sub_img") cfg.patch_extraction.k_sub_img = std::stoi(value);
        else if (key == "filter_window") cfg.patch_extraction.filter_window = std::stoi(value);
        else if (key == "seed") cfg.patch_extraction.seed = std::stoull(value);
        else fail(path, line_no, "unknown key '" + key + "' in [preprocess]");
      } else {  // paths
        if (key == "corpus_dir") cfg.corpus_dir = value;
        else if (key == "pages_dir") cfg.pages_dir = value;
        else if (key == "checkpoint") cfg.checkpoint = value;
        else if (key == "out_dir") cfg.out_dir = value;
        else fail(path, line_no, "unknown key '" + key + "' in [paths]");
      }
    } catch (const config_error&) {
      throw;
    } catch (const std::exception& e) {
      fail(path, line_no, "invalid value '" + value + "' for key '" + key + "': " + e.what());
    }
  }
  cfg.network.validate();
  return cfg;
}

}  // namespace scriptor

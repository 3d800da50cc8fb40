#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "scriptor/aggregate.hpp"
#include "scriptor/model.hpp"
#include "scriptor/preprocess.hpp"
#include "scriptor/synthdata.hpp"
#include "scriptor/traineval.hpp"

namespace scriptor {

// Sectioned key=value experiment configuration. Unknown sections or keys
// are rejected with the offending line number.
struct ExperimentConfig {
  // [corpus]
  SynthCorpusSpec corpus;

  // [network]
  NetworkSpec network = NetworkSpec::sub_region();

  // [training]
  TrainingConfig training;

  // [evaluation]
  int trials = 20;
  std::vector<int> k_list = {1, 5, 10};
  int multi_tuple_t = 1;
  std::vector<int> sweep_n;
  std::vector<int> sweep_writers;
  std::vector<int> sweep_patches;
  std::vector<std::string> sweep_aggregation;
  std::vector<int> sweep_k;

  // [preprocess]
  PatchExtractionConfig patch_extraction;

  // [paths]
  std::filesystem::path corpus_dir;
  std::filesystem::path pages_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path out_dir = ".";

  bool has_sweep() const {
    return !sweep_n.empty() || !sweep_writers.empty() || !sweep_patches.empty() ||
           !sweep_aggregation.empty();
  }
};

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace scriptor

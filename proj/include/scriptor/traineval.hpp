#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scriptor/aggregate.hpp"
#include "scriptor/dataset.hpp"
#include "scriptor/model.hpp"

namespace scriptor {

struct TrainingConfig {
  NetworkSpec net;
  Aggregation agg = Aggregation::AA;
  int agg_k = 0;           // KMA only
  int n = 20;              // tuple size
  int p = 20;              // iterations per epoch
  double learning_rate = 0.01;
  double momentum = 0.9;
  int patience = 20;       // early-stop patience in epochs
  int max_epochs = 100;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_top1 = 0.0;
  double seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_top1 = 0.0;
};

// Trained extractor + classifier head plus the label mapping and the
// aggregation settings it was trained with.
struct Model {
  Network net;
  ClassifierHead head;
  Aggregation agg = Aggregation::AA;
  int agg_k = 0;
  int n = 20;
  std::vector<int> writer_ids;  // class index -> writer id
};

std::pair<Model, TrainingHistory> train(const TrainingConfig& cfg, const PatchSet& train_set,
                                        const PatchSet& val_set);

// Forward pass of one tuple through the trained model: logits over writers.
Tensor model_logits(const Model& model, const std::vector<Tensor>& tuple_patches);

struct EvalReport {
  std::vector<int> k_list;
  // per_trial[trial][k index], percentages
  std::vector<std::vector<double>> per_trial;
  std::vector<double> mean;      // per k
  std::vector<double> variance;  // per k, population variance over trials
};

// Single-tuple protocol: per trial, one fresh n-tuple per writer, ranked
// by logits, scored top-k over the enrolled writers.
EvalReport evaluate_topk(const Model& model, const PatchSet& eval_set, int n,
                         const std::vector<int>& k_list, int trials, std::uint64_t seed);

struct MultiTupleResult {
  std::map<int, int> predictions;  // writer id -> predicted writer id, last trial
  EvalReport report;
};

// Multi-tuple fusion: t disjoint n-tuples per writer drawn from one
// permutation; the t softmax vectors are averaged before ranking.
// With t=1 this coincides exactly with evaluate_topk on the same seed.
MultiTupleResult evaluate_multi_tuple(const Model& model, const PatchSet& eval_set, int n, int t,
                                      const std::vector<int>& k_list, int trials,
                                      std::uint64_t seed);

// ---- experiment grid ----

struct SweepCell {
  int n = 20;
  int patches_per_writer = 0;  // 0 = all available
  int writers = 0;             // 0 = all available
  Aggregation agg = Aggregation::AA;
  int agg_k = 0;
};

struct SweepRow {
  std::string experiment;
  SweepCell cell;
  bool ok = false;
  std::string error;
  EvalReport report;
  int epochs = 0;
  std::uint64_t seed = 0;
};

// Deterministic per-cell subseed derived from the master seed and the
// cell parameters, so a single-cell grid reproduces a direct run.
std::uint64_t sweep_cell_seed(std::uint64_t master_seed, const SweepCell& cell);

std::vector<SweepRow> sweep(const std::vector<SweepCell>& grid, const TrainingConfig& base,
                            const PatchSet& train_set, const PatchSet& val_set,
                            const PatchSet& test_set, const std::vector<int>& k_list, int trials,
                            std::uint64_t master_seed);

// ---- file formats ----

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

void write_history_csv(const std::filesystem::path& path, const TrainingHistory& history);
// One row per trial plus mean/var summary rows per the results schema:
// experiment,writers,n,N_s,aggregation,K,trial,top1,top5,top10,epochs,seed
void write_results_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace scriptor

#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace scriptor {

// One training epoch: p independent random permutations per writer, each
// partitioned into m = floor(N_s/n) tuples of n patch ids (any remainder
// of the permutation is dropped).
struct EpochPlan {
  int n = 1;
  int p = 1;
  std::uint64_t seed = 0;
  // writer -> [iteration][tuple][member] patch id
  std::map<int, std::vector<std::vector<std::vector<int>>>> assignments;

  int tuples_per_iteration(int writer) const;
};

EpochPlan make_epoch_plan(const std::map<int, std::vector<int>>& writer_patches, int n, int p,
                          std::uint64_t seed);

struct TupleBatch {
  int writer = 0;
  std::vector<int> patch_ids;
};

// All writers' tuples for one iteration, interleaved by a seeded shuffle.
std::vector<TupleBatch> iteration_batches(const EpochPlan& plan, int iteration);

}  // namespace scriptor

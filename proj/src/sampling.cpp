#include "scriptor/sampling.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "scriptor/errors.hpp"
#include "scriptor/rng.hpp"

namespace scriptor {

int EpochPlan::tuples_per_iteration(int writer) const {
  auto it = assignments.find(writer);
  if (it == assignments.end()) throw parameter_error("unknown writer " + std::to_string(writer));
  return static_cast<int>(it->second.front().size());
}

EpochPlan make_epoch_plan(const std::map<int, std::vector<int>>& writer_patches, int n, int p,
                          std::uint64_t seed) {
  if (n < 1) throw parameter_error("make_epoch_plan: n must be >= 1");
  if (p < 1) throw parameter_error("make_epoch_plan: p must be >= 1");
  EpochPlan plan;
  plan.n = n;
  plan.p = p;
  plan.seed = seed;
  for (const auto& [writer, patches] : writer_patches) {
    if (static_cast<int>(patches.size()) < n)
      throw data_error("writer " + std::to_string(writer) + " has only " +
                       std::to_string(patches.size()) + " patches, need at least " +
                       std::to_string(n));
    const int m = static_cast<int>(patches.size()) / n;
    std::vector<std::vector<std::vector<int>>> iterations;
    iterations.reserve(static_cast<std::size_t>(p));
    for (int it = 0; it < p; ++it) {
      std::vector<int> perm = patches;
      std::mt19937_64 rng =
          make_rng(mix_seed(seed, static_cast<std::uint64_t>(writer), static_cast<std::uint64_t>(it)));
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<std::vector<int>> tuples;
      tuples.reserve(static_cast<std::size_t>(m));
      for (int t = 0; t < m; ++t)
        tuples.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(t) * n,
                            perm.begin() + static_cast<std::ptrdiff_t>(t + 1) * n);
      iterations.push_back(std::move(tuples));
    }
    plan.assignments.emplace(writer, std::move(iterations));
  }
  return plan;
}

std::vector<TupleBatch> iteration_batches(const EpochPlan& plan, int iteration) {
  if (iteration < 0 || iteration >= plan.p)
    throw parameter_error("iteration " + std::to_string(iteration) + " out of range [0," +
                          std::to_string(plan.p) + ")");
  std::vector<TupleBatch> batches;
  for (const auto& [writer, iterations] : plan.assignments)
    for (const std::vector<int>& tuple : iterations[static_cast<std::size_t>(iteration)])
      batches.push_back(TupleBatch{writer, tuple});
  std::mt19937_64 rng = make_rng(mix_seed(plan.seed, 0x62617463ULL,
                                          static_cast<std::uint64_t>(iteration)));
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

}  // namespace scriptor

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geom.hpp"
#include "ingest.hpp"

namespace stpp::forest {

struct TrainingTable {
  std::vector<std::string> names;        // m explanatory column names
  std::vector<std::vector<double>> x;    // column-major, x[j][i]
  std::vector<double> y;

  size_t n() const { return y.size(); }
  size_t m() const { return x.size(); }
  void validate() const;
};

struct Tree {
  // Node arrays; leaves have left == -1.
  std::vector<int> left, right;
  std::vector<int> split_var;
  std::vector<double> split_value;
  std::vector<double> leaf_value;
  std::vector<uint32_t> bag_count;  // per-row multiplicity in the bootstrap bag
  std::vector<uint32_t> oob;        // out-of-bag row indices, ascending

  // Prediction with a pluggable value source, so permuted columns need no copy.
  double predict(const std::function<double(int var, size_t row)>& value, size_t row) const;
};

struct ForestConfig {
  int n_trees = 500;
  int mtry = 0;          // 0 = max(1, round(m/3))
  int min_node_size = 5;
  uint64_t seed = 0;
};

struct Forest {
  std::vector<Tree> trees;
  ForestConfig config;
  size_t n_rows = 0, n_vars = 0;
};

int default_mtry(size_t m);

// CART regression forest: bootstrap bags of size n, mtry uniformly sampled
// split candidates per node, residual-sum-of-squares splits at midpoints of
// consecutive distinct values, ties toward the smaller threshold. Splitting
// stops below min_node_size or at zero variance.
Forest fit_forest(const TrainingTable& table, const ForestConfig& config);

// Out-of-bag predictions (NaN for rows never out of bag) and R².
std::vector<double> oob_predictions(const Forest& forest, const TrainingTable& table);
double oob_r2(const Forest& forest, const TrainingTable& table);

enum class ImportanceMode { kTraditional, kConditional };

struct ImportanceScores {
  std::vector<std::string> names;
  std::vector<double> score;  // mean increase of squared prediction error
  ImportanceMode mode = ImportanceMode::kTraditional;
};

// Permutes each variable over a tree's out-of-bag rows and reports the mean
// increase in squared prediction error across trees. The conditional mode
// permutes within blocks of the grid formed by the tree's own split points on
// the remaining variables; with no conditioning splits the two modes use the
// same permutation stream and agree exactly.
ImportanceScores importance(const Forest& forest, const TrainingTable& table,
                            ImportanceMode mode, uint64_t seed);

// Permutation hook for tests: maps (positions of a block) in place.
using BlockPermuter = std::function<void(std::vector<size_t>& block_positions)>;
ImportanceScores importance_with_permuter(const Forest& forest, const TrainingTable& table,
                                          ImportanceMode mode, uint64_t seed,
                                          const BlockPermuter* permuter);

std::string importance_to_csv(const ImportanceScores& scores);

// One row per box: response = event count, covariates from the rasters
// (masked-in cells only); boundary boxes optionally excluded.
TrainingTable build_spatial_table(const ingest::EventPattern& pattern,
                                  const std::vector<std::pair<std::string, geom::RasterField>>&
                                      covariates,
                                  bool exclude_boundary);

// One row per day: response = daily count, the five weather covariates.
TrainingTable build_temporal_table(const ingest::EventPattern& pattern,
                                   const ingest::TemporalCovariates& cov);

}  // namespace stpp::forest

#include "forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace stpp::forest {

void TrainingTable::validate() const {
  if (n() < 2) throw InputError("training table: need at least 2 rows");
  if (m() < 1) throw InputError("training table: need at least 1 variable");
  if (names.size() != m()) throw InputError("training table: name count mismatch");
  for (const auto& col : x)
    if (col.size() != n()) throw InputError("training table: ragged columns");
  for (const auto& col : x)
    for (double v : col)
      if (!std::isfinite(v)) throw InputError("training table: missing/non-finite value");
  for (double v : y)
    if (!std::isfinite(v)) throw InputError("training table: non-finite response");
}

double Tree::predict(const std::function<double(int, size_t)>& value, size_t row) const {
  int node = 0;
  while (left[node] >= 0)
    node = value(split_var[node], row) <= split_value[node] ? left[node] : right[node];
  return leaf_value[node];
}

int default_mtry(size_t m) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(m) / 3.0)));
}

namespace {

struct TreeBuilder {
  const TrainingTable& table;
  Tree& tree;
  int mtry;
  int min_node_size;
  Rng rng;
  std::vector<uint32_t> rows;  // in-bag row indices, partitioned per node
  std::vector<int> var_pool;

  void build() {
    const size_t n = table.n();
    rows.clear();
    tree.bag_count.assign(n, 0);
    for (size_t i = 0; i < n; ++i) {
      uint32_t pick = static_cast<uint32_t>(rng.below(n));
      ++tree.bag_count[pick];
    }
    for (size_t i = 0; i < n; ++i)
      for (uint32_t r = 0; r < tree.bag_count[i]; ++r) rows.push_back(static_cast<uint32_t>(i));
    for (size_t i = 0; i < n; ++i)
      if (tree.bag_count[i] == 0) tree.oob.push_back(static_cast<uint32_t>(i));
    var_pool.resize(table.m());
    std::iota(var_pool.begin(), var_pool.end(), 0);
    grow(0, rows.size());
  }

  int add_node() {
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.split_var.push_back(-1);
    tree.split_value.push_back(0.0);
    tree.leaf_value.push_back(0.0);
    return static_cast<int>(tree.left.size()) - 1;
  }

  // Grows the subtree over rows[begin, end); returns its node id.
  int grow(size_t begin, size_t end) {
    int node = add_node();
    const size_t size = end - begin;
    double sum = 0.0;
    for (size_t i = begin; i < end; ++i) sum += table.y[rows[i]];
    const double mean = sum / size;
    tree.leaf_value[node] = mean;

    if (size < static_cast<size_t>(min_node_size)) return node;
    bool pure = true;
    for (size_t i = begin; i < end && pure; ++i)
      if (table.y[rows[i]] != table.y[rows[begin]]) pure = false;
    if (pure) return node;

    // Sample mtry candidate variables; evaluate them in ascending index order
    // so equal-RSS ties resolve deterministically.
    for (int d = 0; d < mtry; ++d) {
      size_t j = static_cast<size_t>(rng.below(var_pool.size() - d));
      std::swap(var_pool[d], var_pool[d + j]);
    }
    std::sort(var_pool.begin(), var_pool.begin() + mtry);

    int best_var = -1;
    double best_value = 0.0;
    double best_rss = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> xy(size);
    for (int d = 0; d < mtry; ++d) {
      const int var = var_pool[d];
      const auto& col = table.x[var];
      for (size_t i = 0; i < size; ++i) {
        uint32_t row = rows[begin + i];
        xy[i] = {col[row], table.y[row]};
      }
      std::sort(xy.begin(), xy.end());
      double sum_left = 0.0, sumsq_left = 0.0;
      double sum_all = 0.0, sumsq_all = 0.0;
      for (const auto& p : xy) {
        sum_all += p.second;
        sumsq_all += p.second * p.second;
      }
      for (size_t i = 0; i + 1 < size; ++i) {
        sum_left += xy[i].second;
        sumsq_left += xy[i].second * xy[i].second;
        if (xy[i].first == xy[i + 1].first) continue;  // no cut between equal values
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(size - i - 1);
        double rss = (sumsq_left - sum_left * sum_left / nl) +
                     ((sumsq_all - sumsq_left) -
                      (sum_all - sum_left) * (sum_all - sum_left) / nr);
        if (best_var < 0 || rss < best_rss - 1e-12 * (1.0 + std::fabs(best_rss))) {
          best_rss = rss;
          best_var = var;
          best_value = 0.5 * (xy[i].first + xy[i + 1].first);
        }
      }
    }
    if (best_var < 0) return node;  // all candidates constant on this node

    const auto& col = table.x[best_var];
    auto mid = std::partition(rows.begin() + begin, rows.begin() + end,
                              [&](uint32_t r) { return col[r] <= best_value; });
    size_t split_at = static_cast<size_t>(mid - rows.begin());
    if (split_at == begin || split_at == end) return node;  // degenerate partition

    tree.split_var[node] = best_var;
    tree.split_value[node] = best_value;
    int l = grow(begin, split_at);
    int r = grow(split_at, end);
    tree.left[node] = l;
    tree.right[node] = r;
    return node;
  }
};

}  // namespace

Forest fit_forest(const TrainingTable& table, const ForestConfig& config) {
  table.validate();
  Forest forest;
  forest.config = config;
  if (forest.config.mtry == 0) forest.config.mtry = default_mtry(table.m());
  if (forest.config.mtry < 1 || forest.config.mtry > static_cast<int>(table.m()))
    throw InputError("forest: mtry must be in 1..m");
  if (forest.config.n_trees < 1) throw InputError("forest: need at least one tree");
  forest.n_rows = table.n();
  forest.n_vars = table.m();
  forest.trees.resize(config.n_trees);
  Rng master(config.seed);
  parallel_for(forest.trees.size(), [&](size_t t) {
    TreeBuilder builder{table, forest.trees[t], forest.config.mtry, forest.config.min_node_size,
                        master.stream(1, t), {}, {}};
    builder.build();
  });
  return forest;
}

std::vector<double> oob_predictions(const Forest& forest, const TrainingTable& table) {
  std::vector<double> sum(table.n(), 0.0);
  std::vector<int> count(table.n(), 0);
  auto plain = [&](int var, size_t row) { return table.x[var][row]; };
  for (const auto& tree : forest.trees)
    for (uint32_t row : tree.oob) {
      sum[row] += tree.predict(plain, row);
      ++count[row];
    }
  std::vector<double> out(table.n(), std::numeric_limits<double>::quiet_NaN());
  for (size_t i = 0; i < table.n(); ++i)
    if (count[i]) out[i] = sum[i] / count[i];
  return out;
}

double oob_r2(const Forest& forest, const TrainingTable& table) {
  auto pred = oob_predictions(forest, table);
  double mean = std::accumulate(table.y.begin(), table.y.end(), 0.0) / table.n();
  double ss_res = 0.0, ss_tot = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < table.n(); ++i) {
    if (std::isnan(pred[i])) continue;
    ss_res += (table.y[i] - pred[i]) * (table.y[i] - pred[i]);
    ss_tot += (table.y[i] - mean) * (table.y[i] - mean);
    ++used;
  }
  if (used == 0 || ss_tot == 0.0) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

namespace {

// Positions of the tree's oob rows grouped by the conditioning grid: every
// block shares the interval pattern of the tree's own split points on the
// remaining variables. Blocks are ordered by key, rows within a block keep
// oob order; conditioning on nothing yields one block spanning all of oob.
std::vector<std::vector<size_t>> conditioning_blocks(const Tree& tree,
                                                     const TrainingTable& table,
                                                     int var_permuted,
                                                     ImportanceMode mode) {
  if (mode == ImportanceMode::kTraditional) {
    std::vector<size_t> all(tree.oob.size());
    std::iota(all.begin(), all.end(), 0);
    return {std::move(all)};
  }
  std::vector<std::vector<double>> cuts(table.m());
  for (size_t node = 0; node < tree.split_var.size(); ++node) {
    int v = tree.split_var[node];
    if (v >= 0 && v != var_permuted) cuts[v].push_back(tree.split_value[node]);
  }
  std::vector<int> active;
  for (size_t v = 0; v < cuts.size(); ++v) {
    if (cuts[v].empty()) continue;
    std::sort(cuts[v].begin(), cuts[v].end());
    cuts[v].erase(std::unique(cuts[v].begin(), cuts[v].end()), cuts[v].end());
    active.push_back(static_cast<int>(v));
  }
  if (active.empty()) {
    std::vector<size_t> all(tree.oob.size());
    std::iota(all.begin(), all.end(), 0);
    return {std::move(all)};
  }
  std::map<std::vector<int>, std::vector<size_t>> groups;
  std::vector<int> key(active.size());
  for (size_t pos = 0; pos < tree.oob.size(); ++pos) {
    uint32_t row = tree.oob[pos];
    for (size_t a = 0; a < active.size(); ++a) {
      const auto& cv = cuts[active[a]];
      key[a] = static_cast<int>(std::upper_bound(cv.begin(), cv.end(),
                                                 table.x[active[a]][row]) -
                                cv.begin());
    }
    groups[key].push_back(pos);
  }
  std::vector<std::vector<size_t>> blocks;
  blocks.reserve(groups.size());
  for (auto& kv : groups) blocks.push_back(std::move(kv.second));
  return blocks;
}

}  // namespace

ImportanceScores importance_with_permuter(const Forest& forest, const TrainingTable& table,
                                          ImportanceMode mode, uint64_t seed,
                                          const BlockPermuter* permuter) {
  table.validate();
  const size_t m = table.m();
  ImportanceScores scores;
  scores.names = table.names;
  scores.mode = mode;
  scores.score.assign(m, 0.0);

  std::vector<std::vector<double>> per_tree(forest.trees.size(),
                                            std::vector<double>(m, 0.0));
  Rng master(seed);
  parallel_for(forest.trees.size(), [&](size_t t) {
    const Tree& tree = forest.trees[t];
    const size_t n_oob = tree.oob.size();
    if (n_oob == 0) return;
    auto plain = [&](int var, size_t row) { return table.x[var][row]; };
    std::vector<double> base_pred(n_oob);
    for (size_t pos = 0; pos < n_oob; ++pos)
      base_pred[pos] = tree.predict(plain, tree.oob[pos]);
    double base_err = 0.0;
    for (size_t pos = 0; pos < n_oob; ++pos) {
      double d = table.y[tree.oob[pos]] - base_pred[pos];
      base_err += d * d;
    }
    base_err /= static_cast<double>(n_oob);

    std::vector<double> permuted(n_oob);
    for (size_t j = 0; j < m; ++j) {
      auto blocks = conditioning_blocks(tree, table, static_cast<int>(j), mode);
      // Lay the permuted column over oob positions, block by block.
      for (size_t pos = 0; pos < n_oob; ++pos) permuted[pos] = table.x[j][tree.oob[pos]];
      Rng stream = master.stream(2, t, j);
      for (auto& block : blocks) {
        if (block.size() < 2) continue;  // singleton blocks permute to themselves
        std::vector<size_t> order = block;
        if (permuter)
          (*permuter)(order);
        else
          stream.shuffle(order);
        std::vector<double> vals(block.size());
        for (size_t b = 0; b < block.size(); ++b)
          vals[b] = table.x[j][tree.oob[order[b]]];
        for (size_t b = 0; b < block.size(); ++b) permuted[block[b]] = vals[b];
      }
      double err = 0.0;
      for (size_t pos = 0; pos < n_oob; ++pos) {
        size_t row = tree.oob[pos];
        auto value = [&](int var, size_t rr) -> double {
          return static_cast<size_t>(var) == j ? permuted[pos] : table.x[var][rr];
        };
        double d = table.y[row] - tree.predict(value, row);
        err += d * d;
      }
      err /= static_cast<double>(n_oob);
      per_tree[t][j] = err - base_err;
    }
  });
  for (const auto& tree_scores : per_tree)
    for (size_t j = 0; j < m; ++j) scores.score[j] += tree_scores[j];
  for (size_t j = 0; j < m; ++j) scores.score[j] /= static_cast<double>(forest.trees.size());
  return scores;
}

ImportanceScores importance(const Forest& forest, const TrainingTable& table,
                            ImportanceMode mode, uint64_t seed) {
  return importance_with_permuter(forest, table, mode, seed, nullptr);
}

std::string importance_to_csv(const ImportanceScores& scores) {
  std::vector<size_t> order(scores.score.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores.score[a] > scores.score[b]; });
  std::ostringstream out;
  out << "variable,mode,score\n";
  const char* mode_name =
      scores.mode == ImportanceMode::kTraditional ? "traditional" : "conditional";
  for (size_t i : order)
    out << scores.names[i] << ',' << mode_name << ',' << fmt_g17(scores.score[i]) << '\n';
  return out.str();
}

TrainingTable build_spatial_table(const ingest::EventPattern& pattern,
                                  const std::vector<std::pair<std::string, geom::RasterField>>&
                                      covariates,
                                  bool exclude_boundary) {
  if (covariates.empty()) throw InputError("spatial table: no covariate rasters");
  const auto& grid = *covariates[0].second.grid;
  for (const auto& [name, raster] : covariates)
    if (!raster.grid->same_geometry(grid))
      throw InputError("spatial table: raster '" + name + "' on a different grid");

  std::vector<double> counts(grid.cell_count(), 0.0);
  for (const auto& e : pattern.events) {
    int r, c;
    if (!grid.cell_of(e.x, e.y, &r, &c) || !grid.in(r, c))
      throw InputError("spatial table: event outside the covariate grid");
    counts[grid.idx(r, c)] += 1.0;
  }

  auto boundary = [&](int r, int c) {
    for (int dr = -1; dr <= 1; ++dr)
      for (int dc = -1; dc <= 1; ++dc) {
        int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= grid.nrows || cc < 0 || cc >= grid.ncols) return true;
        if (!grid.in(rr, cc)) return true;
      }
    return false;
  };

  TrainingTable table;
  for (const auto& [name, raster] : covariates) {
    table.names.push_back(name);
    table.x.emplace_back();
  }
  for (int r = 0; r < grid.nrows; ++r)
    for (int c = 0; c < grid.ncols; ++c) {
      if (!grid.in(r, c)) continue;
      if (exclude_boundary && boundary(r, c)) continue;
      size_t i = grid.idx(r, c);
      for (size_t j = 0; j < covariates.size(); ++j)
        table.x[j].push_back(covariates[j].second.values[i]);
      table.y.push_back(counts[i]);
    }
  table.validate();
  return table;
}

TrainingTable build_temporal_table(const ingest::EventPattern& pattern,
                                   const ingest::TemporalCovariates& cov) {
  cov.validate();
  if (static_cast<double>(cov.size()) < pattern.t_len)
    throw InputError("temporal table: weather shorter than the event period");
  std::vector<double> counts(cov.size(), 0.0);
  for (const auto& e : pattern.events) {
    long day = static_cast<long>(std::floor(e.t));
    if (day < 0 || day >= static_cast<long>(cov.size()))
      throw InputError("temporal table: event day outside the weather range");
    counts[day] += 1.0;
  }
  TrainingTable table;
  table.names = {"wind_speed", "temperature", "wind_chill", "sunshine", "visibility"};
  table.x = {cov.wind_speed, cov.temperature, cov.wind_chill, cov.sunshine, cov.visibility};
  table.y = std::move(counts);
  table.validate();
  return table;
}

}  // namespace stpp::forest

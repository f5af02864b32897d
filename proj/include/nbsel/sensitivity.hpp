#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "nbsel/parallel.hpp"
#include "nbsel/rng.hpp"
#include "nbsel/selector.hpp"
#include "nbsel/truncated_normal.hpp"

namespace nbsel {

struct PerturbationConfig {
  double sigma = 0.1;        // stddev of the truncated normal noise
  std::uint64_t runs = 1000;
  std::size_t d = 10;        // features selected per run; also the top rank
  std::uint64_t seed = 0;
};

inline void validate(const PerturbationConfig& config) {
  if (!(config.sigma >= 0.0)) throw ValidationError("sigma must be >= 0");
  if (config.runs < 1) throw ValidationError("runs must be >= 1");
  if (config.d < 1) throw ValidationError("d must be >= 1");
}

// Accumulated selection ranks over repeated perturbed runs. A feature picked
// first in a run earns rank d, picked last rank 1, not picked rank 0; ranks
// are summed over runs, so each run contributes exactly d(d+1)/2 in total.
struct RankTable {
  std::vector<std::string> feature_names;
  std::vector<std::uint64_t> total_rank;
  std::vector<std::uint64_t> selection_count;  // runs in which the feature was picked
  std::uint64_t runs = 0;
  std::size_t rank_ceiling = 0;  // d
};

// Every probability replaced by an independent draw from a normal centred on
// it with the given stddev, truncated to [0,1]; sigma 0 returns the table
// unchanged. Draw order is row by row, class 1 then class 2.
inline FeatureProbabilityTable perturb_table(const FeatureProbabilityTable& table,
                                             double sigma, std::mt19937_64& stream) {
  validate(table);
  if (!(sigma >= 0.0)) throw ValidationError("sigma must be >= 0");
  if (sigma == 0.0) return table;
  FeatureProbabilityTable out = table;
  for (Feature& f : out.features) {
    f.p1 = truncated_normal(stream, f.p1, sigma);
    f.p2 = truncated_normal(stream, f.p2, sigma);
  }
  return out;
}

struct SensitivityOptions {
  ListOptions list;
  unsigned threads = 0;
};

// The robustness protocol: R seeded runs, each perturbing the table and
// re-running forward selection for d features, ranks accumulated per
// feature. Runs execute in parallel; each run derives its own stream from
// (seed, run index), and the integer merge is order-independent, so the
// result does not depend on the thread count.
inline RankTable run_sensitivity(const FeatureProbabilityTable& table,
                                 const ClassPriors& priors, const PerturbationConfig& config,
                                 const SensitivityOptions& options = {}) {
  validate(table);
  validate(priors);
  validate(config);
  if (config.d > table.size()) {
    throw ValidationError("d exceeds the table's feature count");
  }
  if (config.d > static_cast<std::size_t>(options.list.max_depth)) {
    throw CapacityError("d " + std::to_string(config.d) +
                        " exceeds the width cap of depth " +
                        std::to_string(options.list.max_depth));
  }

  const std::size_t n = table.size();
  const unsigned threads = resolve_threads(options.threads);
  std::vector<std::vector<std::uint64_t>> rank_acc(
      threads, std::vector<std::uint64_t>(n, 0));
  std::vector<std::vector<std::uint64_t>> count_acc(
      threads, std::vector<std::uint64_t>(n, 0));

  StoppingRule stop;
  stop.target_count = config.d;
  SelectOptions select_options;
  select_options.list = options.list;
  select_options.threads = 1;  // parallelism lives at the run level

  parallel_for(static_cast<std::size_t>(config.runs), threads,
               [&](std::size_t begin, std::size_t end, unsigned worker) {
                 for (std::size_t run = begin; run < end; ++run) {
                   std::mt19937_64 stream = derive_stream(config.seed, run);
                   const FeatureProbabilityTable perturbed =
                       perturb_table(table, config.sigma, stream);
                   const SelectionTrace trace =
                       sfs_select(perturbed, priors, stop, select_options);
                   for (std::size_t pos = 0; pos < trace.steps.size(); ++pos) {
                     const std::size_t j = trace.steps[pos].feature_index;
                     rank_acc[worker][j] += config.d - pos;
                     count_acc[worker][j] += 1;
                   }
                 }
               });

  RankTable result;
  result.feature_names.reserve(n);
  for (const Feature& f : table.features) result.feature_names.push_back(f.name);
  result.total_rank.assign(n, 0);
  result.selection_count.assign(n, 0);
  result.runs = config.runs;
  result.rank_ceiling = config.d;
  for (unsigned w = 0; w < threads; ++w) {
    for (std::size_t j = 0; j < n; ++j) {
      result.total_rank[j] += rank_acc[w][j];
      result.selection_count[j] += count_acc[w][j];
    }
  }
  return result;
}

// Feature indices ordered by total rank, highest first, ties by lower index.
inline std::vector<std::size_t> rank_order(const RankTable& table) {
  std::vector<std::size_t> order(table.total_rank.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (table.total_rank[x] != table.total_rank[y]) {
      return table.total_rank[x] > table.total_rank[y];
    }
    return x < y;
  });
  return order;
}

inline std::vector<std::size_t> top_features(const RankTable& table, std::size_t k) {
  std::vector<std::size_t> order = rank_order(table);
  order.resize(std::min(k, order.size()));
  return order;
}

// How the top-k lists of several rank tables relate. The first table is the
// reference (typically the unperturbed run): entered/dropped record which
// features a perturbed list pulls in or loses relative to it; both kinds of
// mismatch are informative, not just the matches.
struct OverlapReport {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> top_lists;              // per table, rank order
  std::vector<std::vector<std::size_t>> pairwise_intersection;  // sizes, [i][j]
  std::vector<std::size_t> union_of_top;                        // sorted feature indices
  std::vector<std::vector<std::size_t>> entered_vs_first;       // per table, sorted
  std::vector<std::vector<std::size_t>> dropped_vs_first;       // per table, sorted
};

inline OverlapReport compare_rank_tables(const std::vector<RankTable>& tables,
                                         std::size_t k) {
  if (tables.empty()) throw ValidationError("no rank tables to compare");
  for (const RankTable& t : tables) {
    if (t.feature_names != tables.front().feature_names) {
      throw ValidationError("rank tables cover different feature sets");
    }
  }
  if (k == 0 || k > tables.front().feature_names.size()) {
    throw ValidationError("top-k length must be in [1, feature count]");
  }

  OverlapReport report;
  report.k = k;
  std::vector<std::vector<std::size_t>> sorted_tops;
  for (const RankTable& t : tables) {
    report.top_lists.push_back(top_features(t, k));
    std::vector<std::size_t> sorted = report.top_lists.back();
    std::sort(sorted.begin(), sorted.end());
    sorted_tops.push_back(std::move(sorted));
  }

  const std::size_t m = tables.size();
  report.pairwise_intersection.assign(m, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<std::size_t> common;
      std::set_intersection(sorted_tops[i].begin(), sorted_tops[i].end(),
                            sorted_tops[j].begin(), sorted_tops[j].end(),
                            std::back_inserter(common));
      report.pairwise_intersection[i][j] = common.size();
    }
  }

  std::vector<std::size_t> all;
  for (const auto& top : sorted_tops) all.insert(all.end(), top.begin(), top.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  report.union_of_top = std::move(all);

  report.entered_vs_first.resize(m);
  report.dropped_vs_first.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::set_difference(sorted_tops[i].begin(), sorted_tops[i].end(),
                        sorted_tops[0].begin(), sorted_tops[0].end(),
                        std::back_inserter(report.entered_vs_first[i]));
    std::set_difference(sorted_tops[0].begin(), sorted_tops[0].end(),
                        sorted_tops[i].begin(), sorted_tops[i].end(),
                        std::back_inserter(report.dropped_vs_first[i]));
  }
  return report;
}

}  // namespace nbsel

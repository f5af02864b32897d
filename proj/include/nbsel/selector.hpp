#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "nbsel/cell_list.hpp"
#include "nbsel/parallel.hpp"
#include "nbsel/region.hpp"

namespace nbsel {

// Reductions at or below this are treated as "no improvement"; true
// reductions are never negative (adding a feature cannot raise the exact
// error), so anything inside this band is floating-point noise.
inline constexpr double kNoReductionTol = 1e-12;

enum class StopReason {
  reached_d,
  reached_error_target,
  exhausted_features,
  reduction_below_min,
};

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::reached_d: return "reached_d";
    case StopReason::reached_error_target: return "reached_error_target";
    case StopReason::exhausted_features: return "exhausted_features";
    case StopReason::reduction_below_min: return "reduction_below_min";
  }
  return "unknown";
}

struct SelectionStep {
  std::size_t feature_index = 0;
  std::string feature_name;
  ErrorBreakdown cumulative;  // error after this step, with its fp/fn split
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  double reduction = 0.0;  // previous error minus cumulative.error
  bool forced = false;     // taken while no remaining candidate reduced the error
  // Certified slack from threshold pruning: the true error lies within
  // [cumulative.error, cumulative.error + pruned_error_bound]. 0 when off.
  double pruned_error_bound = 0.0;
};

struct SelectionTrace {
  ClassPriors priors;
  double prior_error_value = 0.0;  // error before the first step
  std::vector<SelectionStep> steps;
  StopReason stop_reason = StopReason::exhausted_features;

  std::vector<std::size_t> selected_indices() const {
    std::vector<std::size_t> out;
    out.reserve(steps.size());
    for (const SelectionStep& s : steps) out.push_back(s.feature_index);
    return out;
  }
};

// At least one of target_count / target_error must be set. min_reduction is
// advisory: reductions are not monotone along the selection, so stopping on
// a small drop can forfeit a large one later; it is never applied to forced
// steps.
struct StoppingRule {
  std::optional<std::size_t> target_count;
  std::optional<double> target_error;
  std::optional<double> min_reduction;
};

inline void validate(const StoppingRule& stop) {
  if (!stop.target_count && !stop.target_error) {
    throw ValidationError("stopping rule needs a target feature count or a target error");
  }
  if (stop.target_count && *stop.target_count == 0) {
    throw ValidationError("target feature count must be at least 1");
  }
  if (stop.target_error && !(*stop.target_error >= 0.0)) {
    throw ValidationError("target error must be >= 0");
  }
  if (stop.min_reduction && !(*stop.min_reduction >= 0.0)) {
    throw ValidationError("min reduction must be >= 0");
  }
}

struct SelectOptions {
  ListOptions list;
  unsigned threads = 0;  // 0 = machine parallelism
};

enum class RankCriterion { single_feature_error, absolute_difference };

struct RankedFeature {
  std::size_t index = 0;
  double score = 0.0;
};

// Features ordered best-first by the chosen criterion: ascending single-
// feature error, or descending |p1 - p2|. Ties keep the lower table index.
inline std::vector<RankedFeature> rank_individual(const FeatureProbabilityTable& table,
                                                  const ClassPriors& priors,
                                                  RankCriterion criterion,
                                                  ListOptions options = {}) {
  validate(table);
  validate(priors);
  std::vector<RankedFeature> ranked(table.size());
  for (std::size_t j = 0; j < table.size(); ++j) {
    ranked[j].index = j;
    if (criterion == RankCriterion::single_feature_error) {
      ranked[j].score = error_of_subset(table, priors, {j}, options).error;
    } else {
      ranked[j].score = std::abs(table[j].p1 - table[j].p2);
    }
  }
  const bool ascending = criterion == RankCriterion::single_feature_error;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [ascending](const RankedFeature& x, const RankedFeature& y) {
                     if (x.score != y.score) {
                       return ascending ? x.score < y.score : x.score > y.score;
                     }
                     return x.index < y.index;
                   });
  return ranked;
}

struct CandidateFeature {
  std::size_t index = 0;
  double c = 0.0;  // P(x=1 | class 1)
  double d = 0.0;  // P(x=1 | class 2)
};

// Among candidates none of which currently reduces the error, pick the one
// whose (c, d) point lies nearest the no-improvement region boundary; such
// points are the likeliest to escape the region as the space grows. Ties
// keep the lower index.
inline std::size_t select_among_nonimproving(const std::vector<CandidateFeature>& candidates,
                                             const NoImprovementRegion& region) {
  if (candidates.empty()) {
    throw ValidationError("no candidates to select among");
  }
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double dist = boundary_distance(region, candidates[i].c, candidates[i].d);
    if (dist < best_distance) {
      best_distance = dist;
      best = i;
    }
  }
  return candidates[best].index;
}

// Greedy forward selection with the exact classifier error as criterion.
// The current feature space is kept as a cell list; each remaining candidate
// is scored by one expansion of that list. When no candidate reduces the
// error and the stopping rule is not yet met, a step is still taken (flagged
// forced) using boundary proximity, because a feature useless now can enable
// reductions later.
inline SelectionTrace sfs_select(const FeatureProbabilityTable& table,
                                 const ClassPriors& priors, const StoppingRule& stop,
                                 const SelectOptions& options = {}) {
  validate(table);
  validate(priors);
  validate(stop);
  const std::size_t n = table.size();
  if (stop.target_count && *stop.target_count > n) {
    throw ValidationError("target feature count exceeds the table's feature count");
  }
  if (stop.target_count &&
      *stop.target_count > static_cast<std::size_t>(options.list.max_depth)) {
    throw CapacityError("target feature count " + std::to_string(*stop.target_count) +
                        " exceeds the width cap of depth " +
                        std::to_string(options.list.max_depth));
  }

  SelectionTrace trace;
  trace.priors = priors;
  trace.prior_error_value = prior_error(priors).error;
  trace.stop_reason = StopReason::exhausted_features;

  CellList current = make_cell_list(priors, options.list);
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  double previous_error = trace.prior_error_value;

  while (true) {
    if (stop.target_error && previous_error <= *stop.target_error) {
      trace.stop_reason = StopReason::reached_error_target;
      break;
    }
    if (stop.target_count && trace.steps.size() == *stop.target_count) {
      trace.stop_reason = StopReason::reached_d;
      break;
    }
    if (remaining.empty()) {
      trace.stop_reason = StopReason::exhausted_features;
      break;
    }

    std::vector<ErrorBreakdown> scores(remaining.size());
    parallel_for(remaining.size(), options.threads,
                 [&](std::size_t begin, std::size_t end, unsigned) {
                   for (std::size_t i = begin; i < end; ++i) {
                     const Feature& f = table[remaining[i]];
                     scores[i] = evaluate_error(expand_list(current, f.p1, f.p2));
                   }
                 });

    std::size_t best_pos = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      if (scores[i].error < scores[best_pos].error) best_pos = i;
    }
    const double best_reduction = previous_error - scores[best_pos].error;
    const bool forced = best_reduction <= kNoReductionTol;

    std::size_t chosen_pos = best_pos;
    if (forced) {
      const std::optional<NoImprovementRegion> region = region_parallelogram(current);
      if (region) {
        std::vector<CandidateFeature> candidates(remaining.size());
        for (std::size_t i = 0; i < remaining.size(); ++i) {
          candidates[i] = CandidateFeature{remaining[i], table[remaining[i]].p1,
                                           table[remaining[i]].p2};
        }
        const std::size_t chosen_index = select_among_nonimproving(candidates, *region);
        chosen_pos = static_cast<std::size_t>(
            std::find(remaining.begin(), remaining.end(), chosen_index) - remaining.begin());
      } else {
        // Error is already zero; nothing distinguishes the candidates.
        chosen_pos = 0;
      }
    } else if (stop.min_reduction && best_reduction < *stop.min_reduction) {
      trace.stop_reason = StopReason::reduction_below_min;
      break;
    }

    const std::size_t chosen = remaining[chosen_pos];
    current = expand_list(current, table[chosen].p1, table[chosen].p2);
    const ErrorBreakdown after = scores[chosen_pos];
    const DiagnosticRates rates = sensitivity_specificity(after, priors);

    SelectionStep step;
    step.feature_index = chosen;
    step.feature_name = table[chosen].name;
    step.cumulative = after;
    step.sensitivity = rates.sensitivity;
    step.specificity = rates.specificity;
    step.reduction = previous_error - after.error;
    step.forced = forced;
    step.pruned_error_bound = current.pruned_error_bound;
    trace.steps.push_back(std::move(step));

    previous_error = after.error;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen_pos));
  }
  return trace;
}

struct ExhaustiveOptions {
  // Cap on the number of subsets evaluated; the default admits everything up
  // to choose(20, 6).
  std::uint64_t max_evaluations = 38760;
  ListOptions list;
};

struct ExhaustiveResult {
  std::vector<std::size_t> subset;
  ErrorBreakdown error;
  std::uint64_t evaluations = 0;
};

namespace detail {

inline std::uint64_t binomial_saturating(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t numerator = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / numerator) {
      return std::numeric_limits<std::uint64_t>::max();  // saturate
    }
    result = result * numerator / i;
  }
  return result;
}

}  // namespace detail

// The only route that guarantees the optimal subset: evaluate every size-d
// subset. Viable at desk scale only, hence the evaluation budget. Ties keep
// the lexicographically smallest index set.
inline ExhaustiveResult exhaustive_best_subset(const FeatureProbabilityTable& table,
                                               const ClassPriors& priors, std::size_t d,
                                               const ExhaustiveOptions& options = {}) {
  validate(table);
  validate(priors);
  const std::size_t n = table.size();
  if (d > n) {
    throw ValidationError("subset size exceeds the table's feature count");
  }
  if (d > static_cast<std::size_t>(options.list.max_depth)) {
    throw CapacityError("subset size " + std::to_string(d) +
                        " exceeds the width cap of depth " +
                        std::to_string(options.list.max_depth));
  }
  const std::uint64_t required = detail::binomial_saturating(n, d);
  if (required > options.max_evaluations) {
    throw CapacityError("exhaustive search needs " + std::to_string(required) +
                        " subset evaluations, over the budget of " +
                        std::to_string(options.max_evaluations));
  }

  ExhaustiveResult result;
  result.error.error = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> subset(d);
  std::iota(subset.begin(), subset.end(), 0);
  while (true) {
    const ErrorBreakdown e = error_of_subset(table, priors, subset, options.list);
    ++result.evaluations;
    if (e.error < result.error.error) {
      result.error = e;
      result.subset = subset;
    }
    if (d == 0) break;
    // next combination in lexicographic order
    std::size_t i = d;
    while (i > 0 && subset[i - 1] == n - d + (i - 1)) --i;
    if (i == 0) break;
    ++subset[i - 1];
    for (std::size_t j = i; j < d; ++j) subset[j] = subset[j - 1] + 1;
  }
  return result;
}

}  // namespace nbsel

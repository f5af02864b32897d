#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nbsel/errors.hpp"
#include "nbsel/prob_table.hpp"

namespace nbsel {

// Joint mass of one element x of the current feature space:
//   a = P(class 1) * P(x | class 1),  b = P(class 2) * P(x | class 2).
struct Cell {
  double a = 0.0;
  double b = 0.0;
};

struct ListOptions {
  // Hard cap: a list never grows beyond 2^max_depth cells. 2^25 cells of two
  // doubles is about half a GiB; exceeding the cap is an error, not a silent
  // approximation.
  int max_depth = 25;
  // Cells with 0 < min(a,b) <= prune_threshold are dropped after each
  // expansion; the removed min(a,b) accumulates in pruned_error_bound so the
  // reported error stays a certified interval. 0 disables thresholding.
  double prune_threshold = 0.0;
  // Keep the bit pattern of assigned feature values per cell (bit k = value
  // of the k-th folded feature). Off by default; doubles the memory.
  bool track_patterns = false;
};

// The exact joint distribution over the space spanned by the folded-in
// features, one cell per binary pattern. Cells whose min(a,b) is exactly
// zero are dropped as they arise: expansion only ever multiplies a and b by
// values in [0,1], so such a cell and all its descendants contribute no
// error. Dropped class mass is accounted in pruned_a / pruned_b, keeping the
// normalization sum(a) + pruned_a = P(class 1) intact (same for b).
struct CellList {
  std::vector<Cell> cells;
  std::vector<std::uint64_t> patterns;  // parallel to cells when tracking
  int depth = 0;
  double pruned_a = 0.0;
  double pruned_b = 0.0;
  double pruned_error_bound = 0.0;  // sum of min(a,b) over threshold-pruned cells
  ListOptions options;

  double pruned_mass() const { return pruned_a + pruned_b; }
};

// Total error of the classifier on the current feature space together with
// its split into the two mistake types: false positives
// P(labelled class 1 while truth is class 2) and false negatives
// P(labelled class 2 while truth is class 1). Ties label class 1, so a tied
// cell's mass lands in false_positive.
struct ErrorBreakdown {
  double error = 0.0;
  double false_positive = 0.0;
  double false_negative = 0.0;
};

namespace detail {

// Drop cells that can no longer matter. min(a,b) == 0 removal is always
// exact; 0 < min(a,b) <= threshold removal is accounted in the error bound.
inline void prune_cells(CellList& list, double threshold) {
  const bool track = list.options.track_patterns;
  std::size_t out = 0;
  for (std::size_t i = 0; i < list.cells.size(); ++i) {
    const Cell cell = list.cells[i];
    const double m = std::min(cell.a, cell.b);
    if (m == 0.0) {
      list.pruned_a += cell.a;
      list.pruned_b += cell.b;
      continue;
    }
    if (m <= threshold) {
      list.pruned_a += cell.a;
      list.pruned_b += cell.b;
      list.pruned_error_bound += m;
      continue;
    }
    list.cells[out] = cell;
    if (track) list.patterns[out] = list.patterns[i];
    ++out;
  }
  list.cells.resize(out);
  if (track) list.patterns.resize(out);
}

}  // namespace detail

inline CellList make_cell_list(const ClassPriors& priors, ListOptions options = {}) {
  validate(priors);
  if (options.max_depth < 0 || options.max_depth > 62) {
    throw ValidationError("max_depth must be in [0, 62]");
  }
  if (options.prune_threshold < 0.0) {
    throw ValidationError("prune threshold must be >= 0");
  }
  CellList list;
  list.options = options;
  list.cells.push_back(Cell{priors.p1, priors.p2});
  if (options.track_patterns) list.patterns.push_back(0);
  detail::prune_cells(list, options.prune_threshold);
  return list;
}

// Fold one more feature with present-probabilities c = P(x=1 | class 1) and
// d = P(x=1 | class 2) into the space. Every cell (a,b) is replaced by the
// two children (a*c, b*d) and (a*(1-c), b*(1-d)); the present-children block
// comes first, then the absent-children block.
inline CellList expand_list(const CellList& list, double c, double d) {
  if (!(c >= 0.0) || !(c <= 1.0) || !(d >= 0.0) || !(d <= 1.0)) {
    throw ValidationError("feature probabilities must lie in [0, 1]");
  }
  if (list.depth >= list.options.max_depth) {
    throw CapacityError("cell list width cap reached: depth " +
                        std::to_string(list.options.max_depth) + " (2^" +
                        std::to_string(list.options.max_depth) +
                        " cells); raise max_depth to go further");
  }
  const std::size_t n = list.cells.size();
  const bool track = list.options.track_patterns;

  CellList out;
  out.options = list.options;
  out.depth = list.depth + 1;
  out.pruned_a = list.pruned_a;
  out.pruned_b = list.pruned_b;
  out.pruned_error_bound = list.pruned_error_bound;
  out.cells.resize(2 * n);
  if (track) out.patterns.resize(2 * n);

  const std::uint64_t bit = std::uint64_t{1} << list.depth;
  for (std::size_t i = 0; i < n; ++i) {
    const Cell cell = list.cells[i];
    out.cells[i] = Cell{cell.a * c, cell.b * d};
    out.cells[n + i] = Cell{cell.a * (1.0 - c), cell.b * (1.0 - d)};
    if (track) {
      out.patterns[i] = list.patterns[i] | bit;
      out.patterns[n + i] = list.patterns[i];
    }
  }
  detail::prune_cells(out, out.options.prune_threshold);
  return out;
}

// Point estimate of the classifier error: sum of min(a,b) over the retained
// cells. Threshold-pruned mass is not included; the certified interval is
// [error, error + pruned_error_bound].
inline ErrorBreakdown evaluate_error(const CellList& list) {
  double fp = 0.0;
  double fn = 0.0;
  for (const Cell& cell : list.cells) {
    if (cell.b <= cell.a) {
      fp += cell.b;  // labelled class 1 (ties included), truth class 2
    } else {
      fn += cell.a;  // labelled class 2, truth class 1
    }
  }
  ErrorBreakdown e;
  e.false_positive = fp;
  e.false_negative = fn;
  e.error = fp + fn;
  return e;
}

// One-off prune at the given threshold; the list's own auto threshold is not
// consulted. Zero-min cells are removed exactly as always.
inline CellList prune_list(const CellList& list, double threshold) {
  if (threshold < 0.0) throw ValidationError("prune threshold must be >= 0");
  CellList out = list;
  detail::prune_cells(out, threshold);
  return out;
}

// Error of the classifier that only ever sees the priors: it always answers
// with the larger prior, ties answering class 1.
inline ErrorBreakdown prior_error(const ClassPriors& priors) {
  validate(priors);
  ErrorBreakdown e;
  if (priors.p2 <= priors.p1) {
    e.error = priors.p2;
    e.false_positive = priors.p2;
  } else {
    e.error = priors.p1;
    e.false_negative = priors.p1;
  }
  return e;
}

// Build the cell list for an explicit feature subset, folding the features
// in the given order. Indices must be distinct and in range.
inline CellList list_for_subset(const FeatureProbabilityTable& table,
                                const ClassPriors& priors,
                                const std::vector<std::size_t>& subset,
                                ListOptions options = {}) {
  validate(table);
  std::vector<bool> used(table.size(), false);
  for (std::size_t idx : subset) {
    if (idx >= table.size()) {
      throw ValidationError("feature index " + std::to_string(idx) + " out of range");
    }
    if (used[idx]) {
      throw ValidationError("duplicate feature index in subset: " + std::to_string(idx));
    }
    used[idx] = true;
  }
  if (subset.size() > static_cast<std::size_t>(options.max_depth)) {
    throw CapacityError("subset of " + std::to_string(subset.size()) +
                        " features exceeds the width cap of depth " +
                        std::to_string(options.max_depth));
  }
  CellList list = make_cell_list(priors, options);
  for (std::size_t idx : subset) {
    list = expand_list(list, table[idx].p1, table[idx].p2);
  }
  return list;
}

inline ErrorBreakdown error_of_subset(const FeatureProbabilityTable& table,
                                      const ClassPriors& priors,
                                      const std::vector<std::size_t>& subset,
                                      ListOptions options = {}) {
  return evaluate_error(list_for_subset(table, priors, subset, options));
}

// Class-conditional correct-classification rates of the selected feature
// set. Undefined (absent) for a class whose prior is zero; a zero prior with
// a nonzero error component in that class is inconsistent input.
struct DiagnosticRates {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

inline DiagnosticRates sensitivity_specificity(const ErrorBreakdown& e,
                                               const ClassPriors& priors) {
  validate(priors);
  if (e.false_negative > priors.p1 + 1e-9 || e.false_positive > priors.p2 + 1e-9) {
    throw ValidationError("error components exceed the class priors");
  }
  DiagnosticRates rates;
  if (priors.p1 > 0.0) {
    rates.sensitivity = std::clamp((priors.p1 - e.false_negative) / priors.p1, 0.0, 1.0);
  } else if (e.false_negative > 0.0) {
    throw ValidationError("false negatives reported for a class with zero prior");
  }
  if (priors.p2 > 0.0) {
    rates.specificity = std::clamp((priors.p2 - e.false_positive) / priors.p2, 0.0, 1.0);
  } else if (e.false_positive > 0.0) {
    throw ValidationError("false positives reported for a class with zero prior");
  }
  return rates;
}

// Cell lookup by value pattern; requires pattern tracking. Returns nullptr
// when the pattern's cell was pruned (its masses are then zero or below the
// prune threshold).
inline const Cell* find_cell(const CellList& list, std::uint64_t pattern) {
  if (!list.options.track_patterns) {
    throw ValidationError("pattern lookup requires track_patterns");
  }
  for (std::size_t i = 0; i < list.cells.size(); ++i) {
    if (list.patterns[i] == pattern) return &list.cells[i];
  }
  return nullptr;
}

}  // namespace nbsel

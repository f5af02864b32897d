#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nbsel/rng.hpp"
#include "nbsel/selector.hpp"

namespace nbsel {

// The three classic ways greedy-looking intuitions fail even with exact
// distributions and independent binary features:
//   - the individually best feature need not belong to the best pair;
//   - the two individually best features need not form the best pair;
//   - a later selection step can reduce the error more than an earlier one.
enum class PathologyKind {
  best_not_in_best_pair,
  individually_best_pair_not_best_pair,
  nonmonotone_reduction,
};

inline const char* to_string(PathologyKind k) {
  switch (k) {
    case PathologyKind::best_not_in_best_pair: return "best_not_in_best_pair";
    case PathologyKind::individually_best_pair_not_best_pair:
      return "individually_best_pair_not_best_pair";
    case PathologyKind::nonmonotone_reduction: return "nonmonotone_reduction";
  }
  return "unknown";
}

// Strictness margin for witness inequalities; keeps floating-point ties from
// masquerading as counterexamples.
inline constexpr double kWitnessMargin = 1e-9;

struct PairPathologyCertificate {
  std::vector<double> single_errors;
  std::size_t best_single = 0;
  std::array<std::size_t, 2> best_pair{};
  double best_pair_error = 0.0;
  // kind best_not_in_best_pair: the best error among pairs containing the
  // best single, to exhibit the strict gap
  double best_pair_with_single_error = 0.0;
  // kind individually_best_pair_not_best_pair
  std::array<std::size_t, 2> individually_best_pair{};
  double individually_best_pair_error = 0.0;
};

struct NonmonotoneCertificate {
  SelectionTrace trace;
  std::size_t earlier_step = 0;  // 0-based positions in the trace
  std::size_t later_step = 0;
  double earlier_drop = 0.0;
  double later_drop = 0.0;
};

using PathologyCertificate = std::variant<PairPathologyCertificate, NonmonotoneCertificate>;

struct PathologyInstance {
  FeatureProbabilityTable table;
  ClassPriors priors;
  std::uint64_t candidate_index = 0;  // position in the search stream, seeds first
  PathologyCertificate certificate;
};

struct PathologySearchConfig {
  // > 0: deterministic enumeration of all tables whose probabilities are
  // multiples of grid_step; 0: tables drawn uniformly at random from seed.
  double grid_step = 0.05;
  std::uint64_t budget = 100'000'000;  // generated tables examined at most
  std::uint64_t seed = 0;
  ClassPriors priors{0.5, 0.5};
  // Tables tried before the generated stream; lets a caller put a suspected
  // instance at the front of the search.
  std::vector<FeatureProbabilityTable> seed_tables;
  unsigned threads = 0;
};

// ---------------------------------------------------------------------------
// Certification of a single table. These run the real engine (error_of_subset,
// exhaustive_best_subset, sfs_select) and check every inequality with a
// strict margin; the search below only proposes candidates.

inline std::optional<PairPathologyCertificate> certify_pair_pathology(
    PathologyKind kind, const FeatureProbabilityTable& table, const ClassPriors& priors,
    ListOptions options = {}) {
  const std::size_t n = table.size();
  if (n < 3) return std::nullopt;

  PairPathologyCertificate cert;
  cert.single_errors.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    cert.single_errors[j] = error_of_subset(table, priors, {j}, options).error;
  }

  // unique strict best pair
  ExhaustiveOptions ex;
  ex.list = options;
  ex.max_evaluations = std::max<std::uint64_t>(ex.max_evaluations, n * (n - 1) / 2);
  const ExhaustiveResult best = exhaustive_best_subset(table, priors, 2, ex);
  double runner_up = std::numeric_limits<double>::infinity();
  double best_with_single = std::numeric_limits<double>::infinity();

  std::size_t best_single = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (cert.single_errors[j] < cert.single_errors[best_single]) best_single = j;
  }
  cert.best_single = best_single;

  for (std::size_t j = 0; j + 1 < n; ++j) {
    for (std::size_t k = j + 1; k < n; ++k) {
      const double e = error_of_subset(table, priors, {j, k}, options).error;
      const bool is_best = j == best.subset[0] && k == best.subset[1];
      if (!is_best) runner_up = std::min(runner_up, e);
      if (j == best_single || k == best_single) {
        best_with_single = std::min(best_with_single, e);
      }
    }
  }
  if (!(best.error.error < runner_up - kWitnessMargin)) return std::nullopt;
  cert.best_pair = {best.subset[0], best.subset[1]};
  cert.best_pair_error = best.error.error;

  if (kind == PathologyKind::best_not_in_best_pair) {
    // unique strict best single
    for (std::size_t j = 0; j < n; ++j) {
      if (j != best_single &&
          !(cert.single_errors[best_single] < cert.single_errors[j] - kWitnessMargin)) {
        return std::nullopt;
      }
    }
    if (best_single == cert.best_pair[0] || best_single == cert.best_pair[1]) {
      return std::nullopt;
    }
    cert.best_pair_with_single_error = best_with_single;
    return cert;
  }

  // individually_best_pair_not_best_pair: the two individually best features,
  // unambiguous only when the 2nd best is strictly better than the 3rd.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (cert.single_errors[x] != cert.single_errors[y]) {
      return cert.single_errors[x] < cert.single_errors[y];
    }
    return x < y;
  });
  if (!(cert.single_errors[order[1]] < cert.single_errors[order[2]] - kWitnessMargin)) {
    return std::nullopt;
  }
  std::array<std::size_t, 2> ind{std::min(order[0], order[1]), std::max(order[0], order[1])};
  if (ind == cert.best_pair) return std::nullopt;
  cert.individually_best_pair = ind;
  cert.individually_best_pair_error =
      error_of_subset(table, priors, {ind[0], ind[1]}, options).error;
  return cert;
}

inline std::optional<NonmonotoneCertificate> certify_nonmonotone(
    const FeatureProbabilityTable& table, const ClassPriors& priors,
    ListOptions options = {}) {
  if (table.size() < 2) return std::nullopt;
  StoppingRule stop;
  stop.target_count = table.size();
  SelectOptions sel;
  sel.list = options;
  sel.threads = 1;
  const SelectionTrace trace = sfs_select(table, priors, stop, sel);

  std::size_t min_pos = 0;
  for (std::size_t t = 1; t < trace.steps.size(); ++t) {
    if (trace.steps[t].reduction > trace.steps[min_pos].reduction + kWitnessMargin) {
      NonmonotoneCertificate cert;
      cert.earlier_step = min_pos;
      cert.later_step = t;
      cert.earlier_drop = trace.steps[min_pos].reduction;
      cert.later_drop = trace.steps[t].reduction;
      cert.trace = trace;
      return cert;
    }
    if (trace.steps[t].reduction < trace.steps[min_pos].reduction) min_pos = t;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Candidate generation and screening. The search space is n = 3 features and
// two classes: the cited pathologies already occur there and certification
// stays cheap. The screen below re-implements the two pair certificates with
// the exact arithmetic of the cell-list path (same products, same
// accumulation order) on stack values, so a screened hit certifies.

namespace detail {

struct Screen3 {
  double P1, P2;

  double single(double c, double d) const {
    const double a1 = P1 * c, b1 = P2 * d;
    const double a0 = P1 * (1.0 - c), b0 = P2 * (1.0 - d);
    double fp = 0.0, fn = 0.0;
    (b1 <= a1 ? fp : fn) += (b1 <= a1 ? b1 : a1);
    (b0 <= a0 ? fp : fn) += (b0 <= a0 ? b0 : a0);
    return fp + fn;
  }

  // Error of the pair (j, k) folded j first, matching error_of_subset's
  // expansion order: present-block before absent-block.
  double pair(double cj, double dj, double ck, double dk) const {
    const double a1 = P1 * cj, b1 = P2 * dj;
    const double a0 = P1 * (1.0 - cj), b0 = P2 * (1.0 - dj);
    const double a[4] = {a1 * ck, a0 * ck, a1 * (1.0 - ck), a0 * (1.0 - ck)};
    const double b[4] = {b1 * dk, b0 * dk, b1 * (1.0 - dk), b0 * (1.0 - dk)};
    double fp = 0.0, fn = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (b[i] <= a[i]) fp += b[i]; else fn += a[i];
    }
    return fp + fn;
  }

  // p = {c0, d0, c1, d1, c2, d2}
  bool screen(PathologyKind kind, const double* p) const {
    const double e0 = single(p[0], p[1]);
    const double e1 = single(p[2], p[3]);
    const double e2 = single(p[4], p[5]);

    int best_single = -1;
    if (e0 < e1 - kWitnessMargin && e0 < e2 - kWitnessMargin) best_single = 0;
    else if (e1 < e0 - kWitnessMargin && e1 < e2 - kWitnessMargin) best_single = 1;
    else if (e2 < e0 - kWitnessMargin && e2 < e1 - kWitnessMargin) best_single = 2;
    if (kind == PathologyKind::best_not_in_best_pair && best_single < 0) return false;

    const double p01 = pair(p[0], p[1], p[2], p[3]);
    const double p02 = pair(p[0], p[1], p[4], p[5]);
    const double p12 = pair(p[2], p[3], p[4], p[5]);
    int best_pair = -1;  // 0:{0,1} 1:{0,2} 2:{1,2}
    if (p01 < p02 - kWitnessMargin && p01 < p12 - kWitnessMargin) best_pair = 0;
    else if (p02 < p01 - kWitnessMargin && p02 < p12 - kWitnessMargin) best_pair = 1;
    else if (p12 < p01 - kWitnessMargin && p12 < p02 - kWitnessMargin) best_pair = 2;
    if (best_pair < 0) return false;

    if (kind == PathologyKind::best_not_in_best_pair) {
      const bool in_pair = (best_pair == 0 && best_single != 2) ||
                           (best_pair == 1 && best_single != 1) ||
                           (best_pair == 2 && best_single != 0);
      return !in_pair;
    }

    // individually best pair: needs strict separation between 2nd and 3rd
    int order[3] = {0, 1, 2};
    const double e[3] = {e0, e1, e2};
    std::sort(order, order + 3, [&](int x, int y) {
      return e[x] != e[y] ? e[x] < e[y] : x < y;
    });
    if (!(e[order[1]] < e[order[2]] - kWitnessMargin)) return false;
    const int ind_pair = order[0] + order[1] == 1 ? 0 : (order[0] + order[1] == 2 ? 1 : 2);
    return ind_pair != best_pair;
  }
};

inline FeatureProbabilityTable table_from_probs(const double* p) {
  FeatureProbabilityTable table;
  table.features = {Feature{"x1", p[0], p[1]}, Feature{"x2", p[2], p[3]},
                    Feature{"x3", p[4], p[5]}};
  return table;
}

// Decode candidate `index` of the generated stream into six probabilities.
struct CandidateStream {
  double grid_step = 0.0;
  std::uint64_t grid_values = 0;  // per-probability levels when grid mode
  std::uint64_t seed = 0;

  void materialize(std::uint64_t index, double* p) const {
    if (grid_values > 0) {
      for (int slot = 5; slot >= 0; --slot) {
        p[slot] = static_cast<double>(index % grid_values) * grid_step;
        index /= grid_values;
      }
    } else {
      std::uint64_t s = splitmix64(seed) ^ splitmix64(index + 0x51ed2701);
      for (int slot = 0; slot < 6; ++slot) {
        s = splitmix64(s);
        p[slot] = static_cast<double>(s >> 11) * 0x1.0p-53;
      }
    }
  }

  std::uint64_t total(std::uint64_t budget) const {
    if (grid_values == 0) return budget;
    unsigned __int128 grid_total = 1;
    for (int i = 0; i < 6; ++i) grid_total *= grid_values;
    if (grid_total > budget) return budget;
    return static_cast<std::uint64_t>(grid_total);
  }
};

}  // namespace detail

inline std::optional<PathologyCertificate> certify(PathologyKind kind,
                                                   const FeatureProbabilityTable& table,
                                                   const ClassPriors& priors) {
  if (kind == PathologyKind::nonmonotone_reduction) {
    const auto cert = certify_nonmonotone(table, priors);
    if (cert) return PathologyCertificate{*cert};
    return std::nullopt;
  }
  const auto cert = certify_pair_pathology(kind, table, priors);
  if (cert) return PathologyCertificate{*cert};
  return std::nullopt;
}

// Scan the candidate stream (seed tables first, then grid or random n = 3
// tables) and return the first certified instance, or nullopt when the
// budget runs out. "First" is by stream position and does not depend on the
// thread count: workers only skip candidates that already lie past a
// certified position.
inline std::optional<PathologyInstance> find_counterexample(
    PathologyKind kind, const PathologySearchConfig& config) {
  validate(config.priors);
  if (config.grid_step < 0.0 || config.grid_step > 1.0) {
    throw ValidationError("grid step must lie in [0, 1]");
  }

  std::uint64_t examined = 0;
  for (const FeatureProbabilityTable& table : config.seed_tables) {
    validate(table);
    const auto cert = certify(kind, table, config.priors);
    if (cert) {
      return PathologyInstance{table, config.priors, examined, *cert};
    }
    ++examined;
  }

  detail::CandidateStream stream;
  stream.seed = config.seed;
  if (config.grid_step > 0.0) {
    stream.grid_step = config.grid_step;
    stream.grid_values =
        static_cast<std::uint64_t>(std::floor(1.0 / config.grid_step + 1e-9)) + 1;
  }
  const std::uint64_t total = stream.total(config.budget);

  constexpr std::uint64_t kNoFind = std::numeric_limits<std::uint64_t>::max();
  std::atomic<std::uint64_t> best_found{kNoFind};
  std::atomic<std::uint64_t> next_chunk{0};
  std::mutex result_mutex;
  std::optional<PathologyInstance> result;

  const std::uint64_t chunk_size = 65536;
  const std::uint64_t num_chunks = (total + chunk_size - 1) / chunk_size;
  const detail::Screen3 screen{config.priors.p1, config.priors.p2};

  const auto worker = [&](std::size_t, std::size_t, unsigned) {
    double p[6];
    while (true) {
      const std::uint64_t chunk = next_chunk.fetch_add(1, std::memory_order_relaxed);
      if (chunk >= num_chunks) return;
      const std::uint64_t begin = chunk * chunk_size;
      if (begin >= best_found.load(std::memory_order_relaxed)) return;
      const std::uint64_t end = std::min(total, begin + chunk_size);
      for (std::uint64_t t = begin; t < end; ++t) {
        if (t >= best_found.load(std::memory_order_relaxed)) break;
        stream.materialize(t, p);
        if (kind != PathologyKind::nonmonotone_reduction && !screen.screen(kind, p)) {
          continue;
        }
        const FeatureProbabilityTable table = detail::table_from_probs(p);
        const auto cert = certify(kind, table, config.priors);
        if (!cert) continue;
        std::lock_guard<std::mutex> lock(result_mutex);
        if (t < best_found.load(std::memory_order_relaxed)) {
          best_found.store(t, std::memory_order_relaxed);
          result = PathologyInstance{table, config.priors, examined + t, *cert};
        }
        break;  // later candidates in this chunk cannot beat t
      }
    }
  };

  const unsigned threads = resolve_threads(config.threads);
  parallel_for(threads, threads, worker);
  return result;
}

}  // namespace nbsel

#include <catch2/catch_amalgamated.hpp>

#include "nbsel/sensitivity.hpp"
#include "oracle.hpp"

using namespace nbsel;

namespace {

FeatureProbabilityTable synthetic_table(std::size_t n) {
  FeatureProbabilityTable t;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(n);
    t.features.push_back(
        Feature{"s" + std::to_string(j + 1), 0.2 + 0.6 * x, 0.8 - 0.6 * x});
  }
  return t;
}

}  // namespace

TEST_CASE("truncated normal draws") {
  std::mt19937_64 rng = derive_stream(99, 0);

  SECTION("zero stddev returns the mean") {
    REQUIRE(truncated_normal(rng, 0.37, 0.0) == 0.37);
  }

  SECTION("negative stddev is rejected") {
    REQUIRE_THROWS_AS(truncated_normal(rng, 0.5, -0.1), ValidationError);
  }

  SECTION("draws near the edge stay inside the interval") {
    for (int i = 0; i < 20000; ++i) {
      const double x = truncated_normal(rng, 0.99, 0.3);
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 1.0);
    }
  }

  SECTION("symmetric truncation keeps the mean") {
    double sum = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) sum += truncated_normal(rng, 0.5, 0.1);
    REQUIRE(sum / draws == Catch::Approx(0.5).margin(0.01));
  }
}

TEST_CASE("perturbation") {
  const FeatureProbabilityTable table = synthetic_table(8);

  SECTION("sigma zero is the identity") {
    std::mt19937_64 rng = derive_stream(1, 0);
    const FeatureProbabilityTable same = perturb_table(table, 0.0, rng);
    for (std::size_t j = 0; j < table.size(); ++j) {
      REQUIRE(same[j].p1 == table[j].p1);
      REQUIRE(same[j].p2 == table[j].p2);
    }
  }

  SECTION("all perturbed values stay probabilities") {
    std::mt19937_64 rng = derive_stream(2, 0);
    for (int round = 0; round < 200; ++round) {
      const FeatureProbabilityTable noisy = perturb_table(table, 0.3, rng);
      for (const Feature& f : noisy.features) {
        REQUIRE(f.p1 >= 0.0);
        REQUIRE(f.p1 <= 1.0);
        REQUIRE(f.p2 >= 0.0);
        REQUIRE(f.p2 <= 1.0);
      }
    }
  }
}

TEST_CASE("zero-noise sensitivity collapses to the plain selection") {
  const FeatureProbabilityTable table = synthetic_table(12);
  const ClassPriors priors{0.5, 0.5};
  PerturbationConfig config;
  config.sigma = 0.0;
  config.runs = 25;
  config.d = 5;
  config.seed = 7;
  const RankTable ranks = run_sensitivity(table, priors, config);

  StoppingRule stop;
  stop.target_count = 5;
  const SelectionTrace trace = sfs_select(table, priors, stop);

  std::vector<std::uint64_t> expected_rank(table.size(), 0);
  std::vector<std::uint64_t> expected_count(table.size(), 0);
  for (std::size_t pos = 0; pos < trace.steps.size(); ++pos) {
    expected_rank[trace.steps[pos].feature_index] = config.runs * (config.d - pos);
    expected_count[trace.steps[pos].feature_index] = config.runs;
  }
  REQUIRE(ranks.total_rank == expected_rank);
  REQUIRE(ranks.selection_count == expected_count);
}

TEST_CASE("rank totals are conserved exactly") {
  std::mt19937_64 rng(61);
  for (int round = 0; round < 6; ++round) {
    const std::size_t n = 6 + rng() % 10;
    const FeatureProbabilityTable table = oracle::random_table(rng, n);
    const ClassPriors priors = oracle::random_priors(rng);
    PerturbationConfig config;
    config.sigma = 0.1 + 0.1 * (round % 3);
    config.runs = 40;
    config.d = 1 + rng() % std::min<std::size_t>(n, 6);
    config.seed = rng();
    const RankTable ranks = run_sensitivity(table, priors, config);

    std::uint64_t total = 0;
    std::uint64_t count_total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      total += ranks.total_rank[j];
      count_total += ranks.selection_count[j];
      REQUIRE(ranks.total_rank[j] <= config.runs * config.d);
      REQUIRE(ranks.total_rank[j] >= ranks.selection_count[j]);
      REQUIRE(ranks.selection_count[j] <= config.runs);
    }
    REQUIRE(total == config.runs * config.d * (config.d + 1) / 2);
    REQUIRE(count_total == config.runs * config.d);
  }
}

TEST_CASE("a feature selected first in every run earns the full total") {
  FeatureProbabilityTable table = synthetic_table(12);
  table.features[0] = Feature{"dominant", 0.97, 0.03};
  PerturbationConfig config;
  config.sigma = 0.0;
  config.runs = 1000;
  config.d = 10;
  const RankTable ranks = run_sensitivity(table, ClassPriors{0.5, 0.5}, config);
  REQUIRE(ranks.total_rank[0] == 10000);
  REQUIRE(ranks.selection_count[0] == 1000);
}

TEST_CASE("sensitivity runs are reproducible and thread-count independent") {
  const FeatureProbabilityTable table = synthetic_table(10);
  const ClassPriors priors{0.4, 0.6};
  PerturbationConfig config;
  config.sigma = 0.2;
  config.runs = 60;
  config.d = 4;
  config.seed = 12345;

  SensitivityOptions serial;
  serial.threads = 1;
  SensitivityOptions wide;
  wide.threads = 4;
  const RankTable a = run_sensitivity(table, priors, config, serial);
  const RankTable b = run_sensitivity(table, priors, config, wide);
  const RankTable c = run_sensitivity(table, priors, config, serial);
  REQUIRE(a.total_rank == b.total_rank);
  REQUIRE(a.selection_count == b.selection_count);
  REQUIRE(a.total_rank == c.total_rank);
}

TEST_CASE("sensitivity configuration validation") {
  const FeatureProbabilityTable table = synthetic_table(6);
  const ClassPriors priors{0.5, 0.5};
  PerturbationConfig config;

  config.runs = 0;
  REQUIRE_THROWS_AS(run_sensitivity(table, priors, config), ValidationError);
  config.runs = 1;
  config.d = 0;
  REQUIRE_THROWS_AS(run_sensitivity(table, priors, config), ValidationError);
  config.d = 7;  // more than the table offers
  REQUIRE_THROWS_AS(run_sensitivity(table, priors, config), ValidationError);
  config.d = 6;
  config.sigma = -0.1;
  REQUIRE_THROWS_AS(run_sensitivity(table, priors, config), ValidationError);
  config.sigma = 0.1;
  SensitivityOptions narrow;
  narrow.list.max_depth = 3;
  REQUIRE_THROWS_AS(run_sensitivity(table, priors, config, narrow), CapacityError);
}

TEST_CASE("rank table comparison") {
  const std::vector<std::string> names = {"a", "b", "c", "d", "e"};
  RankTable first;
  first.feature_names = names;
  first.total_rank = {50, 40, 30, 0, 0};
  first.selection_count = {10, 10, 10, 0, 0};
  first.runs = 10;
  first.rank_ceiling = 3;

  SECTION("identical tables overlap fully") {
    const OverlapReport report = compare_rank_tables({first, first}, 3);
    REQUIRE(report.pairwise_intersection[0][1] == 3);
    REQUIRE(report.union_of_top == std::vector<std::size_t>{0, 1, 2});
    REQUIRE(report.entered_vs_first[1].empty());
    REQUIRE(report.dropped_vs_first[1].empty());
  }

  SECTION("disjoint top lists overlap nowhere") {
    RankTable second = first;
    second.total_rank = {0, 0, 7, 9, 8};
    const OverlapReport report = compare_rank_tables({first, second}, 2);
    REQUIRE(report.pairwise_intersection[0][1] == 0);
    REQUIRE(report.top_lists[0] == std::vector<std::size_t>{0, 1});
    REQUIRE(report.top_lists[1] == std::vector<std::size_t>{3, 4});
    REQUIRE(report.entered_vs_first[1] == std::vector<std::size_t>{3, 4});
    REQUIRE(report.dropped_vs_first[1] == std::vector<std::size_t>{0, 1});
  }

  SECTION("ties in total rank keep the lower index") {
    RankTable tied = first;
    tied.total_rank = {5, 5, 5, 5, 5};
    REQUIRE(top_features(tied, 2) == std::vector<std::size_t>{0, 1});
  }

  SECTION("mismatched feature sets are rejected") {
    RankTable other = first;
    other.feature_names = {"a", "b", "c", "d", "x"};
    REQUIRE_THROWS_AS(compare_rank_tables({first, other}, 2), ValidationError);
  }

  SECTION("top length must be sane") {
    REQUIRE_THROWS_AS(compare_rank_tables({first}, 0), ValidationError);
    REQUIRE_THROWS_AS(compare_rank_tables({first}, 6), ValidationError);
  }
}

TEST_CASE("perturbed rankings of a well separated table stay similar") {
  // ten strongly separated features ahead of twenty near-noise ones
  FeatureProbabilityTable table;
  for (int j = 0; j < 10; ++j) {
    table.features.push_back(Feature{"strong" + std::to_string(j + 1),
                                     0.93 - 0.006 * j, 0.07 + 0.006 * j});
  }
  for (int j = 0; j < 20; ++j) {
    table.features.push_back(Feature{"weak" + std::to_string(j + 1),
                                     0.48 + 0.004 * j, 0.52 - 0.004 * j});
  }
  const ClassPriors priors{0.5, 0.5};

  std::vector<RankTable> tables;
  for (double sigma : {0.0, 0.2}) {
    PerturbationConfig config;
    config.sigma = sigma;
    config.runs = sigma == 0.0 ? 1 : 200;
    config.d = 10;
    config.seed = 17;
    tables.push_back(run_sensitivity(table, priors, config));
  }
  const OverlapReport report = compare_rank_tables(tables, 10);
  REQUIRE(report.pairwise_intersection[0][1] >= 8);
}

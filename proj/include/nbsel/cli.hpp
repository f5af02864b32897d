#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>

#include "nbsel/nbsel.hpp"

namespace nbsel {
namespace cli {

// Exit codes: 0 success, 2 usage, 3 input validation, 4 capacity.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitCapacity = 4;

namespace detail {

inline ClassPriors parse_priors(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) {
    throw ValidationError("priors must be given as P1,P2");
  }
  const std::string first = nbsel::detail::trim(text.substr(0, comma));
  const std::string second = nbsel::detail::trim(text.substr(comma + 1));
  ClassPriors priors;
  priors.p1 = nbsel::detail::parse_probability(first, 1, "prior p1");
  priors.p2 = nbsel::detail::parse_probability(second, 1, "prior p2");
  validate(priors);
  return priors;
}

struct InputFlags {
  std::string path;
  std::string multiclass_target;
  std::string priors_text = "0.5,0.5";
  double clamp_epsilon = 0.0;
};

inline void add_input_flags(CLI::App* cmd, InputFlags& flags) {
  cmd->add_option("--input", flags.path, "probability table (CSV)")->required();
  cmd->add_option("--multiclass-target", flags.multiclass_target,
                  "treat the input as multi-class and collapse onto this target class");
  cmd->add_option("--priors", flags.priors_text, "class priors P1,P2 (default 0.5,0.5)");
  cmd->add_option("--clamp-epsilon", flags.clamp_epsilon,
                  "clamp probabilities into [eps, 1-eps] at load time");
}

inline FeatureProbabilityTable load_input(const InputFlags& flags) {
  FeatureProbabilityTable table;
  if (!flags.multiclass_target.empty()) {
    table = collapse_multiclass(load_multiclass_table_file(flags.path),
                                flags.multiclass_target);
  } else {
    table = load_table_file(flags.path);
  }
  if (flags.clamp_epsilon > 0.0) {
    table = clamp_probabilities(table, flags.clamp_epsilon);
  }
  return table;
}

inline void write_output(const std::string& text, const std::string& out_path,
                         std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(out_path, std::ios::binary);
  if (!file) throw ValidationError("cannot open output file: " + out_path);
  file << text;
}

// Bold the column header of a TSV block when talking to a colour-capable
// terminal; NO_COLOR and file output keep the bytes plain.
inline std::string colorize_tsv_header(const std::string& text) {
  const auto pos = text.find("step\t");
  if (pos == std::string::npos || (pos != 0 && text[pos - 1] != '\n')) return text;
  const auto eol = text.find('\n', pos);
  if (eol == std::string::npos) return text;
  return text.substr(0, pos) + "\x1b[1m" + text.substr(pos, eol - pos) + "\x1b[0m" +
         text.substr(eol);
}

inline bool want_color(const std::string& out_path, const std::ostream& out) {
  return out_path.empty() && &out == &std::cout && isatty(fileno(stdout)) != 0 &&
         std::getenv("NO_COLOR") == nullptr;
}

inline std::string join_names(const FeatureProbabilityTable& table,
                              const std::vector<std::size_t>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0) out += ',';
    out += table[indices[i]].name;
  }
  return out;
}

inline std::string join_indices(const std::vector<std::size_t>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(indices[i]);
  }
  return out;
}

}  // namespace detail

// The whole front end; takes argv without the program name and the two
// streams it may write to. Returns a process exit status.
inline int cli_dispatch(std::vector<std::string> args, std::ostream& out,
                        std::ostream& err) {
  CLI::App app{"feature selection on expert-estimated probability tables"};
  app.require_subcommand(1);

  // --- select ---------------------------------------------------------
  detail::InputFlags select_input;
  std::size_t select_d = 0;
  double select_target_error = -1.0;
  double select_min_reduction = -1.0;
  int select_max_depth = 25;
  double select_prune = 0.0;
  unsigned select_threads = 0;
  std::string select_out;
  std::string select_format = "tabular";
  CLI::App* select_cmd =
      app.add_subcommand("select", "sequential forward selection on the exact error");
  detail::add_input_flags(select_cmd, select_input);
  select_cmd->add_option("--d", select_d, "number of features to select");
  select_cmd->add_option("--target-error", select_target_error,
                         "stop once the error is at or below this value");
  select_cmd->add_option("--min-reduction", select_min_reduction,
                         "advisory stop when a non-forced step reduces the error "
                         "by less than this");
  select_cmd->add_option("--max-depth", select_max_depth,
                         "width cap: the list never exceeds 2^max-depth cells");
  select_cmd->add_option("--prune-threshold", select_prune,
                         "drop cells with min(a,b) at or below this, keeping a "
                         "certified error bound");
  select_cmd->add_option("--threads", select_threads, "worker threads (0 = all cores)");
  select_cmd->add_option("--out", select_out, "write the report here instead of stdout");
  select_cmd->add_option("--format", select_format, "report format")
      ->check(CLI::IsMember({"tabular", "structured"}));

  // --- rank -----------------------------------------------------------
  detail::InputFlags rank_input;
  std::string rank_criterion = "error";
  std::string rank_out;
  CLI::App* rank_cmd =
      app.add_subcommand("rank", "rank features individually, best first");
  detail::add_input_flags(rank_cmd, rank_input);
  rank_cmd->add_option("--criterion", rank_criterion,
                       "error: single-feature classifier error; absdiff: |p1-p2|")
      ->check(CLI::IsMember({"error", "absdiff"}));
  rank_cmd->add_option("--out", rank_out, "write the ranking here instead of stdout");

  // --- sensitivity ----------------------------------------------------
  detail::InputFlags sens_input;
  std::vector<double> sens_sigmas;
  std::uint64_t sens_runs = 1000;
  std::size_t sens_d = 10;
  std::uint64_t sens_seed = 0;
  std::size_t sens_top_k = 0;
  int sens_max_depth = 25;
  unsigned sens_threads = 0;
  std::string sens_out;
  CLI::App* sens_cmd = app.add_subcommand(
      "sensitivity", "re-run selection on noise-perturbed tables and compare rankings");
  detail::add_input_flags(sens_cmd, sens_input);
  sens_cmd->add_option("--sigma", sens_sigmas,
                       "noise stddev; repeatable (default 0.1 0.2 0.3)");
  sens_cmd->add_option("--runs", sens_runs, "perturbed runs per sigma");
  sens_cmd->add_option("--d", sens_d, "features selected per run");
  sens_cmd->add_option("--seed", sens_seed, "master seed");
  sens_cmd->add_option("--top-k", sens_top_k, "top list length to compare (default d)");
  sens_cmd->add_option("--max-depth", sens_max_depth, "width cap exponent");
  sens_cmd->add_option("--threads", sens_threads, "worker threads (0 = all cores)");
  sens_cmd->add_option("--out", sens_out, "write the report here instead of stdout");

  // --- region ---------------------------------------------------------
  detail::InputFlags region_input;
  std::string region_features;
  std::size_t region_d = 0;
  int region_max_depth = 25;
  std::size_t region_delta_grid = 0;
  unsigned region_threads = 0;
  std::string region_out;
  CLI::App* region_cmd = app.add_subcommand(
      "region", "emit the (c,d) scatter plus the no-improvement region of a selection state");
  detail::add_input_flags(region_cmd, region_input);
  region_cmd->add_option("--features", region_features,
                         "comma-separated feature names forming the selection state");
  region_cmd->add_option("--d", region_d, "run selection for d features first");
  region_cmd->add_option("--delta-grid", region_delta_grid,
                         "also emit error reductions on an NxN (c,d) grid");
  region_cmd->add_option("--max-depth", region_max_depth, "width cap exponent");
  region_cmd->add_option("--threads", region_threads, "worker threads (0 = all cores)");
  region_cmd->add_option("--out", region_out, "write the output here instead of stdout");

  // --- oracle ---------------------------------------------------------
  detail::InputFlags oracle_input;
  std::size_t oracle_d = 0;
  std::uint64_t oracle_budget = 38760;
  int oracle_max_depth = 25;
  std::string oracle_out;
  CLI::App* oracle_cmd = app.add_subcommand(
      "oracle", "exhaustive best subset of a given size (budget-guarded)");
  detail::add_input_flags(oracle_cmd, oracle_input);
  oracle_cmd->add_option("--d", oracle_d, "subset size")->required();
  oracle_cmd->add_option("--max-evals", oracle_budget, "subset evaluation budget");
  oracle_cmd->add_option("--max-depth", oracle_max_depth, "width cap exponent");
  oracle_cmd->add_option("--out", oracle_out, "write the result here instead of stdout");

  // --- pathology ------------------------------------------------------
  std::string pathology_kind;
  double pathology_grid_step = 0.05;
  std::uint64_t pathology_budget = 100'000'000;
  std::uint64_t pathology_seed = 0;
  std::string pathology_priors_text = "0.5,0.5";
  unsigned pathology_threads = 0;
  std::string pathology_out;
  CLI::App* pathology_cmd = app.add_subcommand(
      "pathology", "search small tables for counterexamples to greedy intuitions");
  pathology_cmd
      ->add_option("--kind", pathology_kind, "which pathology to hunt")
      ->required()
      ->check(CLI::IsMember({"best-not-in-best-pair", "individually-best-pair-not-best-pair",
                             "nonmonotone-reduction"}));
  pathology_cmd->add_option("--grid-step", pathology_grid_step,
                            "probability grid step; 0 samples tables at random");
  pathology_cmd->add_option("--budget", pathology_budget, "max candidate tables");
  pathology_cmd->add_option("--seed", pathology_seed, "seed for the random mode");
  pathology_cmd->add_option("--priors", pathology_priors_text, "class priors P1,P2");
  pathology_cmd->add_option("--threads", pathology_threads, "worker threads (0 = all cores)");
  pathology_cmd->add_option("--out", pathology_out, "write the result here instead of stdout");

  try {
    std::vector<const char*> argv;
    argv.push_back("nbsel");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << app.help();
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(select_cmd)) {
      const ClassPriors priors = detail::parse_priors(select_input.priors_text);
      const FeatureProbabilityTable table = detail::load_input(select_input);
      StoppingRule stop;
      if (select_cmd->count("--d") > 0) stop.target_count = select_d;
      if (select_cmd->count("--target-error") > 0) stop.target_error = select_target_error;
      if (select_cmd->count("--min-reduction") > 0) {
        stop.min_reduction = select_min_reduction;
        err << "warning: --min-reduction is advisory; error reductions are not "
               "monotone, so a small drop can precede a large one\n";
      }
      if (!stop.target_count && !stop.target_error) {
        err << "error: select needs --d and/or --target-error\n";
        return kExitUsage;
      }
      SelectOptions options;
      options.list.max_depth = select_max_depth;
      options.list.prune_threshold = select_prune;
      options.threads = select_threads;
      const SelectionTrace trace = sfs_select(table, priors, stop, options);

      std::vector<std::pair<std::string, std::string>> config;
      config.emplace_back("input", select_input.path);
      if (!select_input.multiclass_target.empty()) {
        config.emplace_back("multiclass_target", select_input.multiclass_target);
      }
      config.emplace_back("priors", select_input.priors_text);
      if (stop.target_count) config.emplace_back("d", std::to_string(*stop.target_count));
      if (stop.target_error) {
        config.emplace_back("target_error", format_double(*stop.target_error));
      }
      if (stop.min_reduction) {
        config.emplace_back("min_reduction", format_double(*stop.min_reduction));
      }
      config.emplace_back("max_depth", std::to_string(select_max_depth));
      config.emplace_back("prune_threshold", format_double(select_prune));
      if (select_input.clamp_epsilon > 0.0) {
        config.emplace_back("clamp_epsilon", format_double(select_input.clamp_epsilon));
      }
      config.emplace_back("format", select_format);

      const RunReport report = make_run_report(trace, table, std::move(config));
      std::string text = emit_report(report, select_format == "tabular"
                                                 ? ReportFormat::tabular
                                                 : ReportFormat::structured);
      if (select_format == "tabular" && detail::want_color(select_out, out)) {
        text = detail::colorize_tsv_header(text);
      }
      detail::write_output(text, select_out, out);
      return kExitOk;
    }

    if (app.got_subcommand(rank_cmd)) {
      const ClassPriors priors = detail::parse_priors(rank_input.priors_text);
      const FeatureProbabilityTable table = detail::load_input(rank_input);
      const RankCriterion criterion = rank_criterion == "error"
                                          ? RankCriterion::single_feature_error
                                          : RankCriterion::absolute_difference;
      const std::vector<RankedFeature> ranked = rank_individual(table, priors, criterion);
      std::string text = "# criterion=" + rank_criterion + "\n";
      text += "rank\tfeature\tscore\n";
      for (std::size_t i = 0; i < ranked.size(); ++i) {
        text += std::to_string(i + 1) + "\t" + table[ranked[i].index].name + "\t" +
                format_double(ranked[i].score) + "\n";
      }
      detail::write_output(text, rank_out, out);
      return kExitOk;
    }

    if (app.got_subcommand(sens_cmd)) {
      const ClassPriors priors = detail::parse_priors(sens_input.priors_text);
      const FeatureProbabilityTable table = detail::load_input(sens_input);
      if (sens_sigmas.empty()) sens_sigmas = {0.1, 0.2, 0.3};
      SensitivityOptions options;
      options.list.max_depth = sens_max_depth;
      options.threads = sens_threads;

      std::vector<RankTable> tables;
      std::vector<std::string> labels;
      {
        PerturbationConfig base;
        base.sigma = 0.0;
        base.runs = 1;
        base.d = sens_d;
        base.seed = sens_seed;
        tables.push_back(run_sensitivity(table, priors, base, options));
        labels.push_back("baseline");
      }
      for (double sigma : sens_sigmas) {
        PerturbationConfig config;
        config.sigma = sigma;
        config.runs = sens_runs;
        config.d = sens_d;
        config.seed = sens_seed;
        tables.push_back(run_sensitivity(table, priors, config, options));
        labels.push_back("sigma=" + format_double(sigma));
      }
      const std::size_t k =
          sens_top_k > 0 ? sens_top_k : std::min(sens_d, table.size());
      const OverlapReport overlap = compare_rank_tables(tables, k);

      std::string text;
      text += "# sensitivity runs=" + std::to_string(sens_runs) +
              " d=" + std::to_string(sens_d) + " seed=" + std::to_string(sens_seed) +
              " priors=" + sens_input.priors_text + "\n";
      text += "# fingerprint=" + fingerprint_table(table) + "\n";
      for (std::size_t t = 0; t < tables.size(); ++t) {
        text += "# rank_table " + labels[t] +
                " runs=" + std::to_string(tables[t].runs) + "\n";
        text += "feature\ttotal_rank\tselection_count\n";
        for (std::size_t j : rank_order(tables[t])) {
          text += tables[t].feature_names[j] + "\t" +
                  std::to_string(tables[t].total_rank[j]) + "\t" +
                  std::to_string(tables[t].selection_count[j]) + "\n";
        }
      }
      text += "# overlap k=" + std::to_string(k) + "\n";
      text += "pair\tintersection\n";
      for (std::size_t i = 0; i < tables.size(); ++i) {
        for (std::size_t j = i + 1; j < tables.size(); ++j) {
          text += labels[i] + "|" + labels[j] + "\t" +
                  std::to_string(overlap.pairwise_intersection[i][j]) + "\n";
        }
      }
      text += "# union_top=" + detail::join_names(table, overlap.union_of_top) + "\n";
      for (std::size_t t = 1; t < tables.size(); ++t) {
        text += "# entered " + labels[t] + "=" +
                detail::join_names(table, overlap.entered_vs_first[t]) + "\n";
        text += "# dropped " + labels[t] + "=" +
                detail::join_names(table, overlap.dropped_vs_first[t]) + "\n";
      }
      detail::write_output(text, sens_out, out);
      return kExitOk;
    }

    if (app.got_subcommand(region_cmd)) {
      const ClassPriors priors = detail::parse_priors(region_input.priors_text);
      const FeatureProbabilityTable table = detail::load_input(region_input);
      if (!region_features.empty() && region_d > 0) {
        err << "error: region takes --features or --d, not both\n";
        return kExitUsage;
      }
      ListOptions list_options;
      list_options.max_depth = region_max_depth;

      std::vector<std::size_t> subset;
      if (!region_features.empty()) {
        for (const std::string& raw : nbsel::detail::split_csv(region_features)) {
          const std::size_t idx = table.find(raw);
          if (idx == FeatureProbabilityTable::npos) {
            throw ValidationError("unknown feature name: " + raw);
          }
          subset.push_back(idx);
        }
      } else if (region_d > 0) {
        StoppingRule stop;
        stop.target_count = region_d;
        SelectOptions options;
        options.list = list_options;
        options.threads = region_threads;
        subset = sfs_select(table, priors, stop, options).selected_indices();
      }

      const CellList list = list_for_subset(table, priors, subset, list_options);
      const std::optional<NoImprovementRegion> region = region_parallelogram(list);
      std::string text = emit_scatter(table, subset, region);
      if (!region) {
        text += "# region undefined (error is already zero)\n";
      }
      if (region_delta_grid > 0) {
        const double base = evaluate_error(list).error;
        text += "# delta_grid n=" + std::to_string(region_delta_grid) + "\n";
        text += "c,d,reduction\n";
        for (std::size_t i = 0; i <= region_delta_grid; ++i) {
          for (std::size_t j = 0; j <= region_delta_grid; ++j) {
            const double c = static_cast<double>(i) / region_delta_grid;
            const double d = static_cast<double>(j) / region_delta_grid;
            const double reduction = base - evaluate_error(expand_list(list, c, d)).error;
            text += format_double(c) + "," + format_double(d) + "," +
                    format_double(reduction) + "\n";
          }
        }
      }
      detail::write_output(text, region_out, out);
      return kExitOk;
    }

    if (app.got_subcommand(oracle_cmd)) {
      const ClassPriors priors = detail::parse_priors(oracle_input.priors_text);
      const FeatureProbabilityTable table = detail::load_input(oracle_input);
      ExhaustiveOptions options;
      options.max_evaluations = oracle_budget;
      options.list.max_depth = oracle_max_depth;
      const ExhaustiveResult result = exhaustive_best_subset(table, priors, oracle_d, options);
      std::string text;
      text += "# oracle d=" + std::to_string(oracle_d) +
              " evaluations=" + std::to_string(result.evaluations) + "\n";
      text += "subset\t" + detail::join_names(table, result.subset) + "\n";
      text += "subset_indices\t" + detail::join_indices(result.subset) + "\n";
      text += "error\t" + format_double(result.error.error) + "\n";
      text += "false_positive\t" + format_double(result.error.false_positive) + "\n";
      text += "false_negative\t" + format_double(result.error.false_negative) + "\n";
      detail::write_output(text, oracle_out, out);
      return kExitOk;
    }

    if (app.got_subcommand(pathology_cmd)) {
      PathologyKind kind = PathologyKind::nonmonotone_reduction;
      if (pathology_kind == "best-not-in-best-pair") {
        kind = PathologyKind::best_not_in_best_pair;
      } else if (pathology_kind == "individually-best-pair-not-best-pair") {
        kind = PathologyKind::individually_best_pair_not_best_pair;
      }
      PathologySearchConfig config;
      config.grid_step = pathology_grid_step;
      config.budget = pathology_budget;
      config.seed = pathology_seed;
      config.priors = detail::parse_priors(pathology_priors_text);
      config.threads = pathology_threads;
      const std::optional<PathologyInstance> instance = find_counterexample(kind, config);

      std::string text;
      text += "# pathology kind=" + pathology_kind +
              " grid_step=" + format_double(pathology_grid_step) +
              " budget=" + std::to_string(pathology_budget) +
              " seed=" + std::to_string(pathology_seed) + "\n";
      if (!instance) {
        text += "found\t0\n";
        text += "status\texhausted\n";
        detail::write_output(text, pathology_out, out);
        return kExitOk;
      }
      text += "found\t1\n";
      text += "candidate_index\t" + std::to_string(instance->candidate_index) + "\n";
      text += "priors\t" + format_double(instance->priors.p1) + "," +
              format_double(instance->priors.p2) + "\n";
      text += "table:\n" + save_table(instance->table);
      if (const auto* cert = std::get_if<PairPathologyCertificate>(&instance->certificate)) {
        std::string singles;
        for (std::size_t j = 0; j < cert->single_errors.size(); ++j) {
          if (j > 0) singles += ',';
          singles += format_double(cert->single_errors[j]);
        }
        text += "single_errors\t" + singles + "\n";
        text += "best_single\t" + instance->table[cert->best_single].name + "\n";
        text += "best_pair\t" + instance->table[cert->best_pair[0]].name + "," +
                instance->table[cert->best_pair[1]].name + "\n";
        text += "best_pair_error\t" + format_double(cert->best_pair_error) + "\n";
        if (kind == PathologyKind::best_not_in_best_pair) {
          text += "best_pair_with_single_error\t" +
                  format_double(cert->best_pair_with_single_error) + "\n";
        } else {
          text += "individually_best_pair\t" +
                  instance->table[cert->individually_best_pair[0]].name + "," +
                  instance->table[cert->individually_best_pair[1]].name + "\n";
          text += "individually_best_pair_error\t" +
                  format_double(cert->individually_best_pair_error) + "\n";
        }
      } else if (const auto* cert =
                     std::get_if<NonmonotoneCertificate>(&instance->certificate)) {
        std::string drops;
        for (std::size_t i = 0; i < cert->trace.steps.size(); ++i) {
          if (i > 0) drops += ',';
          drops += format_double(cert->trace.steps[i].reduction);
        }
        text += "drops\t" + drops + "\n";
        text += "earlier_step\t" + std::to_string(cert->earlier_step + 1) + "\n";
        text += "earlier_drop\t" + format_double(cert->earlier_drop) + "\n";
        text += "later_step\t" + std::to_string(cert->later_step + 1) + "\n";
        text += "later_drop\t" + format_double(cert->later_drop) + "\n";
      }
      detail::write_output(text, pathology_out, out);
      return kExitOk;
    }
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

inline int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(std::move(args), std::cout, std::cerr);
}

}  // namespace cli
}  // namespace nbsel

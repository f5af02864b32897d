#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nbsel/region.hpp"
#include "nbsel/selector.hpp"

namespace nbsel {

// Expert table over more than two classes; reduced to the two-class form by
// collapse_multiclass before anything else touches it.
struct MultiClassTable {
  std::vector<std::string> classes;
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> probs;  // [feature][class]
};

inline void validate(const MultiClassTable& table) {
  if (table.classes.size() < 2) {
    throw ValidationError("multi-class table needs at least 2 classes");
  }
  if (table.feature_names.empty()) {
    throw ValidationError("feature table must contain at least one feature");
  }
  std::unordered_set<std::string> seen;
  for (const std::string& c : table.classes) {
    if (c.empty() || !seen.insert("c:" + c).second) {
      throw ValidationError("class names must be unique and non-empty");
    }
  }
  for (std::size_t i = 0; i < table.feature_names.size(); ++i) {
    const std::string& name = table.feature_names[i];
    if (name.empty() || !seen.insert("f:" + name).second) {
      throw ValidationError("feature names must be unique and non-empty");
    }
    if (table.probs[i].size() != table.classes.size()) {
      throw ValidationError("row length mismatch for feature: " + name);
    }
    for (double p : table.probs[i]) {
      if (!(p >= 0.0) || !(p <= 1.0)) {
        throw ValidationError("probability out of range for feature: " + name);
      }
    }
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

inline double parse_probability(const std::string& field, std::size_t line_no,
                                const std::string& feature) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ValidationError("line " + std::to_string(line_no) +
                          ": cannot parse probability '" + field + "'");
  }
  if (!(value >= 0.0) || !(value <= 1.0)) {
    throw ValidationError("line " + std::to_string(line_no) +
                          ": probability out of range for feature " + feature);
  }
  return value;
}

// Reads non-empty, non-comment lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> data_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    lines.emplace_back(line_no, trimmed);
  }
  return lines;
}

}  // namespace detail

// Two-class CSV: a header line, then rows `feature,p1,p2` where p1 and p2
// are P(x=1 | class 1) and P(x=1 | class 2) as plain decimals in [0,1].
inline FeatureProbabilityTable load_table(std::istream& in) {
  const auto lines = detail::data_lines(in);
  if (lines.empty()) throw ValidationError("line 1: empty table, header expected");
  FeatureProbabilityTable table;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line_no, text] = lines[i];
    const std::vector<std::string> fields = detail::split_csv(text);
    if (fields.size() != 3) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected 3 fields (feature,p1,p2), got " +
                            std::to_string(fields.size()));
    }
    Feature f;
    f.name = fields[0];
    if (f.name.empty()) {
      throw ValidationError("line " + std::to_string(line_no) + ": empty feature name");
    }
    if (!seen.insert(f.name).second) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate feature name " + f.name);
    }
    f.p1 = detail::parse_probability(fields[1], line_no, f.name);
    f.p2 = detail::parse_probability(fields[2], line_no, f.name);
    table.features.push_back(std::move(f));
  }
  validate(table);
  return table;
}

// Multi-class CSV: header `feature,Class1,...,ClassC`, then rows
// `feature,p_1,...,p_C`.
inline MultiClassTable load_multiclass_table(std::istream& in) {
  const auto lines = detail::data_lines(in);
  if (lines.empty()) throw ValidationError("line 1: empty table, header expected");
  MultiClassTable table;
  {
    const auto& [line_no, text] = lines[0];
    std::vector<std::string> fields = detail::split_csv(text);
    if (fields.size() < 3) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": header must name at least 2 classes");
    }
    table.classes.assign(fields.begin() + 1, fields.end());
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& [line_no, text] = lines[i];
    const std::vector<std::string> fields = detail::split_csv(text);
    if (fields.size() != table.classes.size() + 1) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.classes.size() + 1) + " fields, got " +
                            std::to_string(fields.size()));
    }
    table.feature_names.push_back(fields[0]);
    std::vector<double> row;
    for (std::size_t c = 1; c < fields.size(); ++c) {
      row.push_back(detail::parse_probability(fields[c], line_no, fields[0]));
    }
    table.probs.push_back(std::move(row));
  }
  validate(table);
  return table;
}

inline FeatureProbabilityTable load_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);
  return load_table(in);
}

inline MultiClassTable load_multiclass_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);
  return load_multiclass_table(in);
}

// Two-class reduction of a multi-class table: class 1 is the target, class 2
// pools every other class with equal weight (equal prevalences assumed), so
// p2 is the plain average of the non-target frequencies.
inline FeatureProbabilityTable collapse_multiclass(const MultiClassTable& table,
                                                   const std::string& target) {
  validate(table);
  std::size_t target_idx = table.classes.size();
  for (std::size_t c = 0; c < table.classes.size(); ++c) {
    if (table.classes[c] == target) {
      target_idx = c;
      break;
    }
  }
  if (target_idx == table.classes.size()) {
    throw ValidationError("unknown target class: " + target);
  }
  FeatureProbabilityTable out;
  for (std::size_t i = 0; i < table.feature_names.size(); ++i) {
    Feature f;
    f.name = table.feature_names[i];
    f.p1 = table.probs[i][target_idx];
    double sum = 0.0;
    double lo = 1.0, hi = 0.0;
    const std::size_t others = table.classes.size() - 1;
    for (std::size_t c = 0; c < table.classes.size(); ++c) {
      if (c == target_idx) continue;
      sum += table.probs[i][c];
      lo = std::min(lo, table.probs[i][c]);
      hi = std::max(hi, table.probs[i][c]);
    }
    // A constant column averages to itself exactly, no rounding detour.
    f.p2 = (lo == hi) ? lo : sum / static_cast<double>(others);
    out.features.push_back(std::move(f));
  }
  validate(out);
  return out;
}

// p -> min(max(p, eps), 1-eps) for users who distrust extreme expert
// estimates; the engine itself is exact under 0 and 1.
inline FeatureProbabilityTable clamp_probabilities(const FeatureProbabilityTable& table,
                                                   double epsilon) {
  if (!(epsilon >= 0.0) || !(epsilon <= 0.5)) {
    throw ValidationError("clamp epsilon must lie in [0, 0.5]");
  }
  FeatureProbabilityTable out = table;
  for (Feature& f : out.features) {
    f.p1 = std::clamp(f.p1, epsilon, 1.0 - epsilon);
    f.p2 = std::clamp(f.p2, epsilon, 1.0 - epsilon);
  }
  return out;
}

// Shortest decimal form that parses back to exactly the same double.
inline std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, static_cast<std::size_t>(ptr - buf));
}

inline std::string save_table(const FeatureProbabilityTable& table) {
  std::string out = "feature,p1,p2\n";
  for (const Feature& f : table.features) {
    out += f.name;
    out += ',';
    out += format_double(f.p1);
    out += ',';
    out += format_double(f.p2);
    out += '\n';
  }
  return out;
}

// FNV-1a over the canonical table text; cheap and stable across runs.
inline std::string fingerprint_table(const FeatureProbabilityTable& table) {
  const std::string canon = save_table(table);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// RFC 3339 UTC; SOURCE_DATE_EPOCH wins when set so structured reports can be
// made byte-reproducible.
inline std::string current_timestamp_rfc3339() {
  std::time_t t = 0;
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
    t = static_cast<std::time_t>(std::atoll(sde));
  } else {
    t = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunReport {
  SelectionTrace trace;
  std::string table_fingerprint;
  std::vector<std::pair<std::string, std::string>> configuration;
  std::string generated_at;
};

inline RunReport make_run_report(SelectionTrace trace, const FeatureProbabilityTable& table,
                                 std::vector<std::pair<std::string, std::string>> configuration) {
  RunReport report;
  report.trace = std::move(trace);
  report.table_fingerprint = fingerprint_table(table);
  report.configuration = std::move(configuration);
  report.generated_at = current_timestamp_rfc3339();
  return report;
}

enum class ReportFormat { tabular, structured };

inline std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * value);
  return buf;
}

// Tabular: one TSV row per step, percentages at two decimals like the usual
// presentation of such tables; configuration echoed in '#' comments. The
// timestamp stays out of this format so identical runs emit identical bytes.
// Structured: a JSON document carrying full-precision values.
inline std::string emit_report(const RunReport& report, ReportFormat format) {
  if (format == ReportFormat::tabular) {
    std::string out;
    out += "# fingerprint=" + report.table_fingerprint + "\n";
    for (const auto& [key, value] : report.configuration) {
      out += "# " + key + "=" + value + "\n";
    }
    out += "# prior_error=" + format_double(report.trace.prior_error_value) + "\n";
    out += "# stop_reason=" + std::string(to_string(report.trace.stop_reason)) + "\n";
    if (!report.trace.steps.empty() && report.trace.steps.back().pruned_error_bound > 0.0) {
      out += "# pruned_error_bound=" +
             format_double(report.trace.steps.back().pruned_error_bound) + "\n";
    }
    out += "step\tfeature\terror_pct\tsensitivity_pct\tspecificity_pct\treduction\tforced\n";
    for (std::size_t i = 0; i < report.trace.steps.size(); ++i) {
      const SelectionStep& s = report.trace.steps[i];
      out += std::to_string(i + 1);
      out += '\t';
      out += s.feature_name;
      out += '\t';
      out += format_percent(s.cumulative.error);
      out += '\t';
      out += s.sensitivity ? format_percent(*s.sensitivity) : "-";
      out += '\t';
      out += s.specificity ? format_percent(*s.specificity) : "-";
      out += '\t';
      out += format_double(s.reduction);
      out += '\t';
      out += s.forced ? '1' : '0';
      out += '\n';
    }
    return out;
  }

  nlohmann::json doc;
  doc["tool"] = "nbsel";
  doc["report"] = "selection";
  doc["fingerprint"] = report.table_fingerprint;
  doc["generated_at"] = report.generated_at;
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [key, value] : report.configuration) config[key] = value;
  doc["configuration"] = config;
  doc["priors"] = {{"p1", report.trace.priors.p1}, {"p2", report.trace.priors.p2}};
  doc["prior_error"] = report.trace.prior_error_value;
  doc["stop_reason"] = to_string(report.trace.stop_reason);
  doc["steps"] = nlohmann::json::array();
  for (std::size_t i = 0; i < report.trace.steps.size(); ++i) {
    const SelectionStep& s = report.trace.steps[i];
    nlohmann::json step;
    step["step"] = i + 1;
    step["feature_index"] = s.feature_index;
    step["feature"] = s.feature_name;
    step["error"] = s.cumulative.error;
    step["false_positive"] = s.cumulative.false_positive;
    step["false_negative"] = s.cumulative.false_negative;
    if (s.sensitivity) step["sensitivity"] = *s.sensitivity;
    else step["sensitivity"] = nullptr;
    if (s.specificity) step["specificity"] = *s.specificity;
    else step["specificity"] = nullptr;
    step["reduction"] = s.reduction;
    step["forced"] = s.forced;
    step["pruned_error_bound"] = s.pruned_error_bound;
    doc["steps"].push_back(std::move(step));
  }
  return doc.dump(2) + "\n";
}

inline StopReason stop_reason_from_string(const std::string& s) {
  if (s == "reached_d") return StopReason::reached_d;
  if (s == "reached_error_target") return StopReason::reached_error_target;
  if (s == "exhausted_features") return StopReason::exhausted_features;
  if (s == "reduction_below_min") return StopReason::reduction_below_min;
  throw ValidationError("unknown stop reason: " + s);
}

inline RunReport parse_structured_report(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("cannot parse structured report: ") + e.what());
  }
  RunReport report;
  report.table_fingerprint = doc.at("fingerprint").get<std::string>();
  report.generated_at = doc.at("generated_at").get<std::string>();
  for (const auto& [key, value] : doc.at("configuration").items()) {
    report.configuration.emplace_back(key, value.get<std::string>());
  }
  report.trace.priors.p1 = doc.at("priors").at("p1").get<double>();
  report.trace.priors.p2 = doc.at("priors").at("p2").get<double>();
  report.trace.prior_error_value = doc.at("prior_error").get<double>();
  report.trace.stop_reason = stop_reason_from_string(doc.at("stop_reason").get<std::string>());
  for (const auto& step : doc.at("steps")) {
    SelectionStep s;
    s.feature_index = step.at("feature_index").get<std::size_t>();
    s.feature_name = step.at("feature").get<std::string>();
    s.cumulative.error = step.at("error").get<double>();
    s.cumulative.false_positive = step.at("false_positive").get<double>();
    s.cumulative.false_negative = step.at("false_negative").get<double>();
    if (!step.at("sensitivity").is_null()) s.sensitivity = step.at("sensitivity").get<double>();
    if (!step.at("specificity").is_null()) s.specificity = step.at("specificity").get<double>();
    s.reduction = step.at("reduction").get<double>();
    s.forced = step.at("forced").get<bool>();
    s.pruned_error_bound = step.at("pruned_error_bound").get<double>();
    report.trace.steps.push_back(std::move(s));
  }
  return report;
}

// The (c, d) cloud of the whole table for external plotting: one CSV row per
// feature with a 0/1 selection flag. When a region is given, its line
// parameters are appended as comments so the plotter can draw the
// parallelogram clipped to the unit square.
inline std::string emit_scatter(const FeatureProbabilityTable& table,
                                const std::vector<std::size_t>& selected,
                                const std::optional<NoImprovementRegion>& region = {}) {
  validate(table);
  std::vector<bool> flag(table.size(), false);
  for (std::size_t idx : selected) {
    if (idx >= table.size()) {
      throw ValidationError("selected index " + std::to_string(idx) + " out of range");
    }
    flag[idx] = true;
  }
  std::string out = "feature,c,d,selected\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table[i].name;
    out += ',';
    out += format_double(table[i].p1);
    out += ',';
    out += format_double(table[i].p2);
    out += ',';
    out += flag[i] ? '1' : '0';
    out += '\n';
  }
  if (region) {
    if (region->alpha_lo) {
      out += "# region alpha_lo=" + format_double(*region->alpha_lo) + "\n";
    }
    if (region->alpha_hi) {
      out += "# region alpha_hi=" + format_double(*region->alpha_hi) + "\n";
    }
    if (region->diagonal_only) {
      out += "# region diagonal_only=1\n";
    }
  }
  return out;
}

}  // namespace nbsel

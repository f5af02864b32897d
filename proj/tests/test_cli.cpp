#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nbsel/cli.hpp"

using namespace nbsel;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int status = -1;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  CliResult result;
  result.status = cli::cli_dispatch(std::move(args), out, err);
  result.out = out.str();
  result.err = err.str();
  return result;
}

class TempFile {
public:
  explicit TempFile(const std::string& content, const std::string& name) {
    path_ = fs::temp_directory_path() / ("nbsel_test_" + name);
    std::ofstream file(path_);
    file << content;
  }
  ~TempFile() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  std::string str() const { return path_.string(); }

private:
  fs::path path_;
};

const char* kDemoCsv =
    "feature,p1,p2\n"
    "x1,0.3,0.1\n"
    "x2,0.4,0.6\n"
    "x3,0.8,0.7\n";

const char* kMultiCsv =
    "feature,Target,AltA,AltB\n"
    "f1,0.9,0.2,0.4\n"
    "f2,0.3,0.3,0.3\n"
    "f3,0.8,0.1,0.1\n";

}  // namespace

TEST_CASE("usage errors exit 2") {
  REQUIRE(run({}).status == cli::kExitUsage);
  REQUIRE(run({"frobnicate"}).status == cli::kExitUsage);
  const CliResult bad_flag = run({"select", "--no-such-flag"});
  REQUIRE(bad_flag.status == cli::kExitUsage);
  REQUIRE_FALSE(bad_flag.err.empty());
}

TEST_CASE("help exits 0") {
  const CliResult help = run({"--help"});
  REQUIRE(help.status == cli::kExitOk);
  REQUIRE(help.out.find("select") != std::string::npos);
}

TEST_CASE("select on a two-class table") {
  TempFile input(kDemoCsv, "select.csv");
  const CliResult result =
      run({"select", "--input", input.str(), "--d", "2", "--priors", "0.5,0.5"});
  REQUIRE(result.status == cli::kExitOk);
  REQUIRE(result.out.find("step\tfeature\terror_pct") != std::string::npos);
  REQUIRE(result.out.find("1\tx1\t40.00") != std::string::npos);
  REQUIRE(result.out.find("2\tx2\t37.00") != std::string::npos);
}

TEST_CASE("select needs a stopping rule") {
  TempFile input(kDemoCsv, "nostop.csv");
  const CliResult result = run({"select", "--input", input.str()});
  REQUIRE(result.status == cli::kExitUsage);
}

TEST_CASE("select past the width cap exits 4") {
  TempFile input(kDemoCsv, "cap.csv");
  const CliResult result =
      run({"select", "--input", input.str(), "--d", "3", "--max-depth", "2"});
  REQUIRE(result.status == cli::kExitCapacity);
  REQUIRE(result.err.find("width cap") != std::string::npos);
}

TEST_CASE("select rejects bad input data with exit 3") {
  TempFile bad("feature,p1,p2\nx1,1.2,0.1\n", "bad.csv");
  const CliResult result = run({"select", "--input", bad.str(), "--d", "1"});
  REQUIRE(result.status == cli::kExitValidation);
  REQUIRE(result.err.find("x1") != std::string::npos);

  const CliResult missing = run({"select", "--input", "/absent.csv", "--d", "1"});
  REQUIRE(missing.status == cli::kExitValidation);
}

TEST_CASE("select writes structured reports that parse back") {
  TempFile input(kDemoCsv, "structured.csv");
  const CliResult result = run({"select", "--input", input.str(), "--d", "2",
                                "--format", "structured"});
  REQUIRE(result.status == cli::kExitOk);
  const RunReport report = parse_structured_report(result.out);
  REQUIRE(report.trace.steps.size() == 2);
  REQUIRE(report.trace.steps[0].feature_name == "x1");
}

TEST_CASE("select with a multi-class input collapses onto the target") {
  TempFile input(kMultiCsv, "multi.csv");
  const CliResult result = run({"select", "--input", input.str(), "--d", "1",
                                "--multiclass-target", "Target", "--format", "structured"});
  REQUIRE(result.status == cli::kExitOk);
  const RunReport report = parse_structured_report(result.out);
  // f3 has (0.8, 0.1) after averaging the alternatives; it wins the first pick
  REQUIRE(report.trace.steps[0].feature_name == "f3");

  const CliResult unknown = run({"select", "--input", input.str(), "--d", "1",
                                 "--multiclass-target", "Nope"});
  REQUIRE(unknown.status == cli::kExitValidation);
}

TEST_CASE("select honours --out") {
  TempFile input(kDemoCsv, "outfile.csv");
  const fs::path out_path = fs::temp_directory_path() / "nbsel_test_report.tsv";
  const CliResult result =
      run({"select", "--input", input.str(), "--d", "1", "--out", out_path.string()});
  REQUIRE(result.status == cli::kExitOk);
  REQUIRE(result.out.empty());
  std::ifstream file(out_path);
  std::stringstream content;
  content << file.rdbuf();
  REQUIRE(content.str().find("1\tx1\t40.00") != std::string::npos);
  fs::remove(out_path);
}

TEST_CASE("rank subcommand") {
  TempFile input(kDemoCsv, "rank.csv");
  const CliResult by_error = run({"rank", "--input", input.str()});
  REQUIRE(by_error.status == cli::kExitOk);
  REQUIRE(by_error.out.find("1\tx1\t0.39999") != std::string::npos);
  REQUIRE(by_error.out.find("2\tx2\t0.4\n") != std::string::npos);
  REQUIRE(by_error.out.find("3\tx3\t0.44999") != std::string::npos);

  const CliResult by_diff = run({"rank", "--input", input.str(), "--criterion", "absdiff"});
  REQUIRE(by_diff.status == cli::kExitOk);
  REQUIRE(by_diff.out.find("1\tx1\t0.19999") != std::string::npos);
  REQUIRE(by_diff.out.find("3\tx3\t0.10000") != std::string::npos);

  REQUIRE(run({"rank", "--input", input.str(), "--criterion", "bogus"}).status ==
          cli::kExitUsage);
}

TEST_CASE("sensitivity output is byte-identical across runs") {
  TempFile input(kDemoCsv, "sens.csv");
  const std::vector<std::string> args = {"sensitivity", "--input", input.str(),
                                         "--sigma", "0",    "--runs", "5",
                                         "--seed",  "1",    "--d",    "2"};
  const CliResult first = run(args);
  const CliResult second = run(args);
  REQUIRE(first.status == cli::kExitOk);
  REQUIRE(first.out == second.out);
  REQUIRE(first.out.find("# rank_table baseline") != std::string::npos);
  REQUIRE(first.out.find("# rank_table sigma=0") != std::string::npos);
  REQUIRE(first.out.find("# overlap k=2") != std::string::npos);
  // zero noise: the perturbed ranking matches the baseline list exactly
  REQUIRE(first.out.find("baseline|sigma=0\t2") != std::string::npos);
}

TEST_CASE("sensitivity with several sigmas emits every section") {
  TempFile input(kDemoCsv, "sens3.csv");
  const CliResult result =
      run({"sensitivity", "--input", input.str(), "--sigma", "0.1", "--sigma", "0.2",
           "--runs", "20", "--seed", "9", "--d", "2"});
  REQUIRE(result.status == cli::kExitOk);
  REQUIRE(result.out.find("# rank_table sigma=0.1") != std::string::npos);
  REQUIRE(result.out.find("# rank_table sigma=0.2") != std::string::npos);
  REQUIRE(result.out.find("sigma=0.1|sigma=0.2") != std::string::npos);
  REQUIRE(result.out.find("# union_top=") != std::string::npos);
}

TEST_CASE("region subcommand emits scatter plus region") {
  TempFile input(kDemoCsv, "region.csv");
  const CliResult result = run({"region", "--input", input.str(), "--features", "x1"});
  REQUIRE(result.status == cli::kExitOk);
  REQUIRE(result.out.find("feature,c,d,selected") != std::string::npos);
  REQUIRE(result.out.find("x1,0.3,0.1,1") != std::string::npos);
  REQUIRE(result.out.find("# region alpha_lo=") != std::string::npos);
  REQUIRE(result.out.find("# region alpha_hi=") != std::string::npos);

  const CliResult unknown = run({"region", "--input", input.str(), "--features", "zz"});
  REQUIRE(unknown.status == cli::kExitValidation);

  const CliResult both =
      run({"region", "--input", input.str(), "--features", "x1", "--d", "1"});
  REQUIRE(both.status == cli::kExitUsage);
}

TEST_CASE("region delta grid") {
  TempFile input(kDemoCsv, "delta.csv");
  const CliResult result =
      run({"region", "--input", input.str(), "--delta-grid", "4"});
  REQUIRE(result.status == cli::kExitOk);
  REQUIRE(result.out.find("# delta_grid n=4") != std::string::npos);
  REQUIRE(result.out.find("c,d,reduction") != std::string::npos);
  // the corners of the grid separate perfectly: reduction = prior error
  REQUIRE(result.out.find("0,1,0.5") != std::string::npos);
  REQUIRE(result.out.find("1,0,0.5") != std::string::npos);
}

TEST_CASE("oracle subcommand") {
  TempFile input(kDemoCsv, "oracle.csv");
  const CliResult result = run({"oracle", "--input", input.str(), "--d", "2"});
  REQUIRE(result.status == cli::kExitOk);
  REQUIRE(result.out.find("subset\tx1,x2") != std::string::npos);
  REQUIRE(result.out.find("error\t0.37") != std::string::npos);

  const CliResult over = run({"oracle", "--input", input.str(), "--d", "2",
                              "--max-evals", "2"});
  REQUIRE(over.status == cli::kExitCapacity);
}

TEST_CASE("pathology subcommand") {
  const CliResult exhausted =
      run({"pathology", "--kind", "nonmonotone-reduction", "--grid-step", "0", "--budget", "0"});
  REQUIRE(exhausted.status == cli::kExitOk);
  REQUIRE(exhausted.out.find("found\t0") != std::string::npos);
  REQUIRE(exhausted.out.find("status\texhausted") != std::string::npos);

  const CliResult found =
      run({"pathology", "--kind", "individually-best-pair-not-best-pair", "--grid-step",
           "0.05", "--budget", "250000"});
  REQUIRE(found.status == cli::kExitOk);
  REQUIRE(found.out.find("found\t1") != std::string::npos);
  REQUIRE(found.out.find("best_pair\t") != std::string::npos);
  REQUIRE(found.out.find("individually_best_pair\t") != std::string::npos);

  REQUIRE(run({"pathology", "--kind", "nope"}).status == cli::kExitUsage);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbtk/io.hpp"
#include "support/synthetic.hpp"

#ifndef SBTK_CLI_PATH
#error "SBTK_CLI_PATH must be defined"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(SBTK_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  char buf[4096];
  while (fgets(buf, sizeof(buf), pipe)) output += buf;
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), output};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("sbtk_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// file contents with timing lines removed
std::string strip_timing(const std::string& text) {
  std::stringstream in(text), out;
  std::string line;
  while (std::getline(in, line))
    if (line.find("_seconds") == std::string::npos) out << line << "\n";
  return out.str();
}

void write_two_tone_csv(const fs::path& path, int n, int q, double noise, std::uint64_t seed) {
  const synthetic::TwoTone d = synthetic::two_tone(n, q, noise, seed);
  std::ofstream os(path);
  os.precision(17);
  os << "t,value\n";
  for (int i = 0; i < n; ++i) os << d.t(i, 0) << "," << d.y[i] << "\n";
}

void write_arcs_csv(const fs::path& path, int n, std::uint64_t seed) {
  const synthetic::TwoArcs d = synthetic::two_arcs(n, 0.08, seed);
  std::ofstream os(path);
  os.precision(17);
  os << "x1,x2,label\n";
  for (int i = 0; i < n; ++i) os << d.X(i, 0) << "," << d.X(i, 1) << "," << d.y[i] << "\n";
}

}  // namespace

TEST_CASE("help lists every subcommand") {
  const RunResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  for (const char* cmd : {"blr", "gp-fit", "gp-predict", "cpd-fit", "cpd-complete",
                          "lwta-train", "lwta-prune", "ibp-sample"})
    CHECK(r.output.find(cmd) != std::string::npos);
}

TEST_CASE("ibp-sample writes a result document and draw files") {
  const fs::path dir = fresh_dir("ibp");
  const RunResult r =
      run_cli("--out " + dir.string() + " --seed 3 ibp-sample --alpha 2 --rows 200 --jmax 40");
  CHECK(r.exit_code == 0);
  const json doc = json::parse(slurp(dir / "result.json"));
  CHECK(doc.at("schema_version") == 1);
  CHECK(doc.at("results").at("expected_row_sum").get<double>() == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(fs::exists(dir / "draw.csv"));
  CHECK(fs::exists(dir / "z.csv"));
}

TEST_CASE("exit statuses partition the failure classes") {
  const fs::path dir = fresh_dir("exits");

  SUBCASE("missing input file is a validation failure") {
    const RunResult r = run_cli("--out " + dir.string() + " blr --data no_such_file.csv");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("validation") != std::string::npos);
  }
  SUBCASE("malformed csv is a parse failure naming the position") {
    const fs::path bad = dir / "bad.csv";
    std::ofstream(bad) << "t,value\n1,2\nx,3\n";
    const RunResult r = run_cli("--out " + dir.string() + " gp-fit --data " + bad.string() +
                                " --holdout 0 --Q 4");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find(":3:") != std::string::npos);  // line 3
    CHECK(fs::exists(dir / "error.json"));
    const json err = json::parse(slurp(dir / "error.json"));
    CHECK(err.at("error").at("class") == "parse");
  }
  SUBCASE("unknown flags are a parse failure") {
    const RunResult r = run_cli("gp-fit --definitely-not-a-flag 2");
    CHECK(r.exit_code == 2);
  }
  SUBCASE("solver non-convergence still writes partial results") {
    const fs::path ts = dir / "tone.csv";
    write_two_tone_csv(ts, 60, 16, 0.3, 5);
    const RunResult r = run_cli("--out " + dir.string() + " --seed 1 gp-fit --data " +
                                ts.string() +
                                " --holdout 10 --Q 16 --solver mm --max-iters 2 --tol 1e-14");
    CHECK(r.exit_code == 4);
    CHECK(fs::exists(dir / "result.json"));
    const json doc = json::parse(slurp(dir / "result.json"));
    CHECK(doc.at("results").at("converged") == false);
  }
}

TEST_CASE("blr command fits and reports pruning") {
  const fs::path dir = fresh_dir("blr");
  // y = 3 x1, x2 irrelevant
  const fs::path csv = dir / "reg.csv";
  {
    std::ofstream os(csv);
    os << "x1,x2,y\n";
    sbtk::Rng rng(5);
    for (int i = 0; i < 60; ++i) {
      const double a = rng.normal(), b = rng.normal();
      os << a << "," << b << "," << 3.0 * a + 0.02 * rng.normal() << "\n";
    }
  }
  const RunResult r = run_cli("--out " + dir.string() + " blr --data " + csv.string());
  CHECK(r.exit_code == 0);
  const json doc = json::parse(slurp(dir / "result.json"));
  CHECK(doc.at("results").at("pruned")[0] == false);
  CHECK(doc.at("results").at("pruned")[1] == true);
  CHECK(fs::exists(dir / "trace.csv"));
}

TEST_CASE("gp-fit then gp-predict round trip with the paper grid configuration") {
  const fs::path dir = fresh_dir("gp");
  const fs::path ts = dir / "tone.csv";
  write_two_tone_csv(ts, 120, 40, 0.1, 55);

  const RunResult fit =
      run_cli("--out " + dir.string() + " --seed 9 gp-fit --data " + ts.string() +
              " --holdout 20 --Q 500 --sigma 0.001 --solver seq --max-iters 8 --tol 1e-4");
  CHECK(fit.exit_code == 0);
  const json doc = json::parse(slurp(dir / "result.json"));
  CHECK(doc.at("results").at("holdout").at("mse").get<double>() < 0.2);
  CHECK(fs::exists(dir / "model.json"));
  CHECK(fs::exists(dir / "predictions.csv"));
  // model document re-parses and drives prediction
  const json model = json::parse(slurp(dir / "model.json"));
  CHECK(model.at("kernel").at("variant") == "grid_sm");

  const fs::path dir2 = fresh_dir("gp_predict");
  const RunResult pred = run_cli("--out " + dir2.string() + " gp-predict --model " +
                                 (dir / "model.json").string() + " --data " + ts.string() +
                                 " --holdout 20");
  CHECK(pred.exit_code == 0);
  const json pdoc = json::parse(slurp(dir2 / "result.json"));
  CHECK(pdoc.at("results").at("mse").get<double>() < 0.2);
}

TEST_CASE("fit commands are deterministic given the seed") {
  SUBCASE("gp-fit") {
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    const fs::path ts = a / "tone.csv";
    write_two_tone_csv(ts, 80, 20, 0.15, 7);
    const std::string args = " --seed 11 gp-fit --data " + ts.string() +
                             " --holdout 10 --Q 20 --solver mm --max-iters 25";
    CHECK(run_cli("--out " + a.string() + args).exit_code <= 4);
    CHECK(run_cli("--out " + b.string() + args).exit_code <= 4);
    CHECK(strip_timing(slurp(a / "result.json")) == strip_timing(slurp(b / "result.json")));
    CHECK(slurp(a / "model.json") == slurp(b / "model.json"));
    CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
    CHECK(slurp(a / "predictions.csv") == slurp(b / "predictions.csv"));
  }
  SUBCASE("cpd-fit") {
    const fs::path a = fresh_dir("det_c"), b = fresh_dir("det_d");
    const synthetic::SyntheticTensor synth =
        synthetic::random_cp_tensor({8, 8, 8}, 2, 20.0, 0.9, 13);
    sbtk::write_tensor(synth.observed, (a / "tensor.txt").string());
    const std::string args =
        " --seed 2 cpd-fit --data " + (a / "tensor.txt").string() + " --rank 4";
    CHECK(run_cli("--out " + a.string() + args).exit_code == 0);
    CHECK(run_cli("--out " + b.string() + args).exit_code == 0);
    CHECK(strip_timing(slurp(a / "result.json")) == strip_timing(slurp(b / "result.json")));
  }
  SUBCASE("lwta-train") {
    const fs::path a = fresh_dir("det_e"), b = fresh_dir("det_f");
    write_arcs_csv(a / "arcs.csv", 120, 3);
    const std::string args = " --seed 5 lwta-train --data " + (a / "arcs.csv").string() +
                             " --arch 4x2 --epochs 5 --lr 0.02";
    CHECK(run_cli("--out " + a.string() + args).exit_code == 0);
    CHECK(run_cli("--out " + b.string() + args).exit_code == 0);
    CHECK(strip_timing(slurp(a / "result.json")) == strip_timing(slurp(b / "result.json")));
    CHECK(slurp(a / "model.bin") == slurp(b / "model.bin"));
  }
}

TEST_CASE("environment variable supplies the default seed") {
  const fs::path a = fresh_dir("env_a"), b = fresh_dir("env_b");
  const RunResult r1 = run_cli("--out " + a.string() + " --seed 123 ibp-sample --alpha 1");
  REQUIRE(r1.exit_code == 0);
  const std::string cmd = "SBTK_SEED=123 " + std::string(SBTK_CLI_PATH) + " --out " +
                          b.string() + " ibp-sample --alpha 1 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(strip_timing(slurp(a / "result.json")) == strip_timing(slurp(b / "result.json")));
}

TEST_CASE("cpd-fit recovers the rank and cpd-complete reproduces observed data") {
  const fs::path dir = fresh_dir("cpd");
  const synthetic::SyntheticTensor synth =
      synthetic::random_cp_tensor({10, 10, 10}, 2, 25.0, 1.0, 21);
  sbtk::write_tensor(synth.observed, (dir / "tensor.txt").string());

  const RunResult fit = run_cli("--out " + dir.string() + " --seed 4 cpd-fit --data " +
                                (dir / "tensor.txt").string() + " --rank 5");
  CHECK(fit.exit_code == 0);
  const json doc = json::parse(slurp(dir / "result.json"));
  CHECK(doc.at("results").at("recovered_rank") == 2);

  const RunResult comp = run_cli("--out " + dir.string() + " --seed 4 cpd-complete --data " +
                                 (dir / "tensor.txt").string() + " --rank 5");
  CHECK(comp.exit_code == 0);
  const sbtk::PartialTensor mean = sbtk::read_tensor((dir / "completed.txt").string());
  const sbtk::PartialTensor variance = sbtk::read_tensor((dir / "variance.txt").string());
  CHECK(mean.observed() == 1000);
  CHECK(variance.observed() == 1000);
  // completion of a fully observed tensor reproduces the data up to noise level
  double err = 0.0;
  for (int o = 0; o < synth.observed.observed(); ++o) {
    // completed.txt is dense in row-major index order; locate via flat index
    std::int64_t flat = 0;
    for (int p = 0; p < 3; ++p) flat = flat * 10 + synth.observed.indices(o, p);
    err += std::pow(mean.values[flat] - synth.observed.values[o], 2.0);
  }
  CHECK(err / synth.observed.values.squaredNorm() < 0.02);
}

TEST_CASE("lwta-train then lwta-prune with bit report") {
  const fs::path dir = fresh_dir("lwta");
  write_arcs_csv(dir / "arcs.csv", 400, 99);
  const RunResult train = run_cli("--out " + dir.string() + " --seed 7 lwta-train --data " +
                                  (dir / "arcs.csv").string() +
                                  " --arch 8x2,8x2 --epochs 60 --lr 0.02 --holdout-frac 0.25");
  CHECK(train.exit_code == 0);
  const json doc = json::parse(slurp(dir / "result.json"));
  CHECK(doc.at("results").at("holdout_accuracy").get<double>() > 0.8);

  const RunResult prune = run_cli("--out " + dir.string() + " --seed 7 lwta-prune --model " +
                                  (dir / "model.bin").string() + " --tau 0.01 --data " +
                                  (dir / "arcs.csv").string());
  CHECK(prune.exit_code == 0);
  const json pdoc = json::parse(slurp(dir / "result.json"));
  CHECK(pdoc.at("results").at("bit_report").size() == 3);  // 2 layers + readout
  CHECK(pdoc.at("results").at("accuracy_after").get<double>() >=
        pdoc.at("results").at("accuracy_before").get<double>() - 0.02);
  CHECK(fs::exists(dir / "pruned.bin"));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>

#include "coupon/cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace coupon;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run_cli(std::move(args), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json manifest_without_timestamp(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(slurp(path));
  j.erase("created_at");
  return j;
}

// One small end-to-end pipeline per directory; reused across cases.
void small_pipeline(const std::filesystem::path& dir) {
  REQUIRE(run({"gen", "--out", dir.string(), "--samples", "600", "--seed",
               "7"}).code == cli::kExitOk);
  REQUIRE(run({"train", "--out", dir.string(), "--variant", "lr-baseline",
               "--epochs", "2"}).code == cli::kExitOk);
  REQUIRE(run({"allocate", "--out", dir.string(), "--model",
               (dir / "model-lr-baseline.bin").string(), "--cohort", "400",
               "--budget", "80", "--sweep", "0,40,80,160"})
              .code == cli::kExitOk);
  REQUIRE(run({"report", "--out", dir.string()}).code == cli::kExitOk);
}

}  // namespace

TEST_CASE("help is success; missing or unknown input is a usage error") {
  const auto help = run({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("gen") != std::string::npos);
  CHECK(help.out.find("allocate") != std::string::npos);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"gen", "--no-such-flag"}).code == cli::kExitUsage);
}

TEST_CASE("gen writes the dataset bundle and a manifest") {
  const auto dir = test::scratch_dir("cli_gen");
  const auto r = run({"gen", "--out", dir.string(), "--samples", "300"});
  CHECK(r.code == cli::kExitOk);
  for (const char* name :
       {"dataset.jsonl", "truth.csv", "population.json", "manifest.json"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(dir / name));
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("schema") == "manifest/v1");
  CHECK(manifest.at("samples") == 300);
  CHECK(manifest.at("seed") == 7);
  const double pay = manifest.at("positive_rate").get<double>();
  CHECK(pay > 0.03);
  CHECK(pay < 0.3);
  CHECK(run({"gen", "--out", dir.string(), "--samples", "0"}).code ==
        cli::kExitUsage);
}

TEST_CASE("gen is byte-reproducible apart from the manifest timestamp") {
  const auto a = test::scratch_dir("cli_gen_a");
  const auto b = test::scratch_dir("cli_gen_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(run({"gen", "--out", dir.string(), "--samples", "250", "--seed",
                 "21"}).code == cli::kExitOk);
  }
  for (const char* name : {"dataset.jsonl", "truth.csv", "population.json"}) {
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(manifest_without_timestamp(a / "manifest.json") ==
        manifest_without_timestamp(b / "manifest.json"));
}

TEST_CASE("train rejects unknown variants by name and missing datasets") {
  const auto dir = test::scratch_dir("cli_train_err");
  const auto bad = run({"train", "--out", dir.string(), "--variant", "mlp"});
  CHECK(bad.code == cli::kExitUsage);
  CHECK(bad.err.find("mlp") != std::string::npos);
  CHECK(bad.err.find("iidn") != std::string::npos);
  CHECK(bad.err.find("lr-baseline") != std::string::npos);

  const auto missing =
      run({"train", "--out", dir.string(), "--variant", "lr-baseline"});
  CHECK(missing.code == cli::kExitIo);
  CHECK(missing.err.find("dataset.jsonl") != std::string::npos);
}

TEST_CASE("training writes model, metrics and loss curve; reruns are stable") {
  const auto a = test::scratch_dir("cli_train_a");
  const auto b = test::scratch_dir("cli_train_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(run({"gen", "--out", dir.string(), "--samples", "600"}).code ==
            cli::kExitOk);
    const auto r = run({"train", "--out", dir.string(), "--variant",
                        "lr-baseline", "--epochs", "2"});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(r.out.find("lr-baseline") != std::string::npos);
  }
  for (const char* name : {"model-lr-baseline.bin", "metrics-lr-baseline.csv",
                           "loss-curve-lr-baseline.csv"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }
  const auto metrics = slurp(a / "metrics-lr-baseline.csv");
  CHECK(metrics.find("# schema: metrics/v1") != std::string::npos);
  CHECK(metrics.find("lr-baseline") != std::string::npos);
}

TEST_CASE("zero-epoch training still writes a loadable, stable model") {
  const auto a = test::scratch_dir("cli_epoch0_a");
  const auto b = test::scratch_dir("cli_epoch0_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(run({"gen", "--out", dir.string(), "--samples", "400"}).code ==
            cli::kExitOk);
    REQUIRE(run({"train", "--out", dir.string(), "--variant", "lr-baseline",
                 "--epochs", "0"}).code == cli::kExitOk);
  }
  // Untouched initial parameters: identical across runs, and the loss curve
  // carries no epochs.
  CHECK(slurp(a / "model-lr-baseline.bin") == slurp(b / "model-lr-baseline.bin"));
  std::ifstream curve(a / "loss-curve-lr-baseline.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(curve, line)) {
    if (!line.empty() && line[0] != '#' && line.find("epoch") != 0) rows++;
  }
  CHECK(rows == 0);
}

TEST_CASE("allocate requires a trained model and names the gap") {
  const auto dir = test::scratch_dir("cli_alloc_err");
  REQUIRE(run({"gen", "--out", dir.string(), "--samples", "300"}).code ==
          cli::kExitOk);
  const auto r = run({"allocate", "--out", dir.string(), "--cohort", "200"});
  CHECK(r.code == cli::kExitIo);
  CHECK(r.err.find("model-iidn.bin") != std::string::npos);
  CHECK(r.err.find("train") != std::string::npos);
}

TEST_CASE("the full pipeline emits every artifact and reproduces bytewise") {
  const auto a = test::scratch_dir("cli_pipe_a");
  const auto b = test::scratch_dir("cli_pipe_b");
  small_pipeline(a);
  small_pipeline(b);
  for (const char* name :
       {"dataset.jsonl", "truth.csv", "population.json",
        "model-lr-baseline.bin", "metrics-lr-baseline.csv",
        "loss-curve-lr-baseline.csv", "dual.json", "decisions.csv", "ab.csv",
        "monotonicity.csv", "sweep.csv", "report.txt"}) {
    CAPTURE(name);
    REQUIRE(std::filesystem::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }
  CHECK(manifest_without_timestamp(a / "manifest.json") ==
        manifest_without_timestamp(b / "manifest.json"));
  // Spend in the decision log never exceeds the budget (80 units).
  std::ifstream log(a / "decisions.csv");
  std::string line;
  std::getline(log, line);
  CHECK(line == "# schema: decisions/v1");
  while (std::getline(log, line)) {
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || line.find("arrival") == 0) continue;
    CHECK(std::stoll(line.substr(comma + 1)) <= 8000);
  }
}

TEST_CASE("report re-renders identical bytes and fails cleanly when empty") {
  const auto dir = test::scratch_dir("cli_report");
  small_pipeline(dir);
  const auto first = slurp(dir / "report.txt");
  REQUIRE(run({"report", "--out", dir.string()}).code == cli::kExitOk);
  CHECK(slurp(dir / "report.txt") == first);
  CHECK(first.find("lr-baseline") != std::string::npos);
  CHECK(first.find("mckp") != std::string::npos);

  const auto empty = test::scratch_dir("cli_report_empty");
  const auto r = run({"report", "--out", empty.string()});
  CHECK(r.code == cli::kExitIo);
}

TEST_CASE("config files feed defaults; explicit flags win") {
  const auto dir = test::scratch_dir("cli_config");
  const auto cfg = dir / "run.ini";
  std::ofstream(cfg) << "[gen]\nsamples=250\nseed=31\n";
  REQUIRE(run({"gen", "--config", cfg.string(), "--out", dir.string()}).code ==
          cli::kExitOk);
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("samples") == 250);
  CHECK(manifest.at("seed") == 31);

  REQUIRE(run({"gen", "--config", cfg.string(), "--out", dir.string(),
               "--samples", "120"}).code == cli::kExitOk);
  manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest.at("samples") == 120);
  CHECK(manifest.at("seed") == 31);

  CHECK(run({"gen", "--config", (dir / "absent.ini").string()}).code ==
        cli::kExitUsage);
}

// Exercises the installed binary end to end: exit codes, file outputs, and
// determinism of the reproducibility mode.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#ifndef DIPLOMAT_BIN
#error "DIPLOMAT_BIN must point at the CLI binary"
#endif

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  std::string cmd = std::string(DIPLOMAT_BIN) + " " + args + " > " + stdout_file + " 2>/dev/null";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

void write_tiny_config(const std::string& path) {
  std::ofstream(path) << R"({
    "format": "diplomat-config/1",
    "seed": 7,
    "net": {"d": 8, "heads": 2, "d_msg": 4},
    "ppo": {"steps_per_iteration": 64, "minibatch_size": 32, "epochs": 1},
    "curriculum": {"stages": [{"generator": {"agents": 2, "issues": 1, "values": [5]}}]},
    "training": {"total_steps": 128},
    "evaluation": {"episodes": 8}
  })";
}

void write_tiny_scenario(const std::string& path) {
  std::ofstream(path) << R"({
    "format": "diplomat-scenario/1",
    "num_agents": 2, "seed": 1, "budgets": [1, 2, 4, 2, 3],
    "issues": [
      {"id": 0, "num_values": 3, "value_grid": [0.0, 0.5, 1.0]},
      {"id": 1, "num_values": 3, "value_grid": [0.0, 0.5, 1.0]}
    ],
    "profiles": [
      {"agent_id": 0, "weights": [0.6, 0.4],
       "valuations": [[0.0, 0.5, 1.0], [1.0, 0.5, 0.0]], "reservation": 0.2},
      {"agent_id": 1, "weights": [0.3, 0.7],
       "valuations": [[1.0, 0.5, 0.0], [0.0, 0.5, 1.0]], "reservation": 0.2}
    ]
  })";
}

}  // namespace

TEST_CASE("--help exits 0 on every subcommand") {
  CHECK(run("--help") == 0);
  for (const char* sub : {"train", "evaluate", "simulate", "oracle", "ablate"})
    CHECK(run(std::string(sub) + " --help") == 0);
}

TEST_CASE("unknown subcommand and malformed config exit 2") {
  TempDir tmp("diplomat_cli_err");
  CHECK(run("frobnicate") == 2);
  CHECK(run("train") == 2);  // missing required --config
  std::ofstream(tmp / "bad.json") << "{ not json";
  CHECK(run("train --config " + (tmp / "bad.json")) == 2);
  std::ofstream(tmp / "field.json") << R"({"ppo": {"clip": 7}})";
  CHECK(run("train --config " + (tmp / "field.json")) == 2);
}

TEST_CASE("train then evaluate produce the declared artifacts") {
  TempDir tmp("diplomat_cli_train");
  write_tiny_config(tmp / "cfg.json");
  CHECK(run("train --config " + (tmp / "cfg.json") + " --out " + (tmp / "run")) == 0);
  CHECK(fs::exists(tmp / "run/final.ckpt"));
  CHECK(fs::exists(tmp / "run/training_log.jsonl"));

  CHECK(run("evaluate --config " + (tmp / "cfg.json") + " --checkpoint " +
            (tmp / "run/final.ckpt") + " --out " + (tmp / "eval") + " --seed 3") == 0);
  CHECK(fs::exists(tmp / "eval/episodes.csv"));
  CHECK(fs::exists(tmp / "eval/summary.json"));
  nlohmann::json j;
  std::ifstream(tmp / "eval/summary.json") >> j;
  CHECK(j["format"] == "diplomat-summary/1");
  CHECK(j["episodes"] == 8);
}

TEST_CASE("workers 1 seed 7 twice: byte-identical logs, checkpoints, CSVs") {
  TempDir tmp("diplomat_cli_det");
  write_tiny_config(tmp / "cfg.json");
  for (const char* dir : {"a", "b"}) {
    CHECK(run("train --config " + (tmp / "cfg.json") + " --workers 1 --seed 7 --out " +
              (tmp / dir)) == 0);
    CHECK(run("evaluate --config " + (tmp / "cfg.json") + " --checkpoint " +
              (tmp / dir) + "/final.ckpt --workers 1 --seed 7 --out " + (tmp / dir) +
              "/eval") == 0);
  }
  CHECK(slurp(tmp / "a/training_log.jsonl") == slurp(tmp / "b/training_log.jsonl"));
  CHECK(slurp(tmp / "a/final.ckpt") == slurp(tmp / "b/final.ckpt"));
  CHECK(slurp(tmp / "a/eval/episodes.csv") == slurp(tmp / "b/eval/episodes.csv"));
  CHECK(slurp(tmp / "a/eval/summary.json") == slurp(tmp / "b/eval/summary.json"));
  CHECK(!slurp(tmp / "a/training_log.jsonl").empty());
  CHECK(!slurp(tmp / "a/eval/episodes.csv").empty());
}

TEST_CASE("DIPLOMAT_OUT overrides --out") {
  TempDir tmp("diplomat_cli_env");
  write_tiny_config(tmp / "cfg.json");
  std::string cmd = "DIPLOMAT_OUT=" + (tmp / "envout") + " " + DIPLOMAT_BIN + " train --config " +
                    (tmp / "cfg.json") + " --out " + (tmp / "flagout") + " >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(tmp / "envout/final.ckpt"));
  CHECK(!fs::exists(tmp / "flagout"));
}

TEST_CASE("oracle reports deal count and pareto front; refuses huge spaces") {
  TempDir tmp("diplomat_cli_oracle");
  write_tiny_scenario(tmp / "sc.json");
  std::string out = tmp / "oracle.txt";
  CHECK(run("oracle --scenario " + (tmp / "sc.json"), out) == 0);
  std::string text = slurp(out);
  CHECK(text.find("9 deals") != std::string::npos);
  CHECK(text.find("pareto front") != std::string::npos);

  // 12 issues x 12 values > enumeration limit -> exit 4
  nlohmann::json sc;
  std::ifstream(tmp / "sc.json") >> sc;
  sc["issues"] = nlohmann::json::array();
  std::vector<double> grid;
  for (int k = 0; k < 12; ++k) grid.push_back(k / 11.0);
  for (int m = 0; m < 12; ++m)
    sc["issues"].push_back({{"id", m}, {"num_values", 12}, {"value_grid", grid}});
  for (auto& p : sc["profiles"]) {
    std::vector<double> w(12, 1.0 / 12);
    p["weights"] = w;
    std::vector<std::vector<double>> vals(12, grid);
    p["valuations"] = vals;
  }
  std::ofstream(tmp / "big.json") << sc.dump();
  CHECK(run("oracle --scenario " + (tmp / "big.json")) == 4);
}

TEST_CASE("simulate: two yielding conceders end in agreement") {
  TempDir tmp("diplomat_cli_sim");
  write_tiny_scenario(tmp / "sc.json");
  std::string out = tmp / "transcript.txt";
  CHECK(run("simulate --scenario " + (tmp / "sc.json") +
            " --agents conceder:2 conceder:2 --seed 5", out) == 0);
  std::string text = slurp(out);
  auto last = text.find_last_of('\n', text.size() - 2);
  std::string final_line = text.substr(last + 1);
  CHECK(final_line.find("\"outcome\":\"agreement\"") != std::string::npos);
  // deterministic under the seed
  CHECK(run("simulate --scenario " + (tmp / "sc.json") +
            " --agents conceder:2 conceder:2 --seed 5", tmp / "again.txt") == 0);
  CHECK(slurp(tmp / "again.txt") == text);
}

TEST_CASE("ablate runs the named variants and rejects unknown flags") {
  TempDir tmp("diplomat_cli_ablate");
  write_tiny_config(tmp / "cfg.json");
  std::string out = tmp / "ablate.json";
  CHECK(run("ablate --config " + (tmp / "cfg.json") + " --flags full,no-shaping --out " +
            (tmp / "runs"), out) == 0);
  nlohmann::json j;
  std::ifstream(out) >> j;
  REQUIRE(j.is_array());
  REQUIRE(j.size() == 2);
  CHECK(j[0]["flag"] == "full");
  CHECK(j[1]["flag"] == "no-shaping");
  CHECK(run("ablate --config " + (tmp / "cfg.json") + " --flags bogus") == 2);
}

#include <filesystem>
#include <fstream>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "ipd/cli.hpp"
#include "test_support.hpp"

using namespace ipd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ipd_cli_" + std::to_string(Catch::rngSeed()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "ipd");
  return cli::run_command(args);
}

}  // namespace

TEST_CASE("baseline subcommand reproduces the classic scores") {
  TempDir tmp;
  const fs::path json = tmp.path / "baseline.json";
  const fs::path csv = tmp.path / "bouts.csv";
  REQUIRE(run({"baseline", "--bouts", "6", "--json", json.string(), "--csv",
               csv.string()}) == 0);
  const auto j = nlohmann::json::parse(slurp(json));
  REQUIRE(j.at("scores").at("tit_for_tat") == 59);
  REQUIRE(j.at("scores").at("tit_for_two_tats") == 58);
  REQUIRE(j.at("scores").at("grudge") == 59);
  REQUIRE(j.at("scores").at("cooperator") == 54);
  REQUIRE(j.at("scores").at("defector") == 64);
  REQUIRE(j.at("winner") == "defector");
  REQUIRE(j.at("pot") == 294);
  std::istringstream is(slurp(csv));
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  REQUIRE(lines == 61);  // header + 10 matches x 6 bouts
}

TEST_CASE("train produces agent, curve, config and meta files deterministically") {
  TempDir tmp;
  const fs::path out1 = tmp.path / "run1";
  const fs::path out2 = tmp.path / "run2";
  const std::vector<std::string> base = {
      "train",        "--bouts",    "3",  "--episodes", "120", "--opponents",
      "tit_for_tat,defector",       "--seed",     "9"};
  auto with_dir = [&](const fs::path& dir) {
    std::vector<std::string> args = base;
    args.push_back("--output-dir");
    args.push_back(dir.string());
    return args;
  };
  REQUIRE(run(with_dir(out1)) == 0);
  REQUIRE(run(with_dir(out2)) == 0);
  for (const char* name : {"agent.json", "training.csv", "config.json", "run_meta.json"})
    REQUIRE(fs::exists(out1 / name));
  // byte-identical outputs apart from the metadata side file and the
  // config echo (whose output_dir naturally differs between the two runs)
  REQUIRE(slurp(out1 / "agent.json") == slurp(out2 / "agent.json"));
  REQUIRE(slurp(out1 / "training.csv") == slurp(out2 / "training.csv"));

  std::istringstream is(slurp(out1 / "training.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  REQUIRE(lines == 121);  // header + one row per episode

  SECTION("saved agent loads and evaluates") {
    const fs::path ev = tmp.path / "eval.json";
    REQUIRE(run({"evaluate", "--agent", (out1 / "agent.json").string(), "--opponents",
                 "tit_for_tat,defector", "--json", ev.string()}) == 0);
    const auto j = nlohmann::json::parse(slurp(ev));
    REQUIRE(j.contains("scores"));
    REQUIRE(j.at("scores").contains("learner"));
  }
  SECTION("coverage reports visited over possible") {
    const fs::path cov = tmp.path / "cov.json";
    REQUIRE(run({"coverage", "--agent", (out1 / "agent.json").string(), "--json",
                 cov.string()}) == 0);
    const auto j = nlohmann::json::parse(slurp(cov));
    REQUIRE(j.at("possible") == 21);  // 1 + 4 + 16 for n=3
    REQUIRE(j.at("visited").get<long long>() > 0);
  }
}

TEST_CASE("config file drives training and flags override it") {
  TempDir tmp;
  const fs::path cfg_path = tmp.path / "cfg.json";
  {
    std::ofstream os(cfg_path);
    os << R"({"bouts":2,"episodes":40,"opponents":["defector"],"seed":4,
              "output_dir":")" << (tmp.path / "from_config").string() << R"("})";
  }
  REQUIRE(run({"train", "--config", cfg_path.string()}) == 0);
  REQUIRE(fs::exists(tmp.path / "from_config" / "agent.json"));

  // --output-dir flag wins over the file value
  REQUIRE(run({"train", "--config", cfg_path.string(), "--output-dir",
               (tmp.path / "flag_dir").string()}) == 0);
  REQUIRE(fs::exists(tmp.path / "flag_dir" / "agent.json"));

  SECTION("unknown config keys fail with a nonzero exit") {
    const fs::path bad = tmp.path / "bad.json";
    std::ofstream os(bad);
    os << R"({"boutz":2})";
    os.close();
    REQUIRE(run({"train", "--config", bad.string()}) == 1);
  }
}

TEST_CASE("train-team writes labeled master and servant agents") {
  TempDir tmp;
  const fs::path out = tmp.path / "team";
  REQUIRE(run({"train-team", "--bouts", "2", "--episodes", "60",
               "--alternation-block", "10", "--opponents", "cooperator", "--seed", "5",
               "--output-dir", out.string()}) == 0);
  for (const char* name : {"master.json", "servant.json", "training.csv", "eval.json"})
    REQUIRE(fs::exists(out / name));
  const auto eval = nlohmann::json::parse(slurp(out / "eval.json"));
  REQUIRE(eval.contains("team_won"));
  REQUIRE(eval.contains("master"));

  SECTION("team evaluation from the saved pair") {
    REQUIRE(run({"evaluate", "--agent", (out / "master.json").string(), "--agent",
                 (out / "servant.json").string(), "--opponents", "cooperator"}) == 0);
  }
}

TEST_CASE("train-team --regimes fans out seeds into subdirectories") {
  TempDir tmp;
  const fs::path out = tmp.path / "regimes";
  REQUIRE(run({"train-team", "--bouts", "2", "--episodes", "30",
               "--alternation-block", "10", "--opponents", "cooperator", "--seed", "100",
               "--regimes", "3", "--output-dir", out.string()}) == 0);
  for (const char* name : {"regime_000", "regime_001", "regime_002"}) {
    REQUIRE(fs::exists(out / name / "master.json"));
    REQUIRE(fs::exists(out / name / "servant.json"));
  }
  // distinct seeds recorded per regime
  const auto c0 = nlohmann::json::parse(slurp(out / "regime_000" / "config.json"));
  const auto c2 = nlohmann::json::parse(slurp(out / "regime_002" / "config.json"));
  REQUIRE(c0.at("seed") == 100);
  REQUIRE(c2.at("seed") == 102);
}

TEST_CASE("grid emits one row per pairing and bout") {
  TempDir tmp;
  const fs::path out = tmp.path / "grid.csv";
  REQUIRE(run({"grid", "--bouts", "6", "--out", out.string()}) == 0);
  std::istringstream is(slurp(out));
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  REQUIRE(lines == 61);  // header + 10 pairings x 6 bouts
}

TEST_CASE("crosspair scans regime directories and reports both conventions") {
  TempDir tmp;
  const fs::path regimes = tmp.path / "regimes";
  const QTable master = test::make_policy_table(6, test::synthetic_master_policy);
  const QTable servant = test::make_policy_table(6, test::synthetic_servant_policy);
  fs::create_directories(regimes / "r0");
  AgentFile m{kAgentFormatVersion, 0, 0, PayoffMatrix{}, LearningSchedule{}, master};
  AgentFile s{kAgentFormatVersion, 0, 0, PayoffMatrix{}, LearningSchedule{}, servant};
  save_agent(m, regimes / "r0" / "master.json");
  save_agent(s, regimes / "r0" / "servant.json");

  const fs::path matrix = tmp.path / "matrix.csv";
  const fs::path summary = tmp.path / "summary.json";
  REQUIRE(run({"crosspair", "--dir", regimes.string(), "--out", matrix.string(),
               "--json", summary.string()}) == 0);
  const auto j = nlohmann::json::parse(slurp(summary));
  REQUIRE(j.at("frac_at_least_one_with_self") == 1.0);
  REQUIRE(j.at("frac_both_with_self") == 1.0);
  std::istringstream is(slurp(matrix));
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  REQUIRE(lines == 2);  // header + one cell

  SECTION("empty directory is an error") {
    fs::create_directories(tmp.path / "empty");
    REQUIRE(run({"crosspair", "--dir", (tmp.path / "empty").string()}) == 1);
  }
}

TEST_CASE("missing files and bad flags exit nonzero") {
  REQUIRE(run({"evaluate", "--agent", "/nonexistent/agent.json"}) == 1);
  REQUIRE(run({"coverage", "--agent", "/nonexistent/agent.json"}) == 1);
  REQUIRE(run({"train", "--reward-mode", "bogus", "--episodes", "1"}) == 1);
  REQUIRE(run({"no_such_command"}) != 0);
}

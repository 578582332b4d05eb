#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipd/analysis.hpp"
#include "ipd/persistence.hpp"
#include "ipd/qlearn.hpp"
#include "ipd/tournament.hpp"

namespace ipd::cli {

namespace fs = std::filesystem;

inline std::vector<ClassicKind> parse_opponents(const std::vector<std::string>& tokens) {
  std::vector<ClassicKind> kinds;
  for (const std::string& t : tokens) kinds.push_back(classic_from_token(t));
  return kinds;
}

inline nlohmann::json tournament_json(const TournamentResult& r) {
  nlohmann::json scores = nlohmann::json::object();
  nlohmann::json effective = nlohmann::json::object();
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    scores[r.ids[i]] = r.raw_scores[i];
    effective[r.ids[i]] = r.effective_scores[i];
  }
  nlohmann::json j;
  j["scores"] = std::move(scores);
  j["effective_scores"] = std::move(effective);
  j["winner"] = r.winner_id() ? nlohmann::json(*r.winner_id()) : nlohmann::json(nullptr);
  j["pot"] = r.pot;
  return j;
}

inline void print_tournament(const TournamentResult& r, std::ostream& os) {
  for (std::size_t i = 0; i < r.ids.size(); ++i)
    os << "  " << r.ids[i] << ": raw " << r.raw_scores[i] << ", effective "
       << r.effective_scores[i] << "\n";
  os << "winner: " << (r.winner_id() ? *r.winner_id() : std::string("none (tie)")) << "\n";
  os << "pot: " << r.pot << "\n";
}

// Timestamps live only in this side file so every other output is
// byte-reproducible from (config, seed).
inline void write_run_meta(const fs::path& path, const std::string& command,
                           double elapsed_seconds) {
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  nlohmann::json j;
  j["command"] = command;
  j["finished_at"] = stamp;
  j["elapsed_seconds"] = elapsed_seconds;
  std::ofstream os(path);
  os << j.dump(2) << '\n';
}

struct ConfigOverrides {
  CLI::Option* bouts = nullptr;
  CLI::Option* episodes = nullptr;
  CLI::Option* gamma = nullptr;
  CLI::Option* epsilon_scale = nullptr;
  CLI::Option* alpha_scale = nullptr;
  CLI::Option* alpha_min = nullptr;
  CLI::Option* frozen_cap = nullptr;
  CLI::Option* replay = nullptr;
  CLI::Option* block = nullptr;
  CLI::Option* handicap = nullptr;
  CLI::Option* opponents = nullptr;
  CLI::Option* reward_mode = nullptr;
  CLI::Option* bootstrap = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* output_dir = nullptr;
  RunConfig flags;  // flag values land here; applied only when the flag was given
  std::string config_path;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "JSON config file (flags override it)");
    bouts = cmd.add_option("--bouts", flags.bouts, "match length in bouts");
    episodes = cmd.add_option("--episodes", flags.episodes, "training episodes");
    gamma = cmd.add_option("--gamma", flags.gamma, "discount factor");
    epsilon_scale = cmd.add_option("--epsilon-scale", flags.epsilon_scale,
                                   "exploration schedule scale");
    alpha_scale = cmd.add_option("--alpha-scale", flags.alpha_scale,
                                 "learning-rate schedule scale");
    alpha_min = cmd.add_option("--alpha-min", flags.alpha_min, "learning-rate floor");
    frozen_cap = cmd.add_option("--frozen-epsilon-cap", flags.frozen_epsilon_cap,
                                "epsilon cap for the frozen teammate");
    replay = cmd.add_option("--replay-count", flags.replay_count,
                            "extra replays of each episode");
    block = cmd.add_option("--alternation-block", flags.alternation_block,
                           "episodes per team update block");
    handicap = cmd.add_option("--handicap", flags.handicap_per_opponent,
                              "learner handicap per opponent");
    opponents = cmd.add_option("--opponents", flags.opponents,
                               "classic opponent tokens")
                    ->delimiter(',');
    reward_mode = cmd.add_option("--reward-mode", flags.reward_mode,
                                 "winner_take_all or match_payoff");
    bootstrap = cmd.add_option("--cross-match-bootstrap", flags.cross_match_bootstrap,
                               "bootstrap across matches within an episode (1/0)");
    seed = cmd.add_option("--seed", flags.seed, "RNG seed");
    output_dir = cmd.add_option("--output-dir", flags.output_dir, "output directory");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    auto apply = [](CLI::Option* opt, auto& dst, const auto& src) {
      if (opt && opt->count() > 0) dst = src;
    };
    apply(bouts, cfg.bouts, flags.bouts);
    apply(episodes, cfg.episodes, flags.episodes);
    apply(gamma, cfg.gamma, flags.gamma);
    apply(epsilon_scale, cfg.epsilon_scale, flags.epsilon_scale);
    apply(alpha_scale, cfg.alpha_scale, flags.alpha_scale);
    apply(alpha_min, cfg.alpha_min, flags.alpha_min);
    apply(frozen_cap, cfg.frozen_epsilon_cap, flags.frozen_epsilon_cap);
    apply(replay, cfg.replay_count, flags.replay_count);
    apply(block, cfg.alternation_block, flags.alternation_block);
    apply(handicap, cfg.handicap_per_opponent, flags.handicap_per_opponent);
    apply(opponents, cfg.opponents, flags.opponents);
    apply(reward_mode, cfg.reward_mode, flags.reward_mode);
    apply(bootstrap, cfg.cross_match_bootstrap, flags.cross_match_bootstrap);
    apply(seed, cfg.seed, flags.seed);
    apply(output_dir, cfg.output_dir, flags.output_dir);
    return cfg;
  }
};

inline AgentFile make_agent_file(QTable table, const RunConfig& cfg) {
  AgentFile agent{kAgentFormatVersion, cfg.seed, cfg.episodes, PayoffMatrix{},
                  LearningSchedule{}, std::move(table)};
  agent.schedule.epsilon_scale = cfg.epsilon_scale;
  agent.schedule.alpha_scale = cfg.alpha_scale;
  agent.schedule.alpha_min = cfg.alpha_min;
  agent.schedule.frozen_epsilon_cap = cfg.frozen_epsilon_cap;
  return agent;
}

inline double win_fraction_last_tenth(const std::vector<CurvePoint>& curve) {
  if (curve.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, curve.size() / 10);
  std::size_t wins = 0;
  for (std::size_t i = curve.size() - tail; i < curve.size(); ++i)
    wins += curve[i].won ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(tail);
}

inline int cmd_baseline(int bouts, std::uint64_t seed, const std::string& csv_path,
                        const std::string& json_path) {
  TournamentConfig cfg;
  cfg.n_bouts = bouts;
  cfg.rng_seed = seed;
  for (ClassicKind k : default_opponents())
    cfg.participants.push_back(Participant{classic_token(k), make_classic(k), false, {}});
  const TournamentResult result = run_round_robin(cfg);
  std::cout << "round robin: " << cfg.participants.size() << " classics, " << bouts
            << " bouts\n";
  print_tournament(result, std::cout);
  std::cout << "spread: " << score_spread(result) << "\n";
  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    if (!os) throw std::runtime_error("cannot write " + csv_path);
    write_bout_csv(result, os);
  }
  if (!json_path.empty()) {
    std::ofstream os(json_path);
    if (!os) throw std::runtime_error("cannot write " + json_path);
    os << tournament_json(result).dump(2) << '\n';
  }
  return 0;
}

inline int cmd_train(const RunConfig& cfg, const std::string& command) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  save_run_config(cfg, dir / "config.json");
  CurveWriter writer(dir / "training.csv");
  TrainerConfig tcfg = trainer_config(cfg);
  TrainResult trained =
      train_single(tcfg, [&writer](const CurvePoint& pt) { writer.write(pt); });
  save_agent(make_agent_file(std::move(trained.table), cfg), dir / "agent.json");

  const AgentFile agent = load_agent(dir / "agent.json");
  const TournamentResult eval = evaluate_single(agent.table, tcfg.opponents, cfg.bouts,
                                                cfg.handicap_per_opponent);
  std::cout << "trained " << cfg.episodes << " episodes; win fraction over last 10%: "
            << fmt_double(win_fraction_last_tenth(trained.curve)) << "\n";
  std::cout << "greedy evaluation:\n";
  print_tournament(eval, std::cout);
  std::cout << "coverage: " << state_coverage(agent.table).visited_states << "/"
            << state_coverage(agent.table).possible << " states\n";
  std::cout << "outputs in " << dir.string() << "\n";
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_run_meta(dir / "run_meta.json", command, elapsed);
  return 0;
}

struct RegimeSummary {
  RunConfig cfg;
  bool team_won = false;
  bool master_is_a = false;
  double last_tenth_win_fraction = 0.0;
};

inline RegimeSummary run_team_regime(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  save_run_config(cfg, dir / "config.json");
  CurveWriter writer(dir / "training.csv");
  TrainerConfig tcfg = trainer_config(cfg);
  TeamTrainResult trained =
      train_team(tcfg, [&writer](const CurvePoint& pt) { writer.write(pt); });

  const TeamEvaluation ev = evaluate_team(trained.table_a, trained.table_b, tcfg.opponents,
                                          cfg.bouts, cfg.handicap_per_opponent);
  const QTable& master = ev.master_is_a ? trained.table_a : trained.table_b;
  const QTable& servant = ev.master_is_a ? trained.table_b : trained.table_a;
  save_agent(make_agent_file(master, cfg), dir / "master.json");
  save_agent(make_agent_file(servant, cfg), dir / "servant.json");

  nlohmann::json j = tournament_json(ev.result);
  j["team_won"] = ev.team_won;
  j["master"] = ev.master_is_a ? "learner_a" : "learner_b";
  j["coverage_master"] = state_coverage(master).fraction;
  j["coverage_servant"] = state_coverage(servant).fraction;
  std::ofstream os(dir / "eval.json");
  os << j.dump(2) << '\n';

  RegimeSummary summary;
  summary.cfg = cfg;
  summary.team_won = ev.team_won;
  summary.master_is_a = ev.master_is_a;
  summary.last_tenth_win_fraction = win_fraction_last_tenth(trained.curve);
  return summary;
}

inline int cmd_train_team(const RunConfig& base, int regimes, const std::string& command) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<RegimeSummary> summaries;
  if (regimes <= 1) {
    summaries.push_back(run_team_regime(base));
  } else {
    // Independent seeds, isolated output subdirectories, run in parallel.
    std::vector<RunConfig> cfgs;
    for (int k = 0; k < regimes; ++k) {
      RunConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(k);
      char name[32];
      std::snprintf(name, sizeof name, "regime_%03d", k);
      cfg.output_dir = (fs::path(base.output_dir) / name).string();
      cfgs.push_back(std::move(cfg));
    }
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<RegimeSummary>> futures;
    std::size_t next = 0;
    summaries.resize(cfgs.size());
    while (next < cfgs.size() || !futures.empty()) {
      while (next < cfgs.size() && futures.size() < hw) {
        const RunConfig& cfg = cfgs[next++];
        futures.push_back(std::async(std::launch::async,
                                     [cfg]() { return run_team_regime(cfg); }));
      }
      RegimeSummary s = futures.front().get();
      futures.erase(futures.begin());
      const std::size_t idx = static_cast<std::size_t>(s.cfg.seed - base.seed);
      summaries[idx] = std::move(s);
    }
  }
  int winning = 0;
  for (const RegimeSummary& s : summaries) {
    std::cout << s.cfg.output_dir << ": " << (s.team_won ? "team_won" : "team_lost")
              << ", master=" << (s.master_is_a ? "learner_a" : "learner_b")
              << ", last-10% win fraction " << fmt_double(s.last_tenth_win_fraction)
              << "\n";
    winning += s.team_won ? 1 : 0;
  }
  std::cout << "winning regimes: " << winning << "/" << summaries.size() << "\n";
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_run_meta(fs::path(base.output_dir) / "run_meta.json", command, elapsed);
  return 0;
}

inline int cmd_evaluate(const std::vector<std::string>& agent_paths,
                        const std::vector<std::string>& opponent_tokens, int handicap,
                        const std::string& json_path) {
  if (agent_paths.empty() || agent_paths.size() > 2)
    throw std::runtime_error("evaluate needs one agent (single) or two (team)");
  std::vector<AgentFile> agents;
  for (const std::string& p : agent_paths) agents.push_back(load_agent(p));
  const int n = agents.front().table.n_bouts();
  const PayoffMatrix payoff = agents.front().payoff;
  for (const AgentFile& a : agents) check_agent_context(a, n, payoff, "evaluate");
  const std::vector<ClassicKind> opponents = parse_opponents(opponent_tokens);

  nlohmann::json j;
  if (agents.size() == 2) {
    const TeamEvaluation ev =
        evaluate_team(agents[0].table, agents[1].table, opponents, n, handicap, payoff);
    print_tournament(ev.result, std::cout);
    std::cout << "team_won: " << (ev.team_won ? "true" : "false") << "\n";
    j = tournament_json(ev.result);
    j["team_won"] = ev.team_won;
    j["master"] = ev.master_is_a ? "learner_a" : "learner_b";
  } else {
    const TournamentResult r =
        evaluate_single(agents[0].table, opponents, n, handicap, payoff);
    print_tournament(r, std::cout);
    j = tournament_json(r);
    j["learner_won"] = r.winner_id() && *r.winner_id() == "learner";
  }
  if (!json_path.empty()) {
    std::ofstream os(json_path);
    if (!os) throw std::runtime_error("cannot write " + json_path);
    os << j.dump(2) << '\n';
  }
  return 0;
}

inline int cmd_grid(const std::vector<std::string>& agent_paths,
                    const std::vector<std::string>& opponent_tokens, int bouts,
                    const std::string& out_path) {
  std::vector<Participant> participants;
  std::vector<AgentFile> agents;
  for (const std::string& p : agent_paths) agents.push_back(load_agent(p));
  int n = bouts;
  PayoffMatrix payoff;
  if (!agents.empty()) {
    n = agents.front().table.n_bouts();
    payoff = agents.front().payoff;
    for (const AgentFile& a : agents) check_agent_context(a, n, payoff, "grid");
  }
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string id = "learner_" + std::string(1, static_cast<char>('a' + i));
    participants.push_back(Participant{
        id, std::make_shared<PolicyStrategy>(agents[i].table, 0.0), true, {}});
  }
  for (ClassicKind k : parse_opponents(opponent_tokens))
    participants.push_back(Participant{classic_token(k), make_classic(k), false, {}});
  const StrategyGrid grid = extract_strategy_grid(participants, n, payoff);
  if (out_path.empty()) {
    write_grid_csv(grid, std::cout);
  } else {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    write_grid_csv(grid, os);
    std::cout << grid.rows.size() << " pairings x " << n << " bouts -> " << out_path
              << "\n";
  }
  return 0;
}

inline int cmd_coverage(const std::string& agent_path, const std::string& json_path) {
  const AgentFile agent = load_agent(agent_path);
  const CoverageReport report = state_coverage(agent.table);
  if (json_path.empty()) {
    write_coverage_json(report, std::cout);
  } else {
    std::ofstream os(json_path);
    if (!os) throw std::runtime_error("cannot write " + json_path);
    write_coverage_json(report, os);
  }
  return 0;
}

inline int cmd_crosspair(const std::string& dir_path,
                         const std::vector<std::string>& opponent_tokens, int handicap,
                         const std::string& out_path, const std::string& json_path) {
  std::vector<fs::path> regime_dirs;
  for (const auto& entry : fs::directory_iterator(dir_path))
    if (entry.is_directory() && fs::exists(entry.path() / "master.json") &&
        fs::exists(entry.path() / "servant.json"))
      regime_dirs.push_back(entry.path());
  std::sort(regime_dirs.begin(), regime_dirs.end());
  if (regime_dirs.empty())
    throw std::runtime_error("no regime directories (master.json + servant.json) under " +
                             dir_path);
  std::vector<Regime> regimes;
  for (const fs::path& rd : regime_dirs) {
    AgentFile master = load_agent(rd / "master.json");
    AgentFile servant = load_agent(rd / "servant.json");
    check_agent_context(servant, master.table.n_bouts(), master.payoff, "crosspair");
    regimes.push_back(
        Regime{rd.filename().string(), std::move(master.table), std::move(servant.table)});
  }
  const CrossPairMatrix matrix =
      cross_regime_matrix(regimes, parse_opponents(opponent_tokens), handicap);
  std::cout << regimes.size() << " regimes\n";
  std::cout << "at-least-one winning cross pair (distinct unordered pairs): "
            << fmt_double(matrix.frac_at_least_one) << "\n";
  std::cout << "both winning cross pairs (distinct unordered pairs): "
            << fmt_double(matrix.frac_both) << "\n";
  std::cout << "at-least-one including self-pairs: "
            << fmt_double(matrix.frac_at_least_one_with_self) << "\n";
  std::cout << "both including self-pairs: " << fmt_double(matrix.frac_both_with_self)
            << "\n";
  if (!out_path.empty()) {
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    write_matrix_csv(matrix, os);
  }
  if (!json_path.empty()) {
    nlohmann::json j;
    j["regimes"] = matrix.regime_ids;
    j["frac_at_least_one"] = matrix.frac_at_least_one;
    j["frac_both"] = matrix.frac_both;
    j["frac_at_least_one_with_self"] = matrix.frac_at_least_one_with_self;
    j["frac_both_with_self"] = matrix.frac_both_with_self;
    std::ofstream os(json_path);
    if (!os) throw std::runtime_error("cannot write " + json_path);
    os << j.dump(2) << '\n';
  }
  return 0;
}

// The CLI entry point; args[0] is the program name. Returns the process exit
// code; diagnostics go to stderr.
inline int run_command(const std::vector<std::string>& args) {
  CLI::App app{"winner-take-all iterated prisoner's dilemma: train, evaluate, analyze"};
  app.require_subcommand(1);

  // baseline
  auto* baseline = app.add_subcommand("baseline", "classics-only round robin");
  int b_bouts = 6;
  std::uint64_t b_seed = 0;
  std::string b_csv, b_json;
  baseline->add_option("--bouts", b_bouts, "match length in bouts");
  baseline->add_option("--seed", b_seed, "RNG seed for match order");
  baseline->add_option("--csv", b_csv, "write per-bout log CSV");
  baseline->add_option("--json", b_json, "write scores/winner/pot JSON");

  // train
  auto* train = app.add_subcommand("train", "train a single learner");
  ConfigOverrides train_cfg;
  train_cfg.attach(*train);

  // train-team
  auto* team = app.add_subcommand("train-team", "train a colluding pair");
  ConfigOverrides team_cfg;
  team_cfg.attach(*team);
  int regimes = 1;
  team->add_option("--regimes", regimes, "independent seeds to run (parallel)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "greedy tournament from saved agents");
  std::vector<std::string> e_agents;
  std::vector<std::string> e_opponents = {"tit_for_tat", "tit_for_two_tats", "grudge",
                                          "defector", "cooperator"};
  int e_handicap = 3;
  std::string e_json;
  evaluate->add_option("--agent", e_agents, "agent file (twice for a team)")->required();
  evaluate->add_option("--opponents", e_opponents, "classic opponent tokens")->delimiter(',');
  evaluate->add_option("--handicap", e_handicap, "learner handicap per opponent");
  evaluate->add_option("--json", e_json, "write result JSON");

  // grid
  auto* grid = app.add_subcommand("grid", "bout-by-bout strategy grid CSV");
  std::vector<std::string> g_agents;
  std::vector<std::string> g_opponents = {"tit_for_tat", "tit_for_two_tats", "grudge",
                                          "defector", "cooperator"};
  int g_bouts = 6;
  std::string g_out;
  grid->add_option("--agent", g_agents, "agent file (repeatable)");
  grid->add_option("--opponents", g_opponents, "classic opponent tokens")->delimiter(',');
  grid->add_option("--bouts", g_bouts, "match length when no agents are given");
  grid->add_option("--out", g_out, "output CSV path (stdout if omitted)");

  // coverage
  auto* coverage = app.add_subcommand("coverage", "visited-state fraction of an agent");
  std::string c_agent, c_json;
  coverage->add_option("--agent", c_agent, "agent file")->required();
  coverage->add_option("--json", c_json, "output path (stdout if omitted)");

  // crosspair
  auto* crosspair = app.add_subcommand("crosspair", "cross-regime collusion matrix");
  std::string x_dir, x_out, x_json;
  std::vector<std::string> x_opponents = {"tit_for_tat", "tit_for_two_tats", "grudge",
                                          "defector", "cooperator"};
  int x_handicap = 3;
  crosspair->add_option("--dir", x_dir, "directory of regime subdirectories")->required();
  crosspair->add_option("--opponents", x_opponents, "classic opponent tokens")
      ->delimiter(',');
  crosspair->add_option("--handicap", x_handicap, "learner handicap per opponent");
  crosspair->add_option("--out", x_out, "matrix CSV path");
  crosspair->add_option("--json", x_json, "summary JSON path");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string command;
  for (const std::string& a : args) command += (command.empty() ? "" : " ") + a;

  try {
    if (baseline->parsed()) return cmd_baseline(b_bouts, b_seed, b_csv, b_json);
    if (train->parsed()) return cmd_train(train_cfg.resolve(), command);
    if (team->parsed()) {
      RunConfig cfg = team_cfg.resolve();
      cfg.team = true;
      return cmd_train_team(cfg, regimes, command);
    }
    if (evaluate->parsed()) return cmd_evaluate(e_agents, e_opponents, e_handicap, e_json);
    if (grid->parsed()) return cmd_grid(g_agents, g_opponents, g_bouts, g_out);
    if (coverage->parsed()) return cmd_coverage(c_agent, c_json);
    if (crosspair->parsed())
      return cmd_crosspair(x_dir, x_opponents, x_handicap, x_out, x_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace ipd::cli

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipd/analysis.hpp"
#include "ipd/qlearn.hpp"
#include "ipd/qtable.hpp"

namespace ipd {

// Shortest decimal representation that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[40];
  for (int precision : {15, 16, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// Serialized trained agent: Q-table plus enough provenance (payoffs,
// schedule, seed) for post-hoc analysis to know the training regime.
struct AgentFile {
  int format_version = 1;
  std::uint64_t seed = 0;
  long episodes_trained = 0;
  PayoffMatrix payoff;
  LearningSchedule schedule;
  QTable table;
};

inline constexpr int kAgentFormatVersion = 1;

inline void save_agent(const AgentFile& agent, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format_version"] = kAgentFormatVersion;
  j["n_bouts"] = agent.table.n_bouts();
  j["payoff"] = {{"reward_mutual_coop", agent.payoff.reward_mutual_coop},
                 {"temptation", agent.payoff.temptation},
                 {"sucker", agent.payoff.sucker},
                 {"punishment", agent.payoff.punishment}};
  j["schedule"] = {{"epsilon_scale", agent.schedule.epsilon_scale},
                   {"alpha_scale", agent.schedule.alpha_scale},
                   {"alpha_min", agent.schedule.alpha_min},
                   {"frozen_epsilon_cap", agent.schedule.frozen_epsilon_cap}};
  j["seed"] = agent.seed;
  j["episodes_trained"] = agent.episodes_trained;
  j["q_init"] = agent.table.init();
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [key, values] : agent.table.entries()) q[key] = {values[0], values[1]};
  j["qtable"] = std::move(q);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_agent: cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline AgentFile load_agent(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_agent: cannot read " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_agent: " + path.string() + ": " + e.what());
  }
  const int version = j.at("format_version").get<int>();
  if (version != kAgentFormatVersion)
    throw std::runtime_error("load_agent: " + path.string() + ": format_version " +
                             std::to_string(version) + " unsupported (expected " +
                             std::to_string(kAgentFormatVersion) + ")");
  const int n_bouts = j.at("n_bouts").get<int>();
  const auto& p = j.at("payoff");
  AgentFile agent{version,
                  j.at("seed").get<std::uint64_t>(),
                  j.at("episodes_trained").get<long>(),
                  PayoffMatrix(p.at("reward_mutual_coop").get<int>(),
                               p.at("temptation").get<int>(), p.at("sucker").get<int>(),
                               p.at("punishment").get<int>()),
                  LearningSchedule{},
                  QTable(n_bouts, j.value("q_init", 0.0))};
  const auto& s = j.at("schedule");
  agent.schedule.epsilon_scale = s.at("epsilon_scale").get<double>();
  agent.schedule.alpha_scale = s.at("alpha_scale").get<double>();
  agent.schedule.alpha_min = s.at("alpha_min").get<double>();
  agent.schedule.frozen_epsilon_cap = s.at("frozen_epsilon_cap").get<double>();
  for (const auto& [key, values] : j.at("qtable").items()) {
    if (!valid_state_key(key))
      throw std::runtime_error("load_agent: " + path.string() + ": malformed state key \"" +
                               key + "\"");
    if (!values.is_array() || values.size() != 2 || !values[0].is_number() ||
        !values[1].is_number())
      throw std::runtime_error("load_agent: " + path.string() + ": state \"" + key +
                               "\" needs two numeric action values");
    const double qc = values[0].get<double>();
    const double qd = values[1].get<double>();
    if (!std::isfinite(qc) || !std::isfinite(qd))
      throw std::runtime_error("load_agent: " + path.string() + ": non-finite Q value at \"" +
                               key + "\"");
    try {
      agent.table.set(key, Action::Cooperate, qc);
      agent.table.set(key, Action::Defect, qd);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("load_agent: " + path.string() + ": " + e.what());
    }
  }
  return agent;
}

// Analysis contexts refuse agents trained under a different horizon or
// payoff matrix.
inline void check_agent_context(const AgentFile& agent, int n_bouts,
                                const PayoffMatrix& payoff,
                                const std::string& what = "analysis") {
  if (agent.table.n_bouts() != n_bouts)
    throw std::runtime_error("context mismatch: agent trained for " +
                             std::to_string(agent.table.n_bouts()) + "-bout matches, " +
                             what + " expects " + std::to_string(n_bouts));
  if (!(agent.payoff == payoff))
    throw std::runtime_error("context mismatch: agent trained under a different payoff "
                             "matrix than the " + what + " context");
}

// Flat experiment configuration file (JSON, one object, no nesting beyond
// the opponents list). Unknown keys are rejected.
struct RunConfig {
  int bouts = 6;
  long episodes = 20000;
  double gamma = 1.0;
  double epsilon_scale = 1.0;
  double alpha_scale = 1.0;
  double alpha_min = 0.03;
  double frozen_epsilon_cap = 0.01;
  int replay_count = 5;
  long alternation_block = 300;
  int handicap_per_opponent = 3;
  std::vector<std::string> opponents = {"tit_for_tat", "tit_for_two_tats", "grudge",
                                        "defector", "cooperator"};
  bool team = false;
  std::string reward_mode = "winner_take_all";
  bool cross_match_bootstrap = true;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
};

inline RewardMode reward_mode_from_token(const std::string& token) {
  if (token == "winner_take_all") return RewardMode::WinnerTakeAll;
  if (token == "match_payoff") return RewardMode::MatchPayoff;
  throw std::invalid_argument("unknown reward_mode: \"" + token +
                              "\" (use winner_take_all or match_payoff)");
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot read " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config: " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config: " + path.string() + ": not an object");
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "bouts") cfg.bouts = value.get<int>();
      else if (key == "episodes") cfg.episodes = value.get<long>();
      else if (key == "gamma") cfg.gamma = value.get<double>();
      else if (key == "epsilon_scale") cfg.epsilon_scale = value.get<double>();
      else if (key == "alpha_scale") cfg.alpha_scale = value.get<double>();
      else if (key == "alpha_min") cfg.alpha_min = value.get<double>();
      else if (key == "frozen_epsilon_cap") cfg.frozen_epsilon_cap = value.get<double>();
      else if (key == "replay_count") cfg.replay_count = value.get<int>();
      else if (key == "alternation_block") cfg.alternation_block = value.get<long>();
      else if (key == "handicap_per_opponent") cfg.handicap_per_opponent = value.get<int>();
      else if (key == "opponents") cfg.opponents = value.get<std::vector<std::string>>();
      else if (key == "team") cfg.team = value.get<bool>();
      else if (key == "reward_mode") cfg.reward_mode = value.get<std::string>();
      else if (key == "cross_match_bootstrap") cfg.cross_match_bootstrap = value.get<bool>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "output_dir") cfg.output_dir = value.get<std::string>();
      else
        throw std::runtime_error("config: " + path.string() + ": unknown key \"" + key +
                                 "\"");
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("config: " + path.string() + ": key \"" + key + "\": " +
                               e.what());
    }
  }
  return cfg;
}

inline void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  nlohmann::json j;
  j["bouts"] = cfg.bouts;
  j["episodes"] = cfg.episodes;
  j["gamma"] = cfg.gamma;
  j["epsilon_scale"] = cfg.epsilon_scale;
  j["alpha_scale"] = cfg.alpha_scale;
  j["alpha_min"] = cfg.alpha_min;
  j["frozen_epsilon_cap"] = cfg.frozen_epsilon_cap;
  j["replay_count"] = cfg.replay_count;
  j["alternation_block"] = cfg.alternation_block;
  j["handicap_per_opponent"] = cfg.handicap_per_opponent;
  j["opponents"] = cfg.opponents;
  j["team"] = cfg.team;
  j["reward_mode"] = cfg.reward_mode;
  j["cross_match_bootstrap"] = cfg.cross_match_bootstrap;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("config: cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline TrainerConfig trainer_config(const RunConfig& cfg) {
  TrainerConfig t;
  t.n_bouts = cfg.bouts;
  t.episodes = cfg.episodes;
  t.gamma = cfg.gamma;
  t.replay_count = cfg.replay_count;
  t.alternation_block = cfg.alternation_block;
  t.handicap_per_opponent = cfg.handicap_per_opponent;
  t.opponents.clear();
  for (const std::string& token : cfg.opponents)
    t.opponents.push_back(classic_from_token(token));
  t.team = cfg.team;
  t.rng_seed = cfg.seed;
  t.schedule.epsilon_scale = cfg.epsilon_scale;
  t.schedule.alpha_scale = cfg.alpha_scale;
  t.schedule.alpha_min = cfg.alpha_min;
  t.schedule.frozen_epsilon_cap = cfg.frozen_epsilon_cap;
  t.reward_mode = reward_mode_from_token(cfg.reward_mode);
  t.cross_match_bootstrap = cfg.cross_match_bootstrap;
  return t;
}

inline constexpr const char* kCurveHeader =
    "episode,epsilon,alpha,updating_agent,raw_score_a,raw_score_b,"
    "best_opponent_score,winner_id,pot,team_reward";

inline std::string curve_row(const CurvePoint& pt) {
  std::string row = std::to_string(pt.episode);
  row += ',';
  row += fmt_double(pt.epsilon);
  row += ',';
  row += fmt_double(pt.alpha);
  row += ',';
  row += pt.updating_agent;
  row += ',';
  row += std::to_string(pt.raw_score_a);
  row += ',';
  if (pt.raw_score_b) row += std::to_string(*pt.raw_score_b);
  row += ',';
  row += std::to_string(pt.best_opponent_score);
  row += ',';
  if (pt.winner_id) row += *pt.winner_id;
  row += ',';
  row += std::to_string(pt.pot);
  row += ',';
  row += fmt_double(pt.team_reward);
  return row;
}

// Streams curve rows as episodes complete; the header is written on open.
class CurveWriter {
 public:
  explicit CurveWriter(const std::filesystem::path& path) : os_(path) {
    if (!os_) throw std::runtime_error("training csv: cannot write " + path.string());
    os_ << kCurveHeader << '\n';
  }
  void write(const CurvePoint& pt) {
    os_ << curve_row(pt) << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

inline void emit_training_csv(const std::vector<CurvePoint>& curve,
                              const std::filesystem::path& path) {
  if (curve.empty()) throw std::invalid_argument("emit_training_csv: empty curve");
  CurveWriter writer(path);
  for (const CurvePoint& pt : curve) writer.write(pt);
}

inline void write_coverage_json(const CoverageReport& report, std::ostream& os) {
  nlohmann::json j;
  j["visited"] = report.visited_states;
  j["possible"] = report.possible;
  j["fraction"] = report.fraction;
  os << j.dump(2) << '\n';
}

}  // namespace ipd

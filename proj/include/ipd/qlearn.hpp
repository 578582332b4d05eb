#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipd/game.hpp"
#include "ipd/qtable.hpp"
#include "ipd/strategies.hpp"
#include "ipd/tournament.hpp"

namespace ipd {

// Decay schedules for exploration and learning rate: value = scale * t^(-3/4),
// with epsilon clamped to [0,1] and alpha floored at alpha_min. A frozen agent
// additionally caps its epsilon at frozen_epsilon_cap.
struct LearningSchedule {
  double epsilon_scale = 1.0;
  double alpha_scale = 1.0;
  double alpha_min = 0.03;
  double frozen_epsilon_cap = 0.01;

  static constexpr double kExponent = 0.75;

  bool operator==(const LearningSchedule&) const = default;
};

struct ScheduleValues {
  double epsilon = 0.0;
  double alpha = 0.0;
};

inline ScheduleValues schedule_values(long t, const LearningSchedule& s, bool frozen) {
  if (t < 1) throw std::invalid_argument("episode index starts at 1");
  const double decay = std::pow(static_cast<double>(t), -LearningSchedule::kExponent);
  double epsilon = std::clamp(s.epsilon_scale * decay, 0.0, 1.0);
  const double alpha = std::clamp(s.alpha_scale * decay, s.alpha_min, 1.0);
  if (frozen) epsilon = std::min(epsilon, s.frozen_epsilon_cap);
  return {epsilon, alpha};
}

// One learner decision. Terminal iff next_state is absent; the terminal
// reward may be negative after the winner-take-all adjustment.
struct Transition {
  StateKey state;
  Action action = Action::Cooperate;
  double reward = 0.0;
  std::optional<StateKey> next_state;

  bool terminal() const { return !next_state.has_value(); }
};

inline double q_update(QTable& q, const Transition& tr, double alpha, double gamma) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("q_update: alpha must lie in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("q_update: gamma must lie in [0, 1]");
  if (!std::isfinite(tr.reward)) throw std::invalid_argument("q_update: non-finite reward");
  const double old_value = q.value(tr.state, tr.action);
  const double bootstrap = tr.terminal() ? 0.0 : gamma * q.max_value(*tr.next_state);
  const double new_value = (1.0 - alpha) * old_value + alpha * (tr.reward + bootstrap);
  q.set(tr.state, tr.action, new_value);
  return new_value;
}

enum class RewardOutcome { Lost, Won, TeamWon };

inline double reward_target(RewardOutcome outcome, int pot) {
  switch (outcome) {
    case RewardOutcome::Won: return static_cast<double>(pot);
    case RewardOutcome::TeamWon: return pot / 2.0;
    case RewardOutcome::Lost: return 0.0;
  }
  throw std::logic_error("unreachable");
}

inline double transition_reward_sum(const std::vector<Transition>& transitions) {
  double sum = 0.0;
  for (const Transition& tr : transitions) sum += tr.reward;
  return sum;
}

// Adds the terminal adjustment to the episode's final transition so that
// the rewards sum exactly to pot (win), pot/2 (team win), or 0 (loss/tie).
// All quantities are half-integers, so the equality is exact in doubles.
inline void assign_rewards(std::vector<Transition>& transitions, RewardOutcome outcome,
                           int pot) {
  if (transitions.empty())
    throw std::invalid_argument("assign_rewards: empty transition log");
  const double accumulated = transition_reward_sum(transitions);
  transitions.back().reward += reward_target(outcome, pot) - accumulated;
}

// Whether Q-targets use the winner-take-all attribution (Eq.-style terminal
// adjustment, the default) or the plain per-bout match payoffs (the known-
// opponent MDP the best-response oracle solves exactly).
enum class RewardMode { WinnerTakeAll, MatchPayoff };

inline std::vector<ClassicKind> default_opponents() {
  return {ClassicKind::TitForTat, ClassicKind::TitForTwoTats, ClassicKind::Grudge,
          ClassicKind::Defector, ClassicKind::Cooperator};
}

struct TrainerConfig {
  int n_bouts = 6;
  long episodes = 20000;
  double gamma = 1.0;
  int replay_count = 5;
  long alternation_block = 300;
  int handicap_per_opponent = 3;
  std::vector<ClassicKind> opponents = default_opponents();
  bool team = false;
  std::uint64_t rng_seed = 0;
  LearningSchedule schedule;
  RewardMode reward_mode = RewardMode::WinnerTakeAll;
  // Initial value for unseen state-action pairs. Zero keeps the initial
  // policy cooperative; large positive values force a near-exhaustive sweep
  // of the state space (optimism under uncertainty).
  double q_init = 0.0;
  // When true (default) a match-final transition that is not the learner's
  // last of the episode bootstraps from the next match's initial state s0;
  // when false every match end is terminal.
  bool cross_match_bootstrap = true;
  PayoffMatrix payoff;

  void validate() const {
    if (n_bouts < 1) throw std::invalid_argument("episodes need n_bouts >= 1");
    if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
    if (!(gamma >= 0.0 && gamma <= 1.0))
      throw std::invalid_argument("gamma must lie in [0, 1]");
    if (replay_count < 0) throw std::invalid_argument("replay_count must be >= 0");
    if (alternation_block < 1) throw std::invalid_argument("alternation_block must be >= 1");
    if (!team && opponents.empty())
      throw std::invalid_argument("a single learner needs at least one opponent");
  }
};

struct LearnerSlot {
  std::string id;
  QTable* table = nullptr;  // non-owning
  double epsilon = 0.0;
};

struct EpisodeResult {
  TournamentResult tournament;
  // Per learner slot, in decision order; rewards are the raw bout payoffs
  // (no terminal adjustment yet).
  std::vector<std::vector<Transition>> transitions;
};

namespace detail {

inline std::vector<Participant> episode_participants(
    const std::vector<LearnerSlot>& learners, const std::vector<ClassicKind>& opponents,
    const std::optional<std::string>& team_id) {
  std::vector<Participant> ps;
  ps.reserve(learners.size() + opponents.size());
  for (const LearnerSlot& slot : learners) {
    ps.push_back(Participant{slot.id,
                             std::make_shared<PolicyStrategy>(*slot.table, slot.epsilon),
                             /*is_learner=*/true, team_id});
  }
  std::vector<std::string> used;
  for (ClassicKind k : opponents) {
    std::string id = classic_token(k);
    int suffix = 2;
    while (std::count(used.begin(), used.end(), id) > 0)
      id = std::string(classic_token(k)) + "_" + std::to_string(suffix++);
    used.push_back(id);
    ps.push_back(Participant{id, make_classic(k), /*is_learner=*/false, std::nullopt});
  }
  return ps;
}

}  // namespace detail

// One full round-robin tournament with every learner decision recorded as a
// transition. A transition's next state is the learner's next decision state
// within the same match; a match-final transition either bootstraps from the
// next match's s0 or is terminal, per cross_match_bootstrap.
inline EpisodeResult run_episode(const TrainerConfig& cfg,
                                 const std::vector<LearnerSlot>& learners, Rng& rng) {
  const std::optional<std::string> team_id =
      cfg.team ? std::optional<std::string>("team") : std::nullopt;
  TournamentConfig tcfg;
  tcfg.n_bouts = cfg.n_bouts;
  tcfg.participants = detail::episode_participants(learners, cfg.opponents, team_id);
  tcfg.handicap_per_opponent = cfg.handicap_per_opponent;
  tcfg.payoff = cfg.payoff;

  EpisodeResult ep;
  ep.tournament = run_round_robin(tcfg, rng);
  ep.transitions.resize(learners.size());

  const int n = cfg.n_bouts;
  for (std::size_t li = 0; li < learners.size(); ++li) {
    std::vector<std::size_t> my_matches;
    for (std::size_t mi = 0; mi < ep.tournament.match_logs.size(); ++mi) {
      const MatchLog& log = ep.tournament.match_logs[mi];
      if (log.a == li || log.b == li) my_matches.push_back(mi);
    }
    std::vector<Transition>& out = ep.transitions[li];
    out.reserve(my_matches.size() * static_cast<std::size_t>(n));
    for (std::size_t q = 0; q < my_matches.size(); ++q) {
      const MatchLog& log = ep.tournament.match_logs[my_matches[q]];
      const MatchHistory own =
          log.a == li ? log.result.history : flipped(log.result.history);
      StateKey state;  // s0
      for (int k = 0; k < n; ++k) {
        const Bout& bout = own[static_cast<std::size_t>(k)];
        Transition tr;
        tr.state = state;
        tr.action = bout.self_action;
        tr.reward = payoff(bout.self_action, bout.opponent_action, cfg.payoff).first;
        state.push_back(action_char(bout.self_action));
        state.push_back(action_char(bout.opponent_action));
        if (k + 1 < n) {
          tr.next_state = state;
        } else if (cfg.cross_match_bootstrap && q + 1 < my_matches.size()) {
          tr.next_state = StateKey{};  // next match's s0
        }
        out.push_back(std::move(tr));
      }
    }
  }
  return ep;
}

// Per-episode training curve entry. The CSV schema keeps a fixed superset of
// columns for single and team runs; raw_score_b is empty for single runs.
struct CurvePoint {
  long episode = 0;
  double epsilon = 0.0;  // updating agent's epsilon
  double alpha = 0.0;
  std::string updating_agent;  // "a" or "b"
  int raw_score_a = 0;
  std::optional<int> raw_score_b;
  int best_opponent_score = 0;
  std::optional<std::string> winner_id;
  int pot = 0;
  double team_reward = 0.0;  // reward attributed per learner this episode
  bool won = false;          // learner (or its team) took the pot
  int effective_margin = 0;  // best learner effective minus best other effective
};

using CurveCallback = std::function<void(const CurvePoint&)>;

struct TrainResult {
  QTable table;
  std::vector<CurvePoint> curve;
};

struct TeamTrainResult {
  QTable table_a;
  QTable table_b;
  std::vector<CurvePoint> curve;
};

namespace detail {

inline RewardOutcome outcome_for(const TournamentResult& t, std::size_t learner_index,
                                 bool team) {
  if (!t.winner) return RewardOutcome::Lost;
  if (*t.winner == learner_index) return team ? RewardOutcome::TeamWon : RewardOutcome::Won;
  if (team && t.team_ids[*t.winner] && t.team_ids[learner_index] &&
      *t.team_ids[*t.winner] == *t.team_ids[learner_index])
    return RewardOutcome::TeamWon;
  return RewardOutcome::Lost;
}

// Exact machine check of the reward-sum constraint, run every episode.
inline void check_reward_sum(const std::vector<Transition>& transitions,
                             RewardOutcome outcome, int pot) {
  const double sum = transition_reward_sum(transitions);
  if (sum != reward_target(outcome, pot))
    throw std::logic_error("episode reward sum violates the winner-take-all constraint");
}

inline void apply_updates(QTable& q, const std::vector<Transition>& transitions,
                          double alpha, double gamma, int replay_count) {
  for (int pass = 0; pass <= replay_count; ++pass)
    for (const Transition& tr : transitions) q_update(q, tr, alpha, gamma);
}

inline int best_non_learner_score(const TournamentResult& t,
                                  const std::vector<ClassicKind>& opponents,
                                  std::size_t n_learners) {
  int best = 0;
  bool any = false;
  for (std::size_t i = n_learners; i < t.raw_scores.size(); ++i) {
    best = any ? std::max(best, t.raw_scores[i]) : t.raw_scores[i];
    any = true;
  }
  (void)opponents;
  return any ? best : 0;
}

inline int learner_margin(const TournamentResult& t, std::size_t n_learners) {
  int best_learner = 0;
  bool any_l = false;
  int best_other = 0;
  bool any_o = false;
  for (std::size_t i = 0; i < t.effective_scores.size(); ++i) {
    if (i < n_learners) {
      best_learner = any_l ? std::max(best_learner, t.effective_scores[i])
                           : t.effective_scores[i];
      any_l = true;
    } else {
      best_other =
          any_o ? std::max(best_other, t.effective_scores[i]) : t.effective_scores[i];
      any_o = true;
    }
  }
  return (any_l && any_o) ? best_learner - best_other : 0;
}

}  // namespace detail

// Single-learner training: per episode, run a tournament, attribute rewards,
// then apply the episode's transitions once plus replay_count replays, in
// chronological order.
inline TrainResult train_single(const TrainerConfig& cfg,
                                const CurveCallback& on_episode = {}) {
  cfg.validate();
  if (cfg.team) throw std::invalid_argument("train_single: team flag must be false");
  TrainResult res{QTable(cfg.n_bouts, cfg.q_init), {}};
  res.curve.reserve(static_cast<std::size_t>(cfg.episodes));
  Rng rng(cfg.rng_seed);
  for (long t = 1; t <= cfg.episodes; ++t) {
    const ScheduleValues sv = schedule_values(t, cfg.schedule, /*frozen=*/false);
    std::vector<LearnerSlot> slots{{"learner", &res.table, sv.epsilon}};
    EpisodeResult ep = run_episode(cfg, slots, rng);
    const RewardOutcome outcome = detail::outcome_for(ep.tournament, 0, /*team=*/false);
    if (cfg.reward_mode == RewardMode::WinnerTakeAll) {
      assign_rewards(ep.transitions[0], outcome, ep.tournament.pot);
      detail::check_reward_sum(ep.transitions[0], outcome, ep.tournament.pot);
    }
    detail::apply_updates(res.table, ep.transitions[0], sv.alpha, cfg.gamma,
                          cfg.replay_count);

    CurvePoint pt;
    pt.episode = t;
    pt.epsilon = sv.epsilon;
    pt.alpha = sv.alpha;
    pt.updating_agent = "a";
    pt.raw_score_a = ep.tournament.raw_scores[0];
    pt.best_opponent_score = detail::best_non_learner_score(ep.tournament, cfg.opponents, 1);
    pt.winner_id = ep.tournament.winner_id();
    pt.pot = ep.tournament.pot;
    pt.won = outcome == RewardOutcome::Won;
    pt.team_reward = reward_target(outcome, ep.tournament.pot);
    pt.effective_margin = detail::learner_margin(ep.tournament, 1);
    if (on_episode) on_episode(pt);
    res.curve.push_back(std::move(pt));
  }
  return res;
}

// Team training with alternating update blocks: agent a updates for
// alternation_block episodes while b is frozen (epsilon capped, no updates),
// then roles swap. The schedule index t is global across blocks.
inline TeamTrainResult train_team(const TrainerConfig& cfg,
                                  const CurveCallback& on_episode = {}) {
  cfg.validate();
  if (!cfg.team) throw std::invalid_argument("train_team: team flag must be true");
  TeamTrainResult res{QTable(cfg.n_bouts, cfg.q_init), QTable(cfg.n_bouts, cfg.q_init), {}};
  res.curve.reserve(static_cast<std::size_t>(cfg.episodes));
  Rng rng(cfg.rng_seed);
  for (long t = 1; t <= cfg.episodes; ++t) {
    const std::size_t updating =
        static_cast<std::size_t>(((t - 1) / cfg.alternation_block) % 2);
    const ScheduleValues sv = schedule_values(t, cfg.schedule, /*frozen=*/false);
    const double frozen_eps =
        schedule_values(t, cfg.schedule, /*frozen=*/true).epsilon;
    std::vector<LearnerSlot> slots{
        {"learner_a", &res.table_a, updating == 0 ? sv.epsilon : frozen_eps},
        {"learner_b", &res.table_b, updating == 1 ? sv.epsilon : frozen_eps}};
    EpisodeResult ep = run_episode(cfg, slots, rng);
    for (std::size_t li = 0; li < 2; ++li) {
      const RewardOutcome outcome = detail::outcome_for(ep.tournament, li, /*team=*/true);
      if (cfg.reward_mode == RewardMode::WinnerTakeAll) {
        assign_rewards(ep.transitions[li], outcome, ep.tournament.pot);
        detail::check_reward_sum(ep.transitions[li], outcome, ep.tournament.pot);
      }
    }
    QTable& updating_table = updating == 0 ? res.table_a : res.table_b;
    detail::apply_updates(updating_table, ep.transitions[updating], sv.alpha, cfg.gamma,
                          cfg.replay_count);

    const RewardOutcome team_oc = detail::outcome_for(ep.tournament, updating, /*team=*/true);
    CurvePoint pt;
    pt.episode = t;
    pt.epsilon = sv.epsilon;
    pt.alpha = sv.alpha;
    pt.updating_agent = updating == 0 ? "a" : "b";
    pt.raw_score_a = ep.tournament.raw_scores[0];
    pt.raw_score_b = ep.tournament.raw_scores[1];
    pt.best_opponent_score = detail::best_non_learner_score(ep.tournament, cfg.opponents, 2);
    pt.winner_id = ep.tournament.winner_id();
    pt.pot = ep.tournament.pot;
    pt.won = team_oc == RewardOutcome::TeamWon;
    pt.team_reward = reward_target(team_oc, ep.tournament.pot);
    pt.effective_margin = detail::learner_margin(ep.tournament, 2);
    if (on_episode) on_episode(pt);
    res.curve.push_back(std::move(pt));
  }
  return res;
}

}  // namespace ipd

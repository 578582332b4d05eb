#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "ipd/game.hpp"
#include "ipd/strategies.hpp"

namespace ipd {

struct Participant {
  std::string id;
  std::shared_ptr<Strategy> strategy;
  bool is_learner = false;
  std::optional<std::string> team_id;
};

struct TournamentConfig {
  int n_bouts = 6;
  std::vector<Participant> participants;
  int handicap_per_opponent = 3;
  std::uint64_t rng_seed = 0;
  PayoffMatrix payoff;
};

struct MatchLog {
  std::size_t a = 0;  // participant indices
  std::size_t b = 0;
  MatchResult result;  // history from a's perspective
};

struct TournamentResult {
  std::vector<std::string> ids;
  std::vector<std::optional<std::string>> team_ids;
  std::vector<MatchLog> match_logs;       // in play order
  std::vector<int> raw_scores;            // per participant
  std::vector<int> effective_scores;      // raw minus handicap for learners
  std::optional<std::size_t> winner;      // unique strict maximum, if any
  int pot = 0;                            // sum of all raw scores

  std::optional<std::string> winner_id() const {
    if (!winner) return std::nullopt;
    return ids[*winner];
  }
};

struct TeamOutcome {
  bool team_won = false;
  double per_member_reward = 0.0;  // pot/2 on a win, 0 otherwise
};

// Winner needs a strict unique maximum of effective scores; any tie for the
// top leaves the pot unawarded. The pot itself is always the raw-score total.
inline std::pair<std::optional<std::size_t>, int> determine_winner(
    const std::vector<int>& raw_scores, const std::vector<int>& effective_scores) {
  const int pot = std::accumulate(raw_scores.begin(), raw_scores.end(), 0);
  std::optional<std::size_t> winner;
  if (!effective_scores.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < effective_scores.size(); ++i)
      if (effective_scores[i] > effective_scores[best]) best = i;
    const long top_count =
        std::count(effective_scores.begin(), effective_scores.end(), effective_scores[best]);
    if (top_count == 1) winner = best;
  }
  return {winner, pot};
}

// Handicap counts every other participant as an opponent, teammates included.
inline std::vector<int> effective_scores(const std::vector<int>& raw_scores,
                                         const std::vector<Participant>& participants,
                                         int handicap_per_opponent) {
  std::vector<int> eff = raw_scores;
  const int n_opponents = static_cast<int>(participants.size()) - 1;
  for (std::size_t i = 0; i < participants.size(); ++i)
    if (participants[i].is_learner) eff[i] -= handicap_per_opponent * n_opponents;
  return eff;
}

// Every unordered pair meets exactly once; match order is a seeded random
// permutation. Strategies are reset at the start of each match.
inline TournamentResult run_round_robin(const TournamentConfig& cfg, Rng& rng) {
  const std::size_t k = cfg.participants.size();
  if (k < 2) throw std::invalid_argument("round robin needs at least 2 participants");
  if (cfg.n_bouts < 1) throw std::invalid_argument("n_bouts must be >= 1");
  {
    std::set<std::string> seen;
    for (const Participant& p : cfg.participants)
      if (!seen.insert(p.id).second)
        throw std::invalid_argument("duplicate participant id: \"" + p.id + "\"");
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(k * (k - 1) / 2);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
  std::shuffle(pairs.begin(), pairs.end(), rng);

  TournamentResult res;
  res.raw_scores.assign(k, 0);
  for (const Participant& p : cfg.participants) {
    res.ids.push_back(p.id);
    res.team_ids.push_back(p.team_id);
  }
  for (const auto& [i, j] : pairs) {
    MatchResult mr = play_match(*cfg.participants[i].strategy, *cfg.participants[j].strategy,
                                cfg.n_bouts, rng, cfg.payoff);
    res.raw_scores[i] += mr.score_a;
    res.raw_scores[j] += mr.score_b;
    res.match_logs.push_back(MatchLog{i, j, std::move(mr)});
  }
  res.effective_scores =
      effective_scores(res.raw_scores, cfg.participants, cfg.handicap_per_opponent);
  std::tie(res.winner, res.pot) = determine_winner(res.raw_scores, res.effective_scores);
  return res;
}

inline TournamentResult run_round_robin(const TournamentConfig& cfg) {
  Rng rng(cfg.rng_seed);
  return run_round_robin(cfg, rng);
}

inline TeamOutcome team_outcome(const TournamentResult& result, const std::string& team_id) {
  int members = 0;
  bool winner_in_team = false;
  for (std::size_t i = 0; i < result.team_ids.size(); ++i) {
    if (result.team_ids[i] && *result.team_ids[i] == team_id) {
      ++members;
      if (result.winner && *result.winner == i) winner_in_team = true;
    }
  }
  if (members == 0) throw std::invalid_argument("unknown team id: \"" + team_id + "\"");
  if (members != 2)
    throw std::invalid_argument("team \"" + team_id + "\" must have exactly 2 members");
  TeamOutcome out;
  out.team_won = winner_in_team;
  out.per_member_reward = winner_in_team ? result.pot / 2.0 : 0.0;
  return out;
}

// One row per bout: (match_index, bout_index, player_a, player_b, action_a,
// action_b, payoff_a, payoff_b).
inline void write_bout_csv(const TournamentResult& result, std::ostream& os,
                           const PayoffMatrix& m = PayoffMatrix{}) {
  os << "match_index,bout_index,player_a,player_b,action_a,action_b,payoff_a,payoff_b\n";
  for (std::size_t mi = 0; mi < result.match_logs.size(); ++mi) {
    const MatchLog& log = result.match_logs[mi];
    for (std::size_t bi = 0; bi < log.result.history.size(); ++bi) {
      const Bout& bout = log.result.history[bi];
      const auto [pa, pb] = payoff(bout.self_action, bout.opponent_action, m);
      os << mi << ',' << bi << ',' << result.ids[log.a] << ',' << result.ids[log.b] << ','
         << action_char(bout.self_action) << ',' << action_char(bout.opponent_action) << ','
         << pa << ',' << pb << '\n';
    }
  }
}

}  // namespace ipd

#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipd/game.hpp"
#include "ipd/qtable.hpp"
#include "ipd/strategies.hpp"
#include "ipd/tournament.hpp"

namespace ipd {

// Exact cumulative payoff of pi against pi_opp over n bouts. Both strategies
// must be deterministic (a single trajectory carries all the probability
// mass); stochastic policies go through policy_value_mc instead.
inline int policy_value(Strategy& pi, Strategy& pi_opp, int n,
                        const PayoffMatrix& m = PayoffMatrix{}) {
  if (!pi.deterministic() || !pi_opp.deterministic())
    throw std::invalid_argument("policy_value needs deterministic strategies; "
                                "use policy_value_mc for stochastic ones");
  if (n == 0) return 0;
  Rng rng(0);  // deterministic strategies never draw
  return play_match(pi, pi_opp, n, rng, m).score_a;
}

inline double policy_value_mc(Strategy& pi, Strategy& pi_opp, int n, int samples,
                              Rng& rng, const PayoffMatrix& m = PayoffMatrix{}) {
  if (samples < 1) throw std::invalid_argument("policy_value_mc: samples must be >= 1");
  if (n == 0) return 0.0;
  double total = 0.0;
  for (int i = 0; i < samples; ++i) total += play_match(pi, pi_opp, n, rng, m).score_a;
  return total / samples;
}

struct BestResponse {
  int value = 0;
  std::vector<Action> actions;  // one optimal own-action sequence
};

namespace detail {

struct BestResponseSearch {
  Strategy* opponent;
  const PayoffMatrix* m;
  int n;
  Rng rng{0};

  BestResponse solve(MatchHistory& own, MatchHistory& opp) {
    if (static_cast<int>(own.size()) == n) return {0, {}};
    const Action a_opp = opponent->next_action(opp, rng);
    BestResponse best;
    bool first = true;
    for (Action a : {Action::Cooperate, Action::Defect}) {
      own.push_back(Bout{a, a_opp});
      opp.push_back(Bout{a_opp, a});
      BestResponse tail = solve(own, opp);
      own.pop_back();
      opp.pop_back();
      const int v = payoff(a, a_opp, *m).first + tail.value;
      if (first || v > best.value) {
        first = false;
        best.value = v;
        best.actions.clear();
        best.actions.push_back(a);
        best.actions.insert(best.actions.end(), tail.actions.begin(), tail.actions.end());
      }
    }
    return best;
  }
};

}  // namespace detail

// Exact maximum cumulative payoff over all 2^n own-action sequences against a
// deterministic opponent, by backward induction over the reachable game tree.
// The opponent must be a pure function of its own-perspective history (all
// classics and epsilon=0 policy strategies qualify). Ties prefer Cooperate.
inline BestResponse best_response_value(Strategy& pi_opp, int n,
                                        const PayoffMatrix& m = PayoffMatrix{}) {
  if (n < 0) throw std::invalid_argument("best_response_value: n must be >= 0");
  if (n > 20)
    throw std::invalid_argument("best_response_value: refusing n > 20 (2^n search)");
  if (!pi_opp.deterministic())
    throw std::invalid_argument("best_response_value needs a deterministic opponent");
  pi_opp.reset();
  MatchHistory own, opp;
  detail::BestResponseSearch search{&pi_opp, &m, n};
  return search.solve(own, opp);
}

// Greedy evaluation tournament for a trained pair: two epsilon=0 policy
// strategies on one team against the classic opponents, with handicaps.
struct TeamEvaluation {
  TournamentResult result;
  bool team_won = false;
  // Master = the member with the higher raw score (ties go to a).
  bool master_is_a = true;
};

inline TeamEvaluation evaluate_team(const QTable& table_a, const QTable& table_b,
                                    const std::vector<ClassicKind>& opponents, int n_bouts,
                                    int handicap_per_opponent = 3,
                                    const PayoffMatrix& payoff = PayoffMatrix{}) {
  TournamentConfig cfg;
  cfg.n_bouts = n_bouts;
  cfg.handicap_per_opponent = handicap_per_opponent;
  cfg.payoff = payoff;
  cfg.participants.push_back(Participant{
      "learner_a", std::make_shared<PolicyStrategy>(table_a, 0.0), true, "team"});
  cfg.participants.push_back(Participant{
      "learner_b", std::make_shared<PolicyStrategy>(table_b, 0.0), true, "team"});
  for (ClassicKind k : opponents)
    cfg.participants.push_back(Participant{classic_token(k), make_classic(k), false, {}});
  TeamEvaluation ev;
  ev.result = run_round_robin(cfg);
  ev.team_won = team_outcome(ev.result, "team").team_won;
  ev.master_is_a = ev.result.raw_scores[0] >= ev.result.raw_scores[1];
  return ev;
}

inline TournamentResult evaluate_single(const QTable& table,
                                        const std::vector<ClassicKind>& opponents,
                                        int n_bouts, int handicap_per_opponent = 3,
                                        const PayoffMatrix& payoff = PayoffMatrix{}) {
  TournamentConfig cfg;
  cfg.n_bouts = n_bouts;
  cfg.handicap_per_opponent = handicap_per_opponent;
  cfg.payoff = payoff;
  cfg.participants.push_back(
      Participant{"learner", std::make_shared<PolicyStrategy>(table, 0.0), true, {}});
  for (ClassicKind k : opponents)
    cfg.participants.push_back(Participant{classic_token(k), make_classic(k), false, {}});
  return run_round_robin(cfg);
}

// The team-objective indicator under greedy play: does the master/servant
// pair win the standard tournament?
inline bool brute_force_team_check(const QTable& master, const QTable& servant,
                                   const std::vector<ClassicKind>& opponents, int n_bouts,
                                   int handicap_per_opponent = 3,
                                   const PayoffMatrix& payoff = PayoffMatrix{}) {
  return evaluate_team(master, servant, opponents, n_bouts, handicap_per_opponent, payoff)
      .team_won;
}

struct GridRow {
  std::string id_a;
  std::string id_b;
  MatchHistory bouts;  // from id_a's perspective
};

struct StrategyGrid {
  int n_bouts = 0;
  std::vector<GridRow> rows;  // one per unordered pairing, k(k-1)/2 of them
};

// Bout-by-bout joint actions for every pairing under deterministic play.
inline StrategyGrid extract_strategy_grid(const std::vector<Participant>& participants,
                                          int n_bouts,
                                          const PayoffMatrix& m = PayoffMatrix{}) {
  for (const Participant& p : participants)
    if (!p.strategy->deterministic())
      throw std::invalid_argument("strategy grid needs deterministic participants: \"" +
                                  p.id + "\" is stochastic");
  StrategyGrid grid;
  grid.n_bouts = n_bouts;
  Rng rng(0);
  for (std::size_t i = 0; i < participants.size(); ++i)
    for (std::size_t j = i + 1; j < participants.size(); ++j) {
      MatchResult r = play_match(*participants[i].strategy, *participants[j].strategy,
                                 n_bouts, rng, m);
      grid.rows.push_back(GridRow{participants[i].id, participants[j].id,
                                  std::move(r.history)});
    }
  return grid;
}

inline void write_grid_csv(const StrategyGrid& grid, std::ostream& os) {
  os << "pairing,bout,action_a,action_b\n";
  for (const GridRow& row : grid.rows)
    for (std::size_t k = 0; k < row.bouts.size(); ++k)
      os << row.id_a << ':' << row.id_b << ',' << k << ','
         << action_char(row.bouts[k].self_action) << ','
         << action_char(row.bouts[k].opponent_action) << '\n';
}

// Number of decision states for n-bout matches: 1 + 4 + ... + 4^(n-1).
inline long long possible_states(int n_bouts) {
  if (n_bouts < 1 || n_bouts > 30)
    throw std::invalid_argument("possible_states: n_bouts must lie in [1, 30]");
  long long sum = 0;
  long long term = 1;
  for (int k = 0; k < n_bouts; ++k) {
    sum += term;
    term *= 4;
  }
  return sum;
}

struct CoverageReport {
  long long visited_states = 0;
  long long possible = 0;
  double fraction = 0.0;
};

inline CoverageReport state_coverage(const QTable& q) {
  CoverageReport r;
  r.visited_states = static_cast<long long>(q.size());
  r.possible = possible_states(q.n_bouts());
  r.fraction = static_cast<double>(r.visited_states) / static_cast<double>(r.possible);
  return r;
}

struct Regime {
  std::string id;
  QTable master;
  QTable servant;
};

struct CrossPairMatrix {
  std::vector<std::string> regime_ids;
  // team_won[i][j]: master from regime i with servant from regime j.
  std::vector<std::vector<bool>> team_won;
  // Summary fractions over unordered distinct regime pairs, and the same
  // including self-pairs (both denominators are reported because the source
  // statistic leaves the convention ambiguous).
  double frac_at_least_one = 0.0;
  double frac_both = 0.0;
  double frac_at_least_one_with_self = 0.0;
  double frac_both_with_self = 0.0;
};

inline CrossPairMatrix cross_regime_matrix(const std::vector<Regime>& regimes,
                                           const std::vector<ClassicKind>& opponents,
                                           int handicap_per_opponent = 3,
                                           const PayoffMatrix& payoff = PayoffMatrix{}) {
  if (regimes.empty()) throw std::invalid_argument("cross_regime_matrix: no regimes");
  const int n = regimes.front().master.n_bouts();
  for (const Regime& r : regimes)
    if (r.master.n_bouts() != n || r.servant.n_bouts() != n)
      throw std::invalid_argument("cross_regime_matrix: regimes disagree on n_bouts");

  CrossPairMatrix m;
  const std::size_t k = regimes.size();
  m.team_won.assign(k, std::vector<bool>(k, false));
  for (const Regime& r : regimes) m.regime_ids.push_back(r.id);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      m.team_won[i][j] = brute_force_team_check(regimes[i].master, regimes[j].servant,
                                                opponents, n, handicap_per_opponent, payoff);

  long distinct = 0, distinct_any = 0, distinct_both = 0;
  long with_self = 0, self_any = 0, self_both = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      const bool any = m.team_won[i][j] || m.team_won[j][i];
      const bool both = m.team_won[i][j] && m.team_won[j][i];
      ++with_self;
      self_any += any;
      self_both += both;
      if (i != j) {
        ++distinct;
        distinct_any += any;
        distinct_both += both;
      }
    }
  m.frac_at_least_one = distinct > 0 ? static_cast<double>(distinct_any) / distinct : 0.0;
  m.frac_both = distinct > 0 ? static_cast<double>(distinct_both) / distinct : 0.0;
  m.frac_at_least_one_with_self = static_cast<double>(self_any) / with_self;
  m.frac_both_with_self = static_cast<double>(self_both) / with_self;
  return m;
}

inline void write_matrix_csv(const CrossPairMatrix& m, std::ostream& os) {
  os << "regime_i,regime_j,master_source,servant_source,team_won\n";
  for (std::size_t i = 0; i < m.team_won.size(); ++i)
    for (std::size_t j = 0; j < m.team_won.size(); ++j)
      os << i << ',' << j << ',' << m.regime_ids[i] << ',' << m.regime_ids[j] << ','
         << (m.team_won[i][j] ? 1 : 0) << '\n';
}

inline int score_spread(const TournamentResult& result) {
  if (result.raw_scores.empty()) return 0;
  const auto [lo, hi] = std::minmax_element(result.raw_scores.begin(),
                                            result.raw_scores.end());
  return *hi - *lo;
}

}  // namespace ipd

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ipd {

using Rng = std::mt19937_64;

enum class Action : std::uint8_t { Cooperate, Defect };

inline char action_char(Action a) { return a == Action::Cooperate ? 'C' : 'D'; }

inline Action action_from_char(char c) {
  if (c == 'C') return Action::Cooperate;
  if (c == 'D') return Action::Defect;
  throw std::invalid_argument(std::string("not an action character: '") + c + "'");
}

// One round's joint outcome, always from a fixed agent's perspective.
struct Bout {
  Action self_action;
  Action opponent_action;

  bool operator==(const Bout&) const = default;
};

// The actions taken so far in the current match, own perspective first.
using MatchHistory = std::vector<Bout>;

inline Bout flipped(const Bout& b) { return Bout{b.opponent_action, b.self_action}; }

inline MatchHistory flipped(const MatchHistory& h) {
  MatchHistory out;
  out.reserve(h.size());
  for (const Bout& b : h) out.push_back(flipped(b));
  return out;
}

// Text encoding of a history: two characters per bout, self action first.
// The empty string is the initial state s0.
using StateKey = std::string;

inline StateKey encode_history(const MatchHistory& h) {
  StateKey key;
  key.reserve(2 * h.size());
  for (const Bout& b : h) {
    key.push_back(action_char(b.self_action));
    key.push_back(action_char(b.opponent_action));
  }
  return key;
}

inline MatchHistory decode_state_key(const StateKey& key) {
  if (key.size() % 2 != 0)
    throw std::invalid_argument("state key has odd length: \"" + key + "\"");
  MatchHistory h;
  h.reserve(key.size() / 2);
  for (std::size_t i = 0; i < key.size(); i += 2)
    h.push_back(Bout{action_from_char(key[i]), action_from_char(key[i + 1])});
  return h;
}

inline bool valid_state_key(const StateKey& key) {
  if (key.size() % 2 != 0) return false;
  for (char c : key)
    if (c != 'C' && c != 'D') return false;
  return true;
}

// Single-round payoffs. Defaults are Axelrod's tournament values
// (T=5, R=3, P=1, S=0); construction enforces T > R > P > S.
struct PayoffMatrix {
  int reward_mutual_coop = 3;  // R
  int temptation = 5;          // T
  int sucker = 0;              // S
  int punishment = 1;          // P

  PayoffMatrix() = default;
  PayoffMatrix(int r, int t, int s, int p)
      : reward_mutual_coop(r), temptation(t), sucker(s), punishment(p) {
    if (!(temptation > reward_mutual_coop && reward_mutual_coop > punishment &&
          punishment > sucker))
      throw std::invalid_argument("payoff matrix must satisfy T > R > P > S");
  }

  bool operator==(const PayoffMatrix&) const = default;
};

inline std::pair<int, int> payoff(Action a_self, Action a_opp, const PayoffMatrix& m) {
  const bool sc = a_self == Action::Cooperate;
  const bool oc = a_opp == Action::Cooperate;
  if (sc && oc) return {m.reward_mutual_coop, m.reward_mutual_coop};
  if (sc && !oc) return {m.sucker, m.temptation};
  if (!sc && oc) return {m.temptation, m.sucker};
  return {m.punishment, m.punishment};
}

// Decision interface. Strategies see only their own-perspective history of
// the current match: no opponent identity, no cross-match memory.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual Action next_action(const MatchHistory& own_history, Rng& rng) = 0;
  // Called between matches; implementations that keep no per-match state may ignore it.
  virtual void reset() {}
  virtual bool deterministic() const { return true; }
};

struct MatchResult {
  MatchHistory history;  // from player a's perspective
  int score_a = 0;
  int score_b = 0;
};

// Plays exactly n bouts. Each strategy is reset first and receives only its
// own-perspective history before each decision.
inline MatchResult play_match(Strategy& a, Strategy& b, int n_bouts, Rng& rng,
                              const PayoffMatrix& m = PayoffMatrix{}) {
  if (n_bouts < 1) throw std::invalid_argument("play_match: n_bouts must be >= 1");
  a.reset();
  b.reset();
  MatchResult r;
  r.history.reserve(static_cast<std::size_t>(n_bouts));
  MatchHistory hist_b;  // b's perspective, maintained incrementally
  hist_b.reserve(static_cast<std::size_t>(n_bouts));
  for (int i = 0; i < n_bouts; ++i) {
    const Action act_a = a.next_action(r.history, rng);
    const Action act_b = b.next_action(hist_b, rng);
    const auto [pa, pb] = payoff(act_a, act_b, m);
    r.score_a += pa;
    r.score_b += pb;
    r.history.push_back(Bout{act_a, act_b});
    hist_b.push_back(Bout{act_b, act_a});
  }
  return r;
}

}  // namespace ipd

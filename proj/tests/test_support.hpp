#pragma once

#include <functional>

#include "ipd/game.hpp"
#include "ipd/qtable.hpp"

namespace ipd::test {

// Builds a Q-table whose greedy policy equals the given deterministic policy
// function, by enumerating every decision state of an n-bout match.
inline QTable make_policy_table(int n_bouts,
                                const std::function<Action(const MatchHistory&)>& policy) {
  QTable table(n_bouts);
  const std::function<void(MatchHistory&)> visit = [&](MatchHistory& h) {
    const StateKey key = encode_history(h);
    const Action a = policy(h);
    table.set(key, a, 1.0);
    table.set(key, a == Action::Cooperate ? Action::Defect : Action::Cooperate, 0.0);
    if (static_cast<int>(h.size()) + 1 < n_bouts) {
      for (Action self : {Action::Cooperate, Action::Defect})
        for (Action opp : {Action::Cooperate, Action::Defect}) {
          h.push_back(Bout{self, opp});
          visit(h);
          h.pop_back();
        }
    }
  };
  MatchHistory h;
  visit(h);
  return table;
}

// A hand-written colluding pair for analysis tests. The master opens D then
// C, defects forever afterwards; the servant opens C, C and from bout 3 on
// cooperates only with an opponent whose first two actions were D, C (the
// master's signature), defecting against everyone else.
inline Action synthetic_master_policy(const MatchHistory& h) {
  if (h.empty()) return Action::Defect;
  if (h.size() == 1)
    return h[0].opponent_action == Action::Cooperate ? Action::Cooperate : Action::Defect;
  return Action::Defect;
}

inline Action synthetic_servant_policy(const MatchHistory& h) {
  if (h.size() < 2) return Action::Cooperate;
  const bool master_signature = h[0].opponent_action == Action::Defect &&
                                h[1].opponent_action == Action::Cooperate;
  return master_signature ? Action::Cooperate : Action::Defect;
}

}  // namespace ipd::test

#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "ipd/game.hpp"
#include "ipd/qtable.hpp"

namespace ipd {

// The five classic opponents. All are deterministic and, per the usual
// Axelrod-library convention, the conditional ones open with Cooperate.
enum class ClassicKind { TitForTat, TitForTwoTats, Grudge, Defector, Cooperator };

inline const char* classic_token(ClassicKind k) {
  switch (k) {
    case ClassicKind::TitForTat: return "tit_for_tat";
    case ClassicKind::TitForTwoTats: return "tit_for_two_tats";
    case ClassicKind::Grudge: return "grudge";
    case ClassicKind::Defector: return "defector";
    case ClassicKind::Cooperator: return "cooperator";
  }
  throw std::logic_error("unreachable");
}

inline ClassicKind classic_from_token(const std::string& token) {
  for (ClassicKind k : {ClassicKind::TitForTat, ClassicKind::TitForTwoTats,
                        ClassicKind::Grudge, ClassicKind::Defector,
                        ClassicKind::Cooperator})
    if (token == classic_token(k)) return k;
  throw std::invalid_argument("unknown strategy token: \"" + token + "\"");
}

// Pure function of the own-perspective history; carries no per-match state.
inline Action classic_action(ClassicKind kind, const MatchHistory& h) {
  switch (kind) {
    case ClassicKind::Cooperator:
      return Action::Cooperate;
    case ClassicKind::Defector:
      return Action::Defect;
    case ClassicKind::TitForTat:
      return h.empty() ? Action::Cooperate : h.back().opponent_action;
    case ClassicKind::TitForTwoTats:
      // Defect only after two consecutive opponent defections.
      if (h.size() >= 2 && h[h.size() - 1].opponent_action == Action::Defect &&
          h[h.size() - 2].opponent_action == Action::Defect)
        return Action::Defect;
      return Action::Cooperate;
    case ClassicKind::Grudge:
      for (const Bout& b : h)
        if (b.opponent_action == Action::Defect) return Action::Defect;
      return Action::Cooperate;
  }
  throw std::logic_error("unreachable");
}

class ClassicStrategy final : public Strategy {
 public:
  explicit ClassicStrategy(ClassicKind kind) : kind_(kind) {}
  Action next_action(const MatchHistory& h, Rng&) override {
    return classic_action(kind_, h);
  }
  ClassicKind kind() const { return kind_; }

 private:
  ClassicKind kind_;
};

inline std::shared_ptr<Strategy> make_classic(ClassicKind k) {
  return std::make_shared<ClassicStrategy>(k);
}

// Argmax over the two action values; ties and unseen states resolve to
// Cooperate.
inline Action greedy_action(const QTable& q, const StateKey& s) {
  const QTable::Values v = q.values(s);
  return v[1] > v[0] ? Action::Defect : Action::Cooperate;
}

// Greedy with probability 1-epsilon, otherwise a uniform draw over {C, D}
// (the random branch may repeat the greedy action).
inline Action epsilon_greedy_action(const QTable& q, const StateKey& s, double epsilon,
                                    Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) {
      std::uniform_int_distribution<int> coin(0, 1);
      return coin(rng) == 0 ? Action::Cooperate : Action::Defect;
    }
  }
  return greedy_action(q, s);
}

// Q-table-backed strategy. With epsilon = 0 it is a deterministic function
// of the state key. The referenced table must outlive the strategy and must
// not be mutated during a match.
class PolicyStrategy final : public Strategy {
 public:
  PolicyStrategy(const QTable& table, double epsilon) : table_(&table), epsilon_(epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0)
      throw std::invalid_argument("PolicyStrategy: epsilon must lie in [0, 1]");
  }

  Action next_action(const MatchHistory& h, Rng& rng) override {
    return epsilon_greedy_action(*table_, encode_history(h), epsilon_, rng);
  }
  bool deterministic() const override { return epsilon_ == 0.0; }
  double epsilon() const { return epsilon_; }

 private:
  const QTable* table_;
  double epsilon_;
};

}  // namespace ipd

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "ipd/game.hpp"

namespace ipd {

// Tabular action-value estimates keyed by encoded match history. Entries
// exist only for states that have been written, so size() doubles as the
// visited-state count. Decisions happen strictly before the final bout
// completes, hence the key-length bound of 2*(n_bouts-1).
class QTable {
 public:
  using Values = std::array<double, 2>;  // [Cooperate, Defect]

  explicit QTable(int n_bouts, double init = 0.0) : n_bouts_(n_bouts), init_(init) {
    if (n_bouts < 1) throw std::invalid_argument("QTable: n_bouts must be >= 1");
    if (!std::isfinite(init)) throw std::invalid_argument("QTable: non-finite init");
  }

  int n_bouts() const { return n_bouts_; }
  double init() const { return init_; }

  // Unseen states read as the initialization value; never inserts.
  Values values(const StateKey& s) const {
    auto it = entries_.find(s);
    return it == entries_.end() ? Values{init_, init_} : it->second;
  }

  double value(const StateKey& s, Action a) const {
    return values(s)[static_cast<std::size_t>(a)];
  }

  double max_value(const StateKey& s) const {
    const Values v = values(s);
    return v[0] > v[1] ? v[0] : v[1];
  }

  void set(const StateKey& s, Action a, double v) {
    check_key(s);
    if (!std::isfinite(v))
      throw std::invalid_argument("QTable: non-finite value for state \"" + s + "\"");
    auto [it, inserted] = entries_.try_emplace(s, Values{init_, init_});
    it->second[static_cast<std::size_t>(a)] = v;
  }

  bool contains(const StateKey& s) const { return entries_.count(s) != 0; }
  std::size_t size() const { return entries_.size(); }
  const std::unordered_map<StateKey, Values>& entries() const { return entries_; }

 private:
  void check_key(const StateKey& s) const {
    if (!valid_state_key(s))
      throw std::invalid_argument("QTable: malformed state key \"" + s + "\"");
    if (s.size() >= 2 * static_cast<std::size_t>(n_bouts_))
      throw std::invalid_argument("QTable: state key \"" + s + "\" too long for " +
                                  std::to_string(n_bouts_) + "-bout matches");
  }

  int n_bouts_;
  double init_ = 0.0;
  std::unordered_map<StateKey, Values> entries_;
};

}  // namespace ipd

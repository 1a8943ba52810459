#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridfc/case.hpp"

namespace gridfc {

/// Raised before enumeration starts when the chain-count upper bound exceeds
/// the node budget.
class BudgetExceededError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when an oracle file is missing or malformed.
class OracleIoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One exhaustively evaluated fault chain.
struct OracleEntry {
  std::vector<int> actions;
  double tll_mw = 0.0;
  bool risky = false;
};

/// Every fault chain of the case up to the horizon, in depth-first order
/// with ascending action ids, each with its exact total load loss.
class OracleTable {
public:
  OracleTable() = default;
  OracleTable(std::vector<OracleEntry> entries, double risky_threshold_mw);

  [[nodiscard]] const std::vector<OracleEntry>& entries() const noexcept {
    return entries_;
  }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  /// The threshold the risky flags were computed against; NaN when the table
  /// was loaded from a file that does not carry it.
  [[nodiscard]] double risky_threshold_mw() const noexcept {
    return threshold_mw_;
  }

  /// Entry for an exact action sequence, or nullptr when absent.
  [[nodiscard]] const OracleEntry* find(const std::vector<int>& actions) const;

  /// Sum of the `s` largest chain losses (all of them when s exceeds the
  /// table). The regret reference for a search of s episodes.
  [[nodiscard]] double top_sum(int s) const;

  [[nodiscard]] int risky_count() const noexcept { return risky_count_; }

private:
  std::vector<OracleEntry> entries_;
  std::map<std::vector<int>, std::size_t> index_;
  std::vector<double> losses_desc_;  ///< all TLLs, largest first
  double threshold_mw_ = std::numeric_limits<double>::quiet_NaN();
  int risky_count_ = 0;
};

/// Exhaustively simulates every fault chain of the case up to `horizon`
/// stages. The chain-count upper bound (components falling one per stage)
/// is checked against `node_budget` before any work happens. `threads`
/// splits the first-stage subtrees across workers; the result is identical
/// to the single-threaded order for any thread count.
[[nodiscard]] OracleTable enumerate_chains(const GridCase& grid, int horizon,
                                           double risky_threshold_mw,
                                           double node_budget = 1.0e6,
                                           int threads = 1);

/// CSV with header "action_seq,tll_mw,risky"; action ids joined by '|',
/// losses printed exactly (round-trip formatting). `comment` lines, when
/// given, are written first, each prefixed with "# ".
void save_oracle(const OracleTable& table, const std::string& path,
                 const std::vector<std::string>& comment = {});

/// Reads a file written by save_oracle. Leading '#' lines are ignored; the
/// risky flags are taken from the file since the threshold is not stored.
[[nodiscard]] OracleTable load_oracle(const std::string& path);

}  // namespace gridfc

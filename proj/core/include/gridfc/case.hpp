#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gridfc {

/// Raised when case text violates the documented format. Carries the kind of
/// violation and the 1-based source line it was detected on.
class ParseError : public std::runtime_error {
public:
  enum class Kind {
    malformed_row,          ///< wrong arity, bad number, duplicate/invalid field
    unknown_bus,            ///< generator or branch references a missing bus id
    nonpositive_reactance,  ///< branch reactance must be > 0
    slack_count,            ///< the case must declare exactly one slack bus
  };

  ParseError(Kind kind, int line, const std::string& message);

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] int line() const noexcept { return line_; }

private:
  Kind kind_;
  int line_;
};

/// Raised when total load cannot be covered by total generation capacity.
class InfeasibleCaseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Bus {
  int id = 0;            ///< external bus number as written in the case file
  double load_mw = 0.0;  ///< active-power demand, already multiplied by load_scale
  bool is_slack = false;
};

struct Generator {
  int bus_id = 0;
  double p_mw = 0.0;      ///< dispatched output after generation-load balancing
  double p_max_mw = 0.0;  ///< capacity; dispatch never exceeds it
};

enum class BranchKind { line, transformer };

struct Branch {
  int component_id = 0;  ///< dense 0-based id; doubles as the action id
  int from_bus = 0;      ///< external bus ids
  int to_bus = 0;
  int from_index = 0;    ///< dense 0-based bus positions, filled at parse time
  int to_index = 0;
  double reactance_pu = 0.0;
  double rating_mw = 0.0;  ///< 0 = absent in source data (see with_rating_fallback)
  BranchKind kind = BranchKind::line;
  bool in_service = true;
};

/// Undirected bus connectivity over a set of live branches. Parallel branches
/// collapse onto a single edge, the diagonal is always empty, and edges are
/// kept sorted so iteration order (and therefore floating-point accumulation
/// order everywhere it is used) is deterministic.
class AdjacencyMatrix {
public:
  AdjacencyMatrix() = default;
  AdjacencyMatrix(int n, std::vector<std::pair<int, int>> edges);

  [[nodiscard]] int size() const noexcept { return n_; }
  [[nodiscard]] const std::vector<std::pair<int, int>>& edges() const noexcept {
    return edges_;
  }
  [[nodiscard]] Eigen::MatrixXd dense() const;

  bool operator==(const AdjacencyMatrix&) const = default;

private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;  ///< (u, v) with u < v, strictly ascending
};

/// A parsed study case. Loads are stored post-scaling and generator dispatch
/// is always balanced against them, so the case is solvable as-is.
struct GridCase {
  double base_mva = 100.0;
  double load_scale = 1.0;  ///< cumulative multiplier applied to the source loads
  std::vector<Bus> buses;   ///< sorted by external id
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  [[nodiscard]] int bus_count() const noexcept { return static_cast<int>(buses.size()); }
  [[nodiscard]] int component_count() const noexcept {
    return static_cast<int>(branches.size());
  }
  /// Dense position of an external bus id; throws std::out_of_range if absent.
  [[nodiscard]] int bus_index(int bus_id) const;
  [[nodiscard]] double total_load_mw() const;
  [[nodiscard]] double total_capacity_mw() const;
};

/// Parses the documented case-text subset:
///   mpc.baseMVA = <num>;
///   mpc.bus    = [ bus_i type Pd; ... ];
///   mpc.gen    = [ bus Pg Pmax; ... ];
///   mpc.branch = [ fbus tbus x rateA status is_transformer; ... ];
/// '%' starts a comment; rows end with ';'. Generator dispatch is rebalanced
/// to match total load on return.
[[nodiscard]] GridCase parse_case(std::string_view text);

/// Inverse of parse_case on the documented fields: parse(serialize(c)) == c.
[[nodiscard]] std::string serialize_case(const GridCase& grid);

/// Returns a copy with every bus load multiplied by `scale` (> 0) and the
/// generator dispatch rebalanced proportionally to capacity. Throws
/// InfeasibleCaseError if the scaled load exceeds total capacity.
[[nodiscard]] GridCase apply_load_scale(const GridCase& grid, double scale);

/// Bus connectivity induced by the branches whose component id is marked live
/// in `in_service` (size = component_count). The mask is the single source of
/// truth at runtime; callers seed it from the branches' source status.
[[nodiscard]] AdjacencyMatrix adjacency(const GridCase& grid,
                                        const std::vector<std::uint8_t>& in_service);

}  // namespace gridfc

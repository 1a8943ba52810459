#include "gridfc/case.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

namespace gridfc {

namespace {

constexpr double kBalanceSlack = 1e-9;  // tolerance when comparing load to capacity

std::string kind_prefix(ParseError::Kind kind) {
  switch (kind) {
    case ParseError::Kind::malformed_row: return "malformed row";
    case ParseError::Kind::unknown_bus: return "unknown bus";
    case ParseError::Kind::nonpositive_reactance: return "nonpositive reactance";
    case ParseError::Kind::slack_count: return "slack bus count";
  }
  return "parse error";
}

struct Row {
  int line = 0;
  std::vector<double> values;
};

/// Strips '%' comments and splits the section body between '[' and '];' into
/// rows. Every row must terminate with ';'.
class CaseText {
public:
  explicit CaseText(std::string_view text) {
    std::size_t start = 0;
    int line_no = 1;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      std::string_view line = text.substr(
          start, end == std::string_view::npos ? text.size() - start : end - start);
      if (std::size_t cut = line.find('%'); cut != std::string_view::npos) {
        line = line.substr(0, cut);
      }
      lines_.push_back({line_no, std::string(line)});
      if (end == std::string_view::npos) break;
      start = end + 1;
      ++line_no;
    }
  }

  /// Finds `mpc.<name> = <scalar>;` and returns the scalar.
  double scalar(const std::string& name) const {
    const std::string key = "mpc." + name;
    for (const auto& [line_no, text] : lines_) {
      std::size_t pos = text.find(key);
      if (pos == std::string::npos) continue;
      std::size_t eq = text.find('=', pos);
      std::size_t semi = text.find(';', pos);
      if (eq == std::string::npos || semi == std::string::npos || semi < eq) {
        throw ParseError(ParseError::Kind::malformed_row, line_no,
                         "malformed row: bad scalar assignment for " + key);
      }
      return parse_number(text.substr(eq + 1, semi - eq - 1), line_no);
    }
    throw ParseError(ParseError::Kind::malformed_row, 0,
                     "malformed row: missing " + key);
  }

  /// Extracts the rows of `mpc.<name> = [ ... ];`, also reporting the line the
  /// section opens on (used for section-level errors such as a missing slack).
  std::vector<Row> section(const std::string& name, int& section_line) const {
    const std::string key = "mpc." + name;
    std::size_t i = 0;
    for (; i < lines_.size(); ++i) {
      std::size_t pos = lines_[i].second.find(key);
      if (pos == std::string::npos) continue;
      std::size_t bracket = lines_[i].second.find('[', pos);
      if (bracket == std::string::npos) continue;
      section_line = lines_[i].first;
      break;
    }
    if (i == lines_.size()) {
      throw ParseError(ParseError::Kind::malformed_row, 0,
                       "malformed row: missing section " + key);
    }

    std::vector<Row> rows;
    std::string pending;
    int pending_line = 0;
    // Consume text after the '[' on the opening line, then whole lines until '];'.
    std::string tail = lines_[i].second.substr(lines_[i].second.find('[') + 1);
    int tail_line = lines_[i].first;
    for (;;) {
      std::size_t close = tail.find(']');
      std::string body = close == std::string::npos ? tail : tail.substr(0, close);
      std::size_t from = 0;
      while (from < body.size()) {
        std::size_t semi = body.find(';', from);
        std::string piece =
            body.substr(from, semi == std::string::npos ? std::string::npos : semi - from);
        if (pending.empty()) pending_line = tail_line;
        pending += piece;
        if (semi == std::string::npos) break;
        rows.push_back(tokenize_row(pending, pending_line));
        pending.clear();
        from = semi + 1;
      }
      if (close != std::string::npos) {
        if (!is_blank(pending)) {
          throw ParseError(ParseError::Kind::malformed_row, tail_line,
                           "malformed row: row does not end with ';'");
        }
        return rows;
      }
      if (++i >= lines_.size()) {
        throw ParseError(ParseError::Kind::malformed_row, section_line,
                         "malformed row: unterminated section " + key);
      }
      tail = lines_[i].second;
      tail_line = lines_[i].first;
    }
  }

private:
  static bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
  }

  static double parse_number(std::string_view token, int line) {
    std::size_t b = 0, e = token.size();
    while (b < e && std::isspace(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(token[e - 1]))) --e;
    token = token.substr(b, e - b);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
      throw ParseError(ParseError::Kind::malformed_row, line,
                       "malformed row: bad number '" + std::string(token) + "'");
    }
    return value;
  }

  static Row tokenize_row(const std::string& text, int line) {
    Row row;
    row.line = line;
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      std::size_t start = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i > start) {
        row.values.push_back(
            parse_number(std::string_view(text).substr(start, i - start), line));
      }
    }
    if (row.values.empty()) {
      throw ParseError(ParseError::Kind::malformed_row, line, "malformed row: empty row");
    }
    return row;
  }

  std::vector<std::pair<int, std::string>> lines_;
};

int to_int(double v, int line, const char* what) {
  double r = std::round(v);
  if (std::abs(v - r) > 1e-9 || std::abs(r) > 2e9) {
    throw ParseError(ParseError::Kind::malformed_row, line,
                     std::string("malformed row: ") + what + " must be an integer");
  }
  return static_cast<int>(r);
}

/// Scales generator dispatch proportionally to capacity so that total
/// generation equals total load. Throws when capacity cannot cover the load.
void balance_generation(GridCase& grid) {
  const double load = grid.total_load_mw();
  const double capacity = grid.total_capacity_mw();
  if (load > capacity + kBalanceSlack) {
    throw InfeasibleCaseError("infeasible case: total load " + std::to_string(load) +
                              " MW exceeds generation capacity " +
                              std::to_string(capacity) + " MW");
  }
  const double ratio = capacity > 0.0 ? std::max(load, 0.0) / capacity : 0.0;
  for (auto& gen : grid.generators) gen.p_mw = gen.p_max_mw * ratio;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ParseError::ParseError(Kind kind, int line, const std::string& message)
    : std::runtime_error(kind_prefix(kind) + " (line " + std::to_string(line) +
                         "): " + message),
      kind_(kind),
      line_(line) {}

AdjacencyMatrix::AdjacencyMatrix(int n, std::vector<std::pair<int, int>> edges)
    : n_(n), edges_(std::move(edges)) {
  for (auto& [u, v] : edges_) {
    if (u == v || u < 0 || v < 0 || u >= n_ || v >= n_) {
      throw std::invalid_argument("adjacency edge out of range or on the diagonal");
    }
    if (u > v) std::swap(u, v);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

Eigen::MatrixXd AdjacencyMatrix::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
  for (const auto& [u, v] : edges_) {
    m(u, v) = 1.0;
    m(v, u) = 1.0;
  }
  return m;
}

int GridCase::bus_index(int bus_id) const {
  auto it = std::lower_bound(buses.begin(), buses.end(), bus_id,
                             [](const Bus& b, int id) { return b.id < id; });
  if (it == buses.end() || it->id != bus_id) {
    throw std::out_of_range("unknown bus id " + std::to_string(bus_id));
  }
  return static_cast<int>(it - buses.begin());
}

double GridCase::total_load_mw() const {
  double sum = 0.0;
  for (const auto& bus : buses) sum += bus.load_mw;
  return sum;
}

double GridCase::total_capacity_mw() const {
  double sum = 0.0;
  for (const auto& gen : generators) sum += gen.p_max_mw;
  return sum;
}

GridCase parse_case(std::string_view text) {
  CaseText source(text);
  GridCase grid;
  grid.base_mva = source.scalar("baseMVA");
  if (!(grid.base_mva > 0.0)) {
    throw ParseError(ParseError::Kind::malformed_row, 0, "baseMVA must be positive");
  }

  int bus_section_line = 0;
  int slack_line = 0;
  std::unordered_set<int> seen_ids;
  for (const Row& row : source.section("bus", bus_section_line)) {
    if (row.values.size() != 3) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: bus rows need 3 columns (bus_i type Pd)");
    }
    Bus bus;
    bus.id = to_int(row.values[0], row.line, "bus id");
    const int type = to_int(row.values[1], row.line, "bus type");
    bus.load_mw = row.values[2];
    if (type != 1 && type != 2 && type != 3) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: bus type must be 1, 2, or 3");
    }
    bus.is_slack = type == 3;
    if (bus.is_slack) {
      if (slack_line != 0) {
        throw ParseError(ParseError::Kind::slack_count, row.line,
                         "second slack bus declared (first on line " +
                             std::to_string(slack_line) + ")");
      }
      slack_line = row.line;
    }
    if (!seen_ids.insert(bus.id).second) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: duplicate bus id " + std::to_string(bus.id));
    }
    grid.buses.push_back(bus);
  }
  if (slack_line == 0) {
    throw ParseError(ParseError::Kind::slack_count, bus_section_line,
                     "no slack bus declared");
  }
  std::sort(grid.buses.begin(), grid.buses.end(),
            [](const Bus& a, const Bus& b) { return a.id < b.id; });

  auto require_bus = [&](int id, int line) {
    if (!seen_ids.count(id)) {
      throw ParseError(ParseError::Kind::unknown_bus, line,
                       "reference to undeclared bus " + std::to_string(id));
    }
  };

  int section_line = 0;
  for (const Row& row : source.section("gen", section_line)) {
    if (row.values.size() != 3) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: gen rows need 3 columns (bus Pg Pmax)");
    }
    Generator gen;
    gen.bus_id = to_int(row.values[0], row.line, "gen bus");
    gen.p_mw = row.values[1];
    gen.p_max_mw = row.values[2];
    require_bus(gen.bus_id, row.line);
    if (gen.p_max_mw < 0.0) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: Pmax must be >= 0");
    }
    grid.generators.push_back(gen);
  }

  for (const Row& row : source.section("branch", section_line)) {
    if (row.values.size() != 6) {
      throw ParseError(
          ParseError::Kind::malformed_row, row.line,
          "malformed row: branch rows need 6 columns (fbus tbus x rateA status is_transformer)");
    }
    Branch br;
    br.component_id = grid.component_count();
    br.from_bus = to_int(row.values[0], row.line, "fbus");
    br.to_bus = to_int(row.values[1], row.line, "tbus");
    br.reactance_pu = row.values[2];
    br.rating_mw = row.values[3];
    const int status = to_int(row.values[4], row.line, "status");
    const int is_transformer = to_int(row.values[5], row.line, "is_transformer");
    require_bus(br.from_bus, row.line);
    require_bus(br.to_bus, row.line);
    if (br.from_bus == br.to_bus) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: branch endpoints coincide");
    }
    if (!(br.reactance_pu > 0.0)) {
      throw ParseError(ParseError::Kind::nonpositive_reactance, row.line,
                       "branch reactance must be > 0");
    }
    if (br.rating_mw < 0.0) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: rateA must be >= 0");
    }
    if (status != 0 && status != 1) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: status must be 0 or 1");
    }
    if (is_transformer != 0 && is_transformer != 1) {
      throw ParseError(ParseError::Kind::malformed_row, row.line,
                       "malformed row: is_transformer must be 0 or 1");
    }
    br.in_service = status == 1;
    br.kind = is_transformer == 1 ? BranchKind::transformer : BranchKind::line;
    br.from_index = grid.bus_index(br.from_bus);
    br.to_index = grid.bus_index(br.to_bus);
    grid.branches.push_back(br);
  }

  balance_generation(grid);
  return grid;
}

std::string serialize_case(const GridCase& grid) {
  std::string out;
  out += "mpc.baseMVA = " + format_number(grid.base_mva) + ";\n\n";
  out += "mpc.bus = [\n";
  for (const auto& bus : grid.buses) {
    const int type = bus.is_slack ? 3 : 1;
    out += "\t" + std::to_string(bus.id) + "\t" + std::to_string(type) + "\t" +
           format_number(bus.load_mw) + ";\n";
  }
  out += "];\n\nmpc.gen = [\n";
  for (const auto& gen : grid.generators) {
    out += "\t" + std::to_string(gen.bus_id) + "\t" + format_number(gen.p_mw) + "\t" +
           format_number(gen.p_max_mw) + ";\n";
  }
  out += "];\n\nmpc.branch = [\n";
  for (const auto& br : grid.branches) {
    out += "\t" + std::to_string(br.from_bus) + "\t" + std::to_string(br.to_bus) + "\t" +
           format_number(br.reactance_pu) + "\t" + format_number(br.rating_mw) + "\t" +
           (br.in_service ? "1" : "0") + "\t" +
           (br.kind == BranchKind::transformer ? "1" : "0") + ";\n";
  }
  out += "];\n";
  return out;
}

GridCase apply_load_scale(const GridCase& grid, double scale) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("load scale must be > 0");
  }
  GridCase scaled = grid;
  for (auto& bus : scaled.buses) bus.load_mw *= scale;
  scaled.load_scale *= scale;
  balance_generation(scaled);
  return scaled;
}

AdjacencyMatrix adjacency(const GridCase& grid,
                          const std::vector<std::uint8_t>& in_service) {
  if (static_cast<int>(in_service.size()) != grid.component_count()) {
    throw std::invalid_argument("in_service mask size must equal component count");
  }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(grid.branches.size());
  for (const auto& br : grid.branches) {
    if (!in_service[static_cast<std::size_t>(br.component_id)]) continue;
    edges.emplace_back(std::min(br.from_index, br.to_index),
                       std::max(br.from_index, br.to_index));
  }
  return AdjacencyMatrix(grid.bus_count(), std::move(edges));
}

}  // namespace gridfc

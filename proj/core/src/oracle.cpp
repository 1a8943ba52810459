#include "gridfc/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <utility>

#include "gridfc/env.hpp"
#include "gridfc/numformat.hpp"

namespace gridfc {

namespace {

/// Walks every completion of the current environment state, recording one
/// entry per finished chain. Restores the environment before returning.
void enumerate_from(CascadeEnv& env, std::vector<int>& prefix, double tll_mw,
                    double threshold_mw, std::vector<OracleEntry>& out) {
  if (env.ended()) {
    out.push_back(OracleEntry{prefix, tll_mw, tll_mw >= threshold_mw});
    return;
  }
  for (int action : env.available_actions()) {
    const EnvState snapshot = env.state();
    const StepResult step = env.step(action);
    prefix.push_back(action);
    enumerate_from(env, prefix, tll_mw + step.reward_mw, threshold_mw, out);
    prefix.pop_back();
    env.restore(snapshot);
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  for (;;) {
    const std::size_t end = line.find(sep, begin);
    fields.push_back(line.substr(begin, end - begin));
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return fields;
}

}  // namespace

OracleTable::OracleTable(std::vector<OracleEntry> entries,
                         double risky_threshold_mw)
    : entries_(std::move(entries)), threshold_mw_(risky_threshold_mw) {
  losses_desc_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto inserted = index_.emplace(entries_[i].actions, i);
    if (!inserted.second) {
      throw std::invalid_argument("duplicate action sequence in oracle table");
    }
    losses_desc_.push_back(entries_[i].tll_mw);
    if (entries_[i].risky) ++risky_count_;
  }
  std::sort(losses_desc_.begin(), losses_desc_.end(), std::greater<>());
}

const OracleEntry* OracleTable::find(const std::vector<int>& actions) const {
  const auto it = index_.find(actions);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

double OracleTable::top_sum(int s) const {
  if (s < 0) throw std::invalid_argument("top_sum needs s >= 0");
  const std::size_t take =
      std::min(static_cast<std::size_t>(s), losses_desc_.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < take; ++i) sum += losses_desc_[i];
  return sum;
}

OracleTable enumerate_chains(const GridCase& grid, int horizon,
                             double risky_threshold_mw, double node_budget,
                             int threads) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");

  double upper_bound = 1.0;
  for (int i = 0; i < horizon && i < grid.component_count(); ++i) {
    upper_bound *= static_cast<double>(grid.component_count() - i);
  }
  if (upper_bound > node_budget) {
    std::ostringstream message;
    message << "enumeration bound " << upper_bound << " exceeds node budget "
            << node_budget;
    throw BudgetExceededError(message.str());
  }

  CascadeEnv probe(grid, horizon);
  probe.reset();
  const std::vector<int> roots = probe.available_actions();

  std::vector<std::vector<OracleEntry>> buckets(roots.size());
  const int workers =
      std::min<int>(threads, static_cast<int>(roots.size()));

  if (workers <= 1) {
    for (std::size_t i = 0; i < roots.size(); ++i) {
      probe.reset();
      const StepResult step = probe.step(roots[i]);
      std::vector<int> prefix{roots[i]};
      enumerate_from(probe, prefix, step.reward_mw, risky_threshold_mw,
                     buckets[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      CascadeEnv env(grid, horizon);
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= roots.size()) break;
        env.reset();
        const StepResult step = env.step(roots[i]);
        std::vector<int> prefix{roots[i]};
        enumerate_from(env, prefix, step.reward_mw, risky_threshold_mw,
                       buckets[i]);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  std::vector<OracleEntry> entries;
  for (std::vector<OracleEntry>& bucket : buckets) {
    entries.insert(entries.end(), std::make_move_iterator(bucket.begin()),
                   std::make_move_iterator(bucket.end()));
  }
  return OracleTable(std::move(entries), risky_threshold_mw);
}

void save_oracle(const OracleTable& table, const std::string& path,
                 const std::vector<std::string>& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OracleIoError("cannot open for writing: " + path);
  for (const std::string& line : comment) out << "# " << line << "\n";
  out << "action_seq,tll_mw,risky\n";
  for (const OracleEntry& entry : table.entries()) {
    for (std::size_t i = 0; i < entry.actions.size(); ++i) {
      if (i > 0) out << '|';
      out << entry.actions[i];
    }
    out << ',' << format_double(entry.tll_mw) << ',' << (entry.risky ? 1 : 0)
        << '\n';
  }
  if (!out.flush()) throw OracleIoError("write failed: " + path);
}

OracleTable load_oracle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OracleIoError("cannot open: " + path);

  std::string line;
  bool saw_header = false;
  std::vector<OracleEntry> entries;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!saw_header) {
      if (line != "action_seq,tll_mw,risky") {
        throw OracleIoError(path + ": unexpected header '" + line + "'");
      }
      saw_header = true;
      continue;
    }
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 3) {
      throw OracleIoError(path + ":" + std::to_string(line_no) +
                          ": expected 3 fields");
    }
    OracleEntry entry;
    try {
      for (const std::string& token : split(fields[0], '|')) {
        entry.actions.push_back(parse_int(token));
      }
      entry.tll_mw = parse_double(fields[1]);
      if (fields[2] != "0" && fields[2] != "1") {
        throw std::invalid_argument("risky flag must be 0 or 1");
      }
      entry.risky = fields[2] == "1";
    } catch (const std::invalid_argument& e) {
      throw OracleIoError(path + ":" + std::to_string(line_no) + ": " +
                          e.what());
    }
    entries.push_back(std::move(entry));
  }
  if (!saw_header) throw OracleIoError(path + ": missing header");
  return OracleTable(std::move(entries),
                     std::numeric_limits<double>::quiet_NaN());
}

}  // namespace gridfc

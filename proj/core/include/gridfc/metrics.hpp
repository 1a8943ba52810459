#pragma once

#include <limits>
#include <stdexcept>
#include <vector>

namespace gridfc {

/// One per-episode record of a search run's progress.
struct MetricsRow {
  int s = 0;                ///< 1-based episode index
  double tll_mw = 0.0;      ///< this episode's chain TLL
  double cum_tll_mw = 0.0;  ///< discovered TLL accumulated through episode s
  bool risky = false;       ///< tll_mw ≥ the risky threshold M
  double regret_mw =
      std::numeric_limits<double>::quiet_NaN();  ///< NaN when no oracle given
  double precision = 0.0;  ///< risky fraction over episodes 1..s
  double elapsed_ms = 0.0; ///< cumulative wall-clock (0 in stable-timing mode)
};

using MetricsSeries = std::vector<MetricsRow>;

/// Gap between the best cumulative TLL any S chains could achieve (the
/// oracle's top-S sum) and what the search has accumulated so far.
[[nodiscard]] inline double regret_at(double oracle_top_s_sum_mw,
                                      double cum_tll_mw) {
  return oracle_top_s_sum_mw - cum_tll_mw;
}

/// Fraction of the first s discovered chains that are risky.
[[nodiscard]] inline double precision_at(int risky_count, int s) {
  if (s < 1) throw std::invalid_argument("precision needs at least one episode");
  return static_cast<double>(risky_count) / static_cast<double>(s);
}

}  // namespace gridfc

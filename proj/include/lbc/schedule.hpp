#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace lbc {

/// Epoch window over which candidate combinations are gradually discarded.
/// By the end of the window every group is down to a single combination.
struct RemovalSchedule {
  int begin_epoch = 0;             // t_i
  int end_epoch = 0;               // t_f
  std::size_t collection_size = 0; // C(m, n)
};

inline void validate(const RemovalSchedule& s, int total_epochs) {
  if (s.collection_size < 1) throw std::invalid_argument("collection size must be at least 1");
  if (s.begin_epoch < 0 || s.begin_epoch > s.end_epoch || s.end_epoch >= total_epochs) {
    throw std::invalid_argument("removal window must satisfy 0 <= t_i <= t_f < epochs, got t_i=" +
                                std::to_string(s.begin_epoch) + " t_f=" + std::to_string(s.end_epoch) +
                                " epochs=" + std::to_string(total_epochs));
  }
}

/// Cumulative number of combinations removed per group by epoch t: a cubic
/// ramp from 0 at the window start to collection_size - 1 at the window end.
/// A zero-length window fires the whole budget at its single epoch.
inline std::size_t cumulative_removals(const RemovalSchedule& s, int t) {
  if (s.collection_size < 1) throw std::invalid_argument("collection size must be at least 1");
  if (t < s.begin_epoch || t > s.end_epoch) {
    throw std::out_of_range("epoch " + std::to_string(t) + " outside removal window [" +
                            std::to_string(s.begin_epoch) + ", " + std::to_string(s.end_epoch) + "]");
  }
  const std::size_t budget = s.collection_size - 1;
  if (s.begin_epoch == s.end_epoch) return budget;
  if (t == s.begin_epoch) return 0;
  if (t == s.end_epoch) return budget;
  const double frac = static_cast<double>(t - s.begin_epoch) /
                      static_cast<double>(s.end_epoch - s.begin_epoch);
  const double kept = 1.0 - frac;
  const double raw = static_cast<double>(budget) * (1.0 - kept * kept * kept);
  const auto r = static_cast<std::size_t>(std::ceil(raw));
  return std::min(r, budget);
}

}  // namespace lbc

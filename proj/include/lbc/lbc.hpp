#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lbc/combinatorics.hpp"
#include "lbc/grouping.hpp"
#include "lbc/schedule.hpp"
#include "lbc/tensor.hpp"

namespace lbc {

/// Per-layer selection state: one learnable score per (group, combination),
/// the set of still-alive combinations per group, and the binary weight mask
/// they induce. Scores of killed combinations are frozen at their last value.
template <typename Real>
struct LbcLayerState {
  Tensor<Real> scores;               // (G, C), initialised to 1
  std::vector<Bitset> alive;         // per group, length C
  Tensor<std::uint8_t> mask;         // (G, M) binary
  std::vector<std::size_t> removed;  // cumulative removals per group

  std::size_t groups() const { return alive.size(); }
};

template <typename Real>
LbcLayerState<Real> make_lbc_state(std::size_t groups, const CombinationTable& table) {
  LbcLayerState<Real> st;
  st.scores = Tensor<Real>({groups, table.size()});
  for (auto& v : st.scores.data) v = Real{1};
  st.alive.assign(groups, Bitset(table.size(), true));
  st.mask = Tensor<std::uint8_t>({groups, static_cast<std::size_t>(table.m)});
  for (auto& b : st.mask.data) b = 1;  // every slot is in some combination
  st.removed.assign(groups, 0);
  return st;
}

/// Recomputes the binary mask from the alive sets: a slot stays only while at
/// least one alive combination contains it.
template <typename Real>
void derive_mask(LbcLayerState<Real>& st, const CombinationTable& table) {
  const std::size_t m = static_cast<std::size_t>(table.m);
  for (std::size_t g = 0; g < st.groups(); ++g) {
    for (std::size_t j = 0; j < m; ++j) {
      st.mask.at(g, j) = membership_sum(table, st.alive[g], static_cast<int>(j)) > 0 ? 1 : 0;
    }
  }
}

/// Brings every group up to the schedule's cumulative removal target for
/// epoch t by killing its lowest-scored alive combinations. Equal scores are
/// broken toward the lower combination index. `selection_scores` defaults to
/// the learned scores; baseline criteria pass their own matrix.
template <typename Real>
void remove_candidates(LbcLayerState<Real>& st, const CombinationTable& table,
                       const RemovalSchedule& sched, int epoch,
                       const Tensor<Real>* selection_scores = nullptr) {
  const Tensor<Real>& scores = selection_scores ? *selection_scores : st.scores;
  if (scores.rank() != 2 || scores.extent(0) != st.groups() || scores.extent(1) != table.size()) {
    throw std::invalid_argument("selection scores shape " + shape_str(scores.shape) +
                                " vs state " + std::to_string(st.groups()) + "x" +
                                std::to_string(table.size()));
  }
  const std::size_t target = cumulative_removals(sched, epoch);
  for (std::size_t g = 0; g < st.groups(); ++g) {
    if (st.removed[g] > target) {
      throw std::logic_error("group " + std::to_string(g) + " already removed " +
                             std::to_string(st.removed[g]) + " > target " + std::to_string(target));
    }
    const std::size_t k = target - st.removed[g];
    if (k == 0) continue;

    std::vector<std::pair<Real, std::size_t>> ranked;
    ranked.reserve(table.size());
    for (std::size_t c = 0; c < table.size(); ++c) {
      if (st.alive[g].test(c)) ranked.emplace_back(scores.at(g, c), c);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second < b.second;
    });
    for (std::size_t i = 0; i < k; ++i) st.alive[g].reset(ranked[i].second);
    st.removed[g] = target;
  }
  derive_mask(st, table);
}

/// Straight-through gradient for the combination scores: each alive
/// combination accumulates, over its slots, the weight times the gradient of
/// the loss w.r.t. the masked weight product. Killed combinations get zero.
template <typename Real>
Tensor<Real> score_gradients(const LbcLayerState<Real>& st, const CombinationTable& table,
                             const Tensor<Real>& weights_gm, const Tensor<Real>& grads_gm) {
  if (weights_gm.rank() != 2 || weights_gm.extent(0) != st.groups() ||
      weights_gm.extent(1) != static_cast<std::size_t>(table.m)) {
    throw std::invalid_argument("score_gradients: weights shape " + shape_str(weights_gm.shape));
  }
  if (!grads_gm.same_shape(weights_gm)) {
    throw std::invalid_argument("score_gradients: gradient shape " + shape_str(grads_gm.shape) +
                                " vs weights " + shape_str(weights_gm.shape));
  }
  Tensor<Real> out({st.groups(), table.size()});
  for (std::size_t g = 0; g < st.groups(); ++g) {
    for (std::size_t c = 0; c < table.size(); ++c) {
      if (!st.alive[g].test(c)) continue;
      Real acc{0};
      for (int slot : table.combos[c]) {
        const auto j = static_cast<std::size_t>(slot);
        acc += weights_gm.at(g, j) * grads_gm.at(g, j);
      }
      out.at(g, c) = acc;
    }
  }
  return out;
}

/// Plain SGD on the scores, alive combinations only. No momentum, no weight
/// decay.
template <typename Real>
void update_scores(LbcLayerState<Real>& st, const Tensor<Real>& grads, double lr) {
  if (!grads.same_shape(st.scores)) {
    throw std::invalid_argument("update_scores: gradient shape " + shape_str(grads.shape) +
                                " vs scores " + shape_str(st.scores.shape));
  }
  for (std::size_t g = 0; g < st.groups(); ++g) {
    for (std::size_t c = 0; c < st.scores.extent(1); ++c) {
      if (!st.alive[g].test(c)) continue;
      st.scores.at(g, c) =
          static_cast<Real>(static_cast<double>(st.scores.at(g, c)) - lr * static_cast<double>(grads.at(g, c)));
    }
  }
}

/// Scatters the (G, M) binary mask into a weight-shaped tensor of 0/1 values.
template <typename Real>
Tensor<Real> weight_mask(const LbcLayerState<Real>& st, const GroupView& view, const Shape& weight_shape) {
  Tensor<Real> mask(weight_shape);
  if (mask.numel() != view.group_count * view.m) {
    throw std::invalid_argument("weight_mask: shape " + shape_str(weight_shape) + " vs view " +
                                std::to_string(view.group_count) + "x" + std::to_string(view.m));
  }
  for (std::size_t g = 0; g < view.group_count; ++g) {
    for (std::size_t j = 0; j < view.m; ++j) {
      mask.data[view.flat(g, j)] = st.mask.at(g, j) ? Real{1} : Real{0};
    }
  }
  return mask;
}

/// True once every group is down to one combination and its mask row holds
/// exactly n ones.
template <typename Real>
bool satisfies_nm(const LbcLayerState<Real>& st, const CombinationTable& table) {
  for (std::size_t g = 0; g < st.groups(); ++g) {
    if (st.alive[g].count() != 1) return false;
    std::size_t ones = 0;
    for (std::size_t j = 0; j < static_cast<std::size_t>(table.m); ++j) ones += st.mask.at(g, j);
    if (ones != static_cast<std::size_t>(table.n)) return false;
  }
  return true;
}

/// The surviving combination index of each group; only defined once every
/// group's collection is a singleton.
template <typename Real>
std::vector<int> selected_combos(const LbcLayerState<Real>& st, const CombinationTable& table) {
  std::vector<int> out(st.groups(), -1);
  for (std::size_t g = 0; g < st.groups(); ++g) {
    if (st.alive[g].count() != 1) {
      throw std::logic_error("group " + std::to_string(g) + " still holds " +
                             std::to_string(st.alive[g].count()) + " combinations");
    }
    for (std::size_t j = 0; j < table.size(); ++j) {
      if (st.alive[g].test(j)) {
        out[g] = static_cast<int>(j);
        break;
      }
    }
  }
  return out;
}

}  // namespace lbc

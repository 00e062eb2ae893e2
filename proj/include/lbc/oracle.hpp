#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbc/combinatorics.hpp"
#include "lbc/grouping.hpp"
#include "lbc/loss.hpp"
#include "lbc/tensor.hpp"

namespace lbc {

/// A single linear layer y = x W^T posed as a masked least-squares problem.
template <typename Real>
struct LinearMaskProblem {
  Tensor<Real> inputs;   // (batch, in)
  Tensor<Real> targets;  // (batch, out)
  Tensor<Real> weights;  // (out, in) starting point
};

enum class RefitKind { kNone, kGradientSteps, kClosedFormLs };

struct RefitSpec {
  RefitKind kind = RefitKind::kClosedFormLs;
  int steps = 200;    // gradient-step refit only
  double lr = 0.05;   // gradient-step refit only
};

/// One combination index per group.
struct JointAssignment {
  std::vector<int> combo_per_group;

  bool operator==(const JointAssignment& other) const {
    return combo_per_group == other.combo_per_group;
  }
};

struct OracleEntry {
  JointAssignment assignment;
  double loss = 0.0;
};

struct OracleResult {
  JointAssignment best;
  std::vector<OracleEntry> table;  // ascending by loss
};

namespace detail {

// Solves A x = b in place by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (std::abs(a[pivot][col]) < 1e-12) {
      throw std::runtime_error("closed-form refit: singular normal equations");
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
    x[i] = acc / a[i][i];
  }
  return x;
}

template <typename Real>
double masked_loss(const LinearMaskProblem<Real>& p, const Tensor<Real>& masked_w) {
  const std::size_t batch = p.inputs.extent(0), in = p.inputs.extent(1), out = masked_w.extent(0);
  Tensor<Real> pred({batch, out});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < out; ++o) {
      Real acc{0};
      for (std::size_t i = 0; i < in; ++i) acc += p.inputs.at(b, i) * masked_w.at(o, i);
      pred.at(b, o) = acc;
    }
  }
  return mse(pred, p.targets).value;
}

// Exact least squares per output row over the row's surviving columns.
template <typename Real>
double closed_form_loss(const LinearMaskProblem<Real>& p, const Tensor<Real>& mask) {
  const std::size_t batch = p.inputs.extent(0), in = p.inputs.extent(1), out = p.targets.extent(1);
  Tensor<Real> refit({out, in});
  for (std::size_t o = 0; o < out; ++o) {
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < in; ++i) {
      if (mask.at(o, i) != Real{0}) cols.push_back(i);
    }
    if (cols.empty()) continue;  // all-zero row predicts zero
    const std::size_t k = cols.size();
    std::vector<std::vector<double>> ata(k, std::vector<double>(k, 0.0));
    std::vector<double> atb(k, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = r; c < k; ++c) {
        double acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          acc += static_cast<double>(p.inputs.at(b, cols[r])) * static_cast<double>(p.inputs.at(b, cols[c]));
        }
        ata[r][c] = acc;
        ata[c][r] = acc;
      }
      double acc = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        acc += static_cast<double>(p.inputs.at(b, cols[r])) * static_cast<double>(p.targets.at(b, o));
      }
      atb[r] = acc;
    }
    const std::vector<double> beta = solve_dense(std::move(ata), std::move(atb));
    for (std::size_t r = 0; r < k; ++r) refit.at(o, cols[r]) = static_cast<Real>(beta[r]);
  }
  return masked_loss(p, refit);
}

template <typename Real>
double gradient_refit_loss(const LinearMaskProblem<Real>& p, const Tensor<Real>& mask,
                           const RefitSpec& spec) {
  const std::size_t batch = p.inputs.extent(0), in = p.inputs.extent(1), out = p.targets.extent(1);
  Tensor<Real> w = p.weights;
  for (std::size_t i = 0; i < w.numel(); ++i) w.data[i] *= mask.data[i];
  for (int step = 0; step < spec.steps; ++step) {
    Tensor<Real> pred({batch, out});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < out; ++o) {
        Real acc{0};
        for (std::size_t i = 0; i < in; ++i) acc += p.inputs.at(b, i) * w.at(o, i);
        pred.at(b, o) = acc;
      }
    }
    const auto res = mse(pred, p.targets);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) {
        if (mask.at(o, i) == Real{0}) continue;
        double g = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          g += static_cast<double>(res.grad.at(b, o)) * static_cast<double>(p.inputs.at(b, i));
        }
        w.at(o, i) = static_cast<Real>(static_cast<double>(w.at(o, i)) - spec.lr * g);
      }
    }
  }
  return masked_loss(p, w);
}

}  // namespace detail

/// Evaluates every joint per-group combination assignment, optionally
/// refitting the surviving weights, and returns the global argmin together
/// with the full loss table sorted ascending.
template <typename Real>
OracleResult exhaustive_best(const LinearMaskProblem<Real>& problem, const GroupView& view,
                             const CombinationTable& table, const RefitSpec& refit,
                             double budget = 1e5) {
  if (problem.weights.rank() != 2 || problem.inputs.rank() != 2 || problem.targets.rank() != 2) {
    throw std::invalid_argument("exhaustive_best expects 2-D inputs, targets and weights");
  }
  double total = 1.0;
  for (std::size_t g = 0; g < view.group_count; ++g) {
    total *= static_cast<double>(table.size());
    if (total > budget) {
      throw std::runtime_error("assignment count " + std::to_string(table.size()) + "^" +
                               std::to_string(view.group_count) + " exceeds budget " +
                               std::to_string(static_cast<std::uint64_t>(budget)));
    }
  }

  OracleResult result;
  result.table.reserve(static_cast<std::size_t>(total));
  JointAssignment cur;
  cur.combo_per_group.assign(view.group_count, 0);

  Tensor<Real> mask(problem.weights.shape);
  while (true) {
    for (auto& v : mask.data) v = Real{0};
    for (std::size_t g = 0; g < view.group_count; ++g) {
      for (int slot : table.combos[static_cast<std::size_t>(cur.combo_per_group[g])]) {
        mask.data[view.flat(g, static_cast<std::size_t>(slot))] = Real{1};
      }
    }
    double loss = 0.0;
    switch (refit.kind) {
      case RefitKind::kNone: {
        Tensor<Real> w = problem.weights;
        for (std::size_t i = 0; i < w.numel(); ++i) w.data[i] *= mask.data[i];
        loss = detail::masked_loss(problem, w);
        break;
      }
      case RefitKind::kClosedFormLs:
        loss = detail::closed_form_loss(problem, mask);
        break;
      case RefitKind::kGradientSteps:
        loss = detail::gradient_refit_loss(problem, mask, refit);
        break;
    }
    result.table.push_back({cur, loss});

    // next assignment, last group fastest
    std::size_t g = view.group_count;
    while (g-- > 0) {
      if (++cur.combo_per_group[g] < static_cast<int>(table.size())) break;
      cur.combo_per_group[g] = 0;
      if (g == 0) {
        std::stable_sort(result.table.begin(), result.table.end(),
                         [](const OracleEntry& a, const OracleEntry& b) { return a.loss < b.loss; });
        result.best = result.table.front().assignment;
        return result;
      }
    }
    if (view.group_count == 0) {
      // no groups: single empty assignment
      std::stable_sort(result.table.begin(), result.table.end(),
                       [](const OracleEntry& a, const OracleEntry& b) { return a.loss < b.loss; });
      result.best = result.table.front().assignment;
      return result;
    }
  }
}

/// Percentile of an assignment in the sorted loss table: 0 is best, 1 worst,
/// ties share the better rank.
inline double rank_of(const JointAssignment& assignment, const std::vector<OracleEntry>& table) {
  if (table.empty()) throw std::invalid_argument("rank_of: empty loss table");
  std::size_t found = table.size();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].assignment == assignment) {
      found = i;
      break;
    }
  }
  if (found == table.size()) throw std::invalid_argument("rank_of: assignment not present in table");
  const double loss = table[found].loss;
  std::size_t better = 0;
  while (better < table.size() && table[better].loss < loss) ++better;
  if (table.size() == 1) return 0.0;
  return static_cast<double>(better) / static_cast<double>(table.size() - 1);
}

}  // namespace lbc

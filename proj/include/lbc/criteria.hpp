#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "lbc/combinatorics.hpp"
#include "lbc/tensor.hpp"

namespace lbc {

/// Which score matrix drives candidate removal.
enum class CriterionKind { kLbcScore, kLbcScoreInverse, kMagnitude, kTaylorGradient, kRandom };

inline std::string criterion_name(CriterionKind kind) {
  switch (kind) {
    case CriterionKind::kLbcScore: return "lbc_score";
    case CriterionKind::kLbcScoreInverse: return "lbc_score_inverse";
    case CriterionKind::kMagnitude: return "magnitude";
    case CriterionKind::kTaylorGradient: return "taylor_gradient";
    case CriterionKind::kRandom: return "random";
  }
  return "unknown";
}

inline CriterionKind parse_criterion(const std::string& name) {
  if (name == "lbc_score") return CriterionKind::kLbcScore;
  if (name == "lbc_score_inverse") return CriterionKind::kLbcScoreInverse;
  if (name == "magnitude") return CriterionKind::kMagnitude;
  if (name == "taylor_gradient") return CriterionKind::kTaylorGradient;
  if (name == "random") return CriterionKind::kRandom;
  throw std::invalid_argument("unknown criterion '" + name + "'");
}

/// Produces the (G, C) selection-score matrix for one removal event. Removal
/// always kills the lowest-scored candidates, so every criterion encodes
/// "higher is more worth keeping":
///  - lbc_score:          the learned scores as-is
///  - lbc_score_inverse:  negated learned scores (keeps what LBC would drop)
///  - magnitude:          sum of |w| over the combination's slots, from the
///                        current weights at the removal event
///  - taylor_gradient:    sum over slots of the accumulated |w * dL/dw| proxy
///  - random:             i.i.d. uniforms from the supplied stream
template <typename Real>
Tensor<Real> combo_score(CriterionKind kind, const CombinationTable& table,
                         const Tensor<Real>& weights_gm, const Tensor<Real>* taylor_gm,
                         const Tensor<Real>* learned_scores, std::mt19937_64* rng) {
  const std::size_t groups = weights_gm.extent(0);
  if (weights_gm.rank() != 2 || weights_gm.extent(1) != static_cast<std::size_t>(table.m)) {
    throw std::invalid_argument("combo_score: weights shape " + shape_str(weights_gm.shape) +
                                " vs group width " + std::to_string(table.m));
  }
  Tensor<Real> out({groups, table.size()});

  switch (kind) {
    case CriterionKind::kLbcScore:
    case CriterionKind::kLbcScoreInverse: {
      if (learned_scores == nullptr || learned_scores->extent(0) != groups ||
          learned_scores->extent(1) != table.size()) {
        throw std::invalid_argument("combo_score: learned scores missing or mis-shaped");
      }
      const Real sign = (kind == CriterionKind::kLbcScore) ? Real{1} : Real{-1};
      for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = sign * learned_scores->data[i];
      return out;
    }
    case CriterionKind::kMagnitude: {
      for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t c = 0; c < table.size(); ++c) {
          Real acc{0};
          for (int slot : table.combos[c]) acc += std::abs(weights_gm.at(g, static_cast<std::size_t>(slot)));
          out.at(g, c) = acc;
        }
      }
      return out;
    }
    case CriterionKind::kTaylorGradient: {
      if (taylor_gm == nullptr || !taylor_gm->same_shape(weights_gm)) {
        throw std::invalid_argument("combo_score: taylor accumulator missing or mis-shaped");
      }
      for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t c = 0; c < table.size(); ++c) {
          Real acc{0};
          for (int slot : table.combos[c]) acc += taylor_gm->at(g, static_cast<std::size_t>(slot));
          out.at(g, c) = acc;
        }
      }
      return out;
    }
    case CriterionKind::kRandom: {
      if (rng == nullptr) throw std::invalid_argument("combo_score: random criterion needs a seeded stream");
      std::uniform_real_distribution<double> dist(0.0, 1.0);
      for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = static_cast<Real>(dist(*rng));
      return out;
    }
  }
  throw std::logic_error("unreachable criterion kind");
}

}  // namespace lbc

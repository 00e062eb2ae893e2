#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbc/network.hpp"
#include "lbc/tensor.hpp"

namespace lbc {

/// Bijection between a layer's flat weight indices and the (group, slot) view
/// used by the N:M machinery. Within a group, consecutive slots are
/// consecutive along the input-channel axis.
struct GroupView {
  std::size_t layer_id = 0;
  std::size_t group_count = 0;                // G
  std::size_t m = 0;                          // slots per group
  std::vector<std::size_t> index_map;         // (g, j) -> flat weight index

  std::size_t flat(std::size_t g, std::size_t j) const { return index_map[g * m + j]; }
};

/// Builds the group view for a linear (out, in) or conv2d (out, in, kh, kw)
/// weight tensor. Linear rows are sliced into blocks of m along the input
/// axis. Conv fibers are flattened input-channel-major (the channel index
/// varies fastest) and then sliced, so a group of m consecutive slots crosses
/// channels first.
inline GroupView make_group_view(std::size_t layer_id, const Shape& weight_shape, std::size_t m,
                                 LayerKind kind) {
  if (m == 0) throw std::invalid_argument("group width m must be positive");
  GroupView view;
  view.layer_id = layer_id;
  view.m = m;

  if (kind == LayerKind::kLinear) {
    if (weight_shape.size() != 2) {
      throw std::invalid_argument("linear weight must be 2-D, got " + shape_str(weight_shape));
    }
    const std::size_t out = weight_shape[0], in = weight_shape[1];
    if (in % m != 0) {
      throw std::invalid_argument("layer " + std::to_string(layer_id) + ": input extent " +
                                  std::to_string(in) + " not divisible by m=" + std::to_string(m) +
                                  " (weight " + shape_str(weight_shape) + ")");
    }
    const std::size_t blocks = in / m;
    view.group_count = out * blocks;
    view.index_map.resize(view.group_count * m);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t g = o * blocks + b;
        for (std::size_t j = 0; j < m; ++j) {
          view.index_map[g * m + j] = o * in + b * m + j;
        }
      }
    }
    return view;
  }

  if (kind == LayerKind::kConv2d) {
    if (weight_shape.size() != 4) {
      throw std::invalid_argument("conv2d weight must be 4-D, got " + shape_str(weight_shape));
    }
    const std::size_t out = weight_shape[0], in = weight_shape[1];
    const std::size_t kh = weight_shape[2], kw = weight_shape[3];
    const std::size_t fiber = in * kh * kw;
    if (fiber % m != 0) {
      throw std::invalid_argument("layer " + std::to_string(layer_id) + ": fiber length " +
                                  std::to_string(in) + "*" + std::to_string(kh) + "*" +
                                  std::to_string(kw) + " not divisible by m=" + std::to_string(m) +
                                  " (weight " + shape_str(weight_shape) + ")");
    }
    const std::size_t blocks = fiber / m;
    view.group_count = out * blocks;
    view.index_map.resize(view.group_count * m);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t p = 0; p < fiber; ++p) {
        // fiber position p = spatial * in + channel; channel varies fastest
        const std::size_t c = p % in;
        const std::size_t s = p / in;
        const std::size_t ky = s / kw;
        const std::size_t kx = s % kw;
        const std::size_t flat = ((o * in + c) * kh + ky) * kw + kx;
        const std::size_t g = o * blocks + p / m;
        view.index_map[g * m + p % m] = flat;
      }
    }
    return view;
  }

  throw std::invalid_argument("layer " + std::to_string(layer_id) + " of kind " +
                              layer_kind_name(kind) + " has no sparsifiable weights");
}

/// Weight tensor -> (G, M) matrix in group order.
template <typename Real>
Tensor<Real> gather(const GroupView& view, const Tensor<Real>& weights) {
  if (weights.numel() != view.group_count * view.m) {
    throw std::invalid_argument("gather: weight count " + std::to_string(weights.numel()) +
                                " vs view " + std::to_string(view.group_count) + "x" +
                                std::to_string(view.m));
  }
  Tensor<Real> out({view.group_count, view.m});
  for (std::size_t g = 0; g < view.group_count; ++g) {
    for (std::size_t j = 0; j < view.m; ++j) out.at(g, j) = weights.data[view.flat(g, j)];
  }
  return out;
}

/// (G, M) matrix -> values written back into a weight-shaped tensor.
template <typename Real>
void scatter(const GroupView& view, const Tensor<Real>& grouped, Tensor<Real>& weights) {
  if (grouped.rank() != 2 || grouped.extent(0) != view.group_count || grouped.extent(1) != view.m) {
    throw std::invalid_argument("scatter: grouped shape " + shape_str(grouped.shape) + " vs view " +
                                std::to_string(view.group_count) + "x" + std::to_string(view.m));
  }
  if (weights.numel() != view.group_count * view.m) {
    throw std::invalid_argument("scatter: weight count " + std::to_string(weights.numel()) +
                                " vs view " + std::to_string(view.group_count) + "x" +
                                std::to_string(view.m));
  }
  for (std::size_t g = 0; g < view.group_count; ++g) {
    for (std::size_t j = 0; j < view.m; ++j) weights.data[view.flat(g, j)] = grouped.at(g, j);
  }
}

}  // namespace lbc

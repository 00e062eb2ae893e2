#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbc/grouping.hpp"
#include "lbc/network.hpp"
#include "lbc/tensor.hpp"

namespace lbc {

/// Bits needed for an intra-group slot index: ceil(log2(m)); 4 bits cover the
/// supported cap of m = 16. m = 1 needs none.
inline std::size_t index_bit_width(std::size_t m) {
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < m) ++bits;
  return bits;
}

/// Compressed N:M weight storage: only the surviving values plus, for each,
/// its slot within the group. Groups follow the GroupView order; slots within
/// a group are strictly increasing. Index bits are packed little-endian (bit
/// k of the stream is bit k%8 of byte k/8).
template <typename Real>
struct PackedNm {
  int n = 0;
  int m = 0;
  LayerKind layout = LayerKind::kLinear;  // linear or conv2d, fixes the group view
  Shape logical_shape;
  std::vector<Real> values;
  std::vector<std::uint8_t> index_bits;

  std::size_t group_count() const {
    return m > 0 ? shape_numel(logical_shape) / static_cast<std::size_t>(m) : 0;
  }
};

namespace detail {

inline void append_bits(std::vector<std::uint8_t>& out, std::size_t& bitpos, std::uint64_t value,
                        std::size_t width) {
  for (std::size_t b = 0; b < width; ++b, ++bitpos) {
    if (bitpos / 8 >= out.size()) out.push_back(0);
    if ((value >> b) & 1u) out[bitpos / 8] |= static_cast<std::uint8_t>(1u << (bitpos % 8));
  }
}

inline std::uint64_t read_bits(const std::vector<std::uint8_t>& in, std::size_t& bitpos,
                               std::size_t width) {
  std::uint64_t value = 0;
  for (std::size_t b = 0; b < width; ++b, ++bitpos) {
    if (bitpos / 8 >= in.size()) throw std::runtime_error("packed index stream truncated");
    if ((in[bitpos / 8] >> (bitpos % 8)) & 1u) value |= std::uint64_t{1} << b;
  }
  return value;
}

}  // namespace detail

/// Packs a masked weight tensor. Every group must have exactly n surviving
/// slots; dropped values are discarded.
template <typename Real>
PackedNm<Real> pack(const Tensor<Real>& weights, const Tensor<Real>& mask, const GroupView& view,
                    int n, int m, LayerKind layout = LayerKind::kLinear) {
  if (!weights.same_shape(mask)) {
    throw std::invalid_argument("pack: weight shape " + shape_str(weights.shape) + " vs mask shape " +
                                shape_str(mask.shape));
  }
  if (view.m != static_cast<std::size_t>(m)) {
    throw std::invalid_argument("pack: view group width " + std::to_string(view.m) + " vs m=" +
                                std::to_string(m));
  }
  PackedNm<Real> out;
  out.n = n;
  out.m = m;
  out.layout = layout;
  out.logical_shape = weights.shape;
  out.values.reserve(view.group_count * static_cast<std::size_t>(n));
  const std::size_t width = index_bit_width(static_cast<std::size_t>(m));
  std::size_t bitpos = 0;
  for (std::size_t g = 0; g < view.group_count; ++g) {
    std::size_t kept = 0;
    for (std::size_t j = 0; j < view.m; ++j) {
      const std::size_t flat = view.flat(g, j);
      if (mask.data[flat] == Real{0}) continue;
      out.values.push_back(weights.data[flat]);
      detail::append_bits(out.index_bits, bitpos, j, width);
      ++kept;
    }
    if (kept != static_cast<std::size_t>(n)) {
      throw std::runtime_error("pack: group " + std::to_string(g) + " has " + std::to_string(kept) +
                               " survivors, expected exactly " + std::to_string(n));
    }
  }
  return out;
}

/// Expands back to a dense tensor with zeros at dropped slots. Rejects index
/// streams that are not strictly increasing within a group.
template <typename Real>
Tensor<Real> unpack(const PackedNm<Real>& packed) {
  const GroupView view = make_group_view(0, packed.logical_shape, static_cast<std::size_t>(packed.m),
                                         packed.layout);
  Tensor<Real> out(packed.logical_shape);
  const std::size_t width = index_bit_width(static_cast<std::size_t>(packed.m));
  const std::size_t per_group = static_cast<std::size_t>(packed.n);
  if (packed.values.size() != view.group_count * per_group) {
    throw std::runtime_error("unpack: value count " + std::to_string(packed.values.size()) +
                             " vs expected " + std::to_string(view.group_count * per_group));
  }
  std::size_t bitpos = 0;
  std::size_t vi = 0;
  for (std::size_t g = 0; g < view.group_count; ++g) {
    std::int64_t prev = -1;
    for (std::size_t k = 0; k < per_group; ++k, ++vi) {
      const auto slot = static_cast<std::int64_t>(detail::read_bits(packed.index_bits, bitpos, width));
      if (slot <= prev || slot >= packed.m) {
        throw std::runtime_error("unpack: corrupt index order in group " + std::to_string(g));
      }
      prev = slot;
      out.data[view.flat(g, static_cast<std::size_t>(slot))] = packed.values[vi];
    }
  }
  return out;
}

/// Skip-zero mat-mul for packed linear weights: y = x W^T visiting only the
/// kept values, groups ascending then slots ascending, so the reduction order
/// matches the dense kernel minus the zero terms. Performs exactly
/// numel * n / m multiply-accumulates per input row.
template <typename Real>
Tensor<Real> spmm(const PackedNm<Real>& packed, const Tensor<Real>& input,
                  std::uint64_t* mac_count = nullptr) {
  if (packed.layout != LayerKind::kLinear) {
    throw std::invalid_argument("spmm supports the linear layout only");
  }
  if (packed.logical_shape.size() != 2) {
    throw std::invalid_argument("spmm: packed shape " + shape_str(packed.logical_shape) + " is not 2-D");
  }
  const std::size_t out_dim = packed.logical_shape[0], in_dim = packed.logical_shape[1];
  if (input.rank() != 2 || input.extent(1) != in_dim) {
    throw std::invalid_argument("spmm: input shape " + shape_str(input.shape) + " vs weight " +
                                shape_str(packed.logical_shape));
  }
  const std::size_t batch = input.extent(0);
  const std::size_t m = static_cast<std::size_t>(packed.m);
  const std::size_t per_group = static_cast<std::size_t>(packed.n);
  const std::size_t blocks = in_dim / m;
  const std::size_t width = index_bit_width(m);

  Tensor<Real> y({batch, out_dim});
  std::uint64_t macs = 0;
  for (std::size_t o = 0; o < out_dim; ++o) {
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t g = o * blocks + blk;
      for (std::size_t k = 0; k < per_group; ++k) {
        const std::size_t vi = g * per_group + k;
        std::size_t bitpos = vi * width;
        const std::size_t slot =
            static_cast<std::size_t>(detail::read_bits(packed.index_bits, bitpos, width));
        const std::size_t col = blk * m + slot;
        const Real v = packed.values[vi];
        for (std::size_t b = 0; b < batch; ++b) {
          y.at(b, o) += v * input.at(b, col);
        }
        macs += batch;
      }
    }
  }
  if (mac_count != nullptr) *mac_count = macs;
  return y;
}

/// Training-cost model: forward cost scales with the epoch's mask density,
/// backward is a fixed 2x forward, and only sparsifiable layers are counted.
struct FlopsModel {
  std::vector<double> layer_forward_flops;     // dense forward MACs per layer
  std::vector<std::vector<double>> density;    // [epoch][layer], fraction of mask ones
  double backward_multiplier = 2.0;
};

inline double train_flops_ratio(const FlopsModel& model) {
  if (model.layer_forward_flops.empty() || model.density.empty()) return 1.0;
  const double factor = 1.0 + model.backward_multiplier;
  double sparse = 0.0, dense = 0.0;
  for (const auto& epoch : model.density) {
    if (epoch.size() != model.layer_forward_flops.size()) {
      throw std::invalid_argument("flops model: density row width " + std::to_string(epoch.size()) +
                                  " vs layer count " + std::to_string(model.layer_forward_flops.size()));
    }
    for (std::size_t l = 0; l < epoch.size(); ++l) {
      sparse += factor * model.layer_forward_flops[l] * epoch[l];
      dense += factor * model.layer_forward_flops[l];
    }
  }
  return sparse / dense;
}

}  // namespace lbc

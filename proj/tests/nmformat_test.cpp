#include "lbc/nmformat.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <random>
#include <utility>

namespace lbc {
namespace {

TEST(IndexBitWidth, CeilLog2) {
  EXPECT_EQ(index_bit_width(1), 0u);
  EXPECT_EQ(index_bit_width(2), 1u);
  EXPECT_EQ(index_bit_width(3), 2u);
  EXPECT_EQ(index_bit_width(4), 2u);
  EXPECT_EQ(index_bit_width(5), 3u);
  EXPECT_EQ(index_bit_width(8), 3u);
  EXPECT_EQ(index_bit_width(9), 4u);
  EXPECT_EQ(index_bit_width(16), 4u);
}

TEST(Pack, HandCheckedByteStream) {
  Tensor<double> w({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor<double> mask({2, 4}, {1, 0, 1, 0, 0, 1, 0, 1});
  const GroupView view = make_group_view(0, w.shape, 4, LayerKind::kLinear);
  const PackedNm<double> p = pack(w, mask, view, 2, 4);

  EXPECT_EQ(p.values, (std::vector<double>{1, 3, 6, 8}));
  EXPECT_EQ(p.group_count(), 2u);
  // Slots 0,2,1,3 as 2-bit fields, LSB first: 00 01 10 11 reading up the byte.
  ASSERT_EQ(p.index_bits.size(), 1u);
  EXPECT_EQ(p.index_bits[0], 0xD8);
}

TEST(Pack, EmptyLayerRoundTripsToEmpty) {
  const Tensor<double> w({0, 4});
  const Tensor<double> mask({0, 4});
  const GroupView view = make_group_view(0, {0, 4}, 4, LayerKind::kLinear);
  const PackedNm<double> p = pack(w, mask, view, 2, 4);
  EXPECT_TRUE(p.values.empty());
  EXPECT_TRUE(p.index_bits.empty());
  const Tensor<double> back = unpack(p);
  EXPECT_EQ(back.shape, (Shape{0, 4}));
  EXPECT_TRUE(back.data.empty());
}

TEST(Pack, RoundTripsBitExactly) {
  std::mt19937_64 rng(11);
  for (const auto& [n, m] : std::vector<std::pair<int, int>>{{2, 4}, {1, 4}, {2, 8}, {1, 16}, {3, 4}}) {
    Tensor<float> w({6, static_cast<std::size_t>(2 * m)});
    fill_normal(w, rng, 1.0f);
    Tensor<float> mask(w.shape);
    const std::size_t blocks = w.extent(1) / static_cast<std::size_t>(m);
    for (std::size_t r = 0; r < w.extent(0); ++r) {
      for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<std::size_t> slots(static_cast<std::size_t>(m));
        for (std::size_t j = 0; j < slots.size(); ++j) slots[j] = j;
        std::shuffle(slots.begin(), slots.end(), rng);
        for (int k = 0; k < n; ++k) {
          mask.at(r, b * static_cast<std::size_t>(m) + slots[static_cast<std::size_t>(k)]) = 1.0f;
        }
      }
    }
    const GroupView view = make_group_view(0, w.shape, static_cast<std::size_t>(m), LayerKind::kLinear);
    const PackedNm<float> p = pack(w, mask, view, n, m);
    const Tensor<float> back = unpack(p);

    Tensor<float> expected = w;
    for (std::size_t i = 0; i < expected.data.size(); ++i) {
      if (mask.data[i] == 0.0f) expected.data[i] = 0.0f;  // assign, not multiply: keeps -0 out
    }
    ASSERT_EQ(back.shape, expected.shape);
    EXPECT_EQ(std::memcmp(back.data.data(), expected.data.data(), expected.data.size() * sizeof(float)), 0)
        << "n=" << n << " m=" << m;
  }
}

TEST(Pack, WrongSurvivorCountThrows) {
  Tensor<double> w({1, 4}, {1, 2, 3, 4});
  Tensor<double> mask({1, 4}, {1, 1, 1, 0});
  const GroupView view = make_group_view(0, w.shape, 4, LayerKind::kLinear);
  try {
    pack(w, mask, view, 2, 4);
    FAIL() << "expected runtime_error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("3 survivors, expected exactly 2"), std::string::npos);
  }
}

TEST(Pack, ShapeAndViewMismatchesThrow) {
  Tensor<double> w({2, 4});
  Tensor<double> mask({1, 4});
  const GroupView view = make_group_view(0, w.shape, 4, LayerKind::kLinear);
  EXPECT_THROW(pack(w, mask, view, 2, 4), std::invalid_argument);
  Tensor<double> mask2({2, 4});
  EXPECT_THROW(pack(w, mask2, view, 2, 8), std::invalid_argument);
}

TEST(Unpack, CorruptIndexOrderThrows) {
  PackedNm<double> p;
  p.n = 2;
  p.m = 4;
  p.logical_shape = {1, 4};
  p.values = {1.0, 2.0};
  p.index_bits = {0x02};  // slots 2 then 0: not strictly increasing
  EXPECT_THROW(unpack(p), std::runtime_error);
}

TEST(Unpack, WrongValueCountThrows) {
  PackedNm<double> p;
  p.n = 2;
  p.m = 4;
  p.logical_shape = {2, 4};
  p.values = {1.0, 2.0, 3.0};  // needs 4
  p.index_bits = {0xD8, 0x00};
  EXPECT_THROW(unpack(p), std::runtime_error);
}

TEST(Unpack, TruncatedIndexStreamThrows) {
  PackedNm<double> p;
  p.n = 2;
  p.m = 4;
  p.logical_shape = {4, 4};  // 4 groups -> 8 indices -> 16 bits needed
  p.values = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
  p.index_bits = {0xD8};  // only 8 bits present
  EXPECT_THROW(unpack(p), std::runtime_error);
}

template <typename Real>
void expect_spmm_matches_dense(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> batch_d(1, 5), blocks_d(1, 3), out_d(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t batch = batch_d(rng), out_dim = out_d(rng);
    const std::size_t in_dim = 4 * blocks_d(rng);
    Tensor<Real> w({out_dim, in_dim});
    fill_normal(w, rng, Real(1));
    Tensor<Real> mask(w.shape);
    for (std::size_t r = 0; r < out_dim; ++r) {
      for (std::size_t b = 0; b < in_dim / 4; ++b) {
        std::vector<std::size_t> slots{0, 1, 2, 3};
        std::shuffle(slots.begin(), slots.end(), rng);
        mask.at(r, b * 4 + slots[0]) = Real(1);
        mask.at(r, b * 4 + slots[1]) = Real(1);
      }
    }
    Tensor<Real> x({batch, in_dim});
    fill_normal(x, rng, Real(1));

    const GroupView view = make_group_view(0, w.shape, 4, LayerKind::kLinear);
    std::uint64_t macs = 0;
    const Tensor<Real> y = spmm(pack(w, mask, view, 2, 4), x, &macs);

    // Dense reference: accumulate every column; masked terms add exact zeros,
    // so the float results must agree to the last bit of value.
    ASSERT_EQ(y.shape, (Shape{batch, out_dim}));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < out_dim; ++o) {
        Real acc = 0;
        for (std::size_t k = 0; k < in_dim; ++k) {
          acc += (mask.at(o, k) == Real(0) ? Real(0) : w.at(o, k)) * x.at(b, k);
        }
        ASSERT_EQ(y.at(b, o), acc) << "trial " << trial;
      }
    }
    EXPECT_EQ(macs, static_cast<std::uint64_t>(batch) * out_dim * (in_dim / 4) * 2);
  }
}

TEST(Spmm, MatchesDenseMaskedMatmulFloat) {
  std::mt19937_64 rng(21);
  expect_spmm_matches_dense<float>(rng);
}

TEST(Spmm, MatchesDenseMaskedMatmulDouble) {
  std::mt19937_64 rng(22);
  expect_spmm_matches_dense<double>(rng);
}

TEST(Spmm, RejectsConvLayoutAndBadInput) {
  Tensor<double> w({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  Tensor<double> mask({2, 4}, {1, 1, 0, 0, 0, 0, 1, 1});
  const GroupView view = make_group_view(0, w.shape, 4, LayerKind::kLinear);
  PackedNm<double> p = pack(w, mask, view, 2, 4);

  Tensor<double> x({3, 4});
  p.layout = LayerKind::kConv2d;
  EXPECT_THROW(spmm(p, x), std::invalid_argument);
  p.layout = LayerKind::kLinear;
  EXPECT_THROW(spmm(p, Tensor<double>({3, 8})), std::invalid_argument);
  EXPECT_THROW(spmm(p, Tensor<double>({4})), std::invalid_argument);
  p.logical_shape = {8};
  EXPECT_THROW(spmm(p, x), std::invalid_argument);
}

TEST(FlopsModel, HandValue) {
  FlopsModel model;
  model.layer_forward_flops = {100.0};
  model.density = {{1.0}, {0.5}};
  // (3*100*1 + 3*100*0.5) / (3*100 + 3*100) = 450/600.
  EXPECT_DOUBLE_EQ(train_flops_ratio(model), 0.75);
}

TEST(FlopsModel, ConstantHalfDensityIsExactlyHalf) {
  FlopsModel model;
  model.layer_forward_flops = {1000.0, 512.0, 96.0};
  model.density.assign(30, {0.5, 0.5, 0.5});
  EXPECT_EQ(train_flops_ratio(model), 0.5);
}

TEST(FlopsModel, EmptyMeansDense) {
  EXPECT_EQ(train_flops_ratio(FlopsModel{}), 1.0);
  FlopsModel no_epochs;
  no_epochs.layer_forward_flops = {10.0};
  EXPECT_EQ(train_flops_ratio(no_epochs), 1.0);
}

TEST(FlopsModel, RowWidthMismatchThrows) {
  FlopsModel model;
  model.layer_forward_flops = {10.0, 20.0};
  model.density = {{0.5}};
  EXPECT_THROW(train_flops_ratio(model), std::invalid_argument);
}

}  // namespace
}  // namespace lbc

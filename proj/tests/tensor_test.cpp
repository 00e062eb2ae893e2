#include "lbc/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace lbc {
namespace {

TEST(Shape, Numel) {
  EXPECT_EQ(shape_numel({}), 1u);
  EXPECT_EQ(shape_numel({5}), 5u);
  EXPECT_EQ(shape_numel({2, 3, 4}), 24u);
  EXPECT_EQ(shape_numel({7, 0}), 0u);
}

TEST(Shape, Str) {
  EXPECT_EQ(shape_str({}), "()");
  EXPECT_EQ(shape_str({3}), "(3)");
  EXPECT_EQ(shape_str({2, 4}), "(2, 4)");
}

TEST(Tensor, ConstructsZeroed) {
  Tensor<float> t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  for (float v : t.data) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor<float>({2, 2}, {1.0f, 2.0f, 3.0f}), std::invalid_argument);
}

TEST(Tensor, RowMajor2d) {
  Tensor<double> t({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at(0, 0), 0.0);
  EXPECT_EQ(t.at(0, 2), 2.0);
  EXPECT_EQ(t.at(1, 0), 3.0);
  EXPECT_EQ(t.at(1, 2), 5.0);
}

TEST(Tensor, RowMajor4d) {
  Tensor<double> t({2, 2, 2, 2});
  for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = static_cast<double>(i);
  // flat = ((a*2 + b)*2 + c)*2 + d
  EXPECT_EQ(t.at(0, 0, 0, 1), 1.0);
  EXPECT_EQ(t.at(0, 1, 0, 0), 4.0);
  EXPECT_EQ(t.at(1, 0, 0, 0), 8.0);
  EXPECT_EQ(t.at(1, 1, 1, 1), 15.0);
}

TEST(Tensor, ExtentOutOfRange) {
  Tensor<float> t({2, 3});
  EXPECT_EQ(t.extent(1), 3u);
  EXPECT_THROW(t.extent(2), std::out_of_range);
}

TEST(Tensor, ZerosLike) {
  Tensor<float> t({3, 4}, std::vector<float>(12, 7.0f));
  const Tensor<float> z = zeros_like(t);
  EXPECT_EQ(z.shape, t.shape);
  for (float v : z.data) EXPECT_EQ(v, 0.0f);
}

TEST(Tensor, CheckFinite) {
  Tensor<double> t({3});
  EXPECT_NO_THROW(check_finite(t, "clean"));
  t.data[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    check_finite(t, "poisoned");
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("poisoned"), std::string::npos);
  }
  t.data[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(check_finite(t, "inf"), std::runtime_error);
}

TEST(Tensor, FillsAreSeedDeterministic) {
  Tensor<double> a({64}), b({64}), c({64});
  std::mt19937_64 r1(7), r2(7), r3(8);
  fill_uniform(a, r1, -1.0, 1.0);
  fill_uniform(b, r2, -1.0, 1.0);
  fill_uniform(c, r3, -1.0, 1.0);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
  for (double v : a.data) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }

  std::mt19937_64 r4(7), r5(7);
  fill_normal(a, r4, 2.0);
  fill_normal(b, r5, 2.0);
  EXPECT_EQ(a.data, b.data);
}

}  // namespace
}  // namespace lbc

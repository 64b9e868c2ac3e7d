// Copyright 2026 The CoFlow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "coflow/ops.h"

#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "coflow/gradcheck.h"
#include "coflow/random.h"
#include "support/op_suite.h"

namespace coflow {
namespace {

TEST(OpsTest, MishAtZero) {
  EXPECT_EQ(ops::Mish(Tensor::Scalar(0.0)).item(), 0.0);
}

TEST(OpsTest, MishLargeInputIsStable) {
  Tensor y = ops::Mish(Tensor({2}, {800.0, -800.0}));
  EXPECT_DOUBLE_EQ(y.at(0), 800.0);
  EXPECT_TRUE(std::isfinite(y.at(1)));
}

TEST(OpsTest, SoftmaxOfZerosIsUniform) {
  Tensor y = ops::Softmax(Tensor::Zeros({3}), 0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.at(i), 1.0 / 3.0, 1e-15);
}

TEST(OpsTest, StopGradientBlocksBranch) {
  Tensor x = Tensor::Full({2}, 1.5, true);
  Tensor y = ops::StopGradient(x);
  EXPECT_EQ(y.values(), x.values());
  Tensor other = Tensor::Full({2}, 1.0, true);
  Backward(ops::Sum(ops::Mul(y, other)));
  EXPECT_EQ(x.grad(), std::vector<double>(2, 0.0));
  EXPECT_EQ(other.grad(), std::vector<double>(2, 1.5));
}

TEST(OpsTest, MatmulMatchesFiniteDifferences) {
  Rng rng(11);
  Tensor a = RandomNormal({2, 2}, rng, 1.0, true);
  Tensor b = RandomNormal({2, 2}, rng, 1.0, true);
  auto f = [](const std::vector<Tensor>& in) {
    return ops::Sum(ops::Matmul(in[0], in[1]));
  };
  GradCheckReport r = GradCheck(f, {a, b}, 1e-5, 1e-6);
  EXPECT_TRUE(r.pass) << r.message;
}

TEST(OpsTest, GradCheckSumIsExact) {
  Tensor x = Tensor({3}, {0.3, -1.0, 2.0}, true);
  auto f = [](const std::vector<Tensor>& in) { return ops::Sum(in[0]); };
  GradCheckReport r = GradCheck(f, {x});
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(OpsTest, GradCheckReportsNaN) {
  Tensor x = Tensor({2}, {1.0, -1.0}, true);
  auto f = [](const std::vector<Tensor>& in) {
    std::vector<double> v = in[0].values();
    // sqrt of a negative component.
    Tensor s = ops::Mul(in[0], Tensor({2}, {std::sqrt(v[0]), std::sqrt(v[1])}));
    return ops::Sum(s);
  };
  GradCheckReport r = GradCheck(f, {x});
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.message.find("component"), std::string::npos);
}

TEST(OpsTest, GroupNormThenMishGradcheck) {
  Rng rng(5);
  Tensor x = RandomNormal({1, 8, 4}, rng, 1.0, true);
  Tensor g = RandomNormal({8}, rng, 1.0, true);
  Tensor b = RandomNormal({8}, rng, 1.0, true);
  auto f = [](const std::vector<Tensor>& in) {
    return ops::Sum(ops::Mish(ops::GroupNorm(in[0], 8 / 4, in[1], in[2])));
  };
  GradCheckReport r = GradCheck(f, {x, g, b});
  EXPECT_TRUE(r.pass) << r.message;
}

TEST(OpsTest, ConvMseGradcheck) {
  Rng rng(6);
  Tensor x = RandomNormal({2, 3, 7}, rng, 1.0, true);
  Tensor w = RandomNormal({4, 3, 5}, rng, 1.0, true);
  Tensor y = RandomNormal({2, 4, 7}, rng);
  auto f = [y](const std::vector<Tensor>& in) {
    return ops::Mse(ops::Conv1d(in[0], in[1], Tensor(), 1, 2), y);
  };
  GradCheckReport r = GradCheck(f, {x, w});
  EXPECT_TRUE(r.pass) << r.message;
}

TEST(OpsTest, GroupNormStatistics) {
  Rng rng(7);
  Tensor x = RandomNormal({3, 16, 6}, rng, 4.0);
  for (double& v : x.mutable_data()) v += 3.0;
  Tensor ones = Tensor::Full({16}, 1.0), zeros = Tensor::Zeros({16});
  Tensor y = ops::GroupNorm(x, 8, ones, zeros, 1e-12);
  const int per = 2 * 6;
  for (int b = 0; b < 3; ++b) {
    for (int g = 0; g < 8; ++g) {
      double mean = 0.0, var = 0.0;
      for (int i = 0; i < per; ++i) mean += y.at((b * 16 + g * 2) * 6 + i);
      mean /= per;
      for (int i = 0; i < per; ++i) {
        const double d = y.at((b * 16 + g * 2) * 6 + i) - mean;
        var += d * d;
      }
      var /= per;
      EXPECT_LT(std::abs(mean), 1e-6);
      EXPECT_NEAR(var, 1.0, 1e-6);
    }
  }
}

TEST(OpsTest, ShapeErrorsNameKindAndShapes) {
  try {
    ops::Matmul(Tensor::Zeros({2, 3}), Tensor::Zeros({4, 2}));
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos);
  }
  EXPECT_THROW(ops::Add(Tensor::Zeros({2}), Tensor::Zeros({3})),
               std::invalid_argument);
  EXPECT_THROW(ops::GroupNorm(Tensor::Zeros({1, 6, 2}), 4, Tensor::Zeros({6}),
                              Tensor::Zeros({6})),
               std::invalid_argument);
}

TEST(OpsTest, ConvShapes) {
  Tensor x = Tensor::Zeros({2, 3, 24});
  EXPECT_EQ(ops::Conv1d(x, Tensor::Zeros({5, 3, 5}), Tensor(), 1, 2).shape(),
            (Shape{2, 5, 24}));
  EXPECT_EQ(ops::Conv1d(x, Tensor::Zeros({5, 3, 3}), Tensor(), 2, 1).shape(),
            (Shape{2, 5, 12}));
  EXPECT_EQ(ops::TransposedConv1d(x, Tensor::Zeros({3, 5, 4}), Tensor(), 2, 1)
                .shape(),
            (Shape{2, 5, 48}));
}

TEST(OpsTest, TransposedConvIsAdjointOfStridedConv) {
  // <conv(x), y> == <x, convT(y)> with the weight reinterpreted.
  Rng rng(9);
  Tensor x = RandomNormal({1, 2, 8}, rng);
  Tensor w = RandomNormal({3, 2, 4}, rng);
  Tensor y = RandomNormal({1, 3, 4}, rng);
  Tensor cx = ops::Conv1d(x, w, Tensor(), 2, 1);
  Tensor ty = ops::TransposedConv1d(y, w, Tensor(), 2, 1);
  double lhs = 0.0, rhs = 0.0;
  for (int i = 0; i < cx.numel(); ++i) lhs += cx.at(i) * y.at(i);
  for (int i = 0; i < x.numel(); ++i) rhs += x.at(i) * ty.at(i);
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(OpsTest, PermuteRoundTrip) {
  Rng rng(3);
  Tensor x = RandomNormal({2, 3, 4}, rng);
  Tensor y = ops::Permute(ops::Permute(x, {2, 0, 1}), {1, 2, 0});
  EXPECT_EQ(y.values(), x.values());
  EXPECT_EQ(ops::Permute(x, {2, 0, 1}).shape(), (Shape{4, 2, 3}));
  // x[1, 2, 3] lands at [3, 1, 2].
  EXPECT_EQ(ops::Permute(x, {2, 0, 1}).at((3 * 2 + 1) * 3 + 2), x.at(23));
}

class OpSuiteTest : public ::testing::TestWithParam<OpKind> {};

TEST_P(OpSuiteTest, MatchesFiniteDifferences) {
  testing::OpSuiteResult r = testing::RunOpSuite(GetParam(), 20, 1000);
  EXPECT_EQ(r.failures, 0) << OpKindName(GetParam()) << ": " << r.first_failure;
  EXPECT_LT(r.max_rel_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, OpSuiteTest,
                         ::testing::ValuesIn(testing::SuiteKinds()),
                         [](const auto& info) {
                           std::string s = OpKindName(info.param);
                           for (char& c : s) {
                             if (c == '-') c = '_';
                           }
                           return s;
                         });

}  // namespace
}  // namespace coflow

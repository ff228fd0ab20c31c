// Copyright 2026 The SOG Authors. All Rights Reserved.
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

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "sog/panohead.hpp"

namespace sog {
namespace {

using testing::check_vjp;
using testing::describe;
using testing::random_tensor;

IdGrid ids_of(std::size_t H, std::size_t W, std::vector<std::int32_t> v) {
  IdGrid g(H, W);
  g.values() = std::move(v);
  return g;
}

TEST(ExtractSemLogit, WholeImageCopiesChannel) {
  Rng rng(1);
  const Tensor sem = random_tensor({5, 6, 3}, rng);
  const Tensor x = extract_sem_logit(sem, {0, 0, 6, 5}, 2);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(x.at(r, c), sem.at(r, c, 2));
}

TEST(ExtractSemLogit, LeftColumnHandEvaluation) {
  const Tensor sem({2, 2, 1}, {1, 2, 3, 4});
  EXPECT_EQ(extract_sem_logit(sem, {0, 0, 1, 2}, 0), Tensor({2, 2}, {1, 0, 3, 0}));
}

TEST(ExtractSemLogit, OutsideBoxIsZero) {
  Rng rng(2);
  const Tensor sem = random_tensor({8, 8, 2}, rng, 1, 2);
  const Tensor x = extract_sem_logit(sem, {2, 3, 3, 2}, 1);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) {
      const bool in = r >= 3 && r <= 4 && c >= 2 && c <= 4;
      EXPECT_EQ(x.at(r, c) != 0.0, in);
    }
}

TEST(ExtractSemLogit, InvalidClassRejected) {
  EXPECT_THROW(extract_sem_logit(Tensor({2, 2, 3}), {0, 0, 1, 1}, 3), ConfigError);
}

TEST(Combine, Ph1Addition) {
  const Tensor a({1, 2}, {2.0, -1.0});
  EXPECT_EQ(combine_ph1(Tensor({1, 2}), a), a);
  EXPECT_EQ(combine_ph1(a, Tensor({1, 2})), a);
  EXPECT_EQ(combine_ph1(Tensor({1, 1}, 1.0), Tensor({1, 1}, 2.0))[0], 3.0);
}

TEST(Combine, Ph2HandEvaluation) {
  EXPECT_NEAR(combine_ph2(Tensor({1, 1}, 1.0), Tensor({1, 1}, 2.0), 2.0)[0], 3.76159, 1e-5);
  const Tensor a({1, 2}, {2.0, -1.0});
  EXPECT_EQ(combine_ph2(Tensor({1, 2}), a, 2.0), a);
}

TEST(Combine, Ph2WithZeroResolvedLogitIsIdentity) {
  Rng rng(3);
  const Tensor x = random_tensor({4, 4}, rng, -5, 5);
  EXPECT_EQ(combine_ph2(x, Tensor({4, 4}), 2.0), x);
}

TEST(Combine, Ph2VjpPassesGradientCheck) {
  for (std::uint64_t seed : {0, 1, 2}) {
    Rng rng(seed);
    const Tensor x = random_tensor({3, 4}, rng, -3, 3), a = random_tensor({3, 4}, rng, -3, 3);
    const Tensor g = random_tensor({3, 4}, rng);
    const auto rep = check_vjp(
        {{"x", x}, {"a", a}},
        [](const ParamStore& ps) { return combine_ph2(ps.value("x"), ps.value("a"), 2.0); }, g,
        [&](const ParamStore& ps) {
          const auto cg = combine_ph2_vjp(ps.value("x"), ps.value("a"), 2.0, g);
          return std::map<std::string, Tensor>{{"x", cg.x}, {"a", cg.a}};
        },
        seed);
    EXPECT_TRUE(rep.pass) << describe(rep);
  }
}

TEST(Combine, VariantDispatch) {
  const Tensor x({1, 1}, 1.0), a({1, 1}, 2.0), g({1, 1}, 1.0);
  EXPECT_EQ(combine(HeadVariant::kPH1, 2.0, x, a)[0], 3.0);
  EXPECT_EQ(combine(HeadVariant::kPH2, 2.0, x, a), combine_ph2(x, a, 2.0));
  EXPECT_EQ(combine_vjp_a(HeadVariant::kPH1, 2.0, x, a, g), g);
  EXPECT_THROW(parse_head(3), ConfigError);
}

TEST(Assemble, PlacementAndEmptySides) {
  Rng rng(4);
  const Tensor zi = random_tensor({2, 3, 2}, rng), zs = random_tensor({2, 3, 3}, rng);
  const Tensor all = assemble(zi, zs);
  ASSERT_EQ(all.shape(), (Shape{2, 3, 5}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(all.at(r, c, 1), zi.at(r, c, 1));
      EXPECT_EQ(all.at(r, c, 2), zs.at(r, c, 0));
    }
  EXPECT_EQ(assemble(zi, Tensor({2, 3, 0})), zi);
  EXPECT_EQ(assemble(Tensor({2, 3, 0}), zs), zs);
  EXPECT_EQ(assemble_vjp_inst(all, 2), zi);
}

TEST(PanopticLoss, UniformTwoChannelsIsLn2) {
  EXPECT_NEAR(panoptic_ce_loss(Tensor({1, 1, 2}), ids_of(1, 1, {0})), 0.69315, 1e-5);
}

TEST(PanopticLoss, SaturatedCorrectIsNearZero) {
  EXPECT_LT(panoptic_ce_loss(Tensor({1, 1, 2}, {100.0, 0.0}), ids_of(1, 1, {0})), 1e-10);
}

TEST(PanopticLoss, UniformKChannelsIsLnK) {
  for (std::size_t k : {3u, 7u, 12u}) {
    const IdGrid gt = ids_of(2, 2, {0, 1, 2, 0});
    EXPECT_NEAR(panoptic_ce_loss(Tensor({2, 2, k}, 0.3), gt), std::log(double(k)), 1e-12);
  }
}

TEST(PanopticLoss, VoidPixelsExcludedFromMean) {
  const Tensor z({1, 2, 2}, {0.0, 0.0, 50.0, -50.0});
  EXPECT_NEAR(panoptic_ce_loss(z, ids_of(1, 2, {0, kVoidId})), std::log(2.0), 1e-12);
  EXPECT_THROW(panoptic_ce_loss(z, ids_of(1, 2, {kVoidId, kVoidId})), ConfigError);
  EXPECT_THROW(panoptic_ce_loss(z, ids_of(1, 2, {0, 2})), ConfigError);
}

TEST(PanopticLoss, NonnegativeAndShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor z = random_tensor({3, 3, 4}, rng, -5, 5);
    IdGrid gt(3, 3);
    for (auto& v : gt.values()) v = std::int32_t(rng.uniform_int(0, 3));
    const double l = panoptic_ce_loss(z, gt);
    EXPECT_GE(l, 0.0);
    const IdGrid ids = infer_ids(z);
    for (std::size_t p = 0; p < 9; ++p) {
      const double shift = rng.uniform(-20, 20);
      for (std::size_t c = 0; c < 4; ++c) z[p * 4 + c] += shift;
    }
    EXPECT_NEAR(panoptic_ce_loss(z, gt), l, 1e-10);
    EXPECT_EQ(infer_ids(z), ids);
  }
}

TEST(PanopticLoss, GradientPassesCheck) {
  for (std::uint64_t seed : {0, 1, 2}) {
    Rng rng(seed);
    IdGrid gt(3, 4);
    for (auto& v : gt.values()) v = std::int32_t(rng.uniform_int(-1, 4));
    gt[0] = 0;
    ParamStore ps;
    ps.add("z", random_tensor({3, 4, 5}, rng, -3, 3));
    ps.grad("z") = panoptic_ce_loss_with_grad(ps.value("z"), gt).grad;
    GradCheckOptions opt;
    opt.seed = seed;
    const auto rep = finite_diff_check(
        [&](const ParamStore& p) { return panoptic_ce_loss(p.value("z"), gt); }, ps, opt);
    EXPECT_TRUE(rep.pass) << describe(rep);
  }
}

TEST(InferIds, DominantChannelAndTies) {
  EXPECT_EQ(infer_ids(Tensor({1, 1, 3}, {0.1, 5.0, 0.2}))[0], 1);
  EXPECT_EQ(infer_ids(Tensor({1, 1, 4}, {0.0, 2.0, 1.0, 2.0}))[0], 1);
  EXPECT_EQ(infer_ids(Tensor({1, 1, 0}))[0], kVoidId);
}

TEST(InferIds, MatchesLoopOracle) {
  Rng rng(6);
  const Tensor z = random_tensor({7, 5, 6}, rng);
  const IdGrid ids = infer_ids(z);
  for (std::size_t r = 0; r < 7; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      std::int32_t best = 0;
      for (std::int32_t k = 1; k < 6; ++k)
        if (z.at(r, c, std::size_t(k)) > z.at(r, c, std::size_t(best))) best = k;
      EXPECT_EQ(ids(r, c), best);
    }
}

}  // namespace
}  // namespace sog

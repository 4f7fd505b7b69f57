#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "unimoco/error.hpp"
#include "unimoco/losses.hpp"
#include "unimoco/numerics.hpp"

namespace unimoco {
namespace {

using oracle::Logits;
using oracle::Mask;

using OracleFn = double (*)(const Logits&, const Mask&);

OracleFn oracle_for(LossKind kind) {
  switch (kind) {
    case LossKind::kInfoNCE: return oracle::infonce;
    case LossKind::kUniCon: return oracle::unicon;
    case LossKind::kUniConOut: return oracle::unicon_out;
    case LossKind::kSupConOut: return oracle::supcon_out;
    case LossKind::kSupConIn: return oracle::supcon_in;
  }
  return nullptr;
}

struct RandomRow {
  Logits logits;
  Mask mask;
};

RandomRow random_row(Rng& rng, std::size_t width, std::size_t positives, double scale) {
  RandomRow r{Logits(width), Mask(width, 0)};
  for (double& v : r.logits) v = rng.uniform(-scale, scale);
  const auto order = permutation(width, rng);
  for (std::size_t i = 0; i < positives; ++i) r.mask[order[i]] = 1;
  return r;
}

// Frozen values below come from direct summation in 40-digit arithmetic.

TEST(InfoNCE, UniformLogits) {
  const auto e = infonce(Logits{0, 0, 0}, Mask{1, 0, 0});
  EXPECT_NEAR(e.value, std::log(3.0), 1e-15);
}

TEST(InfoNCE, DominantPositive) {
  const auto e = infonce(Logits{5, 0, 0}, Mask{1, 0, 0});
  EXPECT_NEAR(e.value, 0.013385901721448902, 1e-15);
}

TEST(InfoNCE, RejectsMultiplePositives) {
  try {
    infonce(Logits{0, 0, 0}, Mask{1, 1, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "infonce requires single positive");
  }
}

TEST(InfoNCE, GradientIsSoftmaxMinusTarget) {
  const auto e = infonce(Logits{1, 2, 3}, Mask{0, 1, 0});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(e.grad[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(e.grad[1], std::exp(2.0) / z - 1.0, 1e-15);
  EXPECT_NEAR(e.grad[2], std::exp(3.0) / z, 1e-15);
}

TEST(UniCon, UniformLogitsGiveLogOnePlusN) {
  EXPECT_NEAR(unicon(Logits{0, 0, 0}, Mask{1, 0, 0}).value, std::log(3.0), 1e-15);
  EXPECT_NEAR(unicon(Logits{2, 2, 2, 2, 2}, Mask{1, 0, 0, 0, 0}).value, std::log(5.0), 1e-14);
}

TEST(UniCon, TwoPositivesTwoNegatives) {
  const auto e = unicon(Logits{0.5, 0.2, -0.1, 0.3}, Mask{1, 1, 0, 0});
  EXPECT_NEAR(e.value, 1.4383011388009175, 1e-14);
}

TEST(UniCon, NoNegativesIsZero) {
  const auto e = unicon(Logits{0.3, -1.0, 2.0}, Mask{1, 1, 1});
  EXPECT_EQ(e.value, 0.0);
  for (double g : e.grad) EXPECT_EQ(g, 0.0);
}

TEST(UniCon, RequiresAPositive) {
  try {
    unicon(Logits{0, 0}, Mask{0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "unicon requires a positive");
  }
}

TEST(UniConOut, Examples) {
  EXPECT_NEAR(unicon_out(Logits{0.5, 0.2, -0.1, 0.3}, Mask{1, 1, 0, 0}).value,
              0.95388156693646662, 1e-14);
  EXPECT_NEAR(unicon_out(Logits{0, 0, 0}, Mask{1, 0, 0}).value, std::log(3.0), 1e-15);
  EXPECT_EQ(unicon_out(Logits{1, 2}, Mask{1, 1}).value, 0.0);
  EXPECT_THROW(unicon_out(Logits{0, 0}, Mask{0, 0}), Error);
}

TEST(SupConOut, Examples) {
  EXPECT_NEAR(supcon_out(Logits{1.0, 0.0, 0.0}, Mask{1, 1, 0}).value, 1.0514447139320511, 1e-14);
  EXPECT_NEAR(supcon_out(Logits{0, 0, 0}, Mask{1, 0, 0}).value, std::log(3.0), 1e-15);
  EXPECT_THROW(supcon_out(Logits{0, 0}, Mask{0, 0}), Error);
}

TEST(SupConIn, Examples) {
  EXPECT_NEAR(supcon_in(Logits{1.0, 0.0, 0.0}, Mask{1, 1, 0}).value, 0.93133020697377356, 1e-14);
  EXPECT_NEAR(supcon_in(Logits{0, 0, 0}, Mask{1, 0, 0}).value, std::log(3.0), 1e-15);
  EXPECT_THROW(supcon_in(Logits{0, 0}, Mask{0, 0}), Error);
}

TEST(Losses, SupConStaysDefinedWithoutNegatives) {
  const Logits s{0.4, -0.2};
  const Mask m{1, 1};
  EXPECT_NEAR(supcon_out(s, m).value, oracle::supcon_out(s, m), 1e-14);
  EXPECT_NEAR(supcon_in(s, m).value, std::log(2.0), 1e-14);
}

TEST(Losses, RejectMismatchedAndNonFiniteRows) {
  EXPECT_THROW(unicon(Logits{0, 1}, Mask{1}), Error);
  EXPECT_THROW(unicon(Logits{0, NAN}, Mask{1, 0}), Error);
  EXPECT_THROW(unicon(Logits{}, Mask{}), Error);
}

TEST(Losses, MatchLiteralOracle) {
  Rng rng(10);
  for (auto kind : all_loss_kinds()) {
    for (int t = 0; t < 300; ++t) {
      const std::size_t pos = kind == LossKind::kInfoNCE ? 1 : 1 + rng.below(8);
      const auto row = random_row(rng, 33, pos, 4.0);
      const double v = evaluate(kind, row.logits, row.mask).value;
      EXPECT_NEAR(v, oracle_for(kind)(row.logits, row.mask), 1e-12 * std::max(1.0, v))
          << to_string(kind);
    }
  }
}

TEST(Losses, GradientsMatchFiniteDifferencesOfOracle) {
  Rng rng(11);
  for (auto kind : all_loss_kinds()) {
    for (int t = 0; t < 50; ++t) {
      const std::size_t pos = kind == LossKind::kInfoNCE ? 1 : 1 + rng.below(8);
      const auto row = random_row(rng, 33, pos, 3.0);
      const auto analytic = evaluate(kind, row.logits, row.mask).grad;
      const auto fd = oracle::central_diff(
          [&](const Logits& x) { return oracle_for(kind)(x, row.mask); }, row.logits);
      EXPECT_LE(oracle::relative_error(analytic, fd), 1e-6) << to_string(kind);
    }
  }
}

TEST(Losses, NonNegativeAndShiftInvariant) {
  Rng rng(12);
  for (auto kind : all_loss_kinds()) {
    for (int t = 0; t < 200; ++t) {
      const std::size_t pos = kind == LossKind::kInfoNCE ? 1 : 1 + rng.below(8);
      const auto row = random_row(rng, 17, pos, 6.0);
      const double v = evaluate(kind, row.logits, row.mask).value;
      EXPECT_GE(v, 0.0);
      Logits shifted = row.logits;
      const double c = rng.uniform(-50.0, 50.0);
      for (double& x : shifted) x += c;
      EXPECT_NEAR(evaluate(kind, shifted, row.mask).value, v, 1e-10);
    }
  }
}

TEST(Losses, SinglePositiveCollapse) {
  Rng rng(13);
  for (int t = 0; t < 500; ++t) {
    const auto row = random_row(rng, 33, 1, 5.0);
    const double ref = infonce(row.logits, row.mask).value;
    for (auto kind : {LossKind::kUniCon, LossKind::kUniConOut, LossKind::kSupConOut,
                      LossKind::kSupConIn}) {
      EXPECT_NEAR(evaluate(kind, row.logits, row.mask).value, ref, 1e-12) << to_string(kind);
    }
  }
}

TEST(Losses, PairwiseGradientSigns) {
  Rng rng(14);
  for (auto kind : {LossKind::kInfoNCE, LossKind::kUniCon, LossKind::kUniConOut}) {
    for (int t = 0; t < 200; ++t) {
      const std::size_t pos = kind == LossKind::kInfoNCE ? 1 : 1 + rng.below(8);
      const auto row = random_row(rng, 33, pos, 5.0);
      const auto g = evaluate(kind, row.logits, row.mask).grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (row.mask[i]) {
          EXPECT_LE(g[i], 0.0);
        } else {
          EXPECT_GE(g[i], 0.0);
        }
      }
    }
  }
}

TEST(Losses, Monotonicity) {
  Rng rng(15);
  for (auto kind : {LossKind::kInfoNCE, LossKind::kUniCon, LossKind::kUniConOut}) {
    for (int t = 0; t < 100; ++t) {
      const std::size_t pos = kind == LossKind::kInfoNCE ? 1 : 1 + rng.below(8);
      const auto row = random_row(rng, 20, pos, 3.0);
      const double base = evaluate(kind, row.logits, row.mask).value;
      for (std::size_t i = 0; i < row.logits.size(); ++i) {
        Logits moved = row.logits;
        moved[i] += 0.25;
        const double v = evaluate(kind, moved, row.mask).value;
        if (row.mask[i]) {
          EXPECT_LT(v, base);
        } else {
          EXPECT_GT(v, base);
        }
      }
    }
  }
}

TEST(UniCon, MaxBounds) {
  Rng rng(16);
  for (int t = 0; t < 1000; ++t) {
    const auto row = random_row(rng, 33, 1 + rng.below(8), 5.0);
    double max_delta = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < row.mask.size(); ++i) {
      (row.mask[i] ? n_pos : n_neg)++;
      for (std::size_t j = 0; j < row.mask.size(); ++j) {
        if (row.mask[i] && !row.mask[j]) max_delta = std::max(max_delta, row.logits[j] - row.logits[i]);
      }
    }
    const double v = unicon(row.logits, row.mask).value;
    EXPECT_GE(v + 1e-12, max_delta);
    EXPECT_LE(v, max_delta + std::log1p(static_cast<double>(n_pos * n_neg)) + 1e-12);
  }
}

TEST(UniCon, StableAtLargeLogits) {
  Logits s(33, 600.0);
  Mask m(33, 0);
  s[0] = -600.0;
  m[0] = 1;
  const auto e = unicon(s, m);
  EXPECT_TRUE(std::isfinite(e.value));
  EXPECT_TRUE(all_finite(e.grad));
  EXPECT_NEAR(e.value, 1200.0 + std::log(32.0), 1e-9);
}

TEST(Triplet, Examples) {
  const std::vector<double> q = {1.0, 0.0, 0.0};
  const std::vector<double> k = {0.0, 1.0, 0.0};
  EXPECT_EQ(triplet_pair(q, k, k, 0.2), 0.0);
  EXPECT_EQ(triplet_pair(q, q, k, 0.2), 0.0);
  // q.k+ = 0.2, q.k- = 0.6.
  const std::vector<double> kp = {0.2, std::sqrt(1.0 - 0.04), 0.0};
  const std::vector<double> kn = {0.6, 0.0, 0.8};
  for (double tau : {0.07, 0.2, 1.0, 3.0}) EXPECT_NEAR(triplet_pair(q, kp, kn, tau), 0.8, 1e-12);
}

TEST(Triplet, RejectsNonUnitInput) {
  const std::vector<double> q = {2.0, 0.0};
  const std::vector<double> k = {0.0, 1.0};
  try {
    triplet_pair(q, k, k, 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "non-unit input");
  }
  EXPECT_THROW(triplet_pair(k, k, k, 0.0), Error);
}

TEST(LossKind, ParseRoundTrip) {
  for (auto kind : all_loss_kinds()) EXPECT_EQ(parse_loss_kind(to_string(kind)), kind);
  EXPECT_THROW(parse_loss_kind("triplet"), Error);
}

}  // namespace
}  // namespace unimoco

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "unimoco/losses.hpp"

namespace unimoco {

struct LossCheckOptions {
  std::size_t trials = 1000;
  std::size_t width = 33;  // 1 + K
  std::uint64_t seed = 0;
};

struct LossCheckRow {
  std::string loss;
  std::string property;
  std::size_t trials = 0;
  double worst = 0.0;      // largest observed violation measure
  double tolerance = 0.0;
  bool passed = false;
};

/// Randomized property suite over the loss family: non-negativity, shift
/// invariance, single-positive collapse, finite-difference gradients,
/// gradient signs, monotonicity, max bounds, triplet relation and large-logit
/// stability.
std::vector<LossCheckRow> run_losscheck(const LossCheckOptions& opts);

std::string losscheck_table(const std::vector<LossCheckRow>& rows);

}  // namespace unimoco

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace unimoco {

/// Binary multi-hot row over the 1+K candidates; 1 marks a positive.
using TargetMask = std::vector<std::uint8_t>;

/// A loss value together with its gradient with respect to the logits row.
struct LossEval {
  double value = 0.0;
  std::vector<double> grad;
};

enum class LossKind { kInfoNCE, kUniCon, kUniConOut, kSupConOut, kSupConIn };

std::string_view to_string(LossKind kind);
/// Accepts infonce | unicon | unicon_out | supcon_out | supcon_in.
LossKind parse_loss_kind(std::string_view name);
std::vector<LossKind> all_loss_kinds();

// All losses take logits already divided by the temperature. Masks need not
// have bit 0 set here; that convention is enforced when targets are built.

/// Single-positive softmax cross-entropy. Gradient is softmax - target.
LossEval infonce(std::span<const double> logits, std::span<const std::uint8_t> target);

/// Pair-wise unified loss log(1 + sum_neg exp(s-) * sum_pos exp(-s+)),
/// evaluated as softplus(A + B) with A = LSE(neg), B = LSE(-pos).
/// Zero with zero gradient when there are no negatives.
LossEval unicon(std::span<const double> logits, std::span<const std::uint8_t> target);

/// Per-positive variant: mean over positives of log(1 + sum_neg exp(s- - s+)).
LossEval unicon_out(std::span<const double> logits, std::span<const std::uint8_t> target);

/// Mean over positives of the per-positive InfoNCE; the denominator covers
/// every candidate, positives included.
LossEval supcon_out(std::span<const double> logits, std::span<const std::uint8_t> target);

/// -log(sum_pos exp(s+) / (|P| * sum_all exp(s))).
LossEval supcon_in(std::span<const double> logits, std::span<const std::uint8_t> target);

LossEval evaluate(LossKind kind, std::span<const double> logits,
                  std::span<const std::uint8_t> target);

/// 2 * tau * max(0, s- - s+) with s = q.k / tau, which for unit vectors equals
/// max(0, |q - k+|^2 - |q - k-|^2). Inputs must be unit norm within 1e-8.
double triplet_pair(std::span<const double> q, std::span<const double> k_pos,
                    std::span<const double> k_neg, double tau);

}  // namespace unimoco

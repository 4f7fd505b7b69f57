#include "unimoco/losses.hpp"

#include <algorithm>
#include <cmath>

#include "unimoco/error.hpp"
#include "unimoco/numerics.hpp"

namespace unimoco {
namespace {

struct Partition {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
};

Partition split(std::span<const double> logits, std::span<const std::uint8_t> target) {
  if (logits.size() != target.size()) throw Error("logits and target length differ");
  if (logits.empty()) throw Error("empty logits");
  if (!all_finite(logits)) throw Error("non-finite logits");
  Partition p;
  for (std::size_t i = 0; i < target.size(); ++i) {
    (target[i] ? p.pos : p.neg).push_back(i);
  }
  return p;
}

std::vector<double> gather(std::span<const double> logits, const std::vector<std::size_t>& idx,
                           double sign = 1.0) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(sign * logits[i]);
  return out;
}

// Softmax over the full row, paired with its log-normalizer.
std::vector<double> softmax(std::span<const double> logits, double& lse) {
  lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kInfoNCE: return "infonce";
    case LossKind::kUniCon: return "unicon";
    case LossKind::kUniConOut: return "unicon_out";
    case LossKind::kSupConOut: return "supcon_out";
    case LossKind::kSupConIn: return "supcon_in";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view name) {
  for (auto kind : all_loss_kinds()) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown loss kind '" + std::string(name) + "'");
}

std::vector<LossKind> all_loss_kinds() {
  return {LossKind::kInfoNCE, LossKind::kUniCon, LossKind::kUniConOut, LossKind::kSupConOut,
          LossKind::kSupConIn};
}

LossEval infonce(std::span<const double> logits, std::span<const std::uint8_t> target) {
  const auto part = split(logits, target);
  if (part.pos.size() != 1) throw Error("infonce requires single positive");
  LossEval out;
  double lse = 0.0;
  out.grad = softmax(logits, lse);
  const auto p = part.pos.front();
  out.value = lse - logits[p];
  out.grad[p] -= 1.0;
  return out;
}

LossEval unicon(std::span<const double> logits, std::span<const std::uint8_t> target) {
  const auto part = split(logits, target);
  if (part.pos.empty()) throw Error("unicon requires a positive");
  LossEval out;
  out.grad.assign(logits.size(), 0.0);
  if (part.neg.empty()) return out;

  const double a = log_sum_exp(gather(logits, part.neg));
  const double b = log_sum_exp(gather(logits, part.pos, -1.0));
  const double z = a + b;
  out.value = softplus(z);
  // d softplus(A + B) = sigmoid(A + B) * (dA + dB), and dA/ds_j, dB/ds_i are
  // the softmax weights of the negative and negated-positive sets.
  const double s = sigmoid(z);
  for (auto j : part.neg) out.grad[j] = s * std::exp(logits[j] - a);
  for (auto i : part.pos) out.grad[i] = -s * std::exp(-logits[i] - b);
  return out;
}

LossEval unicon_out(std::span<const double> logits, std::span<const std::uint8_t> target) {
  const auto part = split(logits, target);
  if (part.pos.empty()) throw Error("unicon_out requires a positive");
  LossEval out;
  out.grad.assign(logits.size(), 0.0);
  if (part.neg.empty()) return out;

  const double a = log_sum_exp(gather(logits, part.neg));
  const double inv_p = 1.0 / static_cast<double>(part.pos.size());
  double weight_sum = 0.0;
  for (auto i : part.pos) {
    const double z = a - logits[i];
    out.value += softplus(z);
    const double s = sigmoid(z);
    out.grad[i] = -s * inv_p;
    weight_sum += s;
  }
  out.value *= inv_p;
  for (auto j : part.neg) out.grad[j] = weight_sum * inv_p * std::exp(logits[j] - a);
  return out;
}

LossEval supcon_out(std::span<const double> logits, std::span<const std::uint8_t> target) {
  const auto part = split(logits, target);
  if (part.pos.empty()) throw Error("supcon_out requires a positive");
  LossEval out;
  double lse = 0.0;
  out.grad = softmax(logits, lse);
  const double inv_p = 1.0 / static_cast<double>(part.pos.size());
  for (auto i : part.pos) {
    out.value += lse - logits[i];
    out.grad[i] -= inv_p;
  }
  out.value *= inv_p;
  return out;
}

LossEval supcon_in(std::span<const double> logits, std::span<const std::uint8_t> target) {
  const auto part = split(logits, target);
  if (part.pos.empty()) throw Error("supcon_in requires a positive");
  LossEval out;
  double lse_all = 0.0;
  out.grad = softmax(logits, lse_all);
  const double lse_pos = log_sum_exp(gather(logits, part.pos));
  out.value = lse_all + std::log(static_cast<double>(part.pos.size())) - lse_pos;
  for (auto i : part.pos) out.grad[i] -= std::exp(logits[i] - lse_pos);
  return out;
}

LossEval evaluate(LossKind kind, std::span<const double> logits,
                  std::span<const std::uint8_t> target) {
  switch (kind) {
    case LossKind::kInfoNCE: return infonce(logits, target);
    case LossKind::kUniCon: return unicon(logits, target);
    case LossKind::kUniConOut: return unicon_out(logits, target);
    case LossKind::kSupConOut: return supcon_out(logits, target);
    case LossKind::kSupConIn: return supcon_in(logits, target);
  }
  throw Error("unknown loss kind");
}

double triplet_pair(std::span<const double> q, std::span<const double> k_pos,
                    std::span<const double> k_neg, double tau) {
  if (!(tau > 0.0)) throw Error("tau must be positive");
  for (auto v : {q, k_pos, k_neg}) {
    if (std::abs(l2_norm(v) - 1.0) > 1e-8) throw Error("non-unit input");
  }
  const double s_pos = dot(q, k_pos) / tau;
  const double s_neg = dot(q, k_neg) / tau;
  return 2.0 * tau * std::max(0.0, s_neg - s_pos);
}

}  // namespace unimoco

#include "unimoco/losscheck.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "unimoco/error.hpp"
#include "unimoco/numerics.hpp"

namespace unimoco {
namespace {

struct Row {
  std::vector<double> logits;
  TargetMask mask;
};

Row random_row(Rng& rng, std::size_t width, std::size_t positives, double scale) {
  Row r{std::vector<double>(width), TargetMask(width, 0)};
  for (double& v : r.logits) v = rng.uniform(-scale, scale);
  const auto order = permutation(width, rng);
  for (std::size_t i = 0; i < positives; ++i) r.mask[order[i]] = 1;
  return r;
}

std::size_t random_positive_count(Rng& rng, std::size_t width) {
  const std::size_t cap = std::min<std::size_t>(8, width - 1);
  return 1 + static_cast<std::size_t>(rng.below(cap));
}

double fd_relative_error(LossKind kind, const Row& row) {
  constexpr double h = 1e-5;
  const auto analytic = evaluate(kind, row.logits, row.mask).grad;
  std::vector<double> x = row.logits;
  double diff = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = evaluate(kind, x, row.mask).value;
    x[i] = x0 - h;
    const double down = evaluate(kind, x, row.mask).value;
    x[i] = x0;
    const double fd = (up - down) / (2.0 * h);
    diff += (fd - analytic[i]) * (fd - analytic[i]);
    ref = std::max({ref, fd * fd, analytic[i] * analytic[i]});
  }
  // Norm-wise error relative to the largest gradient entry.
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

std::vector<double> unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    n = l2_norm(v);
  } while (n <= 1e-12);
  for (double& x : v) x /= n;
  return v;
}

bool uses_pairwise_sign(LossKind k) {
  return k == LossKind::kInfoNCE || k == LossKind::kUniCon || k == LossKind::kUniConOut;
}

// log(1 + sum_neg exp(s) * sum_pos exp(-s)) evaluated literally.
double naive_unicon(const Row& row) {
  double sum_neg = 0.0;
  double sum_pos = 0.0;
  for (std::size_t i = 0; i < row.logits.size(); ++i) {
    if (row.mask[i]) {
      sum_pos += std::exp(-row.logits[i]);
    } else {
      sum_neg += std::exp(row.logits[i]);
    }
  }
  return std::log(1.0 + sum_neg * sum_pos);
}

}  // namespace

std::vector<LossCheckRow> run_losscheck(const LossCheckOptions& opts) {
  if (opts.width < 2) throw Error("losscheck width must be >= 2");
  if (opts.trials == 0) throw Error("losscheck needs at least one trial");
  const Rng root(opts.seed);
  std::vector<LossCheckRow> out;

  for (auto kind : all_loss_kinds()) {
    const std::string name(to_string(kind));
    const bool single = kind == LossKind::kInfoNCE;
    Rng rng = root.substream(name);
    auto next_row = [&](double scale) {
      return random_row(rng, opts.width, single ? 1 : random_positive_count(rng, opts.width),
                        scale);
    };

    double worst_neg = 0.0;
    double worst_shift = 0.0;
    double worst_fd = 0.0;
    double worst_sign = 0.0;
    double mono_failures = 0.0;
    for (std::size_t t = 0; t < opts.trials; ++t) {
      const Row row = next_row(5.0);
      const auto eval = evaluate(kind, row.logits, row.mask);
      worst_neg = std::max(worst_neg, -eval.value);

      for (double c : {-100.0, -1.0, 1.0, 100.0}) {
        std::vector<double> shifted = row.logits;
        for (double& v : shifted) v += c;
        const double v2 = evaluate(kind, shifted, row.mask).value;
        worst_shift =
            std::max(worst_shift, std::abs(v2 - eval.value) / std::max(1.0, std::abs(eval.value)));
      }

      worst_fd = std::max(worst_fd, fd_relative_error(kind, next_row(3.0)));

      if (uses_pairwise_sign(kind)) {
        for (std::size_t i = 0; i < row.mask.size(); ++i) {
          const double wrong = row.mask[i] ? eval.grad[i] : -eval.grad[i];
          worst_sign = std::max(worst_sign, wrong);
        }
        // Nudge one negative up and one positive up.
        const Row m = next_row(3.0);
        const double base = evaluate(kind, m.logits, m.mask).value;
        for (std::size_t i = 0; i < m.mask.size(); ++i) {
          std::vector<double> moved = m.logits;
          moved[i] += 0.5;
          const double v = evaluate(kind, moved, m.mask).value;
          if (m.mask[i] ? !(v < base) : !(v > base)) mono_failures += 1.0;
        }
      }
    }
    out.push_back({name, "non_negative", opts.trials, worst_neg, 0.0, worst_neg <= 0.0});
    out.push_back({name, "shift_invariance", opts.trials, worst_shift, 1e-9, worst_shift <= 1e-9});
    out.push_back({name, "gradient_fd", opts.trials, worst_fd, 1e-6, worst_fd <= 1e-6});
    if (uses_pairwise_sign(kind)) {
      out.push_back({name, "gradient_sign", opts.trials, worst_sign, 0.0, worst_sign <= 0.0});
      out.push_back({name, "monotonicity", opts.trials, mono_failures, 0.0, mono_failures == 0.0});
    }
    if (!single) {
      double worst = 0.0;
      for (std::size_t t = 0; t < opts.trials; ++t) {
        const Row row = random_row(rng, opts.width, 1, 5.0);
        const double ref = infonce(row.logits, row.mask).value;
        worst = std::max(worst, std::abs(evaluate(kind, row.logits, row.mask).value - ref));
      }
      out.push_back({name, "single_positive_collapse", opts.trials, worst, 1e-10, worst <= 1e-10});
    }
  }

  // Pair-wise bounds: max(0, max delta) <= unicon <= that + log(1 + |P||N|).
  {
    Rng rng = root.substream("bounds");
    double worst = 0.0;
    for (std::size_t t = 0; t < opts.trials; ++t) {
      const Row row = random_row(rng, opts.width, random_positive_count(rng, opts.width), 5.0);
      double max_delta = 0.0;
      std::size_t n_pos = 0;
      std::size_t n_neg = 0;
      for (std::size_t i = 0; i < row.mask.size(); ++i) (row.mask[i] ? n_pos : n_neg)++;
      for (std::size_t i = 0; i < row.mask.size(); ++i) {
        if (!row.mask[i]) continue;
        for (std::size_t j = 0; j < row.mask.size(); ++j) {
          if (!row.mask[j]) max_delta = std::max(max_delta, row.logits[j] - row.logits[i]);
        }
      }
      const double v = unicon(row.logits, row.mask).value;
      const double upper = max_delta + std::log1p(static_cast<double>(n_pos * n_neg));
      worst = std::max({worst, max_delta - v, v - upper});
    }
    out.push_back({"unicon", "max_bounds", opts.trials, worst, 1e-12, worst <= 1e-12});
  }

  // Single positive and negative: |2 tau unicon - triplet| <= 2 tau log 2.
  {
    Rng rng = root.substream("triplet");
    double worst = -1.0;
    for (std::size_t t = 0; t < opts.trials; ++t) {
      const auto q = unit_vector(rng, 16);
      const auto kp = unit_vector(rng, 16);
      const auto kn = unit_vector(rng, 16);
      const double tau = rng.uniform(0.05, 1.0);
      const std::vector<double> logits = {dot(q, kp) / tau, dot(q, kn) / tau};
      const TargetMask mask = {1, 0};
      const double gap = std::abs(2.0 * tau * unicon(logits, mask).value -
                                  triplet_pair(q, kp, kn, tau)) -
                         2.0 * tau * std::log(2.0);
      worst = std::max(worst, gap);
    }
    out.push_back({"unicon", "triplet_relation", opts.trials, worst, 1e-12, worst <= 1e-12});
  }

  // Large logits: stable evaluation stays finite where the literal formula
  // overflows.
  {
    Rng rng = root.substream("stability");
    double non_finite = 0.0;
    for (std::size_t t = 0; t < opts.trials; ++t) {
      const Row row = random_row(rng, opts.width, random_positive_count(rng, opts.width), 600.0);
      const auto e = unicon(row.logits, row.mask);
      if (!std::isfinite(e.value) || !all_finite(e.grad)) non_finite += 1.0;
    }
    Row adversarial{std::vector<double>(opts.width, 600.0), TargetMask(opts.width, 0)};
    adversarial.logits[0] = -600.0;
    adversarial.mask[0] = 1;
    const auto e = unicon(adversarial.logits, adversarial.mask);
    if (!std::isfinite(e.value) || !all_finite(e.grad)) non_finite += 1.0;
    out.push_back({"unicon", "stable_at_600", opts.trials + 1, non_finite, 0.0, non_finite == 0.0});
    const bool naive_overflows = !std::isfinite(naive_unicon(adversarial));
    out.push_back({"unicon", "naive_overflows_at_600", 1, naive_overflows ? 0.0 : 1.0, 0.0,
                   naive_overflows});
  }
  return out;
}

std::string losscheck_table(const std::vector<LossCheckRow>& rows) {
  std::string out = fmt::format("{:<12}{:<28}{:>8}{:>14}{:>12}  {}\n", "loss", "property", "trials",
                                "worst", "tolerance", "result");
  for (const auto& r : rows) {
    out += fmt::format("{:<12}{:<28}{:>8}{:>14.3e}{:>12.1e}  {}\n", r.loss, r.property, r.trials,
                       r.worst, r.tolerance, r.passed ? "PASS" : "FAIL");
  }
  return out;
}

}  // namespace unimoco

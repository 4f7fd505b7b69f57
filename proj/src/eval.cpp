#include "unimoco/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "unimoco/error.hpp"

namespace unimoco {
namespace {

std::size_t class_count(std::span<const int> a, std::span<const int> b) {
  int top = -1;
  for (auto s : {a, b}) {
    for (int y : s) {
      if (y < 0) throw Error("probe labels must be non-negative class indices");
      top = std::max(top, y);
    }
  }
  return static_cast<std::size_t>(top + 1);
}

void check_split(const Matrix& f, std::span<const int> y) {
  if (f.rows() != y.size()) throw Error("feature and label counts differ");
  if (f.rows() == 0) throw Error("empty split");
  if (!all_finite(f.values())) throw Error("non-finite features");
}

// Center and scale every column with statistics from `reference`.
void standardize(const Matrix& reference, Matrix& a, Matrix& b) {
  const std::size_t d = reference.cols();
  const auto n = static_cast<double>(reference.rows());
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < reference.rows(); ++r) mean += reference(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < reference.rows(); ++r) {
      const double dv = reference(r, c) - mean;
      var += dv * dv;
    }
    const double sd = std::sqrt(var / n);
    const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
    for (Matrix* m : {&a, &b}) {
      for (std::size_t r = 0; r < m->rows(); ++r) (*m)(r, c) = ((*m)(r, c) - mean) * scale;
    }
  }
}

}  // namespace

void validate(const ProbeConfig& cfg) {
  if (cfg.epochs == 0) throw Error("probe epochs must be positive");
  if (!(cfg.lr > 0.0)) throw Error("probe lr must be positive");
  if (cfg.batch_size == 0) throw Error("probe batch_size must be positive");
  if (cfg.knn_k == 0) throw Error("knn k must be >= 1");
}

Matrix extract_features(const EncoderParams& params, const Matrix& inputs) {
  return trunk_features(params, inputs);
}

double linear_probe(const Matrix& train_features, std::span<const int> train_labels,
                    const Matrix& test_features, std::span<const int> test_labels,
                    const ProbeConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  check_split(train_features, train_labels);
  check_split(test_features, test_labels);
  if (train_features.cols() != test_features.cols()) throw Error("feature widths differ");
  if (std::set<int>(train_labels.begin(), train_labels.end()).size() < 2) {
    throw Error("linear probe needs at least two classes");
  }
  const std::size_t n_classes = class_count(train_labels, test_labels);
  const std::size_t d = train_features.cols();

  Matrix xtr = train_features;
  Matrix xte = test_features;
  if (cfg.standardize) standardize(train_features, xtr, xte);

  Matrix w(n_classes, d);
  std::vector<double> b(n_classes, 0.0);
  std::vector<double> scores(n_classes);
  Matrix gw(n_classes, d);
  std::vector<double> gb(n_classes);
  const Rng root = Rng(seed).substream("probe");

  auto logits = [&](std::span<const double> x) {
    for (std::size_t c = 0; c < n_classes; ++c) scores[c] = b[c] + dot(w.row(c), x);
  };

  const std::size_t n = xtr.rows();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle = root.substream(epoch);
    const auto order = permutation(n, shuffle);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::fill(gw.values().begin(), gw.values().end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t t = start; t < stop; ++t) {
        const auto x = xtr.row(order[t]);
        logits(x);
        const double lse = log_sum_exp(scores);
        for (std::size_t c = 0; c < n_classes; ++c) {
          const double g =
              std::exp(scores[c] - lse) - (static_cast<int>(c) == train_labels[order[t]] ? 1.0 : 0.0);
          gb[c] += g;
          auto gr = gw.row(c);
          for (std::size_t j = 0; j < d; ++j) gr[j] += g * x[j];
        }
      }
      const double step = cfg.lr / static_cast<double>(stop - start);
      for (std::size_t i = 0; i < w.size(); ++i) w.values()[i] -= step * gw.values()[i];
      for (std::size_t c = 0; c < n_classes; ++c) b[c] -= step * gb[c];
    }
  }

  std::size_t correct = 0;
  for (std::size_t r = 0; r < xte.rows(); ++r) {
    logits(xte.row(r));
    const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
    if (best == test_labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(xte.rows());
}

double knn_probe(const Matrix& train_features, std::span<const int> train_labels,
                 const Matrix& test_features, std::span<const int> test_labels, std::size_t k) {
  check_split(train_features, train_labels);
  check_split(test_features, test_labels);
  if (train_features.cols() != test_features.cols()) throw Error("feature widths differ");
  if (k == 0 || k > train_features.rows()) throw Error("invalid k");
  const std::size_t n_classes = class_count(train_labels, test_labels);

  auto unit_rows = [](const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      auto row = out.row(r);
      const double n = l2_norm(row);
      if (n > 0.0) {
        for (double& v : row) v /= n;
      }
    }
    return out;
  };
  const Matrix tr = unit_rows(train_features);
  const Matrix te = unit_rows(test_features);

  std::vector<double> sims(tr.rows());
  std::vector<std::size_t> idx(tr.rows());
  std::vector<std::size_t> votes(n_classes);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < te.rows(); ++r) {
    for (std::size_t i = 0; i < tr.rows(); ++i) sims[i] = dot(te.row(r), tr.row(i));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        return sims[a] != sims[b] ? sims[a] > sims[b] : a < b;
                      });
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(train_labels[idx[i]])];
    // max_element returns the first maximum, i.e. the smallest class index.
    const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
    if (best == test_labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(te.rows());
}

}  // namespace unimoco

#include <gtest/gtest.h>

#include <cmath>

#include "unimoco/error.hpp"
#include "unimoco/eval.hpp"
#include "unimoco/pipeline.hpp"

namespace unimoco {
namespace {

struct Split {
  Matrix features;
  std::vector<int> labels;
};

Split one_hot(std::size_t n, std::size_t classes) {
  Split s{Matrix(n, classes), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    s.labels[i] = static_cast<int>(i % classes);
    s.features(i, i % classes) = 1.0;
  }
  return s;
}

Split noise(std::size_t n, std::size_t dim, std::size_t classes, Rng& rng) {
  Split s{Matrix(n, dim), std::vector<int>(n)};
  for (double& v : s.features.values()) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) s.labels[i] = static_cast<int>(i % classes);
  return s;
}

// Five 2-D blobs centered at angles 2 pi c / 5 with radius 10 and unit noise.
Split blobs(std::size_t n, Rng& rng) {
  Split s{Matrix(n, 2), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % 5;
    const double a = 2.0 * 3.141592653589793 * static_cast<double>(c) / 5.0;
    s.labels[i] = static_cast<int>(c);
    s.features(i, 0) = 10.0 * std::cos(a) + 0.5 * rng.normal();
    s.features(i, 1) = 10.0 * std::sin(a) + 0.5 * rng.normal();
  }
  return s;
}

TEST(LinearProbe, OneHotFeaturesAreSeparable) {
  const auto train = one_hot(100, 5);
  const auto test = one_hot(50, 5);
  EXPECT_EQ(linear_probe(train.features, train.labels, test.features, test.labels, ProbeConfig{}, 0),
            1.0);
}

TEST(LinearProbe, NoiseIsChance) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const auto train = noise(500, 10, 5, rng);
    const auto test = noise(500, 10, 5, rng);
    total += linear_probe(train.features, train.labels, test.features, test.labels, ProbeConfig{},
                          seed);
  }
  EXPECT_NEAR(total / 5.0, 0.2, 0.05);
}

TEST(LinearProbe, SeparableBlobs) {
  Rng rng(1);
  const auto train = blobs(500, rng);
  const auto test = blobs(200, rng);
  EXPECT_GE(linear_probe(train.features, train.labels, test.features, test.labels, ProbeConfig{}, 0),
            0.99);
}

TEST(LinearProbe, DeterministicAndPermutationInvariant) {
  Rng rng(2);
  const auto train = noise(200, 6, 3, rng);
  const auto test = noise(100, 6, 3, rng);
  // Give the features some signal so the accuracy is not trivially tied.
  Split tr = train, te = test;
  for (std::size_t i = 0; i < tr.features.rows(); ++i) tr.features(i, 0) += 2.0 * tr.labels[i];
  for (std::size_t i = 0; i < te.features.rows(); ++i) te.features(i, 0) += 2.0 * te.labels[i];
  ProbeConfig cfg;
  cfg.epochs = 20;
  const double a = linear_probe(tr.features, tr.labels, te.features, te.labels, cfg, 7);
  EXPECT_EQ(a, linear_probe(tr.features, tr.labels, te.features, te.labels, cfg, 7));

  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  auto permute = [&](const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, perm[c]);
    }
    return out;
  };
  EXPECT_EQ(a, linear_probe(permute(tr.features), tr.labels, permute(te.features), te.labels, cfg, 7));
}

TEST(LinearProbe, Errors) {
  const auto train = one_hot(10, 2);
  std::vector<int> single(10, 0);
  EXPECT_THROW(linear_probe(train.features, single, train.features, train.labels, ProbeConfig{}, 0),
               Error);
  std::vector<int> unlabeled = train.labels;
  unlabeled[0] = -1;
  EXPECT_THROW(
      linear_probe(train.features, unlabeled, train.features, train.labels, ProbeConfig{}, 0), Error);
}

TEST(KnnProbe, SelfMatch) {
  Rng rng(3);
  const auto s = noise(60, 4, 3, rng);
  EXPECT_EQ(knn_probe(s.features, s.labels, s.features, s.labels, 1), 1.0);
}

TEST(KnnProbe, AllNeighborsFallsToSmallestClass) {
  Rng rng(4);
  const auto train = noise(100, 4, 5, rng);
  const auto test = noise(50, 4, 5, rng);
  EXPECT_DOUBLE_EQ(knn_probe(train.features, train.labels, test.features, test.labels, 100), 0.2);
}

TEST(KnnProbe, SeparableBlobs) {
  Rng rng(5);
  const auto train = blobs(500, rng);
  const auto test = blobs(200, rng);
  EXPECT_GE(knn_probe(train.features, train.labels, test.features, test.labels, 5), 0.99);
}

TEST(KnnProbe, InvariantToPositiveRowScaling) {
  Rng rng(6);
  const auto train = noise(80, 5, 4, rng);
  const auto test = noise(40, 5, 4, rng);
  Matrix scaled = test.features;
  for (std::size_t r = 0; r < scaled.rows(); ++r) {
    const double c = rng.uniform(0.1, 10.0);
    for (double& v : scaled.row(r)) v *= c;
  }
  EXPECT_EQ(knn_probe(train.features, train.labels, test.features, test.labels, 7),
            knn_probe(train.features, train.labels, scaled, test.labels, 7));
}

TEST(KnnProbe, InvalidK) {
  const auto s = one_hot(10, 2);
  EXPECT_THROW(knn_probe(s.features, s.labels, s.features, s.labels, 0), Error);
  EXPECT_THROW(knn_probe(s.features, s.labels, s.features, s.labels, 11), Error);
}

TEST(ExtractFeatures, FrozenDeterministicAndShaped) {
  DatasetSpec spec;
  spec.n_train = 100;
  spec.n_test = 50;
  const auto data = generate_dataset(spec);
  Rng rng(0);
  const auto params = init_params(ModelConfig{}.dims(spec.input_dim), rng);
  const auto before = params;
  const Matrix f = extract_features(params, data.train_inputs);
  EXPECT_EQ(f, extract_features(params, data.train_inputs));
  EXPECT_EQ(f.cols(), 32u);
  EXPECT_TRUE(all_finite(f.values()));
  const auto r0 = f.row(0), r1 = f.row(1);
  EXPECT_NE(std::vector<double>(r0.begin(), r0.end()), std::vector<double>(r1.begin(), r1.end()));

  const Matrix t = extract_features(params, data.test_inputs);
  linear_probe(f, data.train_true, t, data.test_labels, ProbeConfig{}, 0);
  knn_probe(f, data.train_true, t, data.test_labels, 5);
  EXPECT_EQ(params, before);
}

}  // namespace
}  // namespace unimoco

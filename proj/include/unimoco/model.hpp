#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "unimoco/numerics.hpp"

namespace unimoco {

/// Layer widths of an encoder: input -> trunk[0] -> ... -> trunk.back()
/// (each followed by ReLU), then a projection head
/// trunk.back() -> proj_hidden (ReLU) -> embed (linear, then L2-normalized).
struct EncoderDims {
  std::size_t input = 0;
  std::vector<std::size_t> trunk;
  std::size_t proj_hidden = 0;
  std::size_t embed = 0;

  bool operator==(const EncoderDims&) const = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
  bool operator==(const DenseLayer&) const = default;
};

/// Encoder parameters in declared order: trunk layers, then the two
/// projection layers. Also used as the container for parameter gradients
/// and optimizer velocity.
struct EncoderParams {
  std::vector<DenseLayer> layers;
  std::size_t trunk_depth = 0;

  EncoderDims dims() const;
  std::size_t parameter_count() const;
  /// Hash of all parameter bits; ties a forward tape to the params it used.
  std::uint64_t fingerprint() const;

  /// Same shapes, all zeros.
  EncoderParams zeros_like() const;
  bool same_shape(const EncoderParams& other) const;
  bool all_finite() const;
  double l2_norm() const;

  bool operator==(const EncoderParams&) const = default;
};

EncoderParams init_params(const EncoderDims& dims, Rng& rng);

/// Everything backward() needs from a forward pass.
struct ForwardTape {
  std::uint64_t params_fingerprint = 0;
  Matrix input;
  std::vector<Matrix> pre_activations;  // one per layer, before ReLU
  std::vector<Matrix> activations;      // one per layer, after ReLU (last: linear)
  std::vector<double> norms;            // per-row norm of the projection output
  Matrix embeddings;
};

struct ForwardResult {
  Matrix embeddings;  // N x embed, unit rows
  ForwardTape tape;
};

ForwardResult forward(const EncoderParams& params, const Matrix& input);

/// Unit-norm embeddings without keeping a tape (used for the key encoder).
Matrix embed(const EncoderParams& params, const Matrix& input);

/// Output of the last trunk layer, before projection and normalization.
Matrix trunk_features(const EncoderParams& params, const Matrix& input);

/// Gradient of sum_i <grad_embeddings_i, embeddings_i> with respect to every
/// parameter, including the normalization Jacobian (I - u u^T) / |v|.
EncoderParams backward(const EncoderParams& params, const ForwardTape& tape,
                       const Matrix& grad_embeddings);

/// p_key <- m * p_key + (1 - m) * p_query, elementwise.
EncoderParams momentum_update(const EncoderParams& key, const EncoderParams& query, double m);

/// Applies `fn(param, other)` elementwise across two same-shaped parameter sets.
template <typename Fn>
void zip_params(EncoderParams& a, const EncoderParams& b, Fn fn) {
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    auto wa = a.layers[l].weight.values();
    auto wb = b.layers[l].weight.values();
    for (std::size_t i = 0; i < wa.size(); ++i) fn(wa[i], wb[i]);
    auto& ba = a.layers[l].bias;
    const auto& bb = b.layers[l].bias;
    for (std::size_t i = 0; i < ba.size(); ++i) fn(ba[i], bb[i]);
  }
}

}  // namespace unimoco

#include "unimoco/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "unimoco/error.hpp"

namespace unimoco {
namespace {

// out = x W^T + b
Matrix affine(const Matrix& x, const DenseLayer& layer) {
  if (x.cols() != layer.in()) throw Error("input width does not match layer");
  Matrix out(x.rows(), layer.out());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const auto xr = x.row(n);
    auto orow = out.row(n);
    for (std::size_t o = 0; o < layer.out(); ++o) {
      orow[o] = layer.bias[o] + dot(layer.weight.row(o), xr);
    }
  }
  return out;
}

Matrix relu(Matrix m) {
  for (double& v : m.values()) v = std::max(v, 0.0);
  return m;
}

DenseLayer make_layer(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
  // He-uniform: Var = 2 / fan_in keeps ReLU activations at unit scale.
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
  return layer;
}

}  // namespace

EncoderDims EncoderParams::dims() const {
  EncoderDims d;
  if (layers.empty()) return d;
  d.input = layers.front().in();
  for (std::size_t l = 0; l < trunk_depth; ++l) d.trunk.push_back(layers[l].out());
  if (layers.size() == trunk_depth + 2) {
    d.proj_hidden = layers[trunk_depth].out();
    d.embed = layers[trunk_depth + 1].out();
  }
  return d;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

std::uint64_t EncoderParams::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::span<const double> v) {
    h = fnv1a({reinterpret_cast<const unsigned char*>(v.data()), v.size_bytes()}, h);
  };
  for (const auto& l : layers) {
    feed(l.weight.values());
    feed(l.bias);
  }
  return h;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z;
  z.trunk_depth = trunk_depth;
  for (const auto& l : layers) {
    z.layers.push_back({Matrix(l.out(), l.in()), std::vector<double>(l.out(), 0.0)});
  }
  return z;
}

bool EncoderParams::same_shape(const EncoderParams& other) const {
  if (trunk_depth != other.trunk_depth || layers.size() != other.layers.size()) return false;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].in() != other.layers[l].in() || layers[l].out() != other.layers[l].out()) {
      return false;
    }
  }
  return true;
}

bool EncoderParams::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) {
    return unimoco::all_finite(l.weight.values()) && unimoco::all_finite(l.bias);
  });
}

double EncoderParams::l2_norm() const {
  double acc = 0.0;
  for (const auto& l : layers) {
    acc += dot(l.weight.values(), l.weight.values());
    acc += dot(l.bias, l.bias);
  }
  return std::sqrt(acc);
}

EncoderParams init_params(const EncoderDims& dims, Rng& rng) {
  if (dims.input == 0 || dims.trunk.empty() || dims.proj_hidden == 0 || dims.embed == 0) {
    throw Error("invalid encoder dims");
  }
  if (std::ranges::find(dims.trunk, std::size_t{0}) != dims.trunk.end()) {
    throw Error("invalid encoder dims");
  }
  EncoderParams p;
  p.trunk_depth = dims.trunk.size();
  std::size_t in = dims.input;
  for (auto width : dims.trunk) {
    p.layers.push_back(make_layer(in, width, rng));
    in = width;
  }
  p.layers.push_back(make_layer(in, dims.proj_hidden, rng));
  p.layers.push_back(make_layer(dims.proj_hidden, dims.embed, rng));
  return p;
}

ForwardResult forward(const EncoderParams& params, const Matrix& input) {
  if (params.layers.empty()) throw Error("empty encoder");
  if (input.cols() != params.layers.front().in()) throw Error("input width does not match layer");
  ForwardTape tape;
  tape.params_fingerprint = params.fingerprint();
  tape.input = input;
  const Matrix* x = &tape.input;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    tape.pre_activations.push_back(affine(*x, params.layers[l]));
    tape.activations.push_back(l == last ? tape.pre_activations.back()
                                         : relu(tape.pre_activations.back()));
    x = &tape.activations.back();
  }
  tape.norms.resize(x->rows());
  for (std::size_t n = 0; n < x->rows(); ++n) tape.norms[n] = l2_norm(x->row(n));
  tape.embeddings = l2_normalize_rows(*x);
  ForwardResult result;
  result.embeddings = tape.embeddings;
  result.tape = std::move(tape);
  return result;
}

Matrix embed(const EncoderParams& params, const Matrix& input) {
  if (params.layers.empty()) throw Error("empty encoder");
  Matrix x = input;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    x = affine(x, params.layers[l]);
    if (l != last) x = relu(std::move(x));
  }
  return l2_normalize_rows(x);
}

Matrix trunk_features(const EncoderParams& params, const Matrix& input) {
  if (params.trunk_depth == 0) throw Error("empty encoder");
  Matrix x = input;
  for (std::size_t l = 0; l < params.trunk_depth; ++l) x = relu(affine(x, params.layers[l]));
  return x;
}

EncoderParams backward(const EncoderParams& params, const ForwardTape& tape,
                       const Matrix& grad_embeddings) {
  if (tape.params_fingerprint != params.fingerprint() ||
      tape.pre_activations.size() != params.layers.size()) {
    throw Error("stale tape");
  }
  if (grad_embeddings.rows() != tape.embeddings.rows() ||
      grad_embeddings.cols() != tape.embeddings.cols()) {
    throw Error("gradient shape does not match embeddings");
  }

  // Through normalization: dv = (g - u (u.g)) / |v|.
  Matrix delta(grad_embeddings.rows(), grad_embeddings.cols());
  for (std::size_t n = 0; n < delta.rows(); ++n) {
    const auto u = tape.embeddings.row(n);
    const auto g = grad_embeddings.row(n);
    const double ug = dot(u, g);
    auto d = delta.row(n);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] = (g[c] - u[c] * ug) / tape.norms[n];
  }

  EncoderParams grads = params.zeros_like();
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    // delta is d/d(pre-activation) of layer l here.
    if (l + 1 != params.layers.size()) {
      const auto& pre = tape.pre_activations[l];
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (pre.values()[i] <= 0.0) delta.values()[i] = 0.0;
      }
    }
    const Matrix& x = l == 0 ? tape.input : tape.activations[l - 1];
    auto& g = grads.layers[l];
    for (std::size_t n = 0; n < delta.rows(); ++n) {
      const auto dr = delta.row(n);
      const auto xr = x.row(n);
      for (std::size_t o = 0; o < layer.out(); ++o) {
        if (dr[o] == 0.0) continue;
        g.bias[o] += dr[o];
        auto wrow = g.weight.row(o);
        for (std::size_t i = 0; i < xr.size(); ++i) wrow[i] += dr[o] * xr[i];
      }
    }
    if (l == 0) break;
    Matrix prev(delta.rows(), layer.in());
    for (std::size_t n = 0; n < delta.rows(); ++n) {
      const auto dr = delta.row(n);
      auto pr = prev.row(n);
      for (std::size_t o = 0; o < layer.out(); ++o) {
        if (dr[o] == 0.0) continue;
        const auto wrow = layer.weight.row(o);
        for (std::size_t i = 0; i < pr.size(); ++i) pr[i] += dr[o] * wrow[i];
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

EncoderParams momentum_update(const EncoderParams& key, const EncoderParams& query, double m) {
  if (!key.same_shape(query)) throw Error("encoder shape mismatch");
  if (!(m >= 0.0 && m <= 1.0)) throw Error("momentum must lie in [0, 1]");
  EncoderParams out = key;
  zip_params(out, query, [m](double& k, double q) { k = m * k + (1.0 - m) * q; });
  return out;
}

}  // namespace unimoco

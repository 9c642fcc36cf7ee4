#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "matd3/errors.hpp"
#include "matd3/rng.hpp"

namespace matd3::nn {

enum class OutputActivation { kIdentity, kSigmoidScaled };

/// Fully connected ReLU network. Plain value type; Scalar is the storage
/// and compute precision of every parameter and activation.
template <class Scalar>
struct DenseNet {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<int> layer_sizes;  // input, hidden..., output
  std::vector<Matrix> weights;   // weights[k]: layer_sizes[k+1] x layer_sizes[k]
  std::vector<Vector> biases;    // biases[k]: layer_sizes[k+1]
  OutputActivation output_activation = OutputActivation::kIdentity;
  Scalar sigmoid_lo = Scalar(-1);
  Scalar sigmoid_hi = Scalar(1);

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
};

/// Gradients (or any parameter-shaped aggregate) of a DenseNet.
template <class Scalar>
struct NetGrads {
  std::vector<typename DenseNet<Scalar>::Matrix> weights;
  std::vector<typename DenseNet<Scalar>::Vector> biases;
};

/// Pre- and post-activations of a forward pass, one column per sample.
template <class Scalar>
struct ForwardCache {
  std::vector<typename DenseNet<Scalar>::Matrix> pre;   // pre[k]: z of layer k
  std::vector<typename DenseNet<Scalar>::Matrix> post;  // post[0] = input, post[k+1] = a of layer k
  Eigen::Index batch() const { return post.empty() ? 0 : post.front().cols(); }
};

template <class Scalar>
struct AdamState {
  std::vector<typename DenseNet<Scalar>::Matrix> m_w, v_w;
  std::vector<typename DenseNet<Scalar>::Vector> m_b, v_b;
  std::uint64_t t = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

using DenseNetd = DenseNet<double>;
using NetGradsd = NetGrads<double>;
using ForwardCached = ForwardCache<double>;
using AdamStated = AdamState<double>;

namespace detail {

template <class Scalar>
Scalar stable_sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// Sigmoid pinned to the open interval: deep saturation would otherwise
/// round to exactly 0 or 1 in floating point and the scaled output would
/// touch its bounds.
template <class Scalar>
Scalar open_sigmoid(Scalar z) {
  constexpr Scalar kFloor = Scalar(1e-12);
  return std::clamp(stable_sigmoid(z), kFloor, Scalar(1) - kFloor);
}

template <class Scalar>
void check_topology(const DenseNet<Scalar>& a, const DenseNet<Scalar>& b) {
  if (a.layer_sizes != b.layer_sizes)
    throw Error("network topology mismatch between source and target");
  if (a.output_activation != b.output_activation)
    throw Error("network output activation mismatch between source and target");
}

}  // namespace detail

/// Network with weights and biases drawn from U[-1/sqrt(fan_in), +1/sqrt(fan_in)].
template <class Scalar = double>
DenseNet<Scalar> make_net(std::vector<int> layer_sizes, SeededRng& rng,
                          OutputActivation out_act = OutputActivation::kIdentity,
                          Scalar lo = Scalar(-1), Scalar hi = Scalar(1)) {
  if (layer_sizes.size() < 2) throw Error("make_net: need at least input and output layer");
  for (const int s : layer_sizes)
    if (s <= 0) throw Error("make_net: layer sizes must be positive");
  if (out_act == OutputActivation::kSigmoidScaled && !(lo < hi))
    throw Error("make_net: SigmoidScaled requires lo < hi");

  DenseNet<Scalar> net;
  net.layer_sizes = std::move(layer_sizes);
  net.output_activation = out_act;
  net.sigmoid_lo = lo;
  net.sigmoid_hi = hi;
  for (std::size_t k = 0; k + 1 < net.layer_sizes.size(); ++k) {
    const int in = net.layer_sizes[k];
    const int out = net.layer_sizes[k + 1];
    const Scalar bound = Scalar(1) / std::sqrt(Scalar(in));
    typename DenseNet<Scalar>::Matrix w(out, in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        w(i, j) = Scalar(rng.uniform(-double(bound), double(bound)));
    typename DenseNet<Scalar>::Vector b(out);
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b(i) = Scalar(rng.uniform(-double(bound), double(bound)));
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

/// Zero-filled gradients shaped like the net's parameters.
template <class Scalar>
NetGrads<Scalar> zero_grads(const DenseNet<Scalar>& net) {
  NetGrads<Scalar> g;
  for (int k = 0; k < net.num_layers(); ++k) {
    g.weights.emplace_back(
        DenseNet<Scalar>::Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
    g.biases.emplace_back(DenseNet<Scalar>::Vector::Zero(net.biases[k].size()));
  }
  return g;
}

template <class Scalar>
AdamState<Scalar> make_adam_state(const DenseNet<Scalar>& net, Scalar beta1 = Scalar(0.9),
                                  Scalar beta2 = Scalar(0.999), Scalar eps = Scalar(1e-8)) {
  AdamState<Scalar> s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (int k = 0; k < net.num_layers(); ++k) {
    s.m_w.emplace_back(DenseNet<Scalar>::Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
    s.v_w.emplace_back(DenseNet<Scalar>::Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
    s.m_b.emplace_back(DenseNet<Scalar>::Vector::Zero(net.biases[k].size()));
    s.v_b.emplace_back(DenseNet<Scalar>::Vector::Zero(net.biases[k].size()));
  }
  return s;
}

/// Batched forward pass; one column per sample. Returns activations of the
/// output layer and the cache needed by backward().
template <class Scalar>
std::pair<typename DenseNet<Scalar>::Matrix, ForwardCache<Scalar>> forward_batch(
    const DenseNet<Scalar>& net, const typename DenseNet<Scalar>::Matrix& input) {
  using Matrix = typename DenseNet<Scalar>::Matrix;
  if (input.rows() != net.input_size())
    throw DimensionError("forward: input size mismatch", net.input_size(), input.rows());

  ForwardCache<Scalar> cache;
  cache.post.push_back(input);
  Matrix a = input;
  const int L = net.num_layers();
  for (int k = 0; k < L; ++k) {
    Matrix z = (net.weights[k] * a).colwise() + net.biases[k];
    if (k + 1 < L) {
      a = z.cwiseMax(Scalar(0));  // ReLU; subgradient at 0 is 0
    } else {
      switch (net.output_activation) {
        case OutputActivation::kIdentity:
          a = z;
          break;
        case OutputActivation::kSigmoidScaled: {
          a = z.unaryExpr([&](Scalar v) {
            return net.sigmoid_lo + (net.sigmoid_hi - net.sigmoid_lo) * detail::open_sigmoid(v);
          });
          break;
        }
      }
    }
    cache.pre.push_back(z);
    cache.post.push_back(a);
  }
  if (!a.allFinite()) throw NonFiniteError("forward: non-finite activations in output layer");
  return {a, std::move(cache)};
}

template <class Scalar>
std::pair<typename DenseNet<Scalar>::Vector, ForwardCache<Scalar>> forward(
    const DenseNet<Scalar>& net, const typename DenseNet<Scalar>::Vector& input) {
  auto [out, cache] = forward_batch(net, typename DenseNet<Scalar>::Matrix(input));
  return {typename DenseNet<Scalar>::Vector(out.col(0)), std::move(cache)};
}

/// Forward pass without keeping a cache.
template <class Scalar>
typename DenseNet<Scalar>::Matrix forward_value_batch(const DenseNet<Scalar>& net,
                                                      const typename DenseNet<Scalar>::Matrix& x) {
  using Matrix = typename DenseNet<Scalar>::Matrix;
  if (x.rows() != net.input_size())
    throw DimensionError("forward: input size mismatch", net.input_size(), x.rows());
  const int L = net.num_layers();
  Matrix a = (net.weights[0] * x).colwise() + net.biases[0];
  for (int k = 0; k < L; ++k) {
    if (k > 0) a = (net.weights[k] * a).colwise() + net.biases[k];
    if (k + 1 < L) {
      a = a.cwiseMax(Scalar(0));
    } else if (net.output_activation == OutputActivation::kSigmoidScaled) {
      a = a.unaryExpr([&](Scalar v) {
        return net.sigmoid_lo + (net.sigmoid_hi - net.sigmoid_lo) * detail::open_sigmoid(v);
      });
    }
  }
  if (!a.allFinite()) throw NonFiniteError("forward: non-finite activations in output layer");
  return a;
}

template <class Scalar>
typename DenseNet<Scalar>::Vector forward_value(const DenseNet<Scalar>& net,
                                                const typename DenseNet<Scalar>::Vector& x) {
  return forward(net, x).first;
}

/// Batched reverse pass. upstream has one column per sample (same batch as
/// the cache); parameter gradients are summed over the batch, the returned
/// input gradient keeps one column per sample. The cache must come from a
/// forward_batch() call on this topology; shape mismatches throw.
template <class Scalar>
std::pair<NetGrads<Scalar>, typename DenseNet<Scalar>::Matrix> backward_batch(
    const DenseNet<Scalar>& net, const ForwardCache<Scalar>& cache,
    const typename DenseNet<Scalar>::Matrix& upstream) {
  using Matrix = typename DenseNet<Scalar>::Matrix;
  const int L = net.num_layers();
  if (static_cast<int>(cache.pre.size()) != L || static_cast<int>(cache.post.size()) != L + 1)
    throw Error("backward: cache layer count does not match network");
  for (int k = 0; k < L; ++k)
    if (cache.pre[k].rows() != net.layer_sizes[k + 1] ||
        cache.post[k].rows() != net.layer_sizes[k])
      throw DimensionError("backward: cache shape mismatch at layer " + std::to_string(k),
                           net.layer_sizes[k + 1], cache.pre[k].rows());
  if (upstream.rows() != net.output_size())
    throw DimensionError("backward: upstream gradient size mismatch", net.output_size(),
                         upstream.rows());
  if (upstream.cols() != cache.batch())
    throw DimensionError("backward: upstream batch mismatch", cache.batch(), upstream.cols());

  NetGrads<Scalar> grads = zero_grads(net);
  Matrix delta;
  switch (net.output_activation) {
    case OutputActivation::kIdentity:
      delta = upstream;
      break;
    case OutputActivation::kSigmoidScaled: {
      const Scalar range = net.sigmoid_hi - net.sigmoid_lo;
      Matrix dact = cache.pre.back().unaryExpr([&](Scalar v) {
        const Scalar s = detail::stable_sigmoid(v);
        return range * s * (Scalar(1) - s);
      });
      delta = upstream.cwiseProduct(dact);
      break;
    }
  }
  for (int k = L - 1; k >= 0; --k) {
    grads.weights[k] = delta * cache.post[k].transpose();
    grads.biases[k] = delta.rowwise().sum();
    Matrix prev = net.weights[k].transpose() * delta;
    if (k > 0) {
      delta = prev.cwiseProduct(
          (cache.pre[k - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    } else {
      return {std::move(grads), std::move(prev)};
    }
  }
  throw Error("backward: unreachable");
}

template <class Scalar>
std::pair<NetGrads<Scalar>, typename DenseNet<Scalar>::Vector> backward(
    const DenseNet<Scalar>& net, const ForwardCache<Scalar>& cache,
    const typename DenseNet<Scalar>::Vector& upstream) {
  auto [grads, in_grad] = backward_batch(net, cache, typename DenseNet<Scalar>::Matrix(upstream));
  return {std::move(grads), typename DenseNet<Scalar>::Vector(in_grad.col(0))};
}

/// Reverse pass that only propagates to the input, skipping parameter
/// gradients (policy updates need dQ/da but not the critic's dQ/dtheta).
template <class Scalar>
typename DenseNet<Scalar>::Matrix backward_input_batch(
    const DenseNet<Scalar>& net, const ForwardCache<Scalar>& cache,
    const typename DenseNet<Scalar>::Matrix& upstream) {
  using Matrix = typename DenseNet<Scalar>::Matrix;
  const int L = net.num_layers();
  if (static_cast<int>(cache.pre.size()) != L)
    throw Error("backward: cache layer count does not match network");
  if (upstream.rows() != net.output_size())
    throw DimensionError("backward: upstream gradient size mismatch", net.output_size(),
                         upstream.rows());
  Matrix delta;
  switch (net.output_activation) {
    case OutputActivation::kIdentity:
      delta = upstream;
      break;
    case OutputActivation::kSigmoidScaled: {
      const Scalar range = net.sigmoid_hi - net.sigmoid_lo;
      delta = upstream.cwiseProduct(cache.pre.back().unaryExpr([&](Scalar v) {
        const Scalar s = detail::stable_sigmoid(v);
        return range * s * (Scalar(1) - s);
      }));
      break;
    }
  }
  for (int k = L - 1; k >= 1; --k)
    delta = (net.weights[k].transpose() * delta)
                .cwiseProduct(
                    (cache.pre[k - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
  return net.weights[0].transpose() * delta;
}

/// One bias-corrected Adam step in place. Rejects non-finite gradients
/// instead of clamping them.
template <class Scalar>
void adam_step(DenseNet<Scalar>& net, const NetGrads<Scalar>& grads, AdamState<Scalar>& state,
               Scalar lr) {
  if (!(lr > Scalar(0))) throw Error("adam_step: learning rate must be positive");
  const int L = net.num_layers();
  if (static_cast<int>(grads.weights.size()) != L || static_cast<int>(state.m_w.size()) != L)
    throw Error("adam_step: gradient/state layer count mismatch");
  for (int k = 0; k < L; ++k) {
    if (grads.weights[k].rows() != net.weights[k].rows() ||
        grads.weights[k].cols() != net.weights[k].cols() ||
        grads.biases[k].size() != net.biases[k].size())
      throw DimensionError("adam_step: gradient shape mismatch at layer " + std::to_string(k),
                           net.weights[k].size(), grads.weights[k].size());
    if (!grads.weights[k].allFinite() || !grads.biases[k].allFinite())
      throw NonFiniteError("adam_step: non-finite gradient at layer " + std::to_string(k));
  }

  state.t += 1;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, Scalar(state.t));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, Scalar(state.t));
  for (int k = 0; k < L; ++k) {
    state.m_w[k] = state.beta1 * state.m_w[k] + (Scalar(1) - state.beta1) * grads.weights[k];
    state.v_w[k] = state.beta2 * state.v_w[k] +
                   (Scalar(1) - state.beta2) * grads.weights[k].cwiseProduct(grads.weights[k]);
    net.weights[k].array() -=
        lr * (state.m_w[k].array() / c1) / ((state.v_w[k].array() / c2).sqrt() + state.eps);

    state.m_b[k] = state.beta1 * state.m_b[k] + (Scalar(1) - state.beta1) * grads.biases[k];
    state.v_b[k] = state.beta2 * state.v_b[k] +
                   (Scalar(1) - state.beta2) * grads.biases[k].cwiseProduct(grads.biases[k]);
    net.biases[k].array() -=
        lr * (state.m_b[k].array() / c1) / ((state.v_b[k].array() / c2).sqrt() + state.eps);
  }
}

/// Polyak update: target <- tau * source + (1 - tau) * target.
template <class Scalar>
void soft_update(DenseNet<Scalar>& target, const DenseNet<Scalar>& source, Scalar tau) {
  if (!(tau > Scalar(0)) || tau > Scalar(1))
    throw Error("soft_update: tau must lie in (0, 1]");
  detail::check_topology(target, source);
  for (int k = 0; k < target.num_layers(); ++k) {
    target.weights[k] = tau * source.weights[k] + (Scalar(1) - tau) * target.weights[k];
    target.biases[k] = tau * source.biases[k] + (Scalar(1) - tau) * target.biases[k];
  }
}

template <class Scalar>
std::size_t param_count(const DenseNet<Scalar>& net) {
  std::size_t n = 0;
  for (int k = 0; k < net.num_layers(); ++k)
    n += static_cast<std::size_t>(net.weights[k].size() + net.biases[k].size());
  return n;
}

/// Flat parameter order: per layer, weight matrix row-major, then bias.
/// This is the declaration order used by the checkpoint format too.
template <class Scalar, class Fn>
void for_each_param(DenseNet<Scalar>& net, Fn&& fn) {
  for (int k = 0; k < net.num_layers(); ++k) {
    auto& w = net.weights[k];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) fn(w(i, j));
    auto& b = net.biases[k];
    for (Eigen::Index i = 0; i < b.size(); ++i) fn(b(i));
  }
}

template <class Scalar, class Fn>
void for_each_param(const DenseNet<Scalar>& net, Fn&& fn) {
  for (int k = 0; k < net.num_layers(); ++k) {
    const auto& w = net.weights[k];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) fn(w(i, j));
    const auto& b = net.biases[k];
    for (Eigen::Index i = 0; i < b.size(); ++i) fn(b(i));
  }
}

template <class Scalar, class Fn>
void for_each_grad(const NetGrads<Scalar>& g, Fn&& fn) {
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    const auto& w = g.weights[k];
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) fn(w(i, j));
    const auto& b = g.biases[k];
    for (Eigen::Index i = 0; i < b.size(); ++i) fn(b(i));
  }
}

template <class Scalar>
Scalar grad_norm(const NetGrads<Scalar>& g) {
  Scalar ss = Scalar(0);
  for_each_grad(g, [&](Scalar v) { ss += v * v; });
  return std::sqrt(ss);
}

}  // namespace matd3::nn

#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "matd3/errors.hpp"
#include "matd3/rng.hpp"

namespace matd3::nn {

/// Per-component clip(N(0, sigma), -c, c).
template <class Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> clipped_gaussian(int dim, Scalar sigma, Scalar c,
                                                          SeededRng& rng) {
  if (sigma < Scalar(0)) throw Error("clipped_gaussian: sigma must be >= 0");
  if (c < Scalar(0)) throw Error("clipped_gaussian: clip bound must be >= 0");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> eps(dim);
  if (sigma == Scalar(0) || c == Scalar(0)) {
    // sigma=0 and c=0 short-circuit without consuming the stream.
    eps.setZero();
    return eps;
  }
  for (int i = 0; i < dim; ++i) {
    const Scalar z = Scalar(rng.normal()) * sigma;
    eps(i) = std::clamp(z, -c, c);
  }
  return eps;
}

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& logits) {
  const Scalar m = logits.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - m).exp();
  return e / e.sum();
}

/// Deterministic relaxation softmax(logits / temperature); the zero-noise
/// limit of gumbel_softmax used for target actions and policy updates.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> relaxed_onehot(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& logits, Scalar temperature) {
  if (!(temperature > Scalar(0))) throw Error("relaxed_onehot: temperature must be > 0");
  return softmax<Scalar>(logits / temperature);
}

/// Gumbel-Softmax sample: softmax((logits + g) / temperature) with
/// g_i = -log(-log(u_i)), u_i uniform clamped away from {0, 1}.
template <class Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gumbel_softmax(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& logits, Scalar temperature, SeededRng& rng) {
  if (!(temperature > Scalar(0))) throw Error("gumbel_softmax: temperature must be > 0");
  if (!logits.allFinite()) throw NonFiniteError("gumbel_softmax: non-finite logits");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pert(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double u = std::clamp(rng.uniform(), 1e-12, 1.0 - 1e-12);
    pert(i) = logits(i) + Scalar(-std::log(-std::log(u)));
  }
  return softmax<Scalar>(pert / temperature);
}

/// Backward of y = softmax(z / temperature) w.r.t. the pre-softmax logits z
/// (Gumbel noise is additive, so the Jacobian is the same for the sampled and
/// the deterministic relaxation): J^T u = (y .* u - y * (y . u)) / T.
template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> relaxed_onehot_backward(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& y,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& upstream, Scalar temperature) {
  const Scalar dot = y.dot(upstream);
  return (y.cwiseProduct(upstream) - y * dot) / temperature;
}

}  // namespace matd3::nn

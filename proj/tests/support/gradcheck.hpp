#pragma once

// Central finite-difference checks against analytic gradients, over the
// flattened trainable tensors of an encoder.

#include <cmath>
#include <functional>
#include <vector>

#include "corelw/encoders.hpp"
#include "corelw/rng.hpp"

namespace gradcheck {

inline std::vector<double> flatten(corelw::EncoderParams& params) {
  std::vector<double> out;
  for (const auto& view : corelw::tensor_views(params)) {
    out.insert(out.end(), view.data, view.data + view.size);
  }
  return out;
}

inline void unflatten(corelw::EncoderParams& params, const std::vector<double>& flat) {
  std::size_t at = 0;
  for (auto& view : corelw::tensor_views(params)) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at),
              flat.begin() + static_cast<std::ptrdiff_t>(at + view.size), view.data);
    at += view.size;
  }
}

// Relative error between the analytic directional derivative and a central
// finite difference along a random unit direction.
inline double directional_error(corelw::EncoderParams& params,
                                const std::function<double()>& loss,
                                const std::function<void(corelw::EncoderParams&)>& grad_fn,
                                corelw::Rng& rng, double step = 1e-5) {
  corelw::EncoderParams grads = corelw::zeros_like(params);
  grad_fn(grads);

  const std::vector<double> theta = flatten(params);
  std::vector<double> direction(theta.size());
  double norm = 0.0;
  for (auto& d : direction) {
    d = rng.uniform(-1.0, 1.0);
    norm += d * d;
  }
  norm = std::sqrt(norm);
  for (auto& d : direction) d /= norm;

  double analytic = 0.0;
  {
    const std::vector<double> g = flatten(grads);
    for (std::size_t i = 0; i < g.size(); ++i) analytic += g[i] * direction[i];
  }

  std::vector<double> perturbed = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) perturbed[i] = theta[i] + step * direction[i];
  unflatten(params, perturbed);
  const double f_plus = loss();
  for (std::size_t i = 0; i < theta.size(); ++i) perturbed[i] = theta[i] - step * direction[i];
  unflatten(params, perturbed);
  const double f_minus = loss();
  unflatten(params, theta);

  const double numeric = (f_plus - f_minus) / (2.0 * step);
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-10});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace gradcheck

#ifndef SA_ADAPTOR_HPP
#define SA_ADAPTOR_HPP

#include <vector>

#include "sa/ops.hpp"
#include "sa/shape_calculus.hpp"

namespace sa {

// Two-branch shape adaptor. Both branches arrive evaluated at their natural
// dims; the adaptive resizing layer G (bilinear) maps each onto the single
// target dim, and the mixture is weighted by (1-a) and a where
// a = sigmoid(raw_alpha), optionally penalized by rho. weight_scale is 1 for
// convolutional cells and 2 for residual cells.
//
// A saturated mixture (sigmoid exactly 0 or 1 in this precision, no penalty)
// drops the zero-weight branch from the graph: the adaptor then computes the
// very arithmetic of the plain resizing layer it degenerates to. No gradient
// path is lost, the sigmoid slope a*(1-a) is zero at saturation.
template <typename S>
Var<S> shape_adaptor_forward(const Var<S>& branch_lo, const Var<S>& branch_hi,
                             const Var<S>& raw_alpha, const SearchSpace& space,
                             double rho, double weight_scale, int target_h,
                             int target_w) {
  if (target_h < 1 || target_w < 1) {
    throw DimensionError(strcat("shape adaptor: target dims must be >= 1, got ",
                                target_h, "x", target_w));
  }
  if (raw_alpha.numel() != 1) {
    throw DimensionError("shape adaptor: raw alpha must be a scalar parameter");
  }
  const S a_val = detail::stable_sigmoid(raw_alpha.value()[0]);
  if (rho == 1.0 && a_val == S(0)) {
    Var<S> g_lo = bilinear_resize(branch_lo, target_h, target_w);
    return weight_scale == 1.0 ? g_lo
                               : affine_elem(g_lo, static_cast<S>(weight_scale), S(0));
  }
  if (rho == 1.0 && a_val == S(1)) {
    Var<S> g_hi = bilinear_resize(branch_hi, target_h, target_w);
    return weight_scale == 1.0 ? g_hi
                               : affine_elem(g_hi, static_cast<S>(weight_scale), S(0));
  }

  Var<S> g_lo = bilinear_resize(branch_lo, target_h, target_w);
  Var<S> g_hi = bilinear_resize(branch_hi, target_h, target_w);
  Var<S> alpha = sigmoid(raw_alpha);
  if (rho != 1.0) {
    const double shift = space.r_min / (space.r_max - space.r_min) * (rho - 1.0);
    alpha = affine_elem(alpha, static_cast<S>(rho), static_cast<S>(shift));
  }
  Var<S> w_hi = weight_scale == 1.0
                    ? alpha
                    : affine_elem(alpha, static_cast<S>(weight_scale), S(0));
  Var<S> w_lo = affine_elem(alpha, static_cast<S>(-weight_scale),
                            static_cast<S>(weight_scale));
  return add(scale_by(g_lo, w_lo), scale_by(g_hi, w_hi));
}

// K-branch generalization: output = sum_i softmax(raw)_i * G(branch_i). The
// caller derives the target dim from s_generalized over the same weights.
template <typename S>
Var<S> general_adaptor_forward(const std::vector<Var<S>>& branches,
                               const Var<S>& raw_weights, int target_h, int target_w) {
  if (branches.size() < 2) {
    throw DimensionError(strcat("general adaptor: needs K >= 2 branches, got ",
                                branches.size()));
  }
  if (raw_weights.numel() != static_cast<std::int64_t>(branches.size())) {
    throw DimensionError(strcat("general adaptor: ", raw_weights.numel(),
                                " raw weights for ", branches.size(), " branches"));
  }
  if (target_h < 1 || target_w < 1) {
    throw DimensionError(strcat("general adaptor: target dims must be >= 1, got ",
                                target_h, "x", target_w));
  }
  Var<S> weights = softmax_all(raw_weights);
  std::vector<Var<S>> resized;
  resized.reserve(branches.size());
  for (const auto& b : branches) resized.push_back(bilinear_resize(b, target_h, target_w));
  return weighted_sum(weights, resized);
}

// Softmax of raw branch weights, for planning the target dim outside the graph.
inline std::vector<double> softmax_weights(std::span<const double> raw) {
  std::vector<double> out(raw.size());
  double mx = raw[0];
  for (double v : raw) mx = std::max(mx, v);
  double denom = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::exp(raw[i] - mx);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

}  // namespace sa

#endif  // SA_ADAPTOR_HPP

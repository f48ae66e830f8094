#ifndef SA_OPTIM_HPP
#define SA_OPTIM_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "sa/autodiff.hpp"

namespace sa {

enum class ParamKind { kWeights, kShapeParams };

// One optimizer bucket: either the network weights w or the shape
// parameters, each with its own learning rate, momentum and weight decay.
template <typename S>
class ParamGroup {
 public:
  ParamGroup(ParamKind kind, std::vector<Var<S>> params, double learning_rate,
             double momentum, double weight_decay)
      : kind_(kind),
        params_(std::move(params)),
        learning_rate_(learning_rate),
        momentum_(momentum),
        weight_decay_(weight_decay) {
    if (learning_rate_ < 0) throw ConfigError(strcat("learning rate must be >= 0, got ", learning_rate_));
    if (momentum_ < 0 || momentum_ >= 1) {
      throw ConfigError(strcat("momentum must be in [0,1), got ", momentum_));
    }
    velocity_.reserve(params_.size());
    for (const auto& p : params_) velocity_.emplace_back(p.shape(), S(0));
  }

  ParamKind kind() const { return kind_; }
  double base_learning_rate() const { return learning_rate_; }
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }
  const std::vector<Var<S>>& params() const { return params_; }
  std::vector<Var<S>>& params() { return params_; }
  std::vector<Tensor<S>>& velocity() { return velocity_; }
  const std::vector<Tensor<S>>& velocity() const { return velocity_; }

 private:
  ParamKind kind_;
  std::vector<Var<S>> params_;
  double learning_rate_;
  double momentum_;
  double weight_decay_;
  std::vector<Tensor<S>> velocity_;
};

// v <- momentum*v + (grad + wd*param); param <- param - lr*v. Gradients are
// cleared afterwards; a parameter with no accumulated gradient is skipped.
template <typename S>
void sgd_momentum_step(ParamGroup<S>& group, double lr) {
  const S mom = static_cast<S>(group.momentum());
  const S wd = static_cast<S>(group.weight_decay());
  const S step = static_cast<S>(lr);
  for (std::size_t i = 0; i < group.params().size(); ++i) {
    Var<S>& p = group.params()[i];
    if (!p.has_grad()) continue;
    Tensor<S>& v = group.velocity()[i];
    Tensor<S>& value = p.mutable_value();
    const Tensor<S>& g = p.grad();
    const std::int64_t m = value.numel();
    for (std::int64_t j = 0; j < m; ++j) {
      v[j] = mom * v[j] + (g[j] + wd * value[j]);
      value[j] -= step * v[j];
    }
    p.zero_grad();
  }
}

inline double cosine_annealing_lr(double base_lr, std::int64_t step, std::int64_t total_steps) {
  if (total_steps == 0) throw ConfigError("cosine_annealing_lr: total_steps must be > 0");
  if (step < 0 || step > total_steps) {
    throw ConfigError(strcat("cosine_annealing_lr: step ", step, " outside [0,", total_steps, "]"));
  }
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * double(step) / double(total_steps)));
}

}  // namespace sa

#endif  // SA_OPTIM_HPP

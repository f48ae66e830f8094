#include "sa/shape_calculus.hpp"

#include <cmath>

namespace sa {

namespace {

// Guards the floor against products that land one ulp under an integer.
constexpr double kFloorSlack = 1e-9;

int floor_dim(double x) {
  return static_cast<int>(std::floor(x + kFloorSlack));
}

int clamp_dim(int d, bool& clamped) {
  if (d < 1) {
    clamped = true;
    return 1;
  }
  return d;
}

void validate_factors(std::span<const double> factors) {
  for (double f : factors) {
    if (!(f > 0.0)) throw ConfigError(strcat("reshaping factor must be > 0, got ", f));
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double s_linear(double alpha, const SearchSpace& space) {
  return (space.r_max - space.r_min) * alpha + space.r_min;
}

double s_generalized(std::span<const double> weights, std::span<const double> factors,
                     double p) {
  if (weights.size() != factors.size()) {
    throw ConfigError(strcat("s_generalized: ", weights.size(), " weights for ",
                             factors.size(), " factors"));
  }
  if (weights.size() < 2) throw ConfigError("s_generalized: needs at least two branches");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ConfigError(strcat("branch weight must be > 0, got ", w));
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError(strcat("branch weights must sum to 1, got ", sum));
  }
  validate_factors(factors);
  bool distinct = false;
  for (std::size_t i = 1; i < factors.size(); ++i) {
    if (factors[i] != factors[0]) {
      distinct = true;
      break;
    }
  }
  if (!distinct) throw ConfigError("s_generalized: factors must not all be equal");

  if (p == 0.0) {
    double acc = 1.0;
    for (std::size_t i = 0; i < factors.size(); ++i) acc *= std::pow(factors[i], weights[i]);
    return acc;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < factors.size(); ++i) acc += weights[i] * std::pow(factors[i], p);
  return std::pow(acc, 1.0 / p);
}

double AlphaParam::penalized_alpha() const {
  return apply_penalty(alpha(), rho, space);
}

double AlphaParam::factor() const {
  return s_linear(penalized_alpha(), space);
}

ShapePlan dims_local(int input_dim, std::span<const double> factors) {
  if (input_dim < 1) throw ConfigError(strcat("input dimension must be >= 1, got ", input_dim));
  validate_factors(factors);
  ShapePlan plan;
  plan.input_dim = input_dim;
  plan.factors.assign(factors.begin(), factors.end());
  plan.dims.reserve(factors.size());
  int dim = input_dim;
  for (double f : factors) {
    dim = clamp_dim(floor_dim(double(dim) * f), plan.clamped);
    plan.dims.push_back(dim);
  }
  plan.final_dim = dim;
  return plan;
}

ShapePlan dims_global(int input_dim, std::span<const double> factors) {
  if (input_dim < 1) throw ConfigError(strcat("input dimension must be >= 1, got ", input_dim));
  validate_factors(factors);
  ShapePlan plan;
  plan.input_dim = input_dim;
  plan.factors.assign(factors.begin(), factors.end());
  plan.dims.reserve(factors.size());
  double product = 1.0;
  int dim = input_dim;
  for (double f : factors) {
    product *= f;
    dim = clamp_dim(static_cast<int>(round_half_away(double(input_dim) * product)),
                    plan.clamped);
    plan.dims.push_back(dim);
  }
  plan.final_dim = factors.empty() ? input_dim : dim;
  return plan;
}

int module_count(int input_dim, int d_last, double r_min) {
  if (d_last < 1 || input_dim < d_last) {
    throw ConfigError(strcat("module_count requires input_dim >= d_last >= 1, got ",
                             input_dim, " and ", d_last));
  }
  if (!(r_min > 0.0 && r_min < 1.0)) {
    throw ConfigError(strcat("module_count requires 0 < r_min < 1, got ", r_min));
  }
  const double ratio = std::log(double(input_dim) / double(d_last)) / std::log(1.0 / r_min);
  return static_cast<int>(std::floor(ratio + kFloorSlack));
}

double init_alpha_raw(int input_dim, int d_out, int d_last, int n,
                      const SearchSpace& space) {
  space.validate();
  if (n < 1) throw ConfigError(strcat("init_alpha_raw requires n >= 1, got ", n));
  if (input_dim < 1 || d_out < 1 || d_last < 1) {
    throw ConfigError("init_alpha_raw requires positive dimensions");
  }
  if (d_last > d_out) {
    // No solution inside the search space; start from the narrowest shape.
    return std::log(kAlphaEpsilon);
  }
  const double q = std::pow(double(d_out) / double(input_dim), 1.0 / double(n));
  if (q >= space.r_max) {
    throw ConfigError(strcat("init_alpha_raw: required per-module factor ", q,
                             " is not below r_max=", space.r_max,
                             "; the target dimension is unreachable in this search space"));
  }
  const double z = -(q - space.r_min) / (q - space.r_max) + kAlphaEpsilon;
  if (!(z > 0.0)) {
    throw ConfigError(strcat("init_alpha_raw: required per-module factor ", q,
                             " falls below r_min=", space.r_min));
  }
  const double raw = std::log(z);
  const double achieved = double(input_dim) * std::pow(s_linear(sigmoid(raw), space), n);
  if (std::abs(achieved - double(d_out)) > 0.001 * double(d_out)) {
    throw Error(strcat("init_alpha_raw: solved shape ", achieved, " misses target ", d_out));
  }
  return raw;
}

double penalty_rho(int d_limit, int d_cout, int n) {
  if (d_limit < 1 || d_cout < 1) {
    throw ConfigError(strcat("penalty_rho requires dimensions >= 1, got limit=", d_limit,
                             " cout=", d_cout));
  }
  if (d_cout <= d_limit) return 1.0;
  if (n < 1) {
    throw ConfigError("penalty_rho: no penalized modules but final dimension exceeds the limit");
  }
  return std::pow(double(d_limit) / double(d_cout), 1.0 / double(n));
}

double apply_penalty(double alpha, double rho, const SearchSpace& space) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError(strcat("rho must be in (0,1], got ", rho));
  return alpha * rho + space.r_min / (space.r_max - space.r_min) * (rho - 1.0);
}

std::int64_t round_half_away(double x) {
  return static_cast<std::int64_t>(x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

std::int64_t estimate_macs(std::span<const ConvLayerDesc> convs, int head_features,
                           int head_classes) {
  std::int64_t total = 0;
  for (const auto& c : convs) {
    total += std::int64_t(c.kh) * c.kw * c.c_in * c.c_out * c.out_h * c.out_w;
  }
  total += std::int64_t(head_features) * head_classes;
  return total;
}

}  // namespace sa

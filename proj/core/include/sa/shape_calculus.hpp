#ifndef SA_SHAPE_CALCULUS_HPP
#define SA_SHAPE_CALCULUS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sa/common.hpp"

namespace sa {

// Raw-to-sigmoid offset used by the initialization solver and the identity
// initialization of compression adaptors.
inline constexpr double kAlphaEpsilon = 1e-4;

// Reshaping-factor search space (r_min, r_max) shared by every adaptor.
struct SearchSpace {
  double r_min = 0.5;
  double r_max = 1.0;

  void validate() const {
    if (!(0.0 < r_min && r_min < r_max)) {
      throw ConfigError(strcat("search space requires 0 < r_min < r_max, got (", r_min,
                               ",", r_max, ")"));
    }
  }
  bool operator==(const SearchSpace&) const = default;
};

enum class DimRule { kLocal, kGlobal };

double sigmoid(double x);

// s(alpha) = (r_max - r_min)*alpha + r_min; strictly increasing, maps 0 to
// r_min and 1 to r_max. alpha is normally in [0,1] but penalized values may
// leave the interval and are mapped by the same line.
double s_linear(double alpha, const SearchSpace& space);

// Weighted generalized mean over K branch factors: (sum_i a_i r_i^p)^(1/p)
// for p != 0, and the weighted geometric mean prod r_i^a_i for p == 0.
double s_generalized(std::span<const double> weights, std::span<const double> factors,
                     double p);

// Scalar shape parameter: raw value before the sigmoid, its search space,
// and the currently installed penalty multiplier.
struct AlphaParam {
  double raw = 0.0;
  SearchSpace space;
  double rho = 1.0;

  double alpha() const { return sigmoid(raw); }
  double penalized_alpha() const;
  // Effective reshaping factor s(alpha_rho) = rho * s(alpha).
  double factor() const;

  void set_rho(double r) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError(strcat("rho must be in (0,1], got ", r));
    rho = r;
  }
};

// Propagated per-module spatial dimensions.
struct ShapePlan {
  int input_dim = 0;
  std::vector<double> factors;  // s(alpha) per module, in layer order
  std::vector<int> dims;        // dimension after each module
  int final_dim = 0;
  bool clamped = false;  // some propagated dim fell below 1 and was raised
};

// Local rule: each module floors its own output, D(k) = floor(D(k-1)*r(k)).
ShapePlan dims_local(int input_dim, std::span<const double> factors);

// Global rule: D(k) = round(D_in * prod_{i<=k} r(i)), half away from zero.
ShapePlan dims_global(int input_dim, std::span<const double> factors);

// Heuristic module count N = floor(log(D_in/D_last) / log(1/r_min)).
int module_count(int input_dim, int d_last, double r_min);

// Solves D_in * s(sigmoid(raw))^n = D_out for the raw shape parameter. When
// d_last > d_out the equation has no solution inside the search space and
// the smallest representable shape ln(eps) is returned.
double init_alpha_raw(int input_dim, int d_out, int d_last, int n,
                      const SearchSpace& space);

// Penalty multiplier (d_limit/d_cout)^(1/n) when d_cout exceeds d_limit,
// otherwise exactly 1.
double penalty_rho(int d_limit, int d_cout, int n);

// alpha_rho = alpha*rho + r_min/(r_max-r_min)*(rho-1). Satisfies
// s(alpha_rho) == rho*s(alpha) identically; the result may leave (0,1) and
// is deliberately not clamped.
double apply_penalty(double alpha, double rho, const SearchSpace& space);

std::int64_t round_half_away(double x);

// One convolution for multiply-add accounting.
struct ConvLayerDesc {
  int kh = 0;
  int kw = 0;
  int c_in = 0;
  int c_out = 0;
  int out_h = 0;
  int out_w = 0;
};

// Multiply-adds of the convolutions plus the classifier head; pooling,
// normalization, activations and interpolation count zero.
std::int64_t estimate_macs(std::span<const ConvLayerDesc> convs, int head_features,
                           int head_classes);

}  // namespace sa

#endif  // SA_SHAPE_CALCULUS_HPP

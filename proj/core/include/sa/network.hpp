#ifndef SA_NETWORK_HPP
#define SA_NETWORK_HPP

#include <optional>
#include <string>
#include <vector>

#include "sa/adaptor.hpp"
#include "sa/ops.hpp"
#include "sa/shape_calculus.hpp"

namespace sa {

enum class CellKind { kConvCell, kResidualCell, kClassifierHead };
enum class NetworkMode { kShapeAdaptor, kHumanFixed, kAutoSC, kRandomFixed };

struct CellSpec {
  CellKind kind = CellKind::kConvCell;
  int channels_out = 0;
  bool has_adaptor = false;    // learnable shape adaptor attached after the body
  bool fixed_resize = false;   // fixed resizing layer of the human design
};

struct NetworkSpec {
  std::vector<CellSpec> cells;
  int input_channels = 3;
  int input_dim = 32;
  SearchSpace search_space;
  DimRule dim_rule = DimRule::kLocal;
  NetworkMode mode = NetworkMode::kShapeAdaptor;
  double width_multiplier = 1.0;
  std::optional<int> adaptor_count;   // overrides the module-count heuristic
  std::vector<double> fixed_factors;  // per fixed resizer, random_fixed mode only

  int classes() const;
  // Throws ConfigError listing every violation.
  void validate(int d_last) const;
};

// Uniform placement of n adaptors over the eligible (non-head) cells:
// adaptor i sits at cell floor((i+1)*eligible/(n+1)).
std::vector<int> uniform_adaptor_positions(int eligible_cells, int n);

// Attaches identity-initialized global-type compression adaptors to every
// non-resizing cell of a human-designed spec. The human resizing layers stay;
// the result can only shrink the planned dims, never grow them.
NetworkSpec autosc_wrap(const NetworkSpec& human_spec,
                        std::vector<std::string>* warnings = nullptr);

// The 13-conv VGG-16 body with its 32x32 human shape (four halvings).
NetworkSpec vgg16_cifar_spec(int classes = 100, NetworkMode mode = NetworkMode::kHumanFixed);

// Small conv stack for desk-scale runs: one conv cell per channel entry.
NetworkSpec conv_stack_spec(std::vector<int> channels, int classes, int input_dim,
                            NetworkMode mode, DimRule rule = DimRule::kLocal);

struct NetworkPlan {
  int input_dim = 0;
  std::vector<int> cell_dims;          // spatial dim after each non-head cell
  std::vector<double> adaptor_factors; // s(alpha_rho) per adaptor, layer order
  std::vector<int> adaptor_dims;       // planned output dim per adaptor
  int final_dim = 0;
  bool clamped = false;
  std::vector<std::string> warnings;
};

// Dimension propagation for a spec given the effective reshaping factor of
// each adaptor in layer order. Fixed resizers floor; adaptors follow the
// spec's dim rule, with global accumulation restarting after a fixed resizer.
NetworkPlan plan_network(const NetworkSpec& spec, std::span<const double> adaptor_factors);

// Trainable network instantiated from a spec. Training-path arithmetic is
// float; shape planning stays in double.
class Model {
 public:
  using F = float;

  Model(NetworkSpec spec, int d_last, int d_out, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  int adaptor_count() const { return static_cast<int>(alpha_raws_.size()); }

  // Shape propagation under the current (possibly penalized) factors.
  NetworkPlan plan_shape() const;
  int current_final_dim() const { return plan_shape().final_dim; }

  Var<F> forward(const Tensor<F>& images, bool training);

  // Penalty multiplier installed on every adaptor for the current iteration.
  void set_rho(double rho);
  double rho() const { return rho_; }

  std::vector<Var<F>> weight_params() const;
  std::vector<Var<F>> alpha_params() const { return alpha_raws_; }
  std::vector<double> alpha_raw_values() const;
  void set_alpha_raw_values(const std::vector<double>& raws);
  AlphaParam alpha_param(int i) const;

  // Stable name -> tensor map covering parameters and running statistics.
  std::vector<std::pair<std::string, Tensor<F>*>> named_tensors();

 private:
  struct BuiltCell {
    CellKind kind;
    int c_in = 0;
    int c_out = 0;
    bool has_adaptor = false;
    bool fixed_resize = false;
    double fixed_factor = 0.5;
    bool pool_resize = true;  // fixed resize realized by max pooling vs bilinear
    int alpha_index = -1;

    Var<F> conv_w;
    Var<F> bn_gamma, bn_beta;
    RunningStats<F> bn_stats;
    // residual cells only
    Var<F> conv2_w;
    Var<F> bn2_gamma, bn2_beta;
    RunningStats<F> bn2_stats;
    Var<F> shortcut_w, shortcut_b;
    bool has_shortcut_conv = false;
  };

  Var<F> cell_body(BuiltCell& cell, const Var<F>& x, bool training);

  NetworkSpec spec_;
  std::vector<BuiltCell> cells_;
  Var<F> head_w_, head_b_;
  std::vector<Var<F>> alpha_raws_;
  double rho_ = 1.0;
};

// Conv descriptors for the spec under a given plan (body convs run at each
// cell's input dim).
std::vector<ConvLayerDesc> conv_layer_descs(const NetworkSpec& spec,
                                            const NetworkPlan& plan);
std::int64_t estimate_macs(const NetworkSpec& spec, const NetworkPlan& plan);

// JSON round trip for specs (schema documented in the README).
std::string network_spec_to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const std::string& text);

std::string to_string(CellKind k);
std::string to_string(NetworkMode m);
std::string to_string(DimRule r);

}  // namespace sa

#endif  // SA_NETWORK_HPP

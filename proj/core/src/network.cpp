#include "sa/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace sa {

namespace {

using json = nlohmann::json;

int effective_channels(int channels, double width_multiplier) {
  if (width_multiplier == 1.0) return channels;
  return std::max<int>(1, static_cast<int>(round_half_away(channels * width_multiplier)));
}

// He-uniform fill for conv / affine weights.
template <typename S>
void he_uniform_fill(Tensor<S>& t, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  const std::int64_t m = t.numel();
  for (std::int64_t i = 0; i < m; ++i) t[i] = static_cast<S>(dist(rng));
}

int count_fixed_resizers(const NetworkSpec& spec) {
  int n = 0;
  for (const auto& c : spec.cells) n += c.fixed_resize ? 1 : 0;
  return n;
}

int count_adaptors(const NetworkSpec& spec) {
  int n = 0;
  for (const auto& c : spec.cells) n += c.has_adaptor ? 1 : 0;
  return n;
}

}  // namespace

int NetworkSpec::classes() const {
  for (const auto& c : cells) {
    if (c.kind == CellKind::kClassifierHead) return c.channels_out;
  }
  throw ConfigError("network spec has no classifier head");
}

void NetworkSpec::validate(int d_last) const {
  std::vector<std::string> violations;
  if (cells.empty()) violations.push_back("cell list is empty");
  int heads = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellSpec& c = cells[i];
    if (c.channels_out < 1) {
      violations.push_back(strcat("cell ", i, ": channels_out must be >= 1, got ",
                                  c.channels_out));
    }
    if (c.kind == CellKind::kClassifierHead) {
      ++heads;
      if (i + 1 != cells.size()) violations.push_back(strcat("cell ", i, ": classifier head must be last"));
      if (c.has_adaptor || c.fixed_resize) {
        violations.push_back(strcat("cell ", i, ": classifier head cannot carry a resizing layer"));
      }
    }
    if (c.has_adaptor && c.fixed_resize) {
      violations.push_back(strcat("cell ", i, ": a cell cannot have both an adaptor and a fixed resizer"));
    }
  }
  if (heads != 1) violations.push_back(strcat("expected exactly one classifier head, found ", heads));
  if (input_channels < 1) violations.push_back("input_channels must be >= 1");
  if (input_dim < 1) violations.push_back("input_dim must be >= 1");
  if (!(width_multiplier > 0.0)) violations.push_back("width_multiplier must be > 0");
  try {
    search_space.validate();
  } catch (const Error& e) {
    violations.push_back(e.what());
  }

  const int n_adapt = count_adaptors(*this);
  const int n_fixed = count_fixed_resizers(*this);
  switch (mode) {
    case NetworkMode::kShapeAdaptor: {
      if (n_fixed > 0) violations.push_back("shape_adaptor mode does not allow fixed resizers");
      if (n_adapt > 0 && violations.empty()) {
        const int expected = adaptor_count
                                 ? *adaptor_count
                                 : module_count(input_dim, d_last, search_space.r_min);
        if (n_adapt != expected) {
          violations.push_back(strcat("shape_adaptor mode expects ", expected,
                                      " adaptors (module-count heuristic), spec places ",
                                      n_adapt));
        }
      }
      break;
    }
    case NetworkMode::kHumanFixed:
    case NetworkMode::kRandomFixed: {
      if (n_adapt > 0) violations.push_back(strcat(to_string(mode), " mode does not allow adaptors"));
      if (mode == NetworkMode::kRandomFixed) {
        if (static_cast<int>(fixed_factors.size()) != n_fixed) {
          violations.push_back(strcat("random_fixed mode needs one factor per fixed resizer: ",
                                      fixed_factors.size(), " factors for ", n_fixed,
                                      " resizers"));
        }
        for (double f : fixed_factors) {
          if (!(f > 0.0)) violations.push_back(strcat("fixed factor must be > 0, got ", f));
        }
      }
      break;
    }
    case NetworkMode::kAutoSC:
      if (n_adapt == 0) violations.push_back("autosc mode requires at least one adaptor");
      break;
  }

  if (!violations.empty()) {
    std::string msg = "invalid network spec:";
    for (const auto& v : violations) msg += strcat("\n  - ", v);
    throw ConfigError(msg);
  }
}

std::vector<int> uniform_adaptor_positions(int eligible_cells, int n) {
  if (n < 0 || eligible_cells < 1) {
    throw ConfigError(strcat("uniform placement needs eligible cells >= 1 and n >= 0, got ",
                             eligible_cells, " and ", n));
  }
  std::vector<int> positions;
  positions.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    positions.push_back(static_cast<int>((std::int64_t(i) + 1) * eligible_cells / (n + 1)));
  }
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (positions[i] == positions[i - 1]) {
      throw ConfigError(strcat("cannot place ", n, " adaptors uniformly over ",
                               eligible_cells, " cells without collisions"));
    }
  }
  return positions;
}

NetworkSpec autosc_wrap(const NetworkSpec& human_spec, std::vector<std::string>* warnings) {
  if (human_spec.mode != NetworkMode::kHumanFixed) {
    throw ConfigError(strcat("autosc_wrap expects a human_fixed spec, got ",
                             to_string(human_spec.mode)));
  }
  for (std::size_t i = 0; i < human_spec.cells.size(); ++i) {
    if (human_spec.cells[i].has_adaptor) {
      throw ConfigError(strcat("autosc_wrap: spec already contains an adaptor at cell ", i));
    }
  }
  NetworkSpec out = human_spec;
  int added = 0;
  for (auto& c : out.cells) {
    if (c.kind != CellKind::kClassifierHead && !c.fixed_resize) {
      c.has_adaptor = true;
      ++added;
    }
  }
  if (added == 0) {
    if (warnings) warnings->push_back("autosc_wrap: no non-resizing cells; spec unchanged");
    return human_spec;
  }
  out.mode = NetworkMode::kAutoSC;
  out.dim_rule = DimRule::kGlobal;
  return out;
}

NetworkSpec vgg16_cifar_spec(int classes, NetworkMode mode) {
  const std::vector<int> channels = {64,  64,  128, 128, 256, 256, 256,
                                     512, 512, 512, 512, 512, 512};
  const std::set<int> pool_after = {1, 3, 6, 9};  // four halvings: 32 -> 2
  NetworkSpec spec;
  spec.input_channels = 3;
  spec.input_dim = 32;
  spec.mode = mode;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    CellSpec c;
    c.kind = CellKind::kConvCell;
    c.channels_out = channels[i];
    c.fixed_resize = mode != NetworkMode::kShapeAdaptor && pool_after.count(static_cast<int>(i)) > 0;
    spec.cells.push_back(c);
  }
  CellSpec head;
  head.kind = CellKind::kClassifierHead;
  head.channels_out = classes;
  spec.cells.push_back(head);
  return spec;
}

NetworkSpec conv_stack_spec(std::vector<int> channels, int classes, int input_dim,
                            NetworkMode mode, DimRule rule) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.mode = mode;
  spec.dim_rule = rule;
  for (int ch : channels) {
    CellSpec c;
    c.kind = CellKind::kConvCell;
    c.channels_out = ch;
    spec.cells.push_back(c);
  }
  CellSpec head;
  head.kind = CellKind::kClassifierHead;
  head.channels_out = classes;
  spec.cells.push_back(head);
  return spec;
}

NetworkPlan plan_network(const NetworkSpec& spec, std::span<const double> adaptor_factors) {
  NetworkPlan plan;
  plan.input_dim = spec.input_dim;
  int dim = spec.input_dim;
  int global_base = spec.input_dim;
  double global_product = 1.0;
  std::size_t ai = 0;
  std::size_t fi = 0;
  for (std::size_t i = 0; i < spec.cells.size(); ++i) {
    const CellSpec& c = spec.cells[i];
    if (c.kind == CellKind::kClassifierHead) break;
    if (c.fixed_resize) {
      const double f = spec.mode == NetworkMode::kRandomFixed ? spec.fixed_factors[fi++] : 0.5;
      dim = static_cast<int>(std::floor(double(dim) * f + 1e-9));
      if (dim < 1) {
        dim = 1;
        plan.clamped = true;
        plan.warnings.push_back(strcat("dimension clamped to 1 at cell ", i));
      }
      global_base = dim;
      global_product = 1.0;
    } else if (c.has_adaptor) {
      if (ai >= adaptor_factors.size()) {
        throw ConfigError(strcat("plan_network: spec has more adaptors than the ",
                                 adaptor_factors.size(), " factors given"));
      }
      const double f = adaptor_factors[ai];
      if (!(f > 0.0)) throw ConfigError(strcat("adaptor factor must be > 0, got ", f));
      int next;
      if (spec.dim_rule == DimRule::kLocal) {
        next = static_cast<int>(std::floor(double(dim) * f + 1e-9));
      } else {
        global_product *= f;
        next = static_cast<int>(round_half_away(double(global_base) * global_product));
      }
      if (next < 1) {
        next = 1;
        plan.clamped = true;
        plan.warnings.push_back(strcat("dimension clamped to 1 at cell ", i));
      }
      dim = next;
      plan.adaptor_factors.push_back(f);
      plan.adaptor_dims.push_back(dim);
      ++ai;
    }
    plan.cell_dims.push_back(dim);
  }
  if (ai != adaptor_factors.size()) {
    throw ConfigError(strcat("plan_network: ", adaptor_factors.size(), " factors for ", ai,
                             " adaptors in the spec"));
  }
  plan.final_dim = dim;
  return plan;
}

// ---------------------------------------------------------------------------
// Model

Model::Model(NetworkSpec spec, int d_last, int d_out, std::uint64_t seed)
    : spec_(std::move(spec)) {
  spec_.validate(d_last);

  // Place adaptors uniformly when the spec leaves them implicit.
  if (spec_.mode == NetworkMode::kShapeAdaptor && count_adaptors(spec_) == 0) {
    const int eligible = static_cast<int>(spec_.cells.size()) - 1;
    const int n = spec_.adaptor_count
                      ? *spec_.adaptor_count
                      : module_count(spec_.input_dim, d_last, spec_.search_space.r_min);
    for (int pos : uniform_adaptor_positions(eligible, n)) {
      spec_.cells[static_cast<std::size_t>(pos)].has_adaptor = true;
    }
  }

  Rng rng(mix_seed(seed, 0));
  int c_in = spec_.input_channels;
  int alpha_count = 0;
  std::size_t fi = 0;
  for (std::size_t i = 0; i + 1 < spec_.cells.size(); ++i) {
    const CellSpec& cs = spec_.cells[i];
    BuiltCell cell;
    cell.kind = cs.kind;
    cell.c_in = c_in;
    cell.c_out = effective_channels(cs.channels_out, spec_.width_multiplier);
    cell.has_adaptor = cs.has_adaptor;
    cell.fixed_resize = cs.fixed_resize;
    if (cs.fixed_resize) {
      if (spec_.mode == NetworkMode::kRandomFixed) {
        cell.fixed_factor = spec_.fixed_factors[fi++];
        cell.pool_resize = false;
      } else {
        cell.fixed_factor = 0.5;
        cell.pool_resize = true;
      }
    }
    if (cs.has_adaptor) cell.alpha_index = alpha_count++;

    Tensor<F> w({cell.c_out, cell.c_in, 3, 3});
    he_uniform_fill(w, cell.c_in * 9, rng);
    cell.conv_w = make_param(std::move(w));
    cell.bn_gamma = make_param(Tensor<F>({1, cell.c_out, 1, 1}, 1.0f));
    cell.bn_beta = make_param(Tensor<F>({1, cell.c_out, 1, 1}, 0.0f));
    cell.bn_stats = RunningStats<F>::make(cell.c_out);

    if (cs.kind == CellKind::kResidualCell) {
      Tensor<F> w2({cell.c_out, cell.c_out, 3, 3});
      he_uniform_fill(w2, cell.c_out * 9, rng);
      cell.conv2_w = make_param(std::move(w2));
      cell.bn2_gamma = make_param(Tensor<F>({1, cell.c_out, 1, 1}, 1.0f));
      cell.bn2_beta = make_param(Tensor<F>({1, cell.c_out, 1, 1}, 0.0f));
      cell.bn2_stats = RunningStats<F>::make(cell.c_out);
      cell.has_shortcut_conv = cs.has_adaptor || cell.c_in != cell.c_out;
      if (cell.has_shortcut_conv) {
        Tensor<F> ws({cell.c_out, cell.c_in, 1, 1});
        he_uniform_fill(ws, cell.c_in, rng);
        cell.shortcut_w = make_param(std::move(ws));
        cell.shortcut_b = make_param(Tensor<F>({cell.c_out, 1, 1, 1}, 0.0f));
      }
    }
    cells_.push_back(std::move(cell));
    c_in = cells_.back().c_out;
  }

  const int classes = spec_.cells.back().channels_out;
  Tensor<F> hw({classes, c_in, 1, 1});
  he_uniform_fill(hw, c_in, rng);
  head_w_ = make_param(std::move(hw));
  head_b_ = make_param(Tensor<F>({classes, 1, 1, 1}, 0.0f));

  if (alpha_count > 0) {
    double raw;
    if (spec_.mode == NetworkMode::kAutoSC) {
      // Identity initialization: s(sigmoid(-ln eps)) is fractionally below 1,
      // so global-type rounding reproduces the human dims exactly.
      raw = -std::log(kAlphaEpsilon);
    } else {
      raw = init_alpha_raw(spec_.input_dim, d_out, d_last, alpha_count, spec_.search_space);
    }
    for (int k = 0; k < alpha_count; ++k) {
      alpha_raws_.push_back(make_param(Tensor<F>::scalar(static_cast<F>(raw))));
    }
  }
}

AlphaParam Model::alpha_param(int i) const {
  AlphaParam p;
  p.raw = static_cast<double>(alpha_raws_[static_cast<std::size_t>(i)].value()[0]);
  p.space = spec_.search_space;
  p.rho = rho_;
  return p;
}

void Model::set_rho(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError(strcat("rho must be in (0,1], got ", rho));
  rho_ = rho;
}

NetworkPlan Model::plan_shape() const {
  std::vector<double> factors;
  factors.reserve(alpha_raws_.size());
  for (int i = 0; i < adaptor_count(); ++i) factors.push_back(alpha_param(i).factor());
  NetworkPlan plan = plan_network(spec_, factors);
  // Penalized alphas are deliberately not clamped; flag the ones that left (0,1).
  for (int i = 0; i < adaptor_count(); ++i) {
    const double pa = alpha_param(i).penalized_alpha();
    if (!(pa > 0.0 && pa < 1.0)) {
      plan.warnings.push_back(strcat("penalized alpha ", pa, " left (0,1) at adaptor ", i));
    }
  }
  return plan;
}

Var<Model::F> Model::cell_body(BuiltCell& cell, const Var<F>& x, bool training) {
  Var<F> h = conv2d(x, cell.conv_w, 1, 1);
  h = batchnorm2d(h, cell.bn_gamma, cell.bn_beta, &cell.bn_stats, training);
  h = relu(h);
  if (cell.kind == CellKind::kResidualCell) {
    h = conv2d(h, cell.conv2_w, 1, 1);
    h = batchnorm2d(h, cell.bn2_gamma, cell.bn2_beta, &cell.bn2_stats, training);
  }
  return h;
}

Var<Model::F> Model::forward(const Tensor<F>& images, bool training) {
  if (images.shape().c != spec_.input_channels) {
    throw DimensionError(strcat("forward: input has ", images.shape().c,
                                " channels, spec expects ", spec_.input_channels));
  }
  const NetworkPlan plan = plan_shape();
  Var<F> x = make_const(images);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    BuiltCell& cell = cells_[i];
    Var<F> body = cell_body(cell, x, training);
    Var<F> shortcut;
    if (cell.kind == CellKind::kResidualCell) {
      shortcut = cell.has_shortcut_conv
                     ? conv2d(x, cell.shortcut_w, cell.shortcut_b, 1, 0)
                     : x;
    }
    if (cell.has_adaptor) {
      const int target = plan.adaptor_dims[static_cast<std::size_t>(cell.alpha_index)];
      const Var<F>& raw = alpha_raws_[static_cast<std::size_t>(cell.alpha_index)];
      if (cell.kind == CellKind::kResidualCell) {
        x = shape_adaptor_forward(shortcut, body, raw, spec_.search_space, rho_, 2.0,
                                  target, target);
      } else {
        const int window = std::min({2, body.shape().h, body.shape().w});
        Var<F> pooled = pool2d(body, PoolMode::kMax, window, 2);
        x = shape_adaptor_forward(pooled, body, raw, spec_.search_space, rho_, 1.0,
                                  target, target);
      }
    } else {
      Var<F> out = cell.kind == CellKind::kResidualCell ? add(body, shortcut) : body;
      if (cell.fixed_resize) {
        const int target = plan.cell_dims[i];
        if (cell.pool_resize) {
          const int window = std::min({2, out.shape().h, out.shape().w});
          out = pool2d(out, PoolMode::kMax, window, 2);
        } else {
          out = bilinear_resize(out, target, target);
        }
      }
      x = out;
    }
  }
  Var<F> pooled = global_avg_pool(x);
  return affine(pooled, head_w_, head_b_);
}

std::vector<Var<Model::F>> Model::weight_params() const {
  std::vector<Var<F>> out;
  for (const auto& cell : cells_) {
    out.push_back(cell.conv_w);
    out.push_back(cell.bn_gamma);
    out.push_back(cell.bn_beta);
    if (cell.kind == CellKind::kResidualCell) {
      out.push_back(cell.conv2_w);
      out.push_back(cell.bn2_gamma);
      out.push_back(cell.bn2_beta);
      if (cell.has_shortcut_conv) {
        out.push_back(cell.shortcut_w);
        out.push_back(cell.shortcut_b);
      }
    }
  }
  out.push_back(head_w_);
  out.push_back(head_b_);
  return out;
}

std::vector<double> Model::alpha_raw_values() const {
  std::vector<double> out;
  out.reserve(alpha_raws_.size());
  for (const auto& a : alpha_raws_) out.push_back(static_cast<double>(a.value()[0]));
  return out;
}

void Model::set_alpha_raw_values(const std::vector<double>& raws) {
  if (raws.size() != alpha_raws_.size()) {
    throw ConfigError(strcat("expected ", alpha_raws_.size(), " alpha values, got ",
                             raws.size()));
  }
  for (std::size_t i = 0; i < raws.size(); ++i) {
    alpha_raws_[i].mutable_value()[0] = static_cast<F>(raws[i]);
  }
}

std::vector<std::pair<std::string, Tensor<Model::F>*>> Model::named_tensors() {
  std::vector<std::pair<std::string, Tensor<F>*>> out;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    BuiltCell& c = cells_[i];
    const std::string p = strcat("cell", i, ".");
    out.emplace_back(p + "conv_w", &c.conv_w.mutable_value());
    out.emplace_back(p + "bn_gamma", &c.bn_gamma.mutable_value());
    out.emplace_back(p + "bn_beta", &c.bn_beta.mutable_value());
    out.emplace_back(p + "bn_mean", &c.bn_stats.mean);
    out.emplace_back(p + "bn_var", &c.bn_stats.var);
    if (c.kind == CellKind::kResidualCell) {
      out.emplace_back(p + "conv2_w", &c.conv2_w.mutable_value());
      out.emplace_back(p + "bn2_gamma", &c.bn2_gamma.mutable_value());
      out.emplace_back(p + "bn2_beta", &c.bn2_beta.mutable_value());
      out.emplace_back(p + "bn2_mean", &c.bn2_stats.mean);
      out.emplace_back(p + "bn2_var", &c.bn2_stats.var);
      if (c.has_shortcut_conv) {
        out.emplace_back(p + "shortcut_w", &c.shortcut_w.mutable_value());
        out.emplace_back(p + "shortcut_b", &c.shortcut_b.mutable_value());
      }
    }
  }
  out.emplace_back("head.w", &head_w_.mutable_value());
  out.emplace_back("head.b", &head_b_.mutable_value());
  for (std::size_t k = 0; k < alpha_raws_.size(); ++k) {
    out.emplace_back(strcat("alpha", k, ".raw"), &alpha_raws_[k].mutable_value());
  }
  return out;
}

// ---------------------------------------------------------------------------
// MACs accounting

std::vector<ConvLayerDesc> conv_layer_descs(const NetworkSpec& spec, const NetworkPlan& plan) {
  if (plan.cell_dims.size() + 1 != spec.cells.size()) {
    throw ConfigError(strcat("plan has ", plan.cell_dims.size(), " cell dims for ",
                             spec.cells.size() - 1, " body cells"));
  }
  std::vector<ConvLayerDesc> descs;
  int c_in = spec.input_channels;
  for (std::size_t i = 0; i + 1 < spec.cells.size(); ++i) {
    const CellSpec& cs = spec.cells[i];
    const int c_out = effective_channels(cs.channels_out, spec.width_multiplier);
    const int din = i == 0 ? spec.input_dim : plan.cell_dims[i - 1];
    descs.push_back({3, 3, c_in, c_out, din, din});
    if (cs.kind == CellKind::kResidualCell) {
      descs.push_back({3, 3, c_out, c_out, din, din});
      if (cs.has_adaptor || c_in != c_out) descs.push_back({1, 1, c_in, c_out, din, din});
    }
    c_in = c_out;
  }
  return descs;
}

std::int64_t estimate_macs(const NetworkSpec& spec, const NetworkPlan& plan) {
  const auto descs = conv_layer_descs(spec, plan);
  int c_last = spec.input_channels;
  for (std::size_t i = 0; i + 1 < spec.cells.size(); ++i) {
    c_last = effective_channels(spec.cells[i].channels_out, spec.width_multiplier);
  }
  return estimate_macs(descs, c_last, spec.cells.back().channels_out);
}

// ---------------------------------------------------------------------------
// JSON round trip

std::string to_string(CellKind k) {
  switch (k) {
    case CellKind::kConvCell: return "conv";
    case CellKind::kResidualCell: return "residual";
    case CellKind::kClassifierHead: return "head";
  }
  return "?";
}

std::string to_string(NetworkMode m) {
  switch (m) {
    case NetworkMode::kShapeAdaptor: return "shape_adaptor";
    case NetworkMode::kHumanFixed: return "human_fixed";
    case NetworkMode::kAutoSC: return "autosc";
    case NetworkMode::kRandomFixed: return "random_fixed";
  }
  return "?";
}

std::string to_string(DimRule r) {
  return r == DimRule::kLocal ? "local" : "global";
}

namespace {

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "conv") return CellKind::kConvCell;
  if (s == "residual") return CellKind::kResidualCell;
  if (s == "head") return CellKind::kClassifierHead;
  throw ConfigError(strcat("unknown cell kind \"", s, "\""));
}

NetworkMode mode_from_string(const std::string& s) {
  if (s == "shape_adaptor") return NetworkMode::kShapeAdaptor;
  if (s == "human_fixed") return NetworkMode::kHumanFixed;
  if (s == "autosc") return NetworkMode::kAutoSC;
  if (s == "random_fixed") return NetworkMode::kRandomFixed;
  throw ConfigError(strcat("unknown network mode \"", s, "\""));
}

DimRule rule_from_string(const std::string& s) {
  if (s == "local") return DimRule::kLocal;
  if (s == "global") return DimRule::kGlobal;
  throw ConfigError(strcat("unknown dim rule \"", s, "\""));
}

}  // namespace

json network_spec_to_json_obj(const NetworkSpec& spec) {
  json j;
  j["input_channels"] = spec.input_channels;
  j["input_dim"] = spec.input_dim;
  j["mode"] = to_string(spec.mode);
  j["dim_rule"] = to_string(spec.dim_rule);
  j["search_space"] = {{"r_min", spec.search_space.r_min}, {"r_max", spec.search_space.r_max}};
  j["width_multiplier"] = spec.width_multiplier;
  if (spec.adaptor_count) j["adaptor_count"] = *spec.adaptor_count;
  if (!spec.fixed_factors.empty()) j["fixed_factors"] = spec.fixed_factors;
  j["cells"] = json::array();
  for (const auto& c : spec.cells) {
    json cj;
    cj["kind"] = to_string(c.kind);
    cj["channels"] = c.channels_out;
    if (c.has_adaptor) cj["adaptor"] = true;
    if (c.fixed_resize) cj["fixed_resize"] = true;
    j["cells"].push_back(cj);
  }
  return j;
}

NetworkSpec network_spec_from_json_obj(const json& j) {
  NetworkSpec spec;
  try {
    spec.input_channels = j.value("input_channels", 3);
    spec.input_dim = j.value("input_dim", 32);
    if (j.contains("mode")) spec.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("dim_rule")) spec.dim_rule = rule_from_string(j.at("dim_rule").get<std::string>());
    if (j.contains("search_space")) {
      spec.search_space.r_min = j.at("search_space").value("r_min", 0.5);
      spec.search_space.r_max = j.at("search_space").value("r_max", 1.0);
    }
    spec.width_multiplier = j.value("width_multiplier", 1.0);
    if (j.contains("adaptor_count")) spec.adaptor_count = j.at("adaptor_count").get<int>();
    if (j.contains("fixed_factors")) {
      spec.fixed_factors = j.at("fixed_factors").get<std::vector<double>>();
    }
    for (const auto& cj : j.at("cells")) {
      CellSpec c;
      c.kind = cell_kind_from_string(cj.at("kind").get<std::string>());
      c.channels_out = cj.at("channels").get<int>();
      c.has_adaptor = cj.value("adaptor", false);
      c.fixed_resize = cj.value("fixed_resize", false);
      spec.cells.push_back(c);
    }
  } catch (const json::exception& e) {
    throw ConfigError(strcat("malformed network spec JSON: ", e.what()));
  }
  return spec;
}

std::string network_spec_to_json(const NetworkSpec& spec) {
  return network_spec_to_json_obj(spec).dump(2);
}

NetworkSpec network_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(strcat("invalid JSON: ", e.what()));
  }
  return network_spec_from_json_obj(j);
}

}  // namespace sa

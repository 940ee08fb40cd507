#include "dnsd/model.hpp"

#include <cmath>

#include "dnsd/edge_ops.hpp"
#include "dnsd/rng.hpp"

namespace dnsd {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr std::uint64_t kInitStream = 0x1A17;

Tensor gaussian(Shape shape, double std, SplitMix64& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = std * rng.normal();
  return t;
}

Tensor near_identity(std::size_t k, SplitMix64& rng) {
  Tensor t = Tensor::identity(k);
  for (double& v : t.values()) v += 0.01 * rng.normal();
  return t;
}

}  // namespace

const char* to_string(ModelFamily f) noexcept {
  switch (f) {
    case ModelFamily::mlp: return "mlp";
    case ModelFamily::nsd: return "nsd";
    case ModelFamily::dnsd: return "dnsd";
  }
  return "?";
}

const char* to_string(MapKind k) noexcept {
  switch (k) {
    case MapKind::diagonal: return "diag";
    case MapKind::full: return "full";
    case MapKind::orthogonal: return "orthogonal";
  }
  return "?";
}

ModelFamily parse_family(const std::string& s) {
  if (s == "mlp") return ModelFamily::mlp;
  if (s == "nsd") return ModelFamily::nsd;
  if (s == "dnsd") return ModelFamily::dnsd;
  throw ConfigError("unknown model family '" + s + "' (expected mlp, nsd or dnsd)");
}

MapKind parse_map_kind(const std::string& s) {
  if (s == "diag" || s == "diagonal") return MapKind::diagonal;
  if (s == "full") return MapKind::full;
  if (s == "orthogonal" || s == "orth") return MapKind::orthogonal;
  throw ConfigError("unknown map kind '" + s + "' (expected diag, full or orthogonal)");
}

std::string to_string(const LayerFlags& f) {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(f.adj, "adj");
  add(f.odd, "odd");
  add(f.gate, "gate");
  return out.empty() ? "-" : out;
}

void ModelConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (hidden == 0) throw ConfigError("hidden width c must be positive");
  if (family == ModelFamily::mlp) {
    if (layers == 0) throw ConfigError("an MLP needs at least one layer");
    return;
  }
  if (stalk_dim == 0) throw ConfigError("stalk dimension d must be positive");
  if (hidden % stalk_dim != 0) {
    throw ConfigError("hidden width c=" + std::to_string(hidden) +
                      " is not divisible by stalk dimension d=" + std::to_string(stalk_dim));
  }
}

// --- building blocks -------------------------------------------------------------

ad::Var build_maps(MapKind kind, const ad::Var& v, const ad::Var& b, const ad::Var& x,
                   const MessageIndex& index) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw ShapeError("build_maps: x must be n×d×f");
  const std::size_t n = xs[0], d = xs[1], c = xs[1] * xs[2];
  const std::size_t k = kind == MapKind::diagonal ? d : d * d;
  if (v.shape() != Shape{k, 2 * c}) {
    throw ShapeError("build_maps: V must be " + to_string(Shape{k, 2 * c}) + ", got " +
                     to_string(v.shape()));
  }
  if (b.shape() != Shape{1, k}) throw ShapeError("build_maps: bias must be 1×k");
  const ad::Var flat = ad::reshape(x, {n, c});
  // V·[x_u ‖ x_v] splits into a receiver part and a sender part computed per node.
  const ad::Var p = ad::matmul(flat, ad::transpose(ad::slice_cols(v, 0, c)));
  const ad::Var q = ad::matmul(flat, ad::transpose(ad::slice_cols(v, c, 2 * c)));
  const std::size_t e = index.num_directed();
  const ad::Var z = ad::edge_pair_sum(p, q, b, index.receivers, index.senders);
  switch (kind) {
    case MapKind::diagonal:
      return ad::tanh(z);
    case MapKind::full:
      return ad::reshape(ad::tanh(z), {e, d, d});
    case MapKind::orthogonal:
      return ad::orthogonal_factor(ad::reshape(z, {e, d, d}));
  }
  throw ConfigError("build_maps: unknown map kind");
}

ad::Var sheaf_aggregate(const ad::Var& maps_src, const ad::Var& maps_tgt, const ad::Var& x,
                        const MessageIndex& index, bool adjacency) {
  return ad::sheaf_diffuse(maps_src, maps_tgt, x, index.receivers, index.senders, index.weights,
                           adjacency);
}

ad::Var stalk_layernorm(const ad::Var& x, const ad::Var& gamma, const ad::Var& beta) {
  const Shape& xs = x.shape();
  if (xs.size() != 3) throw ShapeError("stalk_layernorm: x must be n×d×f");
  const std::size_t n = xs[0], d = xs[1], f = xs[2];
  if (gamma.shape() != Shape{d, f} || beta.shape() != Shape{d, f}) {
    throw ShapeError("stalk_layernorm: gamma and beta must be d×f");
  }
  const ad::Var rows = ad::reshape(x, {n * d, f});
  const ad::Var centred = ad::sub(rows, ad::repeat_cols(ad::row_mean(rows), f));
  const ad::Var normed =
      ad::div(centred, ad::repeat_cols(ad::row_std(rows, kLayerNormEps), f));
  const ad::Var out = ad::add(ad::mul(normed, ad::tile_rows(gamma, n)), ad::tile_rows(beta, n));
  return ad::reshape(out, {n, d, f});
}

ad::Var stalk_gate(const ad::Var& x, const ad::Var& xbar, const ad::Var& w, const ad::Var& b) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || xbar.shape() != xs) throw ShapeError("stalk_gate: x and x̄ must be n×d×f");
  const std::size_t rows = xs[0] * xs[1], f = xs[2];
  if (w.shape() != Shape{2 * f, 1}) throw ShapeError("stalk_gate: w must be 2f×1");
  const ad::Var joined =
      ad::concat_cols(ad::reshape(x, {rows, f}), ad::reshape(xbar, {rows, f}));
  return ad::sigmoid(ad::add(ad::matmul(joined, w), b));
}

std::pair<Tensor, Tensor> stacked_maps(const CellularSheaf& s) {
  const std::size_t e = s.num_directed(), d = s.stalk_dim(), dd = d * d;
  Tensor src(Shape{e, d, d}), tgt(Shape{e, d, d});
  for (std::size_t i = 0; i < e; ++i) {
    std::copy_n(s.src_map(i).data(), dd, src.data() + i * dd);
    std::copy_n(s.tgt_map(i).data(), dd, tgt.data() + i * dd);
  }
  return {std::move(src), std::move(tgt)};
}

// --- model ---------------------------------------------------------------------

std::size_t Model::add_param(std::string name, Tensor value) {
  params_.emplace_back(std::move(name), std::move(value));
  return params_.size() - 1;
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  SplitMix64 rng(derive_seed(config_.seed, kInitStream));
  const std::size_t F = config_.input_dim, c = config_.hidden, C = config_.num_classes;
  auto linear = [&](const std::string& name, std::size_t out, std::size_t in) {
    const std::size_t w = add_param(name + ".W", gaussian({out, in}, 1.0 / std::sqrt(double(in)), rng));
    const std::size_t b = add_param(name + ".b", Tensor(Shape{1, out}));
    return std::pair{w, b};
  };

  if (config_.family == ModelFamily::mlp) {
    const std::size_t L = config_.layers;
    if (L == 1) {
      std::tie(in_w_, in_b_) = linear("output", C, F);
      out_w_ = in_w_;
      out_b_ = in_b_;
      projection_params_ = params_[in_w_].value.size() + params_[in_b_].value.size();
      return;
    }
    std::tie(in_w_, in_b_) = linear("input", c, F);
    for (std::size_t l = 0; l + 2 < L; ++l) mlp_hidden_.push_back(linear("hidden" + std::to_string(l), c, c));
    std::tie(out_w_, out_b_) = linear("output", C, c);
  } else {
    const std::size_t d = config_.stalk_dim, f = config_.feature_width();
    const std::size_t k = config_.map == MapKind::diagonal ? d : d * d;
    const double builder_std =
        (config_.map == MapKind::full ? 1.0 / std::sqrt(2.0) : 1.0) / std::sqrt(double(2 * c));
    const bool deep = config_.family == ModelFamily::dnsd;

    std::tie(in_w_, in_b_) = linear("input", c, F);
    for (std::size_t l = 0; l < config_.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      LayerSlots s;
      const std::string src = deep ? "src" : "builder";
      s.src_v = add_param(p + src + ".V", gaussian({k, 2 * c}, builder_std, rng));
      s.src_b = add_param(p + src + ".b", Tensor(Shape{1, k}));
      if (deep) {
        s.tgt_v = add_param(p + "tgt.V", gaussian({k, 2 * c}, builder_std, rng));
        s.tgt_b = add_param(p + "tgt.b", Tensor(Shape{1, k}));
      }
      s.w1 = add_param(p + "W1", near_identity(d, rng));
      s.w2 = add_param(p + "W2", near_identity(f, rng));
      s.eps = add_param(p + "eps", Tensor(Shape{1}));
      if (deep) {
        s.ln_gamma = add_param(p + "ln_gamma", Tensor(Shape{d, f}, 1.0));
        s.ln_beta = add_param(p + "ln_beta", Tensor(Shape{d, f}));
        if (config_.flags.gate) {
          s.gate_w = add_param(p + "gate_w", Tensor(Shape{2 * f, 1}));
          s.gate_b = add_param(p + "gate_b", Tensor(Shape{1}));
        }
      }
      layers_.push_back(s);
    }
    std::tie(out_w_, out_b_) = linear("output", C, c);
  }
  for (std::size_t i : {in_w_, in_b_, out_w_, out_b_}) projection_params_ += params_[i].value.size();
}

ad::Parameter& Model::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::out_of_range("no parameter named '" + name + "'");
}

const ad::Parameter& Model::parameter(const std::string& name) const {
  return const_cast<Model*>(this)->parameter(name);
}

ParameterCount Model::count_parameters() const {
  ParameterCount out;
  for (const auto& p : params_) out.total += p.value.size();
  out.backbone = out.total - projection_params_;
  return out;
}

ad::Var Model::param_var(ad::Tape& tape, std::size_t slot, bool track_grad) {
  return track_grad ? tape.parameter(params_[slot]) : tape.constant(params_[slot].value);
}

ad::Var Model::forward(ad::Tape& tape, const ad::Var& features, const MessageIndex& index,
                       bool track_grad, ForwardTrace* trace, const CellularSheaf* fixed_maps) {
  const Shape& hs = features.shape();
  if (hs.size() != 2 || hs[1] != config_.input_dim) {
    throw ShapeError("model: features must be n×" + std::to_string(config_.input_dim) + ", got " +
                     to_string(hs));
  }
  const std::size_t n = hs[0];
  if (config_.family != ModelFamily::mlp && index.num_nodes != n) {
    throw ShapeError("model: graph has " + std::to_string(index.num_nodes) + " nodes, features " +
                     std::to_string(n));
  }
  auto affine = [&](const ad::Var& x, std::size_t w, std::size_t b) {
    return ad::add(ad::matmul(x, ad::transpose(param_var(tape, w, track_grad))),
                   ad::tile_rows(param_var(tape, b, track_grad), n));
  };

  if (config_.family == ModelFamily::mlp) {
    if (config_.layers == 1) return affine(features, out_w_, out_b_);
    ad::Var x = ad::relu(affine(features, in_w_, in_b_));
    for (auto [w, b] : mlp_hidden_) x = ad::relu(affine(x, w, b));
    return affine(x, out_w_, out_b_);
  }

  const std::size_t d = config_.stalk_dim, f = config_.feature_width();
  ad::Var x = ad::reshape(affine(features, in_w_, in_b_), {n, d, f});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    try {
      x = layer_forward(tape, l, x, index, track_grad, trace, fixed_maps);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("layer" + std::to_string(l) + ": " + e.what());
    }
  }
  return affine(ad::reshape(x, {n, config_.hidden}), out_w_, out_b_);
}

ad::Var Model::layer_forward(ad::Tape& tape, std::size_t l, const ad::Var& x,
                             const MessageIndex& index, bool track_grad, ForwardTrace* trace,
                             const CellularSheaf* fixed_maps) {
  const LayerSlots& s = layers_[l];
  const bool deep = config_.family == ModelFamily::dnsd;
  const LayerFlags flags = deep ? config_.flags : LayerFlags{};
  const std::size_t n = x.shape()[0], d = config_.stalk_dim, f = config_.feature_width();
  auto P = [&](std::size_t slot) { return param_var(tape, slot, track_grad); };

  ad::Var fs, ft;
  if (fixed_maps) {
    auto [src, tgt] = stacked_maps(*fixed_maps);
    fs = tape.constant(std::move(src));
    ft = tape.constant(std::move(tgt));
  } else {
    fs = build_maps(config_.map, P(s.src_v), P(s.src_b), x, index);
    ft = deep ? build_maps(config_.map, P(s.tgt_v), P(s.tgt_b), x, index)
              : ad::gather_rows(fs, index.reverse);
  }

  const ad::Var xbar = sheaf_aggregate(fs, ft, x, index, flags.adj);
  if (trace) {
    trace->aggregated_norm.push_back(xbar.value().frobenius_norm());
    if (trace->keep_tensors) trace->aggregated.push_back(xbar.value());
  }

  ad::Var u = ad::stalk_mix(P(s.w1), xbar);
  u = flags.odd ? ad::tanh(u) : ad::relu(u);
  u = ad::reshape(ad::matmul(ad::reshape(u, {n * d, f}), P(s.w2)), {n, d, f});
  if (flags.gate) {
    const ad::Var g = stalk_gate(x, xbar, P(s.gate_w), P(s.gate_b));
    u = ad::mul(ad::reshape(ad::repeat_cols(g, f), {n, d, f}), u);
  }
  ad::Var y = ad::sub(ad::add(x, ad::mul(P(s.eps), x)), u);
  if (deep) y = stalk_layernorm(y, P(s.ln_gamma), P(s.ln_beta));
  return y;
}

Tensor Model::logits(const Tensor& features, const MessageIndex& index) {
  ad::Tape tape;
  return forward(tape, tape.constant(features), index, false).value();
}

std::vector<Tensor> Model::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void Model::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) throw ShapeError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != params_[i].value.shape()) {
      throw ShapeError("restore: shape mismatch for " + params_[i].name);
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
}

}  // namespace dnsd

#pragma once

// Sheaf diffusion models (NSD and DNSD) and the MLP baseline.
//
// Node representations are kept as n×d×f tensors: d stalks of feature width f,
// c = d·f channels per node. Every layer builds its own restriction maps from the
// current representation, so the sheaf changes from layer to layer.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dnsd/autodiff.hpp"
#include "dnsd/graph.hpp"
#include "dnsd/sheaf.hpp"

namespace dnsd {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ModelFamily { mlp, nsd, dnsd };
enum class MapKind { diagonal, full, orthogonal };

const char* to_string(ModelFamily f) noexcept;
const char* to_string(MapKind k) noexcept;
/// Accepts "mlp"/"nsd"/"dnsd" and "diag"/"diagonal"/"full"/"orthogonal"/"orth".
ModelFamily parse_family(const std::string& s);
MapKind parse_map_kind(const std::string& s);

struct LayerFlags {
  bool adj = false;
  bool odd = false;
  bool gate = false;

  friend bool operator==(const LayerFlags&, const LayerFlags&) = default;
};

/// "adj+odd", "gate", or "-" when no flag is set.
std::string to_string(const LayerFlags& f);

struct ModelConfig {
  ModelFamily family = ModelFamily::dnsd;
  MapKind map = MapKind::diagonal;
  LayerFlags flags;
  std::size_t input_dim = 2;
  std::size_t num_classes = 3;
  std::size_t hidden = 18;     // c
  std::size_t stalk_dim = 3;   // d
  std::size_t layers = 2;      // L
  std::uint64_t seed = 0;

  std::size_t feature_width() const noexcept { return stalk_dim ? hidden / stalk_dim : 0; }
  /// Throws ConfigError (e.g. c not divisible by d, MLP with zero layers).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParameterCount {
  std::size_t total = 0;
  /// total minus the input and output projections.
  std::size_t backbone = 0;
};

/// Per-layer diagnostics collected during a forward pass.
struct ForwardTrace {
  /// ‖X̄‖_F of the aggregated signal fed to the stalk-wise update, per layer.
  std::vector<double> aggregated_norm;
  /// The aggregated signal itself (n×d×f), per layer; filled only when keep_tensors.
  std::vector<Tensor> aggregated;
  bool keep_tensors = false;
};

// --- building blocks -----------------------------------------------------------

/// Restriction maps for every directed edge from the current representation
/// x (n×d×f). `v` is k×2c and `b` is 1×k with k = d (diagonal) or d² (full,
/// orthogonal). Returns E×d for diagonal maps and E×d×d otherwise.
ad::Var build_maps(MapKind kind, const ad::Var& v, const ad::Var& b, const ad::Var& x,
                   const MessageIndex& index);

/// X̄_u = Σ_{e=(u→v)} w_e F_srcᵀ δ_e with δ_e the (adjacency or full) coboundary.
ad::Var sheaf_aggregate(const ad::Var& maps_src, const ad::Var& maps_tgt, const ad::Var& x,
                        const MessageIndex& index, bool adjacency);

/// Per-stalk layer normalisation of x (n×d×f) across f, variance + 1e-5, with
/// affine parameters gamma, beta of shape d×f.
ad::Var stalk_layernorm(const ad::Var& x, const ad::Var& gamma, const ad::Var& beta);

/// sigmoid(w·[x_{v,s} ‖ x̄_{v,s}] + b) per node and stalk: (n·d)×1. w is 2f×1, b has one entry.
ad::Var stalk_gate(const ad::Var& x, const ad::Var& xbar, const ad::Var& w, const ad::Var& b);

// --- model ---------------------------------------------------------------------

class Model {
 public:
  /// Builds and initialises every parameter from config.seed.
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<ad::Parameter>& parameters() noexcept { return params_; }
  const std::vector<ad::Parameter>& parameters() const noexcept { return params_; }
  ad::Parameter& parameter(const std::string& name);
  const ad::Parameter& parameter(const std::string& name) const;

  ParameterCount count_parameters() const;

  /// Logits n×C. With track_grad the parameters are registered on the tape so that
  /// tape.backward() fills their gradients. `fixed_maps`, when given, replaces the
  /// learned restriction maps in every layer.
  ad::Var forward(ad::Tape& tape, const ad::Var& features, const MessageIndex& index,
                  bool track_grad = true, ForwardTrace* trace = nullptr,
                  const CellularSheaf* fixed_maps = nullptr);

  /// Inference-only convenience wrapper around forward().
  Tensor logits(const Tensor& features, const MessageIndex& index);

  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

 private:
  struct LayerSlots {
    std::size_t src_v = 0, src_b = 0, tgt_v = 0, tgt_b = 0;
    std::size_t w1 = 0, w2 = 0, eps = 0;
    std::size_t ln_gamma = 0, ln_beta = 0, gate_w = 0, gate_b = 0;
  };

  ad::Var layer_forward(ad::Tape& tape, std::size_t l, const ad::Var& x,
                        const MessageIndex& index, bool track_grad, ForwardTrace* trace,
                        const CellularSheaf* fixed_maps);
  ad::Var param_var(ad::Tape& tape, std::size_t slot, bool track_grad);
  std::size_t add_param(std::string name, Tensor value);

  ModelConfig config_;
  std::vector<ad::Parameter> params_;
  std::vector<LayerSlots> layers_;
  std::size_t in_w_ = 0, in_b_ = 0, out_w_ = 0, out_b_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> mlp_hidden_;
  std::size_t projection_params_ = 0;
};

/// Fixed per-edge maps as tape constants in the layout sheaf_aggregate expects.
std::pair<Tensor, Tensor> stacked_maps(const CellularSheaf& s);

}  // namespace dnsd

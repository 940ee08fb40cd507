#pragma once

// Cellular sheaves on graphs and their dense block operators.
//
// Dense nd×nd assembly is meant for analysis and tests at desk scale; the
// learned layers never materialise these matrices.

#include <cstdint>
#include <vector>

#include "dnsd/graph.hpp"
#include "dnsd/rng.hpp"
#include "dnsd/tensor.hpp"

namespace dnsd {

/// Restriction maps for every directed orientation of every edge, in the order of
/// MessageIndex::from_graph. For directed edge (u → v), src restricts u's stalk and
/// tgt restricts v's stalk onto the edge stalk.
class CellularSheaf {
 public:
  /// All maps zero.
  CellularSheaf(const Graph& g, std::size_t stalk_dim);

  static CellularSheaf identity(const Graph& g, std::size_t stalk_dim);
  /// One (F_{a⊴e}, F_{b⊴e}) pair per undirected edge e = (a, b), a < b.
  static CellularSheaf from_edge_maps(const Graph& g, std::size_t stalk_dim,
                                      const std::vector<std::pair<Tensor, Tensor>>& maps);
  /// Independent N(0, 1) entries per undirected edge map.
  static CellularSheaf random(const Graph& g, std::size_t stalk_dim, SplitMix64& rng);

  std::size_t stalk_dim() const noexcept { return d_; }
  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_directed() const noexcept { return src_.size(); }
  const Tensor& src_map(std::size_t e) const { return src_.at(e); }
  const Tensor& tgt_map(std::size_t e) const { return tgt_.at(e); }
  std::uint32_t receiver(std::size_t e) const { return (*index_.receivers)[e]; }
  std::uint32_t sender(std::size_t e) const { return (*index_.senders)[e]; }
  const MessageIndex& index() const noexcept { return index_; }

  void set_maps(std::size_t e, Tensor src, Tensor tgt);

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  MessageIndex index_;
  std::vector<Tensor> src_;
  std::vector<Tensor> tgt_;
};

enum class OperatorFlavor { laplacian, adjacency };

enum class Normalization {
  /// D_F^{-1/2} · op · D_F^{-1/2} with D_F the Laplacian's diagonal blocks.
  stalk_block,
  /// Every edge contribution scaled by d̃_u^{-1/2} d̃_v^{-1/2}, d̃ = max(1, deg).
  scalar_degree,
};

/// Dense nd×nd operator; row/column v·d + s addresses stalk s of node v.
struct BlockOperator {
  Tensor matrix;
  std::size_t num_nodes = 0;
  std::size_t stalk_dim = 0;
  OperatorFlavor flavor = OperatorFlavor::laplacian;
  bool normalized = false;

  /// Block (u, v) as a d×d tensor.
  Tensor block(std::size_t u, std::size_t v) const;
  /// op · X for X of shape n×d×f (or nd×f); returns the same shape as X.
  Tensor apply(const Tensor& x) const;
};

/// (L)_uu = Σ F_srcᵀF_src, (L)_uv = −F_srcᵀF_tgt, accumulated over directed edges by receiver.
BlockOperator assemble_laplacian(const Graph& g, const CellularSheaf& s);
/// (A)_uv = F_srcᵀF_tgt, zero diagonal blocks.
BlockOperator assemble_adjacency(const Graph& g, const CellularSheaf& s);
BlockOperator normalize(const BlockOperator& op, const Graph& g, const CellularSheaf& s,
                        Normalization mode);

/// Symmetric pseudo-inverse square root of a symmetric PSD d×d block; eigenvalues
/// below 1e-10 are treated as zero.
Tensor pinv_sqrt(const Tensor& block);

/// X ← (I − Δ)X.
Tensor linear_diffusion_step(const Tensor& x, const BlockOperator& delta);
/// trace(Xᵀ Δ X); rejects adjacency operators.
double dirichlet_energy(const Tensor& x, const BlockOperator& delta);
/// ‖Δ X‖_F; rejects adjacency operators.
double laplacian_signal_norm(const Tensor& x, const BlockOperator& delta);

}  // namespace dnsd

#pragma once

// Fused, differentiable sheaf message-passing ops. Each op works on all directed
// edges at once without materialising gathered node tensors.
//
// Restriction maps come in two layouts: E×d (diagonal maps, one entry per stalk)
// or E×d×d (full or orthogonal maps). Node signals are n×d×f.

#include <memory>
#include <stdexcept>
#include <vector>

#include "dnsd/autodiff.hpp"

namespace dnsd::ad {

class DegenerateQrError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QrFactors {
  Tensor q;
  Tensor r;
};

/// A = QR for square A with diag(R) > 0 (unique Q). Throws DegenerateQrError when
/// A is numerically rank deficient.
QrFactors qr_positive(const Tensor& a);

/// Per directed edge e = (u → v):
///   δ_e = F_src,e · X_u − F_tgt,e · X_v   (adjacency = false)
///   δ_e = F_tgt,e · X_v                   (adjacency = true; maps_src is ignored)
/// Output E×d×f.
Var edge_coboundary(const Var& maps_src, const Var& maps_tgt, const Var& x,
                    const IndexList& receivers, const IndexList& senders, bool adjacency);

/// out[u] = Σ_{e=(u→·)} w_e · F_src,eᵀ · δ_e. Output n×d×f.
Var edge_backproject(const Var& maps_src, const Var& delta,
                     const std::shared_ptr<const std::vector<double>>& weights,
                     const IndexList& receivers, std::size_t n);

/// edge_backproject(maps_src, edge_coboundary(...)) in one pass, without the E×d×f
/// intermediate. Unlike edge_coboundary, maps_src is always used.
Var sheaf_diffuse(const Var& maps_src, const Var& maps_tgt, const Var& x,
                  const IndexList& receivers, const IndexList& senders,
                  const std::shared_ptr<const std::vector<double>>& weights, bool adjacency);

/// out[e] = p[receivers[e]] + q[senders[e]] + b. p, q n×k; b 1×k; output E×k.
Var edge_pair_sum(const Var& p, const Var& q, const Var& b, const IndexList& receivers,
                  const IndexList& senders);

/// Orthogonal factor of each d×d slice of z (E×d×d). Rank-deficient slices are
/// factored as z + 1e-8·I.
Var orthogonal_factor(const Var& z);

/// out_v = W · X_v for every node: W d×d, X n×d×f.
Var stalk_mix(const Var& w, const Var& x);

}  // namespace dnsd::ad

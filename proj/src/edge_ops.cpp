#include "dnsd/edge_ops.hpp"

#include <cmath>
#include <string>

namespace dnsd::ad {
namespace {

constexpr double kQrRegularizer = 1e-8;

struct MapLayout {
  bool diagonal;
  std::size_t d;
};

MapLayout layout_of(const Tensor& maps, std::size_t edges, std::size_t d, const char* op) {
  if (maps.rank() == 2 && maps.dim(0) == edges && maps.dim(1) == d) return {true, d};
  if (maps.rank() == 3 && maps.dim(0) == edges && maps.dim(1) == d && maps.dim(2) == d) {
    return {false, d};
  }
  throw ShapeError(std::string(op) + ": maps " + to_string(maps.shape()) + " do not match E=" +
                   std::to_string(edges) + ", d=" + std::to_string(d));
}

// y (d×f) += sign · F · x, F given in either layout.
inline void apply_map(const MapLayout& l, const double* fmap, const double* x, std::size_t f,
                      double sign, double* y) {
  const std::size_t d = l.d;
  if (l.diagonal) {
    for (std::size_t s = 0; s < d; ++s) {
      const double a = sign * fmap[s];
      for (std::size_t k = 0; k < f; ++k) y[s * f + k] += a * x[s * f + k];
    }
  } else {
    for (std::size_t s = 0; s < d; ++s)
      for (std::size_t j = 0; j < d; ++j) {
        const double a = sign * fmap[s * d + j];
        for (std::size_t k = 0; k < f; ++k) y[s * f + k] += a * x[j * f + k];
      }
  }
}

// y (d×f) += sign · Fᵀ · x.
inline void apply_map_t(const MapLayout& l, const double* fmap, const double* x, std::size_t f,
                        double sign, double* y) {
  const std::size_t d = l.d;
  if (l.diagonal) {
    apply_map(l, fmap, x, f, sign, y);
    return;
  }
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t s = 0; s < d; ++s) {
      const double a = sign * fmap[j * d + s];
      for (std::size_t k = 0; k < f; ++k) y[s * f + k] += a * x[j * f + k];
    }
}

// dF += sign · g · xᵀ (full) or its diagonal (diagonal layout).
inline void outer_acc(const MapLayout& l, const double* g, const double* x, std::size_t f,
                      double sign, double* dfmap) {
  const std::size_t d = l.d;
  if (l.diagonal) {
    for (std::size_t s = 0; s < d; ++s) {
      double acc = 0.0;
      for (std::size_t k = 0; k < f; ++k) acc += g[s * f + k] * x[s * f + k];
      dfmap[s] += sign * acc;
    }
  } else {
    for (std::size_t s = 0; s < d; ++s)
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < f; ++k) acc += g[s * f + k] * x[j * f + k];
        dfmap[s * d + j] += sign * acc;
      }
  }
}

std::size_t map_stride(const MapLayout& l) { return l.diagonal ? l.d : l.d * l.d; }

// Gram–Schmidt with one reorthogonalisation pass. Returns false if rank deficient.
bool gram_schmidt(const double* a, std::size_t d, double* q, double* r) {
  double scale = 0.0;
  for (std::size_t i = 0; i < d * d; ++i) scale += a[i] * a[i];
  scale = std::sqrt(scale);
  for (std::size_t i = 0; i < d * d; ++i) r[i] = 0.0;
  std::vector<double> v(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) v[i] = a[i * d + j];
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t p = 0; p < j; ++p) {
        double c = 0.0;
        for (std::size_t i = 0; i < d; ++i) c += q[i * d + p] * v[i];
        r[p * d + j] += c;
        for (std::size_t i = 0; i < d; ++i) v[i] -= c * q[i * d + p];
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += v[i] * v[i];
    norm = std::sqrt(norm);
    if (!(norm > 1e-12 * scale) || norm == 0.0) return false;
    r[j * d + j] = norm;
    for (std::size_t i = 0; i < d; ++i) q[i * d + j] = v[i] / norm;
  }
  return true;
}

}  // namespace

QrFactors qr_positive(const Tensor& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw ShapeError("qr_positive: square matrix required, got " + to_string(a.shape()));
  }
  const std::size_t d = a.dim(0);
  QrFactors out{Tensor(Shape{d, d}), Tensor(Shape{d, d})};
  if (!gram_schmidt(a.data(), d, out.q.data(), out.r.data())) {
    throw DegenerateQrError("qr_positive: matrix is numerically rank deficient");
  }
  return out;
}

Var edge_coboundary(const Var& maps_src, const Var& maps_tgt, const Var& x,
                    const IndexList& receivers, const IndexList& senders, bool adjacency) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ShapeError("edge_coboundary: x must be n×d×f");
  const std::size_t n = xv.dim(0), d = xv.dim(1), f = xv.dim(2);
  const std::size_t e_count = receivers->size();
  if (senders->size() != e_count) throw ShapeError("edge_coboundary: index length mismatch");
  const MapLayout lt = layout_of(maps_tgt.value(), e_count, d, "edge_coboundary");
  const MapLayout ls = adjacency ? lt : layout_of(maps_src.value(), e_count, d, "edge_coboundary");
  const std::size_t block = d * f;
  for (std::size_t e = 0; e < e_count; ++e) {
    if ((*receivers)[e] >= n || (*senders)[e] >= n) {
      throw std::out_of_range("edge_coboundary: node index out of range");
    }
  }

  Tensor out(Shape{e_count, d, f});
  const double* fs = adjacency ? nullptr : maps_src.value().data();
  const double* ft = maps_tgt.value().data();
  for (std::size_t e = 0; e < e_count; ++e) {
    double* y = out.data() + e * block;
    if (!adjacency) apply_map(ls, fs + e * map_stride(ls), xv.data() + (*receivers)[e] * block, f, 1.0, y);
    apply_map(lt, ft + e * map_stride(lt), xv.data() + (*senders)[e] * block, f, -1.0 + 2.0 * adjacency, y);
  }

  Tape* tape = x.tape();
  auto backward = [maps_src, maps_tgt, x, receivers, senders, adjacency, ls, lt, block, f](
                      Tape& t, const Tensor& g, const Tensor&) {
    const Tensor& xv = t.value(x);
    const double tgt_sign = adjacency ? 1.0 : -1.0;
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad_buffer(x);
      const double* fs = adjacency ? nullptr : t.value(maps_src).data();
      const double* ft = t.value(maps_tgt).data();
      for (std::size_t e = 0; e < receivers->size(); ++e) {
        const double* ge = g.data() + e * block;
        if (!adjacency) {
          apply_map_t(ls, fs + e * map_stride(ls), ge, f, 1.0, gx.data() + (*receivers)[e] * block);
        }
        apply_map_t(lt, ft + e * map_stride(lt), ge, f, tgt_sign, gx.data() + (*senders)[e] * block);
      }
    }
    if (!adjacency && t.requires_grad(maps_src)) {
      Tensor& gs = t.grad_buffer(maps_src);
      for (std::size_t e = 0; e < receivers->size(); ++e) {
        outer_acc(ls, g.data() + e * block, xv.data() + (*receivers)[e] * block, f, 1.0,
                  gs.data() + e * map_stride(ls));
      }
    }
    if (t.requires_grad(maps_tgt)) {
      Tensor& gt = t.grad_buffer(maps_tgt);
      for (std::size_t e = 0; e < receivers->size(); ++e) {
        outer_acc(lt, g.data() + e * block, xv.data() + (*senders)[e] * block, f, tgt_sign,
                  gt.data() + e * map_stride(lt));
      }
    }
  };
  if (adjacency) return tape->record(std::move(out), {maps_tgt, x}, backward, "edge_coboundary");
  return tape->record(std::move(out), {maps_src, maps_tgt, x}, backward, "edge_coboundary");
}

Var edge_backproject(const Var& maps_src, const Var& delta,
                     const std::shared_ptr<const std::vector<double>>& weights,
                     const IndexList& receivers, std::size_t n) {
  const Tensor& dv = delta.value();
  if (dv.rank() != 3) throw ShapeError("edge_backproject: delta must be E×d×f");
  const std::size_t e_count = dv.dim(0), d = dv.dim(1), f = dv.dim(2);
  if (receivers->size() != e_count || weights->size() != e_count) {
    throw ShapeError("edge_backproject: index/weight length mismatch");
  }
  const MapLayout l = layout_of(maps_src.value(), e_count, d, "edge_backproject");
  const std::size_t block = d * f;
  const std::size_t stride = map_stride(l);
  Tensor out(Shape{n, d, f});
  const double* fs = maps_src.value().data();
  for (std::size_t e = 0; e < e_count; ++e) {
    const std::uint32_t u = (*receivers)[e];
    if (u >= n) throw std::out_of_range("edge_backproject: receiver out of range");
    apply_map_t(l, fs + e * stride, dv.data() + e * block, f, (*weights)[e], out.data() + u * block);
  }
  return delta.tape()->record(
      std::move(out), {maps_src, delta},
      [maps_src, delta, weights, receivers, l, block, stride, f](Tape& t, const Tensor& g,
                                                                 const Tensor&) {
        const double* fs = t.value(maps_src).data();
        const Tensor& dv = t.value(delta);
        const bool want_delta = t.requires_grad(delta);
        const bool want_maps = t.requires_grad(maps_src);
        double* gd = want_delta ? t.grad_buffer(delta).data() : nullptr;
        double* gf = want_maps ? t.grad_buffer(maps_src).data() : nullptr;
        for (std::size_t e = 0; e < receivers->size(); ++e) {
          const double w = (*weights)[e];
          const double* gu = g.data() + (*receivers)[e] * block;
          // m = w Fᵀ δ  =>  dδ = w F g_u,  dF = w δ g_uᵀ
          if (gd) apply_map(l, fs + e * stride, gu, f, w, gd + e * block);
          if (gf) outer_acc(l, dv.data() + e * block, gu, f, w, gf + e * stride);
        }
      },
      "edge_backproject");
}

Var sheaf_diffuse(const Var& maps_src, const Var& maps_tgt, const Var& x,
                  const IndexList& receivers, const IndexList& senders,
                  const std::shared_ptr<const std::vector<double>>& weights, bool adjacency) {
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ShapeError("sheaf_diffuse: x must be n×d×f");
  const std::size_t n = xv.dim(0), d = xv.dim(1), f = xv.dim(2);
  const std::size_t e_count = receivers->size();
  if (senders->size() != e_count || weights->size() != e_count) {
    throw ShapeError("sheaf_diffuse: index/weight length mismatch");
  }
  const MapLayout ls = layout_of(maps_src.value(), e_count, d, "sheaf_diffuse");
  const MapLayout lt = layout_of(maps_tgt.value(), e_count, d, "sheaf_diffuse");
  for (std::size_t e = 0; e < e_count; ++e) {
    if ((*receivers)[e] >= n || (*senders)[e] >= n) {
      throw std::out_of_range("sheaf_diffuse: node index out of range");
    }
  }
  const std::size_t block = d * f;
  const double tgt_sign = adjacency ? 1.0 : -1.0;

  // δ_e into buf
  auto coboundary = [=](const double* fs, const double* ft, const double* xd, std::size_t e,
                        double* buf) {
    for (std::size_t i = 0; i < block; ++i) buf[i] = 0.0;
    if (!adjacency) apply_map(ls, fs + e * map_stride(ls), xd + (*receivers)[e] * block, f, 1.0, buf);
    apply_map(lt, ft + e * map_stride(lt), xd + (*senders)[e] * block, f, tgt_sign, buf);
  };

  Tensor out(Shape{n, d, f});
  std::vector<double> buf(block);
  const double* fs = maps_src.value().data();
  const double* ft = maps_tgt.value().data();
  for (std::size_t e = 0; e < e_count; ++e) {
    coboundary(fs, ft, xv.data(), e, buf.data());
    apply_map_t(ls, fs + e * map_stride(ls), buf.data(), f, (*weights)[e],
                out.data() + (*receivers)[e] * block);
  }

  return x.tape()->record(
      std::move(out), {maps_src, maps_tgt, x},
      [=](Tape& t, const Tensor& g, const Tensor&) {
        const double* fs = t.value(maps_src).data();
        const double* ft = t.value(maps_tgt).data();
        const double* xd = t.value(x).data();
        double* gs = t.requires_grad(maps_src) ? t.grad_buffer(maps_src).data() : nullptr;
        double* gt = t.requires_grad(maps_tgt) ? t.grad_buffer(maps_tgt).data() : nullptr;
        double* gx = t.requires_grad(x) ? t.grad_buffer(x).data() : nullptr;
        const std::size_t ss = map_stride(ls), st = map_stride(lt);
        std::vector<double> delta(block), gdelta(block);
        for (std::size_t e = 0; e < e_count; ++e) {
          const std::uint32_t u = (*receivers)[e], v = (*senders)[e];
          const double w = (*weights)[e];
          const double* gu = g.data() + u * block;
          coboundary(fs, ft, xd, e, delta.data());
          for (std::size_t i = 0; i < block; ++i) gdelta[i] = 0.0;
          apply_map(ls, fs + e * ss, gu, f, w, gdelta.data());
          if (gs) {
            outer_acc(ls, delta.data(), gu, f, w, gs + e * ss);
            if (!adjacency) outer_acc(ls, gdelta.data(), xd + u * block, f, 1.0, gs + e * ss);
          }
          if (gt) outer_acc(lt, gdelta.data(), xd + v * block, f, tgt_sign, gt + e * st);
          if (gx) {
            if (!adjacency) apply_map_t(ls, fs + e * ss, gdelta.data(), f, 1.0, gx + u * block);
            apply_map_t(lt, ft + e * st, gdelta.data(), f, tgt_sign, gx + v * block);
          }
        }
      },
      "sheaf_diffuse");
}

Var edge_pair_sum(const Var& p, const Var& q, const Var& b, const IndexList& receivers,
                  const IndexList& senders) {
  const Tensor& pv = p.value();
  const Tensor& qv = q.value();
  const Tensor& bv = b.value();
  if (pv.rank() != 2 || qv.shape() != pv.shape() || bv.rank() != 2 || bv.dim(0) != 1 ||
      bv.dim(1) != pv.dim(1)) {
    throw ShapeError("edge_pair_sum: expected p, q n×k and b 1×k, got " + to_string(pv.shape()) +
                     ", " + to_string(qv.shape()) + ", " + to_string(bv.shape()));
  }
  const std::size_t n = pv.dim(0), k = pv.dim(1), e_count = receivers->size();
  if (senders->size() != e_count) throw ShapeError("edge_pair_sum: index length mismatch");
  Tensor out(Shape{e_count, k});
  for (std::size_t e = 0; e < e_count; ++e) {
    const std::uint32_t u = (*receivers)[e], v = (*senders)[e];
    if (u >= n || v >= n) throw std::out_of_range("edge_pair_sum: node index out of range");
    const double* pu = pv.data() + u * k;
    const double* qs = qv.data() + v * k;
    double* y = out.data() + e * k;
    for (std::size_t j = 0; j < k; ++j) y[j] = pu[j] + qs[j] + bv.data()[j];
  }
  return p.tape()->record(
      std::move(out), {p, q, b},
      [p, q, b, receivers, senders, k](Tape& t, const Tensor& g, const Tensor&) {
        double* gp = t.requires_grad(p) ? t.grad_buffer(p).data() : nullptr;
        double* gq = t.requires_grad(q) ? t.grad_buffer(q).data() : nullptr;
        double* gb = t.requires_grad(b) ? t.grad_buffer(b).data() : nullptr;
        for (std::size_t e = 0; e < receivers->size(); ++e) {
          const double* ge = g.data() + e * k;
          double* pu = gp ? gp + (*receivers)[e] * k : nullptr;
          double* qs = gq ? gq + (*senders)[e] * k : nullptr;
          for (std::size_t j = 0; j < k; ++j) {
            if (pu) pu[j] += ge[j];
            if (qs) qs[j] += ge[j];
            if (gb) gb[j] += ge[j];
          }
        }
      },
      "edge_pair_sum");
}

Var orthogonal_factor(const Var& z) {
  const Tensor& zv = z.value();
  if (zv.rank() != 3 || zv.dim(1) != zv.dim(2)) {
    throw ShapeError("orthogonal_factor: expected E×d×d, got " + to_string(zv.shape()));
  }
  const std::size_t e_count = zv.dim(0), d = zv.dim(1), dd = d * d;
  Tensor q(zv.shape());
  auto r = std::make_shared<std::vector<double>>(e_count * dd);
  std::vector<double> reg(dd);
  for (std::size_t e = 0; e < e_count; ++e) {
    const double* a = zv.data() + e * dd;
    if (!gram_schmidt(a, d, q.data() + e * dd, r->data() + e * dd)) {
      for (std::size_t i = 0; i < dd; ++i) reg[i] = a[i];
      for (std::size_t i = 0; i < d; ++i) reg[i * d + i] += kQrRegularizer;
      if (!gram_schmidt(reg.data(), d, q.data() + e * dd, r->data() + e * dd)) {
        throw DegenerateQrError("orthogonal_factor: edge " + std::to_string(e) +
                                " remains rank deficient after regularisation");
      }
    }
  }
  return z.tape()->record(
      std::move(q), {z},
      [z, r, e_count, d, dd](Tape& t, const Tensor& g, const Tensor& qv) {
        // dA = Q · tril(QᵀḠ − ḠᵀQ, −1) · R⁻ᵀ
        Tensor& gz = t.grad_buffer(z);
        std::vector<double> b(dd), k(dd), rinv(dd), tmp(dd);
        for (std::size_t e = 0; e < e_count; ++e) {
          const double* qe = qv.data() + e * dd;
          const double* ge = g.data() + e * dd;
          const double* re = r->data() + e * dd;
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              double s = 0.0;
              for (std::size_t p = 0; p < d; ++p) s += qe[p * d + i] * ge[p * d + j];
              b[i * d + j] = s;
            }
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
              k[i * d + j] = i > j ? b[i * d + j] - b[j * d + i] : 0.0;
          // Upper-triangular inverse by back substitution, column by column.
          for (std::size_t i = 0; i < dd; ++i) rinv[i] = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            for (std::size_t i = c + 1; i-- > 0;) {
              double s = i == c ? 1.0 : 0.0;
              for (std::size_t p = i + 1; p <= c; ++p) s -= re[i * d + p] * rinv[p * d + c];
              rinv[i * d + c] = s / re[i * d + i];
            }
          }
          // tmp = Q · K
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              double s = 0.0;
              for (std::size_t p = 0; p < d; ++p) s += qe[i * d + p] * k[p * d + j];
              tmp[i * d + j] = s;
            }
          // gz += tmp · Rinvᵀ
          double* out = gz.data() + e * dd;
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
              double s = 0.0;
              for (std::size_t p = 0; p < d; ++p) s += tmp[i * d + p] * rinv[j * d + p];
              out[i * d + j] += s;
            }
        }
      },
      "orthogonal_factor");
}

Var stalk_mix(const Var& w, const Var& x) {
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  if (xv.rank() != 3) throw ShapeError("stalk_mix: x must be n×d×f");
  const std::size_t n = xv.dim(0), d = xv.dim(1), f = xv.dim(2);
  if (wv.rank() != 2 || wv.dim(0) != d || wv.dim(1) != d) {
    throw ShapeError("stalk_mix: W must be d×d with d=" + std::to_string(d));
  }
  const MapLayout full{false, d};
  const std::size_t block = d * f;
  Tensor out(xv.shape());
  for (std::size_t v = 0; v < n; ++v) {
    apply_map(full, wv.data(), xv.data() + v * block, f, 1.0, out.data() + v * block);
  }
  return x.tape()->record(
      std::move(out), {w, x},
      [w, x, n, block, f, full](Tape& t, const Tensor& g, const Tensor&) {
        const double* wd = t.value(w).data();
        if (t.requires_grad(x)) {
          double* gx = t.grad_buffer(x).data();
          for (std::size_t v = 0; v < n; ++v) {
            apply_map_t(full, wd, g.data() + v * block, f, 1.0, gx + v * block);
          }
        }
        if (t.requires_grad(w)) {
          const double* xd = t.value(x).data();
          double* gw = t.grad_buffer(w).data();
          for (std::size_t v = 0; v < n; ++v) {
            outer_acc(full, g.data() + v * block, xd + v * block, f, 1.0, gw);
          }
        }
      },
      "stalk_mix");
}

}  // namespace dnsd::ad

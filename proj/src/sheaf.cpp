#include "dnsd/sheaf.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "dnsd/kernels.hpp"

namespace dnsd {
namespace {

constexpr double kPinvThreshold = 1e-10;

void check_map(const Tensor& m, std::size_t d, const char* what) {
  if (m.rank() != 2 || m.dim(0) != d || m.dim(1) != d) {
    throw ShapeError(std::string("sheaf: ") + what + " map must be " + std::to_string(d) + "x" +
                     std::to_string(d) + ", got " + to_string(m.shape()));
  }
  if (!m.all_finite()) throw NonFiniteError(std::string("sheaf: non-finite ") + what + " map");
}

void check_compatible(const Graph& g, const CellularSheaf& s) {
  if (g.num_nodes() != s.num_nodes() || 2 * g.num_edges() != s.num_directed()) {
    throw ShapeError("sheaf: sheaf was not built over this graph");
  }
}

// out (d×d block at (r, c) of an nd×nd matrix) += sign · Aᵀ·B
void add_ata(Tensor& out, std::size_t d, std::size_t r, std::size_t c, const Tensor& a,
             const Tensor& b, double sign) {
  const std::size_t nd = out.dim(1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += a.at(k, i) * b.at(k, j);
      out[(r * d + i) * nd + c * d + j] += sign * s;
    }
  }
}

BlockOperator assemble(const Graph& g, const CellularSheaf& s, OperatorFlavor flavor,
                       const std::vector<double>* weights) {
  check_compatible(g, s);
  const std::size_t n = s.num_nodes();
  const std::size_t d = s.stalk_dim();
  BlockOperator op;
  op.matrix = Tensor(Shape{n * d, n * d});
  op.num_nodes = n;
  op.stalk_dim = d;
  op.flavor = flavor;
  op.normalized = weights != nullptr;
  for (std::size_t e = 0; e < s.num_directed(); ++e) {
    const std::uint32_t u = s.receiver(e);
    const std::uint32_t v = s.sender(e);
    const double w = weights ? (*weights)[e] : 1.0;
    if (flavor == OperatorFlavor::laplacian) {
      add_ata(op.matrix, d, u, u, s.src_map(e), s.src_map(e), w);
      add_ata(op.matrix, d, u, v, s.src_map(e), s.tgt_map(e), -w);
    } else {
      add_ata(op.matrix, d, u, v, s.src_map(e), s.tgt_map(e), w);
    }
  }
  return op;
}

void require_laplacian(const BlockOperator& op, const char* fn) {
  if (op.flavor != OperatorFlavor::laplacian) {
    throw std::invalid_argument(std::string(fn) + ": requires a Laplacian-flavoured operator");
  }
}

}  // namespace

CellularSheaf::CellularSheaf(const Graph& g, std::size_t stalk_dim)
    : n_(g.num_nodes()),
      d_(stalk_dim),
      index_(MessageIndex::from_graph(g)),
      src_(2 * g.num_edges(), Tensor(Shape{stalk_dim, stalk_dim})),
      tgt_(2 * g.num_edges(), Tensor(Shape{stalk_dim, stalk_dim})) {
  if (stalk_dim == 0) throw ShapeError("sheaf: stalk dimension must be positive");
}

CellularSheaf CellularSheaf::identity(const Graph& g, std::size_t stalk_dim) {
  CellularSheaf s(g, stalk_dim);
  for (std::size_t e = 0; e < s.num_directed(); ++e) {
    s.src_[e] = Tensor::identity(stalk_dim);
    s.tgt_[e] = Tensor::identity(stalk_dim);
  }
  return s;
}

CellularSheaf CellularSheaf::from_edge_maps(const Graph& g, std::size_t stalk_dim,
                                            const std::vector<std::pair<Tensor, Tensor>>& maps) {
  if (maps.size() != g.num_edges()) {
    throw ShapeError("sheaf: expected one map pair per edge");
  }
  CellularSheaf s(g, stalk_dim);
  for (std::size_t k = 0; k < maps.size(); ++k) {
    const auto& [fa, fb] = maps[k];
    // (a → b): receiver a restricts with F_a, sender b with F_b; the reverse swaps roles.
    s.set_maps(2 * k, fa, fb);
    s.set_maps(2 * k + 1, fb, fa);
  }
  return s;
}

CellularSheaf CellularSheaf::random(const Graph& g, std::size_t stalk_dim, SplitMix64& rng) {
  std::vector<std::pair<Tensor, Tensor>> maps;
  maps.reserve(g.num_edges());
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    Tensor a(Shape{stalk_dim, stalk_dim});
    Tensor b(Shape{stalk_dim, stalk_dim});
    for (double& x : a.values()) x = rng.normal();
    for (double& x : b.values()) x = rng.normal();
    maps.emplace_back(std::move(a), std::move(b));
  }
  return from_edge_maps(g, stalk_dim, maps);
}

void CellularSheaf::set_maps(std::size_t e, Tensor src, Tensor tgt) {
  check_map(src, d_, "source");
  check_map(tgt, d_, "target");
  src_.at(e) = std::move(src);
  tgt_.at(e) = std::move(tgt);
}

Tensor BlockOperator::block(std::size_t u, std::size_t v) const {
  const std::size_t d = stalk_dim;
  Tensor b(Shape{d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) b.at(i, j) = matrix.at(u * d + i, v * d + j);
  return b;
}

Tensor BlockOperator::apply(const Tensor& x) const {
  const std::size_t nd = num_nodes * stalk_dim;
  const bool ok = x.rank() == 3   ? (x.dim(0) == num_nodes && x.dim(1) == stalk_dim)
                  : x.rank() == 2 ? x.dim(0) == nd
                                  : (x.rank() == 1 && x.dim(0) == nd);
  if (!ok) {
    throw ShapeError("operator: signal " + to_string(x.shape()) + " incompatible with n=" +
                     std::to_string(num_nodes) + ", d=" + std::to_string(stalk_dim));
  }
  const std::size_t f = nd ? x.size() / nd : 0;
  Tensor out(x.shape());
  kernels::gemm(false, false, nd, f, nd, matrix.data(), x.data(), out.data(), false);
  return out;
}

BlockOperator assemble_laplacian(const Graph& g, const CellularSheaf& s) {
  return assemble(g, s, OperatorFlavor::laplacian, nullptr);
}

BlockOperator assemble_adjacency(const Graph& g, const CellularSheaf& s) {
  return assemble(g, s, OperatorFlavor::adjacency, nullptr);
}

Tensor pinv_sqrt(const Tensor& block) {
  const std::size_t d = block.dim(0);
  Eigen::MatrixXd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = 0.5 * (block.at(i, j) + block.at(j, i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd inv(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double lam = es.eigenvalues()(static_cast<Eigen::Index>(i));
    inv(static_cast<Eigen::Index>(i)) = lam < kPinvThreshold ? 0.0 : 1.0 / std::sqrt(lam);
  }
  const Eigen::MatrixXd r = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  Tensor out(Shape{d, d});
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out.at(i, j) = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

BlockOperator normalize(const BlockOperator& op, const Graph& g, const CellularSheaf& s,
                        Normalization mode) {
  check_compatible(g, s);
  if (op.num_nodes != s.num_nodes() || op.stalk_dim != s.stalk_dim()) {
    throw ShapeError("normalize: operator was not assembled from this sheaf");
  }
  if (mode == Normalization::scalar_degree) {
    return assemble(g, s, op.flavor, s.index().weights.get());
  }
  const std::size_t n = op.num_nodes;
  const std::size_t d = op.stalk_dim;
  const std::size_t nd = n * d;
  const BlockOperator lap = op.flavor == OperatorFlavor::laplacian && !op.normalized
                                ? op
                                : assemble_laplacian(g, s);
  std::vector<Tensor> dinv(n);
  for (std::size_t v = 0; v < n; ++v) dinv[v] = pinv_sqrt(lap.block(v, v));
  BlockOperator out = op;
  out.normalized = true;
  // out_uv = Dinv_u · op_uv · Dinv_v
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      const Tensor b = op.block(u, v);
      bool zero = true;
      for (double x : b.values()) zero = zero && x == 0.0;
      if (zero) {
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) out.matrix.at(u * d + i, v * d + j) = 0.0;
        continue;
      }
      Tensor tmp(Shape{d, d});
      Tensor res(Shape{d, d});
      kernels::gemm(false, false, d, d, d, dinv[u].data(), b.data(), tmp.data(), false);
      kernels::gemm(false, false, d, d, d, tmp.data(), dinv[v].data(), res.data(), false);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out.matrix[(u * d + i) * nd + v * d + j] = res.at(i, j);
    }
  }
  return out;
}

Tensor linear_diffusion_step(const Tensor& x, const BlockOperator& delta) {
  require_laplacian(delta, "linear_diffusion_step");
  Tensor dx = delta.apply(x);
  Tensor out(x.shape());
  kernels::sub(x.size(), x.data(), dx.data(), out.data());
  return out;
}

double dirichlet_energy(const Tensor& x, const BlockOperator& delta) {
  require_laplacian(delta, "dirichlet_energy");
  const Tensor dx = delta.apply(x);
  return kernels::dot(x.size(), x.data(), dx.data());
}

double laplacian_signal_norm(const Tensor& x, const BlockOperator& delta) {
  require_laplacian(delta, "laplacian_signal_norm");
  return delta.apply(x).frobenius_norm();
}

}  // namespace dnsd

// Criteria 1-5: gradients, operator identities, diffusion, benchmark statistics,
// parameter counts.

#include <Eigen/Dense>
#include <cmath>

#include "criteria.hpp"
#include "dnsd/benchmark.hpp"
#include "dnsd/experiment.hpp"
#include "dnsd/runtime.hpp"
#include "dnsd/sheaf.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace dnsd;
using namespace dnsd::acceptance;
using Mat = Eigen::MatrixXd;

namespace {

Mat to_eigen(const Tensor& t) {
  Mat m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m(i, j) = t.at(i, j);
  return m;
}

Outcome gradient_suite() {
  SplitMix64 rng(2024);
  const std::size_t n = 12;
  const Graph g = testing::random_graph(n, 0.25, rng);
  const MessageIndex index = MessageIndex::from_graph(g);
  const Tensor feats = testing::random_tensor({n, 2}, rng);
  std::vector<int> labels;
  std::vector<std::uint8_t> mask;
  for (std::size_t i = 0; i < n; ++i) {
    labels.push_back(static_cast<int>(rng.below(3)));
    mask.push_back(i % 4 != 3);
  }
  double worst = 0.0;
  std::string where;
  int configs = 0;
  for (MapKind kind : {MapKind::diagonal, MapKind::full, MapKind::orthogonal}) {
    for (int bits = 0; bits < 8; ++bits) {
      ModelConfig cfg;
      cfg.map = kind;
      cfg.flags = {bool(bits & 1), bool(bits & 2), bool(bits & 4)};
      cfg.hidden = 6;
      cfg.stalk_dim = 2;
      cfg.layers = 2;
      cfg.seed = 500 + bits;
      Model model(cfg);
      // Move off the initial point so gates and maps are generic.
      for (auto& p : model.parameters())
        for (double& v : p.value.values()) v += 0.3 * rng.normal();
      std::vector<ad::Parameter*> params;
      for (auto& p : model.parameters()) params.push_back(&p);
      const auto rep = testing::gradcheck(params, [&](ad::Tape& t) {
        return ad::cross_entropy(model.forward(t, t.constant(feats), index), labels, mask);
      });
      ++configs;
      if (rep.worst_rel > worst) {
        worst = rep.worst_rel;
        where = std::string(to_string(kind)) + " " + to_string(cfg.flags) + " " + rep.worst_where;
      }
    }
  }
  return {worst < 1e-4, std::to_string(configs) + " configs, worst relative error " +
                            fmt("%.2e", worst) + " at " + where};
}

Outcome operator_identities() {
  double sym = 0.0, split = 0.0, ident = 0.0, min_eig = 1e300, norm_lo = 1e300, norm_hi = -1e300;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SplitMix64 rng(7000 + seed);
    const std::size_t n = 2 + rng.below(29), d = 1 + rng.below(4);
    const Graph g = testing::random_graph(n, 0.2, rng, rng.below(2) == 0);
    const CellularSheaf s = CellularSheaf::random(g, d, rng);
    const Mat lap = to_eigen(assemble_laplacian(g, s).matrix);
    const Mat adj = to_eigen(assemble_adjacency(g, s).matrix);
    sym = std::max(sym, (lap - lap.transpose()).cwiseAbs().maxCoeff());
    Mat diag = Mat::Zero(n * d, n * d);
    for (std::size_t v = 0; v < n; ++v) diag.block(v * d, v * d, d, d) = lap.block(v * d, v * d, d, d);
    split = std::max(split, (lap - (diag - adj)).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat>(lap).eigenvalues().minCoeff());

    const Mat id_lap = to_eigen(assemble_laplacian(g, CellularSheaf::identity(g, d)).matrix);
    Mat graph_lap = Mat::Zero(n, n);
    for (auto [a, b] : g.edges()) {
      graph_lap(a, a) += 1;
      graph_lap(b, b) += 1;
      graph_lap(a, b) -= 1;
      graph_lap(b, a) -= 1;
    }
    Mat kron = Mat::Zero(n * d, n * d);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) kron.block(u * d, v * d, d, d) = graph_lap(u, v) * Mat::Identity(d, d);
    ident = std::max(ident, (id_lap - kron).cwiseAbs().maxCoeff());

    const Mat normed = to_eigen(normalize(assemble_laplacian(g, s), g, s, Normalization::stalk_block).matrix);
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Mat>(normed).eigenvalues();
    norm_lo = std::min(norm_lo, ev.minCoeff());
    norm_hi = std::max(norm_hi, ev.maxCoeff());
  }
  const bool pass = sym <= 1e-12 && min_eig >= -1e-9 && split <= 1e-12 && ident == 0.0 &&
                    norm_lo >= -1e-9 && norm_hi <= 2.0 + 1e-9;
  return {pass, "50 sheaves: asym " + fmt("%.1e", sym) + ", min eig " + fmt("%.2e", min_eig) + ", |L-(D-A)| " +
                    fmt("%.1e", split) + ", identity-sheaf gap " + fmt("%.1e", ident) + ", normalised spectrum [" +
                    fmt("%.2e", norm_lo) + ", " + fmt("%.6f", norm_hi) + "]"};
}

Outcome diffusion_properties() {
  int increases = 0;
  double fixed_gap = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng(9000 + seed);
    const std::size_t n = 4 + rng.below(27), d = 1 + rng.below(4);
    const Graph g = testing::random_graph(n, 0.2, rng);
    const CellularSheaf s = CellularSheaf::random(g, d, rng);
    const BlockOperator delta = normalize(assemble_laplacian(g, s), g, s, Normalization::stalk_block);
    Tensor x = testing::random_tensor({n, d, 3}, rng);
    double energy = dirichlet_energy(x, delta), norm = laplacian_signal_norm(x, delta);
    for (int t = 0; t < 200; ++t) {
      x = linear_diffusion_step(x, delta);
      const double e = dirichlet_energy(x, delta), r = laplacian_signal_norm(x, delta);
      increases += e > energy + 1e-12 * (1.0 + energy);
      increases += r > norm + 1e-12 * (1.0 + norm);
      energy = e;
      norm = r;
    }

    // Kernel of the normalised operator, from its eigendecomposition; project a
    // random signal onto it and step once.
    const Mat m = to_eigen(delta.matrix);
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n * d);
    Eigen::VectorXd r(n * d);
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = rng.normal();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      if (std::abs(es.eigenvalues()(i)) < 1e-9) z += es.eigenvectors().col(i).dot(r) * es.eigenvectors().col(i);
    Tensor k(Shape{n, d, 1});
    for (std::size_t i = 0; i < n * d; ++i) k.data()[i] = z(i);
    const Tensor stepped = linear_diffusion_step(k, delta);
    for (std::size_t i = 0; i < n * d; ++i) fixed_gap = std::max(fixed_gap, std::abs(stepped.data()[i] - k.data()[i]));
  }
  // An identity sheaf always has a kernel (sqrt-degree weighted constants), so the fixed-point
  // check never runs on empty kernels alone.
  SplitMix64 rng(77);
  const Graph g = testing::random_graph(25, 0.2, rng);
  const CellularSheaf id = CellularSheaf::identity(g, 3);
  const BlockOperator delta = normalize(assemble_laplacian(g, id), g, id, Normalization::stalk_block);
  Tensor k(Shape{25, 3, 2});
  for (std::uint32_t v = 0; v < 25; ++v)
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t c = 0; c < 2; ++c) k.at(v, s, c) = std::sqrt(double(g.degree(v))) * (1.0 + s - c);
  const Tensor stepped = linear_diffusion_step(k, delta);
  for (std::size_t i = 0; i < k.size(); ++i) fixed_gap = std::max(fixed_gap, std::abs(stepped.data()[i] - k.data()[i]));
  return {increases == 0 && fixed_gap <= 1e-10,
          "20 instances x 200 steps: " + std::to_string(increases) + " increases, kernel drift " + fmt("%.1e", fixed_gap)};
}

Outcome benchmark_statistics() {
  bool g0_clean = true, constant = true, in_range = true, monotone = true;
  std::size_t lo = SIZE_MAX, hi = 0;
  std::vector<double> mean_h(11, 0.0);
  for (std::uint64_t seed = 42; seed <= 47; ++seed) {
    std::size_t edges = 0;
    for (int level = 0; level <= 10; ++level) {
      SyntheticConfig c;
      c.level = level;
      c.seed = seed;
      const DatasetBundle b = generate(c);
      const double h = heterophily_fraction(b.graph, b.labels);
      mean_h[level] += h / 6.0;
      if (level == 0) {
        edges = b.graph.num_edges();
        g0_clean = g0_clean && h == 0.0;
      }
      constant = constant && b.graph.num_edges() == edges;
      lo = std::min(lo, b.graph.num_edges());
      hi = std::max(hi, b.graph.num_edges());
    }
  }
  in_range = lo >= 7000 && hi <= 7600;
  for (int l = 1; l <= 10; ++l) monotone = monotone && mean_h[l] >= mean_h[l - 1];
  std::string curve;
  for (int l = 0; l <= 10; l += 5) curve += (l ? ", G" : "G") + std::to_string(l) + " " + fmt("%.3f", mean_h[l]);
  return {g0_clean && constant && in_range && monotone,
          std::string("G0 cross edges ") + (g0_clean ? "0" : "nonzero") + ", edge count " +
              (constant ? "constant" : "varies") + " per seed, range [" + std::to_string(lo) + ", " +
              std::to_string(hi) + "], heterophily " + (monotone ? "non-decreasing" : "NOT monotone") + " (" + curve + ")"};
}

Outcome parameter_counts() {
  struct Row {
    const char* label;
    ModelFamily family;
    MapKind map;
    LayerFlags flags;
    std::size_t layers;
    std::size_t paper;
    bool exact;
  };
  const Row rows[] = {
      {"MLP L2", ModelFamily::mlp, MapKind::diagonal, {}, 2, 111, true},
      {"NSD diag L16", ModelFamily::nsd, MapKind::diagonal, {}, 16, 2655, false},
      {"DNSD diag L16", ModelFamily::dnsd, MapKind::diagonal, {}, 16, 5007, false},
      {"DNSD diag+gate L16", ModelFamily::dnsd, MapKind::diagonal, {false, false, true}, 16, 5215, false},
      {"DNSD full L16", ModelFamily::dnsd, MapKind::full, {}, 16, 12111, false},
  };
  bool pass = true;
  std::string detail;
  for (const Row& r : rows) {
    ModelConfig c;
    c.family = r.family;
    c.map = r.map;
    c.flags = r.flags;
    c.layers = r.layers;
    const std::size_t got = Model(c).count_parameters().total;
    const double dev = 100.0 * (double(got) - double(r.paper)) / double(r.paper);
    pass = pass && (r.exact ? got == r.paper : std::abs(dev) <= 5.0);
    if (!detail.empty()) detail += ", ";
    detail += std::string(r.label) + " " + std::to_string(got) + "/" + std::to_string(r.paper) + " (" +
              fmt("%+.2f%%", dev) + ")";
  }
  return {pass, detail + "; shortfall is one scalar eps per layer where the table counts d"};
}

}  // namespace

int main() {
  tune_allocator();
  Runner runner;
  runner.run(1, "gradient suite", 120, gradient_suite);
  runner.run(2, "operator identities", 60, operator_identities);
  runner.run(3, "diffusion properties", 60, diffusion_properties);
  runner.run(4, "benchmark statistics", 60, benchmark_statistics);
  runner.run(5, "parameter counts", 10, parameter_counts);
  return runner.failures() == 0 ? 0 : 1;
}

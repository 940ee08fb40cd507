#pragma once

#include <vector>

#include "dnsd/graph.hpp"
#include "dnsd/rng.hpp"
#include "dnsd/tensor.hpp"

namespace dnsd::testing {

/// Erdős–Rényi graph plus a spanning path so that no node is isolated unless n == 1.
inline Graph random_graph(std::size_t n, double p, SplitMix64& rng, bool connect = true) {
  std::vector<Edge> edges;
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v)
      if ((connect && v == u + 1) || rng.uniform() < p) edges.emplace_back(u, v);
  return Graph(n, std::move(edges));
}

inline Tensor random_tensor(Shape shape, SplitMix64& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

}  // namespace dnsd::testing

#include "dnsd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dnsd {

Graph::Graph(std::size_t n, std::vector<Edge> edges) : n_(n), degree_(n, 0) {
  for (Edge& e : edges) {
    if (e.first == e.second) {
      throw GraphError("graph: self-loop at node " + std::to_string(e.first));
    }
    if (e.first >= n || e.second >= n) {
      throw GraphError("graph: edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                       ") out of range for " + std::to_string(n) + " nodes");
    }
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  if (auto it = std::adjacent_find(edges.begin(), edges.end()); it != edges.end()) {
    throw GraphError("graph: duplicate edge (" + std::to_string(it->first) + "," +
                     std::to_string(it->second) + ")");
  }
  for (const Edge& e : edges) {
    ++degree_[e.first];
    ++degree_[e.second];
  }
  edges_ = std::move(edges);
}

MessageIndex MessageIndex::from_graph(const Graph& g) {
  const std::size_t m = g.num_edges();
  std::vector<std::uint32_t> recv(2 * m), send(2 * m), rev(2 * m);
  std::vector<double> w(2 * m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto [a, b] = g.edges()[k];
    const double weight =
        1.0 / std::sqrt(normalised_degree(g.degree(a)) * normalised_degree(g.degree(b)));
    recv[2 * k] = a;
    send[2 * k] = b;
    recv[2 * k + 1] = b;
    send[2 * k + 1] = a;
    rev[2 * k] = static_cast<std::uint32_t>(2 * k + 1);
    rev[2 * k + 1] = static_cast<std::uint32_t>(2 * k);
    w[2 * k] = weight;
    w[2 * k + 1] = weight;
  }
  MessageIndex idx;
  idx.num_nodes = g.num_nodes();
  idx.receivers = ad::make_index(std::move(recv));
  idx.senders = ad::make_index(std::move(send));
  idx.reverse = ad::make_index(std::move(rev));
  idx.weights = std::make_shared<const std::vector<double>>(std::move(w));
  return idx;
}

}  // namespace dnsd

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dnsd/autodiff.hpp"

namespace dnsd {

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Edge = std::pair<std::uint32_t, std::uint32_t>;

/// Simple undirected graph. Edges are stored once with u < v, sorted.
class Graph {
 public:
  Graph() = default;
  /// Accepts either orientation; rejects self-loops, duplicates and out-of-range nodes.
  Graph(std::size_t n, std::vector<Edge> edges);

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  std::size_t degree(std::uint32_t v) const { return degree_.at(v); }
  const std::vector<std::size_t>& degrees() const noexcept { return degree_; }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> degree_;
};

/// Directed view of a graph for message passing. Undirected edge k = (a, b), a < b,
/// becomes directed edge 2k = (a → b) and 2k+1 = (b → a). For a directed edge
/// (u → v), u is the receiver (it collects the message) and v the sender.
struct MessageIndex {
  std::size_t num_nodes = 0;
  ad::IndexList receivers;
  ad::IndexList senders;
  /// reverse[e] is the index of the oppositely oriented edge.
  ad::IndexList reverse;
  /// d̃_u^{-1/2} d̃_v^{-1/2} with d̃ = max(1, deg).
  std::shared_ptr<const std::vector<double>> weights;

  std::size_t num_directed() const noexcept { return receivers->size(); }

  static MessageIndex from_graph(const Graph& g);
};

/// max(1, deg(v)) normalisation degree.
inline double normalised_degree(std::size_t deg) noexcept {
  return deg == 0 ? 1.0 : static_cast<double>(deg);
}

}  // namespace dnsd

#pragma once

#include <string>
#include <vector>

namespace lgocv {

// Undirected simple graph over vertices 0..n-1. Parallel edges collapse.
class Graph {
 public:
  explicit Graph(int n);

  static Graph from_edges(int n, const std::vector<std::pair<int, int>>& edges);
  // Text format: first line "n <count>", then one "i j" edge per line with
  // 1-based vertex ids. Self loops and out-of-range ids are rejected with the
  // offending line number.
  static Graph parse(const std::string& text);
  static Graph load(const std::string& path);
  static Graph rook_lattice(int rows, int cols);

  int n() const { return static_cast<int>(adj_.size()); }
  int edge_count() const { return edges_; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }
  const std::vector<int>& neighbors(int v) const { return adj_[v]; }

  void add_edge(int a, int b);

  int component_count() const;
  std::vector<int> component_labels() const;  // 0-based component id per vertex

  // Vertices within graph distance <= k of any seed, seeds included (k >= 0).
  std::vector<int> k_order_neighbors(const std::vector<int>& seeds, int k) const;

 private:
  std::vector<std::vector<int>> adj_;
  int edges_ = 0;
};

}  // namespace lgocv

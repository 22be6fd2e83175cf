#include "core/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace lgocv {

Graph::Graph(int n) {
  if (n <= 0) throw_validation(errc::empty_graph, "graph needs at least one vertex");
  adj_.resize(n);
}

void Graph::add_edge(int a, int b) {
  const int n = this->n();
  if (a < 0 || a >= n || b < 0 || b >= n) {
    throw_validation(errc::index_out_of_range, "edge endpoint out of range");
  }
  if (a == b) throw_validation(errc::bad_param, "self loops are not allowed");
  if (std::find(adj_[a].begin(), adj_[a].end(), b) != adj_[a].end()) return;
  adj_[a].push_back(b);
  adj_[b].push_back(a);
  ++edges_;
}

Graph Graph::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
  Graph g(n);
  for (const auto& [a, b] : edges) g.add_edge(a, b);
  for (auto& nb : g.adj_) std::sort(nb.begin(), nb.end());
  return g;
}

Graph Graph::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int n = -1;
  std::vector<std::pair<int, int>> edges;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    if (n < 0) {
      std::string tag;
      if (!(ls >> tag >> n) || tag != "n" || n <= 0) {
        throw_validation(errc::parse_error,
                         "line " + std::to_string(line_no) + ": expected header 'n <count>'");
      }
      continue;
    }
    std::string first;
    if (!(ls >> first)) continue;  // blank line
    int a = 0, b = 0;
    std::istringstream edge_line(line);
    if (!(edge_line >> a >> b)) {
      throw_validation(errc::parse_error,
                       "line " + std::to_string(line_no) + ": expected edge 'i j'");
    }
    std::string extra;
    if (edge_line >> extra) {
      throw_validation(errc::parse_error,
                       "line " + std::to_string(line_no) + ": trailing tokens after edge");
    }
    if (a < 1 || a > n || b < 1 || b > n) {
      throw_validation(errc::parse_error, "line " + std::to_string(line_no) +
                                              ": vertex id out of range 1.." + std::to_string(n));
    }
    if (a == b) {
      throw_validation(errc::parse_error,
                       "line " + std::to_string(line_no) + ": self loop rejected");
    }
    edges.emplace_back(a - 1, b - 1);
  }
  if (n < 0) throw_validation(errc::parse_error, "empty graph file");
  return from_edges(n, edges);
}

Graph Graph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_validation(errc::parse_error, "cannot open graph file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

Graph Graph::rook_lattice(int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw_validation(errc::bad_param, "lattice dimensions must be positive");
  Graph g(rows * cols);
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) g.add_edge(id(r, c), id(r, c + 1));
      if (r + 1 < rows) g.add_edge(id(r, c), id(r + 1, c));
    }
  }
  for (auto& nb : g.adj_) std::sort(nb.begin(), nb.end());
  return g;
}

std::vector<int> Graph::component_labels() const {
  std::vector<int> label(n(), -1);
  int next = 0;
  std::deque<int> queue;
  for (int s = 0; s < n(); ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    queue.push_back(s);
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int w : adj_[v]) {
        if (label[w] < 0) {
          label[w] = next;
          queue.push_back(w);
        }
      }
    }
    ++next;
  }
  return label;
}

int Graph::component_count() const {
  const auto labels = component_labels();
  return labels.empty() ? 0 : 1 + *std::max_element(labels.begin(), labels.end());
}

std::vector<int> Graph::k_order_neighbors(const std::vector<int>& seeds, int k) const {
  if (k < 0) throw_validation(errc::bad_param, "neighborhood order must be nonnegative");
  std::vector<int> dist(n(), -1);
  std::deque<int> queue;
  for (int s : seeds) {
    if (s < 0 || s >= n()) throw_validation(errc::index_out_of_range, "seed vertex out of range");
    if (dist[s] != 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    if (dist[v] >= k) continue;
    for (int w : adj_[v]) {
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  std::vector<int> out;
  for (int v = 0; v < n(); ++v) {
    if (dist[v] >= 0) out.push_back(v);
  }
  return out;
}

}  // namespace lgocv

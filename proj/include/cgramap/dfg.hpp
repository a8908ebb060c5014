//===-- dfg.hpp - dataflow graph input representation ---------------------===//
//
// Loop body as a dataflow graph: operation nodes plus data edges annotated
// with a loop-carried distance (0 = same-iteration dependency, >=1 = value
// crosses that many iterations).
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_DFG_HPP
#define CGRAMAP_DFG_HPP

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cgramap {

using NodeId = int;

struct DfgNode {
  NodeId id = 0;
  std::string op;
};

struct DfgEdge {
  NodeId src = 0;
  NodeId dst = 0;
  int distance = 0;

  bool is_back_edge() const { return distance > 0; }
};

/// Thrown for malformed input bytes.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a structurally parsed graph violates a graph invariant; the
/// message names the invariant and the offending element.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DataflowGraph {
public:
  DataflowGraph() = default;
  DataflowGraph(std::vector<DfgNode> nodes, std::vector<DfgEdge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    reindex();
  }

  const std::vector<DfgNode> &nodes() const { return nodes_; }
  const std::vector<DfgEdge> &edges() const { return edges_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

  bool has_node(NodeId id) const { return index_.count(id) != 0; }

  /// Dense position of a node id in nodes(); ids need not start at 0.
  int index_of(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw ValidationError("unknown node id " + std::to_string(id));
    return it->second;
  }

  /// Distance-0 successors per node index.
  std::vector<std::vector<int>> forward_adjacency() const {
    std::vector<std::vector<int>> adj(nodes_.size());
    for (const DfgEdge &e : edges_)
      if (e.distance == 0)
        adj[index_of(e.src)].push_back(index_of(e.dst));
    return adj;
  }

private:
  void reindex() {
    index_.clear();
    for (size_t i = 0; i < nodes_.size(); ++i)
      index_[nodes_[i].id] = static_cast<int>(i);
  }

  std::vector<DfgNode> nodes_;
  std::vector<DfgEdge> edges_;
  std::map<NodeId, int> index_;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json &j,
                                std::initializer_list<const char *> allowed,
                                const char *what) {
  for (const auto &item : j.items()) {
    bool known = false;
    for (const char *k : allowed)
      if (item.key() == k)
        known = true;
    if (!known)
      throw ParseError(std::string("unknown key \"") + item.key() + "\" in " +
                       what);
  }
}

inline int require_int(const nlohmann::json &j, const char *key,
                       const char *what) {
  if (!j.contains(key))
    throw ParseError(std::string("missing key \"") + key + "\" in " + what);
  if (!j[key].is_number_integer())
    throw ParseError(std::string("key \"") + key + "\" in " + what +
                     " is not an integer");
  return j[key].get<int>();
}

} // namespace detail

/// Cycle check on the distance-0 subgraph. Returns std::nullopt when acyclic,
/// otherwise one witnessed cycle as a node-id sequence [v0, v1, ..., v0-pred]
/// such that each element has a distance-0 edge to the next and the last back
/// to the first.
inline std::optional<std::vector<NodeId>> validate_dag(const DataflowGraph &g) {
  const int n = g.node_count();
  auto adj = g.forward_adjacency();
  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<int> state(n, 0), parent(n, -1);
  for (int root = 0; root < n; ++root) {
    if (state[root] != 0)
      continue;
    // Iterative DFS keeping an explicit stack of (node, next-child).
    std::vector<std::pair<int, size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto &[v, next] = stack.back();
      if (next < adj[v].size()) {
        int w = adj[v][next++];
        if (state[w] == 1) {
          // Found a cycle: walk the stack back from v to w.
          std::vector<NodeId> cycle{g.nodes()[w].id};
          for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            if (it->first == w)
              break;
            cycle.insert(cycle.begin() + 1, g.nodes()[it->first].id);
          }
          return cycle;
        }
        if (state[w] == 0) {
          state[w] = 1;
          stack.emplace_back(w, 0);
        }
      } else {
        state[v] = 2;
        stack.pop_back();
      }
    }
  }
  return std::nullopt;
}

/// Full invariant check; throws ValidationError naming the first violation.
inline void validate_graph(const DataflowGraph &g) {
  if (g.nodes().empty())
    throw ValidationError("graph has no nodes");
  std::map<NodeId, int> seen;
  for (const DfgNode &n : g.nodes()) {
    if (n.id < 0)
      throw ValidationError("negative node id " + std::to_string(n.id));
    if (n.op.empty())
      throw ValidationError("empty opcode on node " + std::to_string(n.id));
    if (++seen[n.id] > 1)
      throw ValidationError("duplicate node id " + std::to_string(n.id));
  }
  std::map<std::tuple<NodeId, NodeId, int>, int> edge_seen;
  for (const DfgEdge &e : g.edges()) {
    const std::string where = " on edge " + std::to_string(e.src) + "->" +
                              std::to_string(e.dst);
    if (!g.has_node(e.src) || !g.has_node(e.dst))
      throw ValidationError("edge endpoint is not a node" + where);
    if (e.distance < 0)
      throw ValidationError("negative distance" + where);
    if (e.src == e.dst && e.distance == 0)
      throw ValidationError("self-loop with distance 0" + where);
    if (++edge_seen[{e.src, e.dst, e.distance}] > 1)
      throw ValidationError("duplicate edge" + where + " distance " +
                            std::to_string(e.distance));
  }
  if (auto cycle = validate_dag(g)) {
    std::string msg = "distance-0 subgraph has a cycle:";
    for (NodeId v : *cycle)
      msg += " " + std::to_string(v);
    throw ValidationError(msg);
  }
}

/// Parses and validates the DFG JSON form
/// {"nodes":[{"id":0,"op":"add"},...],"edges":[{"src":0,"dst":1,"distance":0},...]}.
/// Unknown keys are rejected.
inline DataflowGraph load_dfg(std::istream &in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(std::string("malformed DFG JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ParseError("DFG JSON root is not an object");
  detail::reject_unknown_keys(j, {"nodes", "edges"}, "DFG");
  if (!j.contains("nodes") || !j["nodes"].is_array())
    throw ParseError("DFG JSON is missing a \"nodes\" array");
  if (!j.contains("edges") || !j["edges"].is_array())
    throw ParseError("DFG JSON is missing an \"edges\" array");

  std::vector<DfgNode> nodes;
  for (const auto &nj : j["nodes"]) {
    if (!nj.is_object())
      throw ParseError("node entry is not an object");
    detail::reject_unknown_keys(nj, {"id", "op"}, "node");
    DfgNode n;
    n.id = detail::require_int(nj, "id", "node");
    if (!nj.contains("op") || !nj["op"].is_string())
      throw ParseError("node " + std::to_string(n.id) +
                       " is missing a string \"op\"");
    n.op = nj["op"].get<std::string>();
    nodes.push_back(std::move(n));
  }
  std::vector<DfgEdge> edges;
  for (const auto &ej : j["edges"]) {
    if (!ej.is_object())
      throw ParseError("edge entry is not an object");
    detail::reject_unknown_keys(ej, {"src", "dst", "distance"}, "edge");
    DfgEdge e;
    e.src = detail::require_int(ej, "src", "edge");
    e.dst = detail::require_int(ej, "dst", "edge");
    e.distance = detail::require_int(ej, "distance", "edge");
    edges.push_back(e);
  }
  DataflowGraph g(std::move(nodes), std::move(edges));
  validate_graph(g);
  return g;
}

/// Canonical serialized form: nodes sorted by id, edges by (src, dst,
/// distance). load_dfg(save_dfg(g)) reproduces g's canonical form.
inline nlohmann::json dfg_to_json(const DataflowGraph &g) {
  std::vector<DfgNode> nodes = g.nodes();
  std::sort(nodes.begin(), nodes.end(),
            [](const DfgNode &a, const DfgNode &b) { return a.id < b.id; });
  std::vector<DfgEdge> edges = g.edges();
  std::sort(edges.begin(), edges.end(), [](const DfgEdge &a, const DfgEdge &b) {
    return std::tie(a.src, a.dst, a.distance) <
           std::tie(b.src, b.dst, b.distance);
  });
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const DfgNode &n : nodes)
    j["nodes"].push_back({{"id", n.id}, {"op", n.op}});
  j["edges"] = nlohmann::json::array();
  for (const DfgEdge &e : edges)
    j["edges"].push_back(
        {{"src", e.src}, {"dst", e.dst}, {"distance", e.distance}});
  return j;
}

inline void save_dfg(const DataflowGraph &g, std::ostream &out) {
  out << dfg_to_json(g).dump(2) << "\n";
}

} // namespace cgramap

#endif // CGRAMAP_DFG_HPP

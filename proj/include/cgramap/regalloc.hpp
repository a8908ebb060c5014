//===-- regalloc.hpp - cyclic liveness and interference coloring ----------===//
//
// Register demand is validated after solving: the encoding is register
// oblivious. A produced value occupies a PE-local register only when some
// consumer sits on the producer's own PE with an effective gap other than 1
// (gap-1 consumers and neighbor routes read the output register, whose
// protection the encoding already enforces). A value lives from the slot
// after production through its last same-PE consuming slot, cyclically over
// the kernel; per-PE interference graphs are colored exactly with k colors
// by backtracking. Failure is a value, never an over-budget coloring.
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_REGALLOC_HPP
#define CGRAMAP_REGALLOC_HPP

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cgramap/arch.hpp"
#include "cgramap/dfg.hpp"
#include "cgramap/encode.hpp"
#include "cgramap/mapping.hpp"

namespace cgramap {

enum class ValueRoute { register_file, output_register };

struct LiveValue {
  NodeId producer = 0;
  PeId pe = 0;
  int start = 0; // production slot c_s
  int length = 1; // kernel cycles until the last consumer, 1..ii
  ValueRoute route = ValueRoute::output_register;

  /// Occupied kernel slots: (start, start+length] modulo ii.
  std::vector<int> slots(int ii) const {
    std::vector<int> out;
    for (int j = 1; j <= length; ++j)
      out.push_back((start + j) % ii);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

/// One LiveValue per produced value. The route is register_file when any
/// same-PE consumer has an effective gap other than 1 (then length is the
/// maximum such gap); otherwise the value only ever transits the output
/// register and does not participate in coloring.
inline std::vector<LiveValue> extract_live_values(const DataflowGraph &g,
                                                  const Mapping &m) {
  std::vector<LiveValue> out;
  for (const DfgNode &n : g.nodes()) {
    const auto prod = m.placement_of(n.id);
    if (!prod)
      continue;
    int file_gap = 0;
    int any_gap = 0;
    for (const DfgEdge &e : g.edges()) {
      if (e.src != n.id)
        continue;
      const auto cons = m.placement_of(e.dst);
      if (!cons)
        continue;
      // Same formula as the encoder's consumption latency; for a self-edge
      // the placements coincide and this reduces to distance * ii.
      const int gap = (prod->iter - cons->iter + e.distance) * m.ii +
                      (cons->cycle - prod->cycle);
      any_gap = std::max(any_gap, gap);
      if (cons->pe == prod->pe && gap != 1)
        file_gap = std::max(file_gap, gap);
    }
    if (file_gap > 0)
      out.push_back({n.id, prod->pe, prod->cycle, file_gap,
                     ValueRoute::register_file});
    else if (any_gap > 0)
      out.push_back({n.id, prod->pe, prod->cycle, any_gap,
                     ValueRoute::output_register});
  }
  return out;
}

/// Per-PE conflict graph over register_file values; an edge joins two values
/// whose cyclic live intervals share a slot.
struct InterferenceGraph {
  std::map<PeId, std::vector<LiveValue>> values;
  std::map<PeId, std::vector<std::pair<int, int>>> edges; // index pairs
};

inline InterferenceGraph build_interference(const std::vector<LiveValue> &all,
                                            int ii) {
  InterferenceGraph graph;
  for (const LiveValue &v : all)
    if (v.route == ValueRoute::register_file)
      graph.values[v.pe].push_back(v);
  for (auto &[pe, vals] : graph.values) {
    std::sort(vals.begin(), vals.end(),
              [](const LiveValue &a, const LiveValue &b) {
                return a.producer < b.producer;
              });
    auto &es = graph.edges[pe];
    for (size_t i = 0; i < vals.size(); ++i)
      for (size_t j = i + 1; j < vals.size(); ++j) {
        const auto si = vals[i].slots(ii);
        const auto sj = vals[j].slots(ii);
        std::vector<int> common;
        std::set_intersection(si.begin(), si.end(), sj.begin(), sj.end(),
                              std::back_inserter(common));
        if (!common.empty())
          es.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
  }
  return graph;
}

/// Exact k-coloring by backtracking (per-PE graphs are tiny). Returns the
/// color per vertex index or nullopt when no k-coloring exists.
inline std::optional<std::vector<int>>
color(const std::vector<std::pair<int, int>> &edges, int vertex_count, int k) {
  std::vector<std::vector<int>> adj(vertex_count);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> colors(vertex_count, -1);
  std::function<bool(int)> assign = [&](int v) -> bool {
    if (v == vertex_count)
      return true;
    for (int c = 0; c < k; ++c) {
      bool clash = false;
      for (int w : adj[v])
        if (colors[w] == c)
          clash = true;
      if (clash)
        continue;
      colors[v] = c;
      if (assign(v + 1))
        return true;
      colors[v] = -1;
    }
    return false;
  };
  if (!assign(0))
    return std::nullopt;
  return colors;
}

struct RegallocFailure {
  PeId pe = 0;
  int demand = 0; // vertex count of the uncolorable graph
};

/// Colors every PE's interference graph with registers_per_pe colors and
/// writes the assignments into the mapping. Returns the first failing PE
/// when some graph is not colorable.
inline std::optional<RegallocFailure>
allocate_registers(const DataflowGraph &g, const CgraSpec &spec, Mapping &m) {
  const auto values = extract_live_values(g, m);
  const auto graph = build_interference(values, m.ii);
  m.registers.clear();
  for (const auto &[pe, vals] : graph.values) {
    const auto edges_it = graph.edges.find(pe);
    const auto coloring =
        color(edges_it->second, static_cast<int>(vals.size()),
              spec.registers_per_pe);
    if (!coloring)
      return RegallocFailure{pe, static_cast<int>(vals.size())};
    for (size_t i = 0; i < vals.size(); ++i)
      m.registers.push_back({pe, vals[i].producer, (*coloring)[i]});
  }
  m.sort_canonical();
  return std::nullopt;
}

} // namespace cgramap

#endif // CGRAMAP_REGALLOC_HPP

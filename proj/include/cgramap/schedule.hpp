//===-- schedule.hpp - ASAP/ALAP/mobility schedules and the kernel fold ---===//
//
// Level schedules are computed on the distance-0 subgraph only; the minimum
// initiation interval combines the resource bound ceil(N/P) with the
// recurrence bound max over elementary cycles of ceil(length/distance).
//
// The Kernel Mobility Schedule folds the mobility schedule modulo II. The
// fold anchors the last mobility row at kernel cycle ii-1:
//
//   offset = K*ii - T,  K = ceil(T/ii)
//   row t  ->  cycle (t + offset) mod ii,  iteration label floor((T-1-t)/ii)
//
// Larger labels belong to later loop iterations entering the kernel. The map
// is a bijection between rows t and (cycle, label) pairs; unfold() inverts it.
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_SCHEDULE_HPP
#define CGRAMAP_SCHEDULE_HPP

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cgramap/arch.hpp"
#include "cgramap/dfg.hpp"

namespace cgramap {

/// Time-indexed rows of node ids (sorted). Used for ASAP, ALAP and MS.
struct LevelSchedule {
  std::vector<std::vector<NodeId>> rows;

  int length() const { return static_cast<int>(rows.size()); }
};

using MobilitySchedule = LevelSchedule;

struct MiiReport {
  int res_ii = 1;
  int rec_ii = 0;
  int mii = 1;
};

namespace detail {

/// Topological order of the distance-0 subgraph (node indices).
inline std::vector<int> topo_order(const DataflowGraph &g) {
  const int n = g.node_count();
  auto adj = g.forward_adjacency();
  std::vector<int> indeg(n, 0);
  for (int v = 0; v < n; ++v)
    for (int w : adj[v])
      ++indeg[w];
  std::vector<int> order;
  std::vector<int> ready;
  for (int v = 0; v < n; ++v)
    if (indeg[v] == 0)
      ready.push_back(v);
  while (!ready.empty()) {
    int v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (int w : adj[v])
      if (--indeg[w] == 0)
        ready.push_back(w);
  }
  if (static_cast<int>(order.size()) != n)
    throw ValidationError("distance-0 subgraph is cyclic");
  return order;
}

inline LevelSchedule levels_to_schedule(const DataflowGraph &g,
                                        const std::vector<int> &level, int T) {
  LevelSchedule s;
  s.rows.assign(T, {});
  for (int v = 0; v < g.node_count(); ++v)
    s.rows[level[v]].push_back(g.nodes()[v].id);
  for (auto &row : s.rows)
    std::sort(row.begin(), row.end());
  return s;
}

} // namespace detail

/// Earliest feasible time per node: 0 for sources, else one past the latest
/// distance-0 predecessor.
inline LevelSchedule asap(const DataflowGraph &g) {
  const int n = g.node_count();
  auto adj = g.forward_adjacency();
  auto order = detail::topo_order(g);
  std::vector<int> level(n, 0);
  for (int v : order)
    for (int w : adj[v])
      level[w] = std::max(level[w], level[v] + 1);
  int T = 0;
  for (int v = 0; v < n; ++v)
    T = std::max(T, level[v] + 1);
  return detail::levels_to_schedule(g, level, T);
}

/// Latest feasible time per node given T rows: T-1 for sinks, else one before
/// the earliest distance-0 successor.
inline LevelSchedule alap(const DataflowGraph &g, int T) {
  const int n = g.node_count();
  auto adj = g.forward_adjacency();
  auto order = detail::topo_order(g);
  std::vector<int> level(n, T - 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (int w : adj[*it])
      level[*it] = std::min(level[*it], level[w] - 1);
  for (int v = 0; v < n; ++v)
    if (level[v] < 0)
      throw ValidationError("ALAP row count is below the critical path");
  return detail::levels_to_schedule(g, level, T);
}

/// Node n is present at every t with ASAP(n) <= t <= ALAP(n).
inline MobilitySchedule mobility(const LevelSchedule &asap_sched,
                                 const LevelSchedule &alap_sched) {
  const int T = asap_sched.length();
  if (alap_sched.length() != T)
    throw ValidationError("ASAP and ALAP row counts differ");
  std::map<NodeId, std::pair<int, int>> interval;
  for (int t = 0; t < T; ++t)
    for (NodeId v : asap_sched.rows[t])
      interval[v] = {t, -1};
  for (int t = 0; t < T; ++t)
    for (NodeId v : alap_sched.rows[t]) {
      if (!interval.count(v))
        throw ValidationError("ALAP node " + std::to_string(v) +
                              " missing from ASAP");
      interval[v].second = t;
    }
  for (const auto &[v, iv] : interval)
    if (iv.second < iv.first)
      throw ValidationError("node " + std::to_string(v) +
                            " has ALAP before ASAP");
  MobilitySchedule ms;
  ms.rows.assign(T, {});
  for (const auto &[v, iv] : interval)
    for (int t = iv.first; t <= iv.second; ++t)
      ms.rows[t].push_back(v);
  for (auto &row : ms.rows)
    std::sort(row.begin(), row.end());
  return ms;
}

namespace detail {

/// Johnson-style enumeration of elementary cycles over the full edge set.
/// Parallel edges between the same node pair contribute their minimum
/// distance (the all-distance-0 combination cannot close a cycle once the
/// graph passed the DAG check). Calls sink(length, distance) per cycle.
template <typename Sink>
inline void for_each_elementary_cycle(const DataflowGraph &g, Sink &&sink) {
  const int n = g.node_count();
  // Min distance per (src,dst) node-index pair; self-loops handled directly.
  std::map<std::pair<int, int>, int> min_dist;
  for (const DfgEdge &e : g.edges()) {
    const int s = g.index_of(e.src), d = g.index_of(e.dst);
    if (s == d) {
      if (e.distance > 0)
        sink(1, e.distance);
      continue;
    }
    auto it = min_dist.find({s, d});
    if (it == min_dist.end() || e.distance < it->second)
      min_dist[{s, d}] = e.distance;
  }
  std::vector<std::vector<std::pair<int, int>>> adj(n); // (dst, min distance)
  for (const auto &[key, dist] : min_dist)
    adj[key.first].emplace_back(key.second, dist);

  std::vector<char> blocked(n, 0);
  std::vector<std::set<int>> block_map(n);
  std::vector<int> path;        // node stack
  std::vector<int> path_dist;   // distance sums along path
  std::int64_t guard = 0;

  std::function<void(int)> unblock = [&](int v) {
    blocked[v] = 0;
    for (int w : block_map[v])
      if (blocked[w])
        unblock(w);
    block_map[v].clear();
  };

  int root = 0;
  std::function<bool(int)> circuit = [&](int v) -> bool {
    if (++guard > 50'000'000)
      throw ValidationError("elementary cycle enumeration exceeded its guard");
    bool found = false;
    blocked[v] = 1;
    path.push_back(v);
    for (auto [w, dist] : adj[v]) {
      if (w < root)
        continue; // nodes below the current root belong to earlier iterations
      if (w == root) {
        const int total =
            (path_dist.empty() ? 0 : path_dist.back()) + dist;
        sink(static_cast<int>(path.size()), total);
        found = true;
      } else if (!blocked[w]) {
        path_dist.push_back((path_dist.empty() ? 0 : path_dist.back()) + dist);
        if (circuit(w))
          found = true;
        path_dist.pop_back();
      }
    }
    if (found) {
      unblock(v);
    } else {
      for (auto [w, dist] : adj[v])
        if (w >= root)
          block_map[w].insert(v);
    }
    path.pop_back();
    return found;
  };

  for (root = 0; root < n; ++root) {
    std::fill(blocked.begin(), blocked.end(), 0);
    for (auto &bm : block_map)
      bm.clear();
    circuit(root);
  }
}

} // namespace detail

/// Resource and recurrence lower bounds on the initiation interval.
/// res_ii = ceil(N / P); rec_ii maximizes ceil(length/distance) over
/// elementary cycles of the full edge set (0 when the graph has no cycles).
inline MiiReport compute_mii(const DataflowGraph &g, const CgraSpec &spec) {
  MiiReport r;
  const int n = g.node_count();
  const int p = spec.pe_count();
  r.res_ii = (n + p - 1) / p;
  r.rec_ii = 0;
  detail::for_each_elementary_cycle(g, [&](int length, int distance) {
    if (distance <= 0)
      throw ValidationError("cycle with total distance 0");
    r.rec_ii = std::max(r.rec_ii, (length + distance - 1) / distance);
  });
  r.mii = std::max({r.res_ii, r.rec_ii, 1});
  return r;
}

/// One (node, iteration-label) candidate in a kernel cycle.
struct KmsEntry {
  NodeId node = 0;
  int iter = 0;

  friend bool operator<(const KmsEntry &a, const KmsEntry &b) {
    return std::tie(a.iter, a.node) < std::tie(b.iter, b.node);
  }
  friend bool operator==(const KmsEntry &a, const KmsEntry &b) {
    return a.node == b.node && a.iter == b.iter;
  }
};

struct KernelMobilitySchedule {
  int ii = 1;
  int fold_count = 1; // K
  int source_rows = 0; // T of the folded mobility schedule
  std::vector<std::vector<KmsEntry>> slots; // indexed by kernel cycle

  int offset() const { return fold_count * ii - source_rows; }

  /// Inverse of the fold map: the mobility row an entry came from.
  int unfold(int cycle, int iter) const {
    return cycle - offset() + ii * (fold_count - 1 - iter);
  }

  bool contains(NodeId node, int cycle, int iter) const {
    if (cycle < 0 || cycle >= ii)
      return false;
    const auto &slot = slots[cycle];
    return std::find(slot.begin(), slot.end(), KmsEntry{node, iter}) !=
           slot.end();
  }
};

inline KernelMobilitySchedule build_kms(const MobilitySchedule &ms, int ii) {
  if (ii < 1)
    throw ValidationError("initiation interval must be positive");
  const int T = ms.length();
  KernelMobilitySchedule kms;
  kms.ii = ii;
  kms.fold_count = std::max(1, (T + ii - 1) / ii);
  kms.source_rows = T;
  kms.slots.assign(ii, {});
  const int offset = kms.offset();
  for (int t = 0; t < T; ++t) {
    const int c = (t + offset) % ii;
    const int it = (T - 1 - t) / ii;
    for (NodeId v : ms.rows[t])
      kms.slots[c].push_back({v, it});
  }
  for (auto &slot : kms.slots)
    std::sort(slot.begin(), slot.end());
  return kms;
}

// --- table rendering (golden-file format) --------------------------------

inline std::string format_level_schedule(const LevelSchedule &s,
                                         const std::string &title) {
  std::ostringstream out;
  out << title << "\n";
  for (int t = 0; t < s.length(); ++t) {
    out << t << ":";
    for (NodeId v : s.rows[t])
      out << " " << v;
    out << "\n";
  }
  return out.str();
}

inline std::string format_kms(const KernelMobilitySchedule &kms) {
  std::ostringstream out;
  out << "KMS ii=" << kms.ii << " folds=" << kms.fold_count << "\n";
  for (int c = 0; c < kms.ii; ++c) {
    out << c << ":";
    for (const KmsEntry &e : kms.slots[c])
      out << " " << e.node << "_" << e.iter;
    out << "\n";
  }
  return out.str();
}

} // namespace cgramap

#endif // CGRAMAP_SCHEDULE_HPP

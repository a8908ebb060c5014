//===-- encode.hpp - CNF encoding of placement, timing and routing --------===//
//
// One Boolean variable per (node occurrence in the KMS) x (PE). Three clause
// families:
//
//   C1  per node: at-least-one over all its variables plus pairwise
//       at-most-one over every unordered pair (the exactly-one constraint).
//   C2  per (pe, kernel cycle): pairwise at-most-one across distinct nodes;
//       iteration labels are irrelevant, the physical conflict is one
//       instruction per PE per kernel slot.
//   C3  per DFG edge: a disjunction over candidate occurrence pairings of
//       routing terms. An occurrence pairing is admitted iff the labels are
//       at most one apart and the physical consumption latency
//
//           L = (it_s - it_d + distance) * ii + (c_d - c_s)
//
//       lies in [1, ii]; L > ii would mean the producer's next execution
//       overwrites the value before it is read. The effective gap g equals L
//       (the cyclic kernel distance with 0 promoted to ii). Terms:
//
//         g == 1        source and destination on the same or neighboring
//                       PEs (the output register is read the next cycle);
//         g >= 2        either both on the same PE (a local register carries
//                       the value; register allocation validates capacity),
//                       or on neighboring PEs with the source's PE idle at
//                       every intermediate kernel slot (c_s + 1 .. c_s + g-1
//                       cyclically), keeping its output register intact.
//
// The per-edge disjunction of conjunctive terms is converted to CNF by one
// auxiliary variable per term (a -> each literal, plus the disjunction of
// auxiliaries), which preserves satisfiability in this positive-polarity
// position.
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_ENCODE_HPP
#define CGRAMAP_ENCODE_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cgramap/arch.hpp"
#include "cgramap/dfg.hpp"
#include "cgramap/schedule.hpp"

namespace cgramap {

struct PlacementVar {
  NodeId node = 0;
  PeId pe = 0;
  int cycle = 0;
  int iter = 0;

  friend bool operator<(const PlacementVar &a, const PlacementVar &b) {
    return std::tie(a.node, a.cycle, a.iter, a.pe) <
           std::tie(b.node, b.cycle, b.iter, b.pe);
  }
  friend bool operator==(const PlacementVar &a, const PlacementVar &b) {
    return std::tie(a.node, a.cycle, a.iter, a.pe) ==
           std::tie(b.node, b.cycle, b.iter, b.pe);
  }
};

/// Conjunctive term of a C3 disjunction: aux_var <-> AND(lits).
struct AuxDef {
  int aux_var = 0;
  std::vector<int> lits;
};

/// Bidirectional map between placement variables and dense solver indices.
/// Placement variables occupy 1..M in (node, cycle, iter, pe) order;
/// auxiliaries follow from M+1.
class VarTable {
public:
  int add_placement(const PlacementVar &v) {
    vars_.push_back(v);
    const int idx = static_cast<int>(vars_.size());
    index_[v] = idx;
    node_vars_[v.node].push_back(idx);
    return idx;
  }

  int add_aux() { return placement_count() + static_cast<int>(++aux_count_); }

  int placement_count() const { return static_cast<int>(vars_.size()); }
  int aux_count() const { return static_cast<int>(aux_count_); }
  int total_count() const { return placement_count() + aux_count(); }

  bool is_placement(int idx) const {
    return idx >= 1 && idx <= placement_count();
  }

  const PlacementVar &var(int idx) const { return vars_.at(idx - 1); }

  std::optional<int> lookup(const PlacementVar &v) const {
    auto it = index_.find(v);
    if (it == index_.end())
      return std::nullopt;
    return it->second;
  }

  /// L(n): all variable indices of node n, ascending.
  const std::vector<int> &vars_of(NodeId n) const {
    static const std::vector<int> empty;
    auto it = node_vars_.find(n);
    return it == node_vars_.end() ? empty : it->second;
  }

  const std::vector<AuxDef> &aux_defs() const { return aux_defs_; }
  void record_aux_def(AuxDef def) { aux_defs_.push_back(std::move(def)); }

private:
  std::vector<PlacementVar> vars_;
  std::map<PlacementVar, int> index_;
  std::map<NodeId, std::vector<int>> node_vars_;
  std::vector<AuxDef> aux_defs_;
  std::int64_t aux_count_ = 0;
};

struct ClauseTag {
  enum Kind { c1_exact_one, c1_pair, c2, c3_edge, aux } kind = c1_exact_one;
  NodeId src = -1; // edge provenance for c3_edge/aux, node for c1
  NodeId dst = -1;
  int distance = -1;

  friend bool operator<(const ClauseTag &a, const ClauseTag &b) {
    return std::tie(a.kind, a.src, a.dst, a.distance) <
           std::tie(b.kind, b.src, b.dst, b.distance);
  }
};

struct Clause {
  std::vector<int> lits; // signed 1-based variable indices
  ClauseTag tag;
};

struct CnfProblem {
  int num_vars = 0;
  std::vector<Clause> clauses;

  void add(std::vector<int> lits, ClauseTag tag) {
    if (lits.empty())
      throw ValidationError("attempted to add an empty clause");
    for (int lit : lits)
      if (lit == 0 || std::abs(lit) > num_vars)
        throw ValidationError("clause references unallocated variable " +
                              std::to_string(lit));
    clauses.push_back({std::move(lits), tag});
  }
};

/// One variable per KMS occurrence per PE. L(n) spans all of node n's
/// occurrences across all PEs.
inline VarTable build_vars(const KernelMobilitySchedule &kms,
                           const CgraSpec &spec) {
  // Collect occurrences per node, then allocate in (node, cycle, iter, pe)
  // order so indices are deterministic and L(n) is contiguous.
  std::map<NodeId, std::vector<std::pair<int, int>>> occs; // (cycle, iter)
  for (int c = 0; c < kms.ii; ++c)
    for (const KmsEntry &e : kms.slots[c])
      occs[e.node].emplace_back(c, e.iter);
  VarTable vt;
  for (auto &[node, list] : occs) {
    std::sort(list.begin(), list.end());
    for (auto [cycle, iter] : list)
      for (PeId p = 0; p < spec.pe_count(); ++p)
        vt.add_placement({node, p, cycle, iter});
  }
  return vt;
}

/// C1: exactly-one per node, as one at-least-one clause plus pairwise
/// at-most-one over all unordered distinct pairs of L(n).
inline std::vector<Clause> emit_c1(const VarTable &vt) {
  std::vector<Clause> out;
  std::vector<NodeId> nodes;
  for (int i = 1; i <= vt.placement_count(); ++i)
    if (nodes.empty() || nodes.back() != vt.var(i).node)
      nodes.push_back(vt.var(i).node);
  for (NodeId n : nodes) {
    const auto &lits = vt.vars_of(n);
    std::vector<int> alo(lits.begin(), lits.end());
    out.push_back({std::move(alo), {ClauseTag::c1_exact_one, n, -1, -1}});
    for (size_t i = 0; i < lits.size(); ++i)
      for (size_t j = i + 1; j < lits.size(); ++j)
        out.push_back(
            {{-lits[i], -lits[j]}, {ClauseTag::c1_pair, n, -1, -1}});
  }
  return out;
}

/// C2: pairwise at-most-one between variables of distinct nodes sharing the
/// same (pe, kernel cycle).
inline std::vector<Clause> emit_c2(const VarTable &vt) {
  std::map<std::pair<PeId, int>, std::vector<int>> by_slot;
  for (int i = 1; i <= vt.placement_count(); ++i) {
    const PlacementVar &v = vt.var(i);
    by_slot[{v.pe, v.cycle}].push_back(i);
  }
  std::vector<Clause> out;
  for (const auto &[slot, vars] : by_slot)
    for (size_t i = 0; i < vars.size(); ++i)
      for (size_t j = i + 1; j < vars.size(); ++j) {
        if (vt.var(vars[i]).node == vt.var(vars[j]).node)
          continue; // same node handled by C1
        out.push_back({{-vars[i], -vars[j]}, {ClauseTag::c2, -1, -1, -1}});
      }
  return out;
}

/// Cyclic distance from producer slot to consumer slot within the kernel.
inline int kms_distance(int c_s, int c_d, int ii) {
  return ((c_d - c_s) % ii + ii) % ii;
}

struct Occurrence {
  int cycle = 0;
  int iter = 0;

  friend bool operator<(const Occurrence &a, const Occurrence &b) {
    return std::tie(a.cycle, a.iter) < std::tie(b.cycle, b.iter);
  }
  friend bool operator==(const Occurrence &a, const Occurrence &b) {
    return a.cycle == b.cycle && a.iter == b.iter;
  }
};

struct OccurrencePair {
  Occurrence src;
  Occurrence dst;

  /// Physical consumption latency in kernel cycles (1..ii once admitted).
  int gap(int distance, int ii) const {
    return (src.iter - dst.iter + distance) * ii + (dst.cycle - src.cycle);
  }
};

inline std::vector<Occurrence> occurrences_of(const KernelMobilitySchedule &kms,
                                              NodeId n) {
  std::vector<Occurrence> out;
  for (int c = 0; c < kms.ii; ++c)
    for (const KmsEntry &e : kms.slots[c])
      if (e.node == n)
        out.push_back({c, e.iter});
  std::sort(out.begin(), out.end());
  return out;
}

/// All admitted occurrence pairings of an edge: labels at most one apart and
/// consumption latency within [1, ii]. For distance 0 this reduces to two
/// relations (same label: c_d > c_s; source one label newer: c_d <= c_s);
/// back edges mirror them (same label: c_d <= c_s; destination one label
/// newer: c_d > c_s). Self-edges pair an occurrence with itself only.
inline std::vector<OccurrencePair>
candidate_pairings(const DfgEdge &edge, const KernelMobilitySchedule &kms) {
  const auto src_occs = occurrences_of(kms, edge.src);
  const auto dst_occs = occurrences_of(kms, edge.dst);
  std::vector<OccurrencePair> out;
  for (const Occurrence &s : src_occs)
    for (const Occurrence &d : dst_occs) {
      if (edge.src == edge.dst && !(s == d))
        continue; // a node holds a single placement
      if (std::abs(s.iter - d.iter) > 1)
        continue;
      const OccurrencePair pair{s, d};
      const int gap = pair.gap(edge.distance, kms.ii);
      if (gap >= 1 && gap <= kms.ii)
        out.push_back(pair);
    }
  return out;
}

/// Routing term set for one edge. Appends aux-definition clauses and the
/// per-edge disjunction to the problem. Returns false when no pairing admits
/// any term (the edge cannot be routed at this II).
inline bool emit_c3(const DfgEdge &edge,
                    const std::vector<OccurrencePair> &pairings,
                    VarTable &vt, const CgraSpec &spec,
                    const KernelMobilitySchedule &kms, CnfProblem &problem) {
  const int ii = kms.ii;
  const ClauseTag edge_tag{ClauseTag::c3_edge, edge.src, edge.dst,
                           edge.distance};
  const ClauseTag aux_tag{ClauseTag::aux, edge.src, edge.dst, edge.distance};

  // Placement variables per (pe, cycle), for the intermediate-slot exclusion.
  std::map<std::pair<PeId, int>, std::vector<int>> by_slot;
  for (int i = 1; i <= vt.placement_count(); ++i) {
    const PlacementVar &v = vt.var(i);
    by_slot[{v.pe, v.cycle}].push_back(i);
  }

  std::vector<std::vector<int>> terms;
  for (const OccurrencePair &pair : pairings) {
    const int g = pair.gap(edge.distance, ii);
    for (PeId ps = 0; ps < spec.pe_count(); ++ps) {
      for (PeId pd = 0; pd < spec.pe_count(); ++pd) {
        const int fn = neighbor_value(spec, ps, pd);
        if (fn == 0)
          continue;
        const int v = vt.lookup({edge.src, ps, pair.src.cycle, pair.src.iter}).value();
        const int w = vt.lookup({edge.dst, pd, pair.dst.cycle, pair.dst.iter}).value();
        if (g == 1 || fn == 1) {
          // Output register read the next cycle, or a local register on the
          // shared PE; no slot exclusion either way.
          std::vector<int> term{v};
          if (w != v)
            term.push_back(w);
          terms.push_back(std::move(term));
        }
        if (g >= 2) {
          // Output-register route: the source PE must stay idle at every
          // intermediate kernel slot, for any node and any iteration label.
          std::vector<int> term{v};
          if (w != v)
            term.push_back(w);
          for (int j = 1; j < g; ++j) {
            const int c = (pair.src.cycle + j) % ii;
            auto it = by_slot.find({ps, c});
            if (it == by_slot.end())
              continue;
            for (int z : it->second)
              term.push_back(-z);
          }
          terms.push_back(std::move(term));
        }
      }
    }
  }
  if (terms.empty())
    return false;

  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  std::vector<int> disjunction;
  for (std::vector<int> &term : terms) {
    if (term.size() == 1) {
      disjunction.push_back(term[0]);
      continue;
    }
    const int a = vt.add_aux();
    problem.num_vars = std::max(problem.num_vars, a);
    for (int lit : term)
      problem.add({-a, lit}, aux_tag);
    vt.record_aux_def({a, std::move(term)});
    disjunction.push_back(a);
  }
  std::sort(disjunction.begin(), disjunction.end());
  disjunction.erase(std::unique(disjunction.begin(), disjunction.end()),
                    disjunction.end());
  problem.add(std::move(disjunction), edge_tag);
  return true;
}

struct EncodeResult {
  CnfProblem problem;
  VarTable vars;
  KernelMobilitySchedule kms;
  std::optional<DfgEdge> unroutable; // set when some edge admits no term
};

/// Full problem construction at a fixed II: KMS, variables, C1 + C2 + C3.
inline EncodeResult build_problem(const DataflowGraph &g, const CgraSpec &spec,
                                  int ii) {
  EncodeResult result;
  const LevelSchedule asap_sched = asap(g);
  const LevelSchedule alap_sched = alap(g, asap_sched.length());
  const MobilitySchedule ms = mobility(asap_sched, alap_sched);
  result.kms = build_kms(ms, ii);
  result.vars = build_vars(result.kms, spec);
  result.problem.num_vars = result.vars.placement_count();

  for (Clause &c : emit_c1(result.vars))
    result.problem.add(std::move(c.lits), c.tag);
  for (Clause &c : emit_c2(result.vars))
    result.problem.add(std::move(c.lits), c.tag);
  for (const DfgEdge &edge : g.edges()) {
    const auto pairings = candidate_pairings(edge, result.kms);
    if (!emit_c3(edge, pairings, result.vars, spec, result.kms,
                 result.problem)) {
      result.unroutable = edge;
      return result;
    }
  }
  return result;
}

// --- DIMACS export --------------------------------------------------------

/// Canonical clause order: provenance tag, then lexicographic on literal
/// lists (each list itself sorted by variable). Byte-identical across runs.
inline void write_dimacs(const CnfProblem &problem, std::ostream &out) {
  std::vector<Clause> sorted = problem.clauses;
  const auto lit_key = [](int lit) {
    return std::make_pair(std::abs(lit), lit < 0);
  };
  for (Clause &c : sorted)
    std::sort(c.lits.begin(), c.lits.end(),
              [&](int a, int b) { return lit_key(a) < lit_key(b); });
  std::sort(sorted.begin(), sorted.end(), [&](const Clause &a,
                                              const Clause &b) {
    if (a.tag < b.tag)
      return true;
    if (b.tag < a.tag)
      return false;
    return std::lexicographical_compare(
        a.lits.begin(), a.lits.end(), b.lits.begin(), b.lits.end(),
        [&](int x, int y) { return lit_key(x) < lit_key(y); });
  });
  out << "p cnf " << problem.num_vars << " " << sorted.size() << "\n";
  for (const Clause &c : sorted) {
    for (int lit : c.lits)
      out << lit << " ";
    out << "0\n";
  }
}

/// Sidecar map from solver variable index to placement coordinates, one line
/// per placement variable: "index node pe cycle iter".
inline void write_literal_map(const VarTable &vt, std::ostream &out) {
  for (int i = 1; i <= vt.placement_count(); ++i) {
    const PlacementVar &v = vt.var(i);
    out << i << " " << v.node << " " << v.pe << " " << v.cycle << " " << v.iter
        << "\n";
  }
}

} // namespace cgramap

#endif // CGRAMAP_ENCODE_HPP

//===-- verify.hpp - independent mapping validator and exhaustive oracle --===//
//
// Re-implements placement, conflict, timing, routing and register semantics
// directly on a mapping, deliberately sharing no code with the CNF encoder:
// a bug there must not be mirrored here. The brute-force oracle enumerates
// every assignment of nodes to KMS-legal (pe, cycle, iter) triples in
// lexicographic order with forward-checking on PE/cycle conflicts, and is the
// ground truth the encoder and solver are property-tested against.
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_VERIFY_HPP
#define CGRAMAP_VERIFY_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cgramap/arch.hpp"
#include "cgramap/dfg.hpp"
#include "cgramap/mapping.hpp"
#include "cgramap/regalloc.hpp"
#include "cgramap/schedule.hpp"

namespace cgramap {

struct Violation {
  enum Kind {
    unplaced_node,
    duplicate_placement,
    kms_violation,
    pe_conflict,
    bad_timing_relation,
    non_neighbor_route,
    output_register_clobbered,
    register_overflow,
  } kind;
  std::string detail;
};

inline const char *to_string(Violation::Kind k) {
  switch (k) {
  case Violation::unplaced_node:
    return "unplaced_node";
  case Violation::duplicate_placement:
    return "duplicate_placement";
  case Violation::kms_violation:
    return "kms_violation";
  case Violation::pe_conflict:
    return "pe_conflict";
  case Violation::bad_timing_relation:
    return "bad_timing_relation";
  case Violation::non_neighbor_route:
    return "non_neighbor_route";
  case Violation::output_register_clobbered:
    return "output_register_clobbered";
  case Violation::register_overflow:
    return "register_overflow";
  }
  return "?";
}

/// Semantic check of a mapping against the graph and architecture. Returns
/// the empty list iff the mapping is legal. Total: garbage mappings yield
/// violations, never exceptions.
inline std::vector<Violation> validate(const DataflowGraph &g,
                                       const CgraSpec &spec, const Mapping &m) {
  std::vector<Violation> out;
  const auto note = [&](Violation::Kind k, const std::string &d) {
    out.push_back({k, d});
  };
  if (m.ii < 1) {
    note(Violation::kms_violation, "non-positive ii");
    return out;
  }

  KernelMobilitySchedule kms;
  try {
    const LevelSchedule a = asap(g);
    kms = build_kms(mobility(a, alap(g, a.length())), m.ii);
  } catch (const std::exception &e) {
    note(Violation::kms_violation, std::string("schedule failure: ") +
                                       e.what());
    return out;
  }

  // Placement multiplicity.
  std::map<NodeId, int> count;
  for (const Placement &p : m.placements) {
    if (!g.has_node(p.node)) {
      note(Violation::kms_violation,
           "placement of unknown node " + std::to_string(p.node));
      continue;
    }
    if (++count[p.node] == 2)
      note(Violation::duplicate_placement,
           "node " + std::to_string(p.node) + " placed more than once");
  }
  for (const DfgNode &n : g.nodes())
    if (!count.count(n.id))
      note(Violation::unplaced_node, "node " + std::to_string(n.id));
  if (!out.empty())
    return out;

  // KMS legality and slot conflicts.
  std::map<std::pair<PeId, int>, NodeId> slot_owner;
  bool placement_ok = true;
  for (const Placement &p : m.placements) {
    if (!spec.valid_pe(p.pe) || p.cycle < 0 || p.cycle >= m.ii ||
        !kms.contains(p.node, p.cycle, p.iter)) {
      std::ostringstream d;
      d << "node " << p.node << " at (pe " << p.pe << ", cycle " << p.cycle
        << ", iter " << p.iter << ") is not a kernel candidate";
      note(Violation::kms_violation, d.str());
      placement_ok = false;
      continue;
    }
    auto [it, fresh] = slot_owner.try_emplace({p.pe, p.cycle}, p.node);
    if (!fresh) {
      std::ostringstream d;
      d << "nodes " << it->second << " and " << p.node << " share (pe "
        << p.pe << ", cycle " << p.cycle << ")";
      note(Violation::pe_conflict, d.str());
    }
  }
  if (!placement_ok)
    return out;

  // Edge timing and routing.
  bool timing_ok = true;
  for (const DfgEdge &e : g.edges()) {
    const Placement s = *m.placement_of(e.src);
    const Placement d = *m.placement_of(e.dst);
    const auto describe = [&] {
      std::ostringstream os;
      os << "edge " << e.src << "->" << e.dst << " distance " << e.distance
         << ": source (pe " << s.pe << ", c " << s.cycle << ", it " << s.iter
         << "), destination (pe " << d.pe << ", c " << d.cycle << ", it "
         << d.iter << ")";
      return os.str();
    };
    const int gap =
        (s.iter - d.iter + e.distance) * m.ii + (d.cycle - s.cycle);
    if (std::abs(s.iter - d.iter) > 1 || gap < 1 || gap > m.ii) {
      note(Violation::bad_timing_relation, describe());
      timing_ok = false;
      continue;
    }
    const int fn = neighbor_value(spec, s.pe, d.pe);
    if (gap == 1) {
      if (fn == 0)
        note(Violation::non_neighbor_route, describe());
      continue;
    }
    if (fn == 1)
      continue; // local register route; capacity checked below
    if (fn == 0) {
      note(Violation::non_neighbor_route, describe());
      continue;
    }
    // Neighbor route over a multi-cycle gap: the source PE must be idle at
    // every intermediate kernel slot or its output register is rewritten.
    for (int j = 1; j < gap; ++j) {
      const int c = (s.cycle + j) % m.ii;
      const auto it = slot_owner.find({s.pe, c});
      if (it != slot_owner.end()) {
        std::ostringstream os;
        os << describe() << "; node " << it->second << " occupies (pe "
           << s.pe << ", cycle " << c << ")";
        note(Violation::output_register_clobbered, os.str());
        break;
      }
    }
  }
  if (!timing_ok)
    return out;

  // Register capacity.
  Mapping copy = m;
  if (const auto failure = allocate_registers(g, spec, copy)) {
    std::ostringstream os;
    os << "pe " << failure->pe << " needs more than " << spec.registers_per_pe
       << " registers for " << failure->demand << " live values";
    note(Violation::register_overflow, os.str());
  }
  return out;
}

/// Guard for the exponential oracle search; override for deliberate use on
/// larger graphs.
struct OracleLimits {
  int max_nodes = 8;
  bool allow_large = false;
};

/// Exhaustive search for a validator-accepted mapping at one fixed II.
inline std::optional<Mapping> brute_force_at_ii(const DataflowGraph &g,
                                                const CgraSpec &spec, int ii) {
  const LevelSchedule asap_sched = asap(g);
  const MobilitySchedule ms =
      mobility(asap_sched, alap(g, asap_sched.length()));
  const KernelMobilitySchedule kms = build_kms(ms, ii);

  // Candidate (pe, cycle, iter) triples per node, lexicographic.
  std::vector<NodeId> ids;
  for (const DfgNode &n : g.nodes())
    ids.push_back(n.id);
  std::sort(ids.begin(), ids.end());
  std::vector<std::vector<Placement>> candidates;
  for (NodeId n : ids) {
    std::vector<Placement> cs;
    for (PeId p = 0; p < spec.pe_count(); ++p)
      for (int c = 0; c < kms.ii; ++c)
        for (const KmsEntry &e : kms.slots[c])
          if (e.node == n)
            cs.push_back({n, p, c, e.iter});
    std::sort(cs.begin(), cs.end(), [](const Placement &a, const Placement &b) {
      return std::tie(a.pe, a.cycle, a.iter) <
             std::tie(b.pe, b.cycle, b.iter);
    });
    candidates.push_back(std::move(cs));
  }

  // Timing/adjacency necessary conditions between two fixed placements, used
  // for safe pruning; slot occupancy and registers wait for the leaf.
  const auto pair_feasible = [&](const DfgEdge &e, const Placement &s,
                                 const Placement &d) {
    const int gap = (s.iter - d.iter + e.distance) * ii + (d.cycle - s.cycle);
    if (std::abs(s.iter - d.iter) > 1 || gap < 1 || gap > ii)
      return false;
    return neighbor_value(spec, s.pe, d.pe) != 0;
  };

  std::vector<Placement> chosen;
  std::set<std::pair<PeId, int>> used_slots;
  std::optional<Mapping> found;

  std::function<void(size_t)> search = [&](size_t idx) {
    if (found)
      return;
    if (idx == ids.size()) {
      Mapping m;
      m.ii = ii;
      m.placements = chosen;
      if (validate(g, spec, m).empty()) {
        allocate_registers(g, spec, m);
        found = std::move(m);
      }
      return;
    }
    const auto placed = [&](NodeId n) -> const Placement * {
      for (const Placement &q : chosen)
        if (q.node == n)
          return &q;
      return nullptr;
    };
    for (const Placement &p : candidates[idx]) {
      if (used_slots.count({p.pe, p.cycle}))
        continue;
      bool ok = true;
      for (const DfgEdge &e : g.edges()) {
        if (e.src != p.node && e.dst != p.node)
          continue;
        const Placement *ps = e.src == p.node ? &p : placed(e.src);
        const Placement *pd = e.dst == p.node ? &p : placed(e.dst);
        if (ps && pd && !pair_feasible(e, *ps, *pd)) {
          ok = false;
          break;
        }
      }
      if (!ok)
        continue;
      chosen.push_back(p);
      used_slots.insert({p.pe, p.cycle});
      search(idx + 1);
      used_slots.erase({p.pe, p.cycle});
      chosen.pop_back();
      if (found)
        return;
    }
  };
  search(0);
  return found;
}

/// Exhaustively searches II = mII, mII+1, ..., ii_max for the first
/// validator-accepted mapping. Returns std::nullopt when none exists up to
/// ii_max. The register check is part of acceptance, matching the driver.
inline std::optional<Mapping>
brute_force_min_ii(const DataflowGraph &g, const CgraSpec &spec, int ii_max,
                   OracleLimits limits = {}) {
  if (g.node_count() > limits.max_nodes && !limits.allow_large)
    throw std::invalid_argument(
        "oracle size guard: " + std::to_string(g.node_count()) +
        " nodes exceed " + std::to_string(limits.max_nodes) +
        " (enable allow_large to override)");
  const MiiReport mii = compute_mii(g, spec);
  for (int ii = mii.mii; ii <= ii_max; ++ii)
    if (auto found = brute_force_at_ii(g, spec, ii))
      return found;
  return std::nullopt;
}

} // namespace cgramap

#endif // CGRAMAP_VERIFY_HPP

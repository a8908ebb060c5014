//===-- mapping.hpp - placement result and its JSON form ------------------===//

#ifndef CGRAMAP_MAPPING_HPP
#define CGRAMAP_MAPPING_HPP

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgramap/arch.hpp"
#include "cgramap/dfg.hpp"

namespace cgramap {

struct Placement {
  NodeId node = 0;
  PeId pe = 0;
  int cycle = 0;
  int iter = 0;
};

struct RegisterAssignment {
  PeId pe = 0;
  NodeId producer = 0;
  int reg = 0;
};

/// One (pe, cycle, iter) triple per node plus per-PE register assignments.
struct Mapping {
  int ii = 1;
  std::vector<Placement> placements;
  std::vector<RegisterAssignment> registers;

  std::optional<Placement> placement_of(NodeId n) const {
    for (const Placement &p : placements)
      if (p.node == n)
        return p;
    return std::nullopt;
  }

  void sort_canonical() {
    std::sort(placements.begin(), placements.end(),
              [](const Placement &a, const Placement &b) {
                return std::tie(a.node, a.cycle, a.iter, a.pe) <
                       std::tie(b.node, b.cycle, b.iter, b.pe);
              });
    std::sort(registers.begin(), registers.end(),
              [](const RegisterAssignment &a, const RegisterAssignment &b) {
                return std::tie(a.pe, a.producer, a.reg) <
                       std::tie(b.pe, b.producer, b.reg);
              });
  }
};

struct MappingMetrics {
  double utilization = 0.0;
  int mii = 0;
};

inline nlohmann::json mapping_to_json(const Mapping &m,
                                      std::optional<MappingMetrics> metrics) {
  Mapping sorted = m;
  sorted.sort_canonical();
  nlohmann::json j;
  j["ii"] = sorted.ii;
  j["placements"] = nlohmann::json::array();
  for (const Placement &p : sorted.placements)
    j["placements"].push_back({{"node", p.node},
                               {"pe", p.pe},
                               {"cycle", p.cycle},
                               {"iter", p.iter}});
  j["registers"] = nlohmann::json::array();
  for (const RegisterAssignment &r : sorted.registers)
    j["registers"].push_back(
        {{"pe", r.pe}, {"producer", r.producer}, {"reg", r.reg}});
  if (metrics) {
    j["metrics"] = {{"utilization", metrics->utilization},
                    {"mii", metrics->mii}};
  }
  return j;
}

inline Mapping load_mapping(std::istream &in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(std::string("malformed mapping JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ParseError("mapping JSON root is not an object");
  detail::reject_unknown_keys(j, {"ii", "placements", "registers", "metrics"},
                              "mapping");
  Mapping m;
  m.ii = detail::require_int(j, "ii", "mapping");
  if (!j.contains("placements") || !j["placements"].is_array())
    throw ParseError("mapping JSON is missing a \"placements\" array");
  for (const auto &pj : j["placements"]) {
    detail::reject_unknown_keys(pj, {"node", "pe", "cycle", "iter"},
                                "placement");
    Placement p;
    p.node = detail::require_int(pj, "node", "placement");
    p.pe = detail::require_int(pj, "pe", "placement");
    p.cycle = detail::require_int(pj, "cycle", "placement");
    p.iter = detail::require_int(pj, "iter", "placement");
    m.placements.push_back(p);
  }
  if (j.contains("registers")) {
    for (const auto &rj : j["registers"]) {
      detail::reject_unknown_keys(rj, {"pe", "producer", "reg"}, "register");
      RegisterAssignment r;
      r.pe = detail::require_int(rj, "pe", "register");
      r.producer = detail::require_int(rj, "producer", "register");
      r.reg = detail::require_int(rj, "reg", "register");
      m.registers.push_back(r);
    }
  }
  return m;
}

} // namespace cgramap

#endif // CGRAMAP_MAPPING_HPP

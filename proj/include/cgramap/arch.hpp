//===-- arch.hpp - CGRA array model ---------------------------------------===//
//
// Array dimensions, inter-PE connectivity (4-neighbor mesh or torus with
// row/column wrap-around) and per-PE register count. PE indices are row-major.
//
//===----------------------------------------------------------------------===//

#ifndef CGRAMAP_ARCH_HPP
#define CGRAMAP_ARCH_HPP

#include <istream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgramap/dfg.hpp" // ParseError / ValidationError

namespace cgramap {

using PeId = int;

enum class Topology { mesh, torus };

inline const char *to_string(Topology t) {
  return t == Topology::mesh ? "mesh" : "torus";
}

struct CgraSpec {
  int rows = 1;
  int cols = 1;
  Topology topology = Topology::torus;
  int registers_per_pe = 4;

  int pe_count() const { return rows * cols; }
  int row_of(PeId p) const { return p / cols; }
  int col_of(PeId p) const { return p % cols; }
  PeId pe_at(int r, int c) const { return r * cols + c; }
  bool valid_pe(PeId p) const { return p >= 0 && p < pe_count(); }
};

inline void check_pe(const CgraSpec &spec, PeId p) {
  if (!spec.valid_pe(p))
    throw std::out_of_range("PE index " + std::to_string(p) +
                            " out of range for " + std::to_string(spec.rows) +
                            "x" + std::to_string(spec.cols));
}

/// Neighborhood function over two PEs: 1 if they are the same PE, 2 if
/// distinct and directly connected under the topology, 0 otherwise.
/// Mesh links the four nearest neighbors without wrap; torus wraps rows and
/// columns (for a dimension of length 2 the two wrap directions coincide, so
/// 2- and 3-long rows/columns are fully connected).
inline int neighbor_value(const CgraSpec &spec, PeId p1, PeId p2) {
  check_pe(spec, p1);
  check_pe(spec, p2);
  if (p1 == p2)
    return 1;
  const int r1 = spec.row_of(p1), c1 = spec.col_of(p1);
  const int r2 = spec.row_of(p2), c2 = spec.col_of(p2);
  if (spec.topology == Topology::mesh) {
    const int dr = r1 - r2, dc = c1 - c2;
    return (dr * dr + dc * dc == 1) ? 2 : 0;
  }
  // Torus: adjacent iff they differ by one step in exactly one dimension,
  // counting wrap-around.
  const auto step = [](int a, int b, int len) {
    const int d = (a - b + len) % len;
    return d == 1 || d == len - 1;
  };
  const bool row_step = r1 == r2 ? false : step(r1, r2, spec.rows);
  const bool col_step = c1 == c2 ? false : step(c1, c2, spec.cols);
  if ((row_step && c1 == c2) || (col_step && r1 == r2))
    return 2;
  return 0;
}

/// All PEs q with neighbor_value(spec, p, q) > 0, sorted; always contains p.
inline std::vector<PeId> neighbors_of(const CgraSpec &spec, PeId p) {
  check_pe(spec, p);
  std::vector<PeId> out;
  for (PeId q = 0; q < spec.pe_count(); ++q)
    if (neighbor_value(spec, p, q) > 0)
      out.push_back(q);
  return out;
}

/// Parses {"rows":2,"cols":2,"topology":"torus","registers_per_pe":4}.
inline CgraSpec load_arch(std::istream &in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(std::string("malformed architecture JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ParseError("architecture JSON root is not an object");
  detail::reject_unknown_keys(
      j, {"rows", "cols", "topology", "registers_per_pe"}, "architecture");
  CgraSpec spec;
  spec.rows = detail::require_int(j, "rows", "architecture");
  spec.cols = detail::require_int(j, "cols", "architecture");
  spec.registers_per_pe =
      detail::require_int(j, "registers_per_pe", "architecture");
  if (j.contains("topology")) {
    if (!j["topology"].is_string())
      throw ParseError("architecture \"topology\" is not a string");
    const std::string topo = j["topology"].get<std::string>();
    if (topo == "mesh")
      spec.topology = Topology::mesh;
    else if (topo == "torus")
      spec.topology = Topology::torus;
    else
      throw ParseError("unknown topology \"" + topo + "\"");
  } else {
    spec.topology = Topology::torus; // matches the reference hardware
  }
  if (spec.rows < 1 || spec.cols < 1)
    throw ValidationError("array dimensions must be positive");
  if (spec.registers_per_pe < 1)
    throw ValidationError("registers_per_pe must be positive");
  return spec;
}

inline nlohmann::json arch_to_json(const CgraSpec &spec) {
  return {{"rows", spec.rows},
          {"cols", spec.cols},
          {"topology", to_string(spec.topology)},
          {"registers_per_pe", spec.registers_per_pe}};
}

} // namespace cgramap

#endif // CGRAMAP_ARCH_HPP

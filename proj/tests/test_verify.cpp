#include <doctest.h>

#include <random>

#include "cgramap/driver.hpp"
#include "cgramap/verify.hpp"
#include "test_util.hpp"

using namespace cgramap;

namespace {

bool has_kind(const std::vector<Violation> &vs, Violation::Kind k) {
  for (const auto &v : vs)
    if (v.kind == k)
      return true;
  return false;
}

Mapping reference_mapping() {
  Mapping m;
  m.ii = 3;
  m.placements = testutil::reference_solution();
  return m;
}

} // namespace

TEST_CASE("validate accepts the decoded running-example solution") {
  const auto g = testutil::running_example();
  const auto spec = testutil::cgra_2x2();
  CHECK(validate(g, spec, reference_mapping()).empty());
}

TEST_CASE("validate: induced slot collision is a pe_conflict") {
  const auto g = testutil::running_example();
  const auto spec = testutil::cgra_2x2();
  auto m = reference_mapping();
  for (Placement &p : m.placements)
    if (p.node == 9) {
      p.pe = 1; // node 10 sits at (pe 1, cycle 2)
      p.cycle = 2;
    }
  const auto vs = validate(g, spec, m);
  CHECK(has_kind(vs, Violation::pe_conflict));
}

TEST_CASE("validate: diagonal placement is a non_neighbor_route") {
  const auto g = testutil::running_example();
  const auto spec = testutil::cgra_2x2();
  auto m = reference_mapping();
  // Node 10 feeds node 11 from (pe 1, cycle 2); pe 2 is diagonal to pe 1 on
  // a 2x2 array.
  for (Placement &p : m.placements)
    if (p.node == 11)
      p.pe = 2;
  const auto vs = validate(g, spec, m);
  CHECK(has_kind(vs, Violation::non_neighbor_route));
}

TEST_CASE("validate: missing and duplicated placements") {
  const auto g = testutil::running_example();
  const auto spec = testutil::cgra_2x2();

  auto missing = reference_mapping();
  missing.placements.pop_back();
  CHECK(has_kind(validate(g, spec, missing), Violation::unplaced_node));

  auto doubled = reference_mapping();
  doubled.placements.push_back(doubled.placements.front());
  CHECK(has_kind(validate(g, spec, doubled), Violation::duplicate_placement));
}

TEST_CASE("validate: placements outside the KMS are rejected") {
  const auto g = testutil::running_example();
  const auto spec = testutil::cgra_2x2();
  auto m = reference_mapping();
  for (Placement &p : m.placements)
    if (p.node == 3)
      p.cycle = 0; // node 3's only candidate slot is cycle 1, label 1
  CHECK(has_kind(validate(g, spec, m), Violation::kms_violation));

  auto bad_pe = reference_mapping();
  bad_pe.placements[0].pe = 9;
  CHECK(has_kind(validate(g, spec, bad_pe), Violation::kms_violation));
}

TEST_CASE("validate: timing relation violations") {
  // A loose pair beside a 3-long chain: nodes 3 and 4 both have mobility, so
  // KMS-legal placements exist that still break the producer-before-consumer
  // relation (equal cycles within one label).
  DataflowGraph g({{0, "a"}, {1, "b"}, {2, "c"}, {3, "d"}, {4, "e"}},
                  {{0, 1, 0}, {1, 2, 0}, {3, 4, 0}});
  const CgraSpec spec{2, 2, Topology::torus, 4};
  Mapping bad;
  bad.ii = 3;
  bad.placements = {
      {0, 0, 0, 0}, {1, 0, 1, 0}, {2, 0, 2, 0}, {3, 1, 1, 0}, {4, 2, 1, 0}};
  const auto vs = validate(g, spec, bad);
  CHECK(has_kind(vs, Violation::bad_timing_relation));

  // Sliding node 4 one cycle later onto an adjacent PE repairs it.
  Mapping good = bad;
  good.placements[4].pe = 3;
  good.placements[4].cycle = 2;
  CHECK(validate(g, spec, good).empty());
}

TEST_CASE("validate: clobbered output register on a neighbor route") {
  // 0 -> 2 over a 2-cycle gap with node 1 executing on the source PE in
  // between.
  DataflowGraph g({{0, "a"}, {1, "b"}, {2, "c"}},
                  {{0, 1, 0}, {1, 2, 0}, {0, 2, 0}});
  const CgraSpec spec{1, 2, Topology::torus, 4};
  Mapping m;
  m.ii = 3;
  m.placements = {{0, 0, 0, 0}, {1, 0, 1, 0}, {2, 1, 2, 0}};
  CHECK(has_kind(validate(g, spec, m), Violation::output_register_clobbered));

  // Same shape but the middle node moved away: clean.
  m.placements = {{0, 0, 0, 0}, {1, 1, 1, 0}, {2, 1, 2, 0}};
  CHECK(validate(g, spec, m).empty());
}

TEST_CASE("validate: register overflow is reported") {
  // A 7-node chain where every link also feeds the tail: on one PE the five
  // multi-cycle values all survive until the last node executes.
  std::vector<DfgNode> nodes;
  std::vector<DfgEdge> edges;
  for (int i = 0; i < 7; ++i)
    nodes.push_back({i, "op"});
  for (int i = 0; i < 6; ++i) {
    edges.push_back({i, i + 1, 0});
    if (i + 1 < 6)
      edges.push_back({i, 6, 0});
  }
  DataflowGraph g(std::move(nodes), std::move(edges));
  const CgraSpec spec{1, 1, Topology::torus, 4};
  const auto mii = compute_mii(g, spec); // res = 7
  CHECK(mii.mii == 7);
  const auto enc = build_problem(g, spec, 7);
  REQUIRE(!enc.unroutable);
  const auto outcome = solve(enc.problem);
  REQUIRE(outcome.status == SolveStatus::sat);
  const Mapping m = decode(outcome.model, enc.vars, 7);
  const auto vs = validate(g, spec, m);
  CHECK(has_kind(vs, Violation::register_overflow));
}

TEST_CASE("brute_force_min_ii: trivial cases") {
  DataflowGraph one({{0, "a"}}, {});
  const auto m1 = brute_force_min_ii(one, {1, 1, Topology::torus, 4}, 4);
  REQUIRE(m1.has_value());
  CHECK(m1->ii == 1);

  DataflowGraph four({{0, "a"}, {1, "b"}, {2, "c"}, {3, "d"}}, {});
  const auto m4 = brute_force_min_ii(four, {2, 2, Topology::mesh, 4}, 4);
  REQUIRE(m4.has_value());
  CHECK(m4->ii == 1);
  std::set<PeId> pes;
  for (const auto &p : m4->placements)
    pes.insert(p.pe);
  CHECK(pes.size() == 4);
}

TEST_CASE("brute_force_min_ii: size guard") {
  // A 9-node chain: above the default guard but cheap once overridden.
  std::vector<DfgNode> nodes;
  std::vector<DfgEdge> edges;
  for (int i = 0; i < 9; ++i) {
    nodes.push_back({i, "op"});
    if (i > 0)
      edges.push_back({i - 1, i, 0});
  }
  DataflowGraph g(std::move(nodes), std::move(edges));
  const CgraSpec spec{2, 2, Topology::torus, 4};
  CHECK_THROWS_AS(brute_force_min_ii(g, spec, 4), std::invalid_argument);
  OracleLimits limits;
  limits.allow_large = true;
  const auto found = brute_force_min_ii(g, spec, 4, limits);
  REQUIRE(found.has_value());
  CHECK(found->ii == 3);
}

TEST_CASE("mapping JSON round trip and rejection") {
  auto m = reference_mapping();
  m.registers.push_back({0, 9, 2});
  std::stringstream out;
  out << mapping_to_json(m, MappingMetrics{0.5, 3}).dump(2);
  const Mapping back = load_mapping(out);
  CHECK(back.ii == 3);
  CHECK(back.placements.size() == 11);
  REQUIRE(back.registers.size() == 1);
  CHECK(back.registers[0].reg == 2);

  std::istringstream unknown(R"({"ii":1,"placements":[],"future":true})");
  CHECK_THROWS_AS(load_mapping(unknown), ParseError);
  std::istringstream missing(R"({"placements":[]})");
  CHECK_THROWS_AS(load_mapping(missing), ParseError);
}

TEST_CASE("validator is total on garbage") {
  const auto g = testutil::running_example();
  const auto spec = testutil::cgra_2x2();
  Mapping garbage;
  garbage.ii = -2;
  CHECK(!validate(g, spec, garbage).empty());
  garbage.ii = 3;
  garbage.placements = {{99, 0, 0, 0}};
  CHECK(!validate(g, spec, garbage).empty());
}

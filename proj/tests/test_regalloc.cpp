#include <doctest.h>

#include <random>

#include "cgramap/regalloc.hpp"
#include "test_util.hpp"

using namespace cgramap;

namespace {

Mapping make_mapping(int ii, std::vector<Placement> places) {
  Mapping m;
  m.ii = ii;
  m.placements = std::move(places);
  return m;
}

/// Exhaustive k-coloring existence check by trying every assignment.
bool oracle_colorable(const std::vector<std::pair<int, int>> &edges,
                      int vertices, int k) {
  std::vector<int> colors(vertices, 0);
  while (true) {
    bool ok = true;
    for (auto [a, b] : edges)
      if (colors[a] == colors[b])
        ok = false;
    if (ok)
      return true;
    int i = 0;
    while (i < vertices && ++colors[i] == k) {
      colors[i] = 0;
      ++i;
    }
    if (i == vertices)
      return false;
  }
}

} // namespace

TEST_CASE("extract_live_values: neighbor gap-1 consumers need no register") {
  DataflowGraph g({{0, "a"}, {1, "b"}}, {{0, 1, 0}});
  const auto m = make_mapping(2, {{0, 0, 0, 0}, {1, 1, 1, 0}});
  const auto values = extract_live_values(g, m);
  REQUIRE(values.size() == 1);
  CHECK(values[0].route == ValueRoute::output_register);
  CHECK(build_interference(values, 2).values.empty());
}

TEST_CASE("extract_live_values: same-PE multi-cycle consumer takes a register") {
  DataflowGraph g({{0, "a"}, {1, "b"}, {2, "c"}},
                  {{0, 1, 0}, {1, 2, 0}, {0, 2, 0}});
  const auto m =
      make_mapping(3, {{0, 0, 0, 0}, {1, 1, 1, 0}, {2, 0, 2, 0}});
  const auto values = extract_live_values(g, m);
  // Node 0 feeds node 2 on its own PE two cycles later.
  REQUIRE(values.size() == 2);
  const auto &v0 = values[0];
  CHECK(v0.producer == 0);
  CHECK(v0.route == ValueRoute::register_file);
  CHECK(v0.length == 2);
  CHECK(v0.slots(3) == std::vector<int>{1, 2});
}

TEST_CASE("extract_live_values: the longest same-PE gap wins") {
  DataflowGraph g({{0, "a"}, {1, "b"}, {2, "c"}, {3, "d"}},
                  {{0, 1, 0}, {0, 2, 0}, {0, 3, 0}, {1, 2, 0}, {2, 3, 0}});
  // All on one PE at cycles 0..3 (ii=4): consumers at gaps 1, 2, 3.
  const auto m = make_mapping(
      4, {{0, 0, 0, 0}, {1, 0, 1, 0}, {2, 0, 2, 0}, {3, 0, 3, 0}});
  const auto values = extract_live_values(g, m);
  const auto v0 = std::find_if(values.begin(), values.end(),
                               [](const LiveValue &v) { return v.producer == 0; });
  REQUIRE(v0 != values.end());
  CHECK(v0->length == 3);
}

TEST_CASE("self-carried value fills the whole kernel ring") {
  DataflowGraph g({{0, "a"}}, {{0, 0, 1}});
  const auto m = make_mapping(3, {{0, 0, 1, 0}});
  const auto values = extract_live_values(g, m);
  REQUIRE(values.size() == 1);
  CHECK(values[0].length == 3);
  CHECK(values[0].slots(3) == std::vector<int>{0, 1, 2});
}

TEST_CASE("build_interference: disjoint and identical cyclic intervals") {
  LiveValue a{0, 0, 0, 1, ValueRoute::register_file}; // slot 1
  LiveValue b{1, 0, 2, 1, ValueRoute::register_file}; // slot 3
  const auto no_edge = build_interference({a, b}, 4);
  CHECK(no_edge.edges.at(0).empty());

  LiveValue c{2, 0, 0, 2, ValueRoute::register_file}; // slots 1,2
  LiveValue d{3, 0, 0, 2, ValueRoute::register_file}; // slots 1,2
  const auto edge = build_interference({c, d}, 4);
  CHECK(edge.edges.at(0).size() == 1);
}

TEST_CASE("interference edges equal brute-force slot overlap") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> ii_dist(2, 6), count(2, 7);
  for (int trial = 0; trial < 60; ++trial) {
    const int ii = ii_dist(rng);
    std::uniform_int_distribution<int> start(0, ii - 1), len(1, ii);
    std::vector<LiveValue> values;
    const int n = count(rng);
    for (int i = 0; i < n; ++i)
      values.push_back({i, 0, start(rng), len(rng), ValueRoute::register_file});
    const auto graph = build_interference(values, ii);
    const auto &vals = graph.values.at(0);
    std::set<std::pair<int, int>> expect;
    for (size_t i = 0; i < vals.size(); ++i)
      for (size_t j = i + 1; j < vals.size(); ++j) {
        bool overlap = false;
        for (int s = 0; s < ii; ++s) {
          const auto si = vals[i].slots(ii);
          const auto sj = vals[j].slots(ii);
          if (std::count(si.begin(), si.end(), s) &&
              std::count(sj.begin(), sj.end(), s))
            overlap = true;
        }
        if (overlap)
          expect.insert({static_cast<int>(i), static_cast<int>(j)});
      }
    const auto &got = graph.edges.at(0);
    CHECK(std::set<std::pair<int, int>>(got.begin(), got.end()) == expect);
  }
}

TEST_CASE("color: empty graph, cliques, and oracle agreement") {
  CHECK(color({}, 0, 4).has_value());

  // A 5-clique cannot be 4-colored.
  std::vector<std::pair<int, int>> clique5;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j)
      clique5.emplace_back(i, j);
  CHECK(!color(clique5, 5, 4).has_value());
  CHECK(color(clique5, 5, 5).has_value());

  std::mt19937 rng(8);
  std::uniform_int_distribution<int> verts(1, 6), k_dist(1, 4), pct(0, 99);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = verts(rng);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (pct(rng) < 50)
          edges.emplace_back(i, j);
    const int k = k_dist(rng);
    const auto got = color(edges, n, k);
    CHECK(got.has_value() == oracle_colorable(edges, n, k));
    if (got) {
      for (auto [a, b] : edges)
        CHECK((*got)[a] != (*got)[b]);
      for (int c : *got)
        CHECK(c < k);
    }
  }
}

TEST_CASE("allocate_registers writes assignments into the mapping") {
  DataflowGraph g({{0, "a"}, {1, "b"}, {2, "c"}},
                  {{0, 1, 0}, {1, 2, 0}, {0, 2, 0}});
  const CgraSpec spec{1, 2, Topology::torus, 4};
  auto m = make_mapping(3, {{0, 0, 0, 0}, {1, 1, 1, 0}, {2, 0, 2, 0}});
  CHECK(!allocate_registers(g, spec, m).has_value());
  REQUIRE(m.registers.size() == 1);
  CHECK(m.registers[0].pe == 0);
  CHECK(m.registers[0].producer == 0);
  CHECK(m.registers[0].reg == 0);
}

TEST_CASE("allocate_registers fails on a forced 5-clique with 4 registers") {
  // Six producers feeding one consumer on a single PE: the five multi-cycle
  // values are simultaneously live at the consumer's slot.
  std::vector<DfgNode> nodes;
  std::vector<DfgEdge> edges;
  for (int i = 0; i < 7; ++i)
    nodes.push_back({i, "op"});
  for (int i = 0; i < 6; ++i)
    edges.push_back({i, 6, 0});
  DataflowGraph g(std::move(nodes), std::move(edges));
  const CgraSpec spec{1, 1, Topology::torus, 4};
  std::vector<Placement> places;
  for (int i = 0; i < 7; ++i)
    places.push_back({i, 0, i, 0});
  auto m = make_mapping(7, places);
  const auto failure = allocate_registers(g, spec, m);
  REQUIRE(failure.has_value());
  CHECK(failure->pe == 0);
  CHECK(failure->demand == 5);
}

#include <doctest.h>

#include <set>
#include <sstream>

#include "cgramap/arch.hpp"

using namespace cgramap;

namespace {

// Brute-force adjacency from grid coordinates, independent of neighbor_value:
// enumerate the four directional moves and apply (or drop) wrap-around.
std::set<PeId> oracle_neighbors(const CgraSpec &spec, PeId p) {
  std::set<PeId> out{p};
  const int r = p / spec.cols, c = p % spec.cols;
  const int dr[4] = {-1, 1, 0, 0};
  const int dc[4] = {0, 0, -1, 1};
  for (int k = 0; k < 4; ++k) {
    int nr = r + dr[k], nc = c + dc[k];
    if (spec.topology == Topology::torus) {
      nr = (nr + spec.rows) % spec.rows;
      nc = (nc + spec.cols) % spec.cols;
    } else if (nr < 0 || nr >= spec.rows || nc < 0 || nc >= spec.cols) {
      continue;
    }
    out.insert(nr * spec.cols + nc);
  }
  return out;
}

CgraSpec make(int rows, int cols, Topology t) { return {rows, cols, t, 4}; }

} // namespace

TEST_CASE("neighbor_value: same PE is 1") {
  CHECK(neighbor_value(make(2, 2, Topology::torus), 0, 0) == 1);
}

TEST_CASE("neighbor_value: opposite corners of a 3x3 mesh are unconnected") {
  CHECK(neighbor_value(make(3, 3, Topology::mesh), 0, 8) == 0);
}

TEST_CASE("neighbor_value: 3x3 torus wraps within a row") {
  CHECK(neighbor_value(make(3, 3, Topology::torus), 0, 2) == 2);
  CHECK(neighbor_value(make(3, 3, Topology::mesh), 0, 2) == 0);
}

TEST_CASE("neighbor_value: invalid PE throws") {
  CHECK_THROWS_AS(neighbor_value(make(2, 2, Topology::mesh), 0, 4),
                  std::out_of_range);
  CHECK_THROWS_AS(neighbors_of(make(2, 2, Topology::mesh), -1),
                  std::out_of_range);
}

TEST_CASE("neighbors_of: 2x2 torus collapses duplicate wrap directions") {
  const auto ns = neighbors_of(make(2, 2, Topology::torus), 0);
  CHECK(ns == std::vector<PeId>{0, 1, 2});
}

TEST_CASE("neighbors_of: 1x1 array is just the PE itself") {
  CHECK(neighbors_of(make(1, 1, Topology::torus), 0) == std::vector<PeId>{0});
  CHECK(neighbors_of(make(1, 1, Topology::mesh), 0) == std::vector<PeId>{0});
}

TEST_CASE("neighbors_of: every PE of a 3x3 torus has 4 distinct neighbors") {
  const auto spec = make(3, 3, Topology::torus);
  for (PeId p = 0; p < spec.pe_count(); ++p)
    CHECK(neighbors_of(spec, p).size() == 5);
}

TEST_CASE("adjacency matches the coordinate oracle") {
  for (int rows = 1; rows <= 4; ++rows)
    for (int cols = 1; cols <= 4; ++cols)
      for (Topology t : {Topology::mesh, Topology::torus}) {
        const auto spec = make(rows, cols, t);
        for (PeId p = 0; p < spec.pe_count(); ++p) {
          const auto expect = oracle_neighbors(spec, p);
          const auto got = neighbors_of(spec, p);
          CHECK(std::set<PeId>(got.begin(), got.end()) == expect);
        }
      }
}

TEST_CASE("neighbor_value is symmetric and mesh is a subset of torus") {
  for (int rows = 1; rows <= 4; ++rows)
    for (int cols = 1; cols <= 4; ++cols) {
      const auto mesh = make(rows, cols, Topology::mesh);
      const auto torus = make(rows, cols, Topology::torus);
      for (PeId a = 0; a < mesh.pe_count(); ++a)
        for (PeId b = 0; b < mesh.pe_count(); ++b) {
          CHECK(neighbor_value(mesh, a, b) == neighbor_value(mesh, b, a));
          CHECK(neighbor_value(torus, a, b) == neighbor_value(torus, b, a));
          if (neighbor_value(mesh, a, b) > 0)
            CHECK(neighbor_value(torus, a, b) > 0);
        }
    }
}

TEST_CASE("4+ dimension torus rows have exactly 4 distinct neighbors") {
  const auto spec = make(4, 5, Topology::torus);
  for (PeId p = 0; p < spec.pe_count(); ++p)
    CHECK(neighbors_of(spec, p).size() == 5);
}

TEST_CASE("load_arch parses and validates") {
  std::istringstream in(
      R"({"rows":2,"cols":2,"topology":"torus","registers_per_pe":4})");
  const auto spec = load_arch(in);
  CHECK(spec.rows == 2);
  CHECK(spec.cols == 2);
  CHECK(spec.topology == Topology::torus);
  CHECK(spec.registers_per_pe == 4);

  std::istringstream bad_topo(
      R"({"rows":2,"cols":2,"topology":"ring","registers_per_pe":4})");
  CHECK_THROWS_AS(load_arch(bad_topo), ParseError);
  std::istringstream default_topo(
      R"({"rows":2,"cols":2,"registers_per_pe":4})");
  CHECK(load_arch(default_topo).topology == Topology::torus);
  std::istringstream bad_rows(
      R"({"rows":0,"cols":2,"topology":"mesh","registers_per_pe":4})");
  CHECK_THROWS_AS(load_arch(bad_rows), ValidationError);
  std::istringstream unknown(
      R"({"rows":2,"cols":2,"topology":"mesh","registers_per_pe":4,"x":0})");
  CHECK_THROWS_AS(load_arch(unknown), ParseError);
}

#include <doctest.h>

#include <algorithm>
#include <set>

#include "gwae/errors.hpp"
#include "gwae/graph.hpp"
#include "oracles.hpp"

using namespace gwae;

namespace {

GeoGraph full_grid(int nx, int ny, int nz) {
  GridDims d{nx, ny, nz};
  const std::size_t n = d.cell_count();
  return build_grid_graph(d, std::vector<bool>(n, true), std::vector<double>(n * 2, 0.0), 2);
}

}  // namespace

TEST_CASE("grid graph: full 16x12x10 grid has 1920 nodes") {
  const GeoGraph g = full_grid(16, 12, 10);
  CHECK(g.node_count == 1920);
}

TEST_CASE("grid graph: 2x1x1 grid is two nodes, one edge") {
  const GeoGraph g = full_grid(2, 1, 1);
  CHECK(g.node_count == 2);
  CHECK(g.adjacency.size() == 1);
}

TEST_CASE("grid graph: 3x3x1 grid has 9 nodes and 12 edges") {
  // hand enumeration: 2 edges per row x 3 rows + 2 per column x 3 columns
  const GeoGraph g = full_grid(3, 3, 1);
  CHECK(g.node_count == 9);
  CHECK(g.adjacency.size() == 12);
}

TEST_CASE("grid graph: zero active cells is an error") {
  GridDims d{2, 2, 1};
  CHECK_THROWS_WITH_AS(
      build_grid_graph(d, std::vector<bool>(4, false), std::vector<double>(8, 0.0), 2),
      doctest::Contains("empty graph"), ConfigError);
}

TEST_CASE("grid graph: inactive cells are skipped and origins preserved") {
  GridDims d{2, 2, 1};
  std::vector<bool> active{true, false, true, true};
  std::vector<double> feats(4 * 1);
  for (int i = 0; i < 4; ++i) feats[i] = i;
  const GeoGraph g = build_grid_graph(d, active, feats, 1);
  CHECK(g.node_count == 3);
  CHECK(g.node_origin[0] == CellIndex{0, 0, 0});
  CHECK(g.node_origin[1] == CellIndex{0, 1, 0});
  CHECK(g.node_origin[2] == CellIndex{1, 1, 0});
  // edges: (0,0)-(0,1) and (0,1)-(1,1); the inactive (1,0) cell breaks the rest
  CHECK(g.adjacency.size() == 2);
}

TEST_CASE("neighbourhood: interior node of a 3x3x1 grid at k=1") {
  const GeoGraph g = full_grid(3, 3, 1);
  // center node = origin (1,1,0) -> node id 4
  const auto nb = neighbourhood(KSet({4}), g);
  CHECK(nb.local.size() == 4);
  CHECK(nb.global.size() == 4);
}

TEST_CASE("neighbourhood: isolated node has empty neighborhoods") {
  const GeoGraph g = full_grid(1, 1, 1);
  const auto nb = neighbourhood(KSet({0}), g);
  CHECK(nb.local.empty());
  CHECK(nb.global.empty());
}

TEST_CASE("neighbourhood: k=2 on a path graph, brute-force checked") {
  // path a-b-c: nodes 0-1-2
  GeoGraph g;
  g.node_count = 3;
  g.feature_count = 1;
  g.node_features = {0, 0, 0};
  g.adjacency = {{0, 1}, {1, 2}};
  g.node_origin = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  g.validate();

  const KSet s({0, 1});
  const auto nb = neighbourhood(s, g);
  const auto brute = oracle::brute_neighbourhood(s, g);
  CHECK(nb.local == brute.local);
  CHECK(nb.global == brute.global);
  // {1,2} swaps node 0 for node 2 and needs edge (0,2), which is absent:
  // global, not local. {0,2} swaps 1 for 2 over the existing edge (1,2): local.
  CHECK(std::find(nb.global.begin(), nb.global.end(), KSet({1, 2})) != nb.global.end());
  CHECK(std::find(nb.local.begin(), nb.local.end(), KSet({0, 2})) != nb.local.end());
}

TEST_CASE("neighbourhood: invalid member id is an error") {
  const GeoGraph g = full_grid(2, 2, 1);
  CHECK_THROWS_AS(neighbourhood(KSet({99}), g), ConfigError);
}

TEST_CASE("neighbourhood: partition and symmetry properties, k in {1,2}") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const GeoGraph g = oracle::random_graph(4 + seed * 3, 0.4, seed);
    for (int k = 1; k <= 2; ++k) {
      const auto sets = oracle::all_ksets(g.node_count, k);
      for (const auto& s : sets) {
        const auto nb = neighbourhood(s, g);
        const auto brute = oracle::brute_neighbourhood(s, g);
        CHECK(nb.local == brute.local);
        CHECK(nb.global == brute.global);
        // disjoint
        std::set<KSet> both(nb.local.begin(), nb.local.end());
        for (const auto& t : nb.global) CHECK(both.count(t) == 0);
        // symmetry: t in N(s) <=> s in N(t)
        for (const auto& t : nb.local) {
          const auto back = neighbourhood(t, g);
          const bool found =
              std::find(back.local.begin(), back.local.end(), s) != back.local.end() ||
              std::find(back.global.begin(), back.global.end(), s) != back.global.end();
          CHECK(found);
        }
      }
    }
  }
}

TEST_CASE("global mean trick: constant features give the constant") {
  const GeoGraph g = full_grid(3, 2, 1);
  const Tensor h = Tensor::full(g.node_count, 2, 3.25);
  const Tensor out = global_mean_trick(g, h);
  for (std::size_t v = 0; v < g.node_count; ++v)
    for (std::size_t c = 0; c < 2; ++c) CHECK(out.at(v, c) == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("global mean trick: 3-node path, features 1,2,3") {
  GeoGraph g;
  g.node_count = 3;
  g.feature_count = 1;
  g.node_features = {1, 2, 3};
  g.adjacency = {{0, 1}, {1, 2}};
  g.node_origin = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  g.validate();
  const Tensor out = global_mean_trick(g, g.features_tensor());
  CHECK(out.data[0] == doctest::Approx(3.0));  // node 0's global set = {2}
  CHECK(out.data[1] == doctest::Approx(0.0));  // complement empty -> zero
  CHECK(out.data[2] == doctest::Approx(1.0));
}

TEST_CASE("global mean trick: matches brute-force global mean on a random 20-node graph") {
  const GeoGraph g = oracle::random_graph(20, 0.3, 77, 3);
  const Tensor h = g.features_tensor();
  const Tensor out = global_mean_trick(g, h);
  for (std::uint32_t v = 0; v < g.node_count; ++v) {
    const auto nb = oracle::brute_neighbourhood(KSet({v}), g);
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (const auto& t : nb.global) mean += h.at(t.members[0], c);
      mean = nb.global.empty() ? 0.0 : mean / nb.global.size();
      CHECK(std::abs(out.at(v, c) - mean) < 1e-12);
    }
  }
}

TEST_CASE("kset space: k=2 rejects large graphs") {
  const GeoGraph g = full_grid(5, 5, 3);  // 75 nodes
  CHECK_THROWS_AS(build_kset_space(g, 2), ConfigError);
}

TEST_CASE("kset space: k=2 lists match per-set enumeration") {
  const GeoGraph g = oracle::random_graph(7, 0.4, 11);
  const KSetSpace space = build_kset_space(g, 2);
  REQUIRE(space.sets.size() == 21);
  for (std::size_t s = 0; s < space.sets.size(); ++s) {
    const auto nb = neighbourhood(space.sets[s], g);
    CHECK(space.local->degree(s) == nb.local.size());
    CHECK(space.global->degree(s) == nb.global.size());
  }
}

TEST_CASE("graph invariants: validation rejects broken graphs") {
  GeoGraph g;
  g.node_count = 2;
  g.feature_count = 1;
  g.node_features = {0, 0};
  g.node_origin = {{0, 0, 0}, {1, 0, 0}};
  g.adjacency = {{1, 1}};  // self-loop encoded as equal endpoints
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.adjacency = {{0, 1}, {0, 1}};  // duplicate
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.adjacency = {{0, 5}};  // out of range
  CHECK_THROWS_AS(g.validate(), ConfigError);
  g.adjacency = {{0, 1}};
  g.node_origin = {{0, 0, 0}, {0, 0, 0}};  // duplicate origins
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

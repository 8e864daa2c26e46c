#include "gwae/graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "gwae/errors.hpp"

namespace gwae {

void GeoGraph::validate() const {
  if (node_features.size() != node_count * feature_count)
    throw ConfigError("graph: feature array size mismatch");
  if (node_origin.size() != node_count) throw ConfigError("graph: origin array size mismatch");
  for (std::size_t e = 0; e < adjacency.size(); ++e) {
    const auto& [a, b] = adjacency[e];
    if (a >= b) throw ConfigError("graph: edge endpoints must satisfy first < second");
    if (b >= node_count) throw ConfigError("graph: edge endpoint out of range");
    if (e > 0 && !(adjacency[e - 1] < adjacency[e]))
      throw ConfigError("graph: adjacency must be sorted and duplicate-free");
  }
  std::set<std::array<int, 3>> seen;
  for (const auto& o : node_origin)
    if (!seen.insert({o.i, o.j, o.k}).second)
      throw ConfigError("graph: duplicate node origins");
}

Tensor GeoGraph::features_tensor() const {
  return Tensor(node_count, feature_count, node_features);
}

std::vector<std::size_t> GeoGraph::degrees() const {
  std::vector<std::size_t> deg(node_count, 0);
  for (const auto& [a, b] : adjacency) {
    ++deg[a];
    ++deg[b];
  }
  return deg;
}

std::shared_ptr<const NeighborLists> GeoGraph::adjacency_lists() const {
  auto lists = std::make_shared<NeighborLists>();
  const auto deg = degrees();
  lists->offsets.resize(node_count + 1, 0);
  for (std::size_t i = 0; i < node_count; ++i)
    lists->offsets[i + 1] = lists->offsets[i] + static_cast<std::uint32_t>(deg[i]);
  lists->indices.resize(adjacency.size() * 2);
  std::vector<std::uint32_t> cursor(lists->offsets.begin(), lists->offsets.end() - 1);
  for (const auto& [a, b] : adjacency) {
    lists->indices[cursor[a]++] = b;
    lists->indices[cursor[b]++] = a;
  }
  for (std::size_t i = 0; i < node_count; ++i)
    std::sort(lists->indices.begin() + lists->offsets[i], lists->indices.begin() + lists->offsets[i + 1]);
  return lists;
}

KSet::KSet(std::vector<std::uint32_t> m) : members(std::move(m)) {
  if (members.empty()) throw ConfigError("k-set: must have at least one member");
  std::sort(members.begin(), members.end());
  if (std::adjacent_find(members.begin(), members.end()) != members.end())
    throw ConfigError("k-set: duplicate members");
}

GeoGraph build_grid_graph(const GridDims& dims, const std::vector<bool>& active_mask,
                          const std::vector<double>& features, std::size_t feature_count) {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
    throw ConfigError("build_grid_graph: dims must be positive");
  const std::size_t ncells = dims.cell_count();
  if (active_mask.size() != ncells)
    throw ConfigError("build_grid_graph: active mask length must be nx*ny*nz");
  if (features.size() != ncells * feature_count)
    throw ConfigError("build_grid_graph: feature array length must be nx*ny*nz*f");

  std::vector<std::int64_t> cell_to_node(ncells, -1);
  GeoGraph g;
  g.feature_count = feature_count;
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) {
        const std::size_t c = dims.flat(i, j, k);
        if (!active_mask[c]) continue;
        cell_to_node[c] = static_cast<std::int64_t>(g.node_count++);
        g.node_origin.push_back({i, j, k});
        for (std::size_t f = 0; f < feature_count; ++f)
          g.node_features.push_back(features[c * feature_count + f]);
      }
  if (g.node_count == 0) throw ConfigError("build_grid_graph: empty graph (no active cells)");

  // Face neighbors in +i, +j, +k directions only; node ids ascend with the
  // cell-major sweep above, so each pair already satisfies first < second.
  for (int k = 0; k < dims.nz; ++k)
    for (int j = 0; j < dims.ny; ++j)
      for (int i = 0; i < dims.nx; ++i) {
        const std::int64_t a = cell_to_node[dims.flat(i, j, k)];
        if (a < 0) continue;
        const int di[3] = {1, 0, 0};
        const int dj[3] = {0, 1, 0};
        const int dk[3] = {0, 0, 1};
        for (int d = 0; d < 3; ++d) {
          const int ni = i + di[d], nj = j + dj[d], nk = k + dk[d];
          if (ni >= dims.nx || nj >= dims.ny || nk >= dims.nz) continue;
          const std::int64_t b = cell_to_node[dims.flat(ni, nj, nk)];
          if (b < 0) continue;
          const auto lo = static_cast<std::uint32_t>(std::min(a, b));
          const auto hi = static_cast<std::uint32_t>(std::max(a, b));
          g.adjacency.emplace_back(lo, hi);
        }
      }
  std::sort(g.adjacency.begin(), g.adjacency.end());
  g.validate();
  return g;
}

namespace {

bool has_edge(const GeoGraph& g, std::uint32_t a, std::uint32_t b) {
  if (a == b) return false;
  const auto p = std::minmax(a, b);
  return std::binary_search(g.adjacency.begin(), g.adjacency.end(),
                            std::make_pair(p.first, p.second));
}

}  // namespace

KSetNeighbourhood neighbourhood(const KSet& s, const GeoGraph& graph) {
  for (auto m : s.members)
    if (m >= graph.node_count) throw ConfigError("neighbourhood: member out of range");

  KSetNeighbourhood out;
  const std::size_t k = s.k();
  // t with |s∩t| = k-1 is s with one member u swapped for a node v not in s.
  for (std::size_t drop = 0; drop < k; ++drop) {
    const std::uint32_t u = s.members[drop];
    for (std::uint32_t v = 0; v < graph.node_count; ++v) {
      if (std::binary_search(s.members.begin(), s.members.end(), v)) continue;
      std::vector<std::uint32_t> members = s.members;
      members[drop] = v;
      KSet t(std::move(members));
      // s\t = {u}, t\s = {v}: local iff (u, v) is an edge.
      if (has_edge(graph, u, v))
        out.local.push_back(std::move(t));
      else
        out.global.push_back(std::move(t));
    }
  }
  std::sort(out.local.begin(), out.local.end());
  std::sort(out.global.begin(), out.global.end());
  return out;
}

Tensor global_mean_trick(const GeoGraph& graph, const Tensor& layer_features) {
  if (layer_features.nrows != graph.node_count)
    throw ConfigError("global_mean_trick: one feature row per node required");
  Tape tape;
  tape.set_check_finite(false);
  const auto in = tape.leaf(layer_features);
  const auto out = tape.global_mean_excl(in, graph.adjacency_lists());
  return tape.value(out);
}

KSetSpace build_kset_space(const GeoGraph& graph, int k) {
  if (k < 1) throw ConfigError("kset space: k must be >= 1");
  if (k > 2) throw ConfigError("kset space: only k in {1,2} is supported");
  if (k == 2 && graph.node_count > kMaxNodesForK2)
    throw ConfigError("kset space: k=2 limited to graphs with <= " +
                      std::to_string(kMaxNodesForK2) + " nodes");

  KSetSpace space;
  space.k = k;
  if (k == 1) {
    auto members = std::make_shared<NeighborLists>();
    members->offsets.push_back(0);
    for (std::uint32_t v = 0; v < graph.node_count; ++v) {
      space.sets.push_back(KSet({v}));
      members->indices.push_back(v);
      members->offsets.push_back(v + 1);
    }
    space.members = members;
    space.local = graph.adjacency_lists();
    // Explicit global lists are quadratic; the model uses the O(V+E)
    // complement trick at k=1, so none are materialized here.
    space.global = nullptr;
    return space;
  }

  std::map<KSet, std::uint32_t> index;
  auto members = std::make_shared<NeighborLists>();
  members->offsets.push_back(0);
  for (std::uint32_t a = 0; a < graph.node_count; ++a)
    for (std::uint32_t b = a + 1; b < graph.node_count; ++b) {
      index.emplace(KSet({a, b}), static_cast<std::uint32_t>(space.sets.size()));
      space.sets.push_back(KSet({a, b}));
      members->indices.push_back(a);
      members->indices.push_back(b);
      members->offsets.push_back(static_cast<std::uint32_t>(members->indices.size()));
    }
  space.members = members;

  auto local = std::make_shared<NeighborLists>();
  auto global = std::make_shared<NeighborLists>();
  local->offsets.push_back(0);
  global->offsets.push_back(0);
  for (const auto& s : space.sets) {
    const auto nb = neighbourhood(s, graph);
    for (const auto& t : nb.local) local->indices.push_back(index.at(t));
    for (const auto& t : nb.global) global->indices.push_back(index.at(t));
    local->offsets.push_back(static_cast<std::uint32_t>(local->indices.size()));
    global->offsets.push_back(static_cast<std::uint32_t>(global->indices.size()));
  }
  space.local = local;
  space.global = global;
  return space;
}

}  // namespace gwae

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "gwae/tape.hpp"
#include "gwae/tensor.hpp"

namespace gwae {

struct CellIndex {
  int i = 0, j = 0, k = 0;
  bool operator==(const CellIndex&) const = default;
};

struct GridDims {
  int nx = 0, ny = 0, nz = 0;
  bool operator==(const GridDims&) const = default;
  std::size_t cell_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
  std::size_t flat(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nx) * (static_cast<std::size_t>(j) +
                                           static_cast<std::size_t>(ny) * static_cast<std::size_t>(k));
  }
};

// Unstructured graph over the active cells of a gridded model. Immutable after
// construction; safe to share across threads.
struct GeoGraph {
  std::size_t node_count = 0;
  std::size_t feature_count = 0;
  std::vector<double> node_features;  // node_count x feature_count, row-major
  std::vector<std::pair<std::uint32_t, std::uint32_t>> adjacency;  // sorted, first < second
  std::vector<CellIndex> node_origin;

  void validate() const;  // throws ConfigError on any broken invariant

  Tensor features_tensor() const;
  std::vector<std::size_t> degrees() const;
  // Symmetric CSR adjacency (one list per node), shared with tape primitives.
  std::shared_ptr<const NeighborLists> adjacency_lists() const;
};

// Sorted k-element subset of node ids.
struct KSet {
  std::vector<std::uint32_t> members;

  explicit KSet(std::vector<std::uint32_t> m);
  std::size_t k() const { return members.size(); }
  bool operator==(const KSet&) const = default;
  bool operator<(const KSet& o) const { return members < o.members; }
};

// One node per active cell, edges between face-adjacent (6-connectivity)
// active cells. features holds one f-vector per grid cell in cell-major
// order; inactive cells' rows are ignored.
GeoGraph build_grid_graph(const GridDims& dims, const std::vector<bool>& active_mask,
                          const std::vector<double>& features, std::size_t feature_count);

// Neighborhood of a k-set: all t with |s∩t| = k-1, split into the local part
// (every u in s\t pairs with the v in t\s through an edge) and the global rest.
struct KSetNeighbourhood {
  std::vector<KSet> local;
  std::vector<KSet> global;
};
KSetNeighbourhood neighbourhood(const KSet& s, const GeoGraph& graph);

// O(V+E) per-node mean over the k=1 global neighborhood:
// (total_sum - local_sum - self) / (V - deg - 1), zero where the complement is
// empty. layer_features is node_count x f.
Tensor global_mean_trick(const GeoGraph& graph, const Tensor& layer_features);

// Enumerated k-set space with explicit local/global neighbor lists, for the
// hierarchical convolution at k >= 2. Quadratic in node count; restricted to
// small graphs.
struct KSetSpace {
  int k = 1;
  std::vector<KSet> sets;
  std::shared_ptr<const NeighborLists> local;
  // Explicit global lists; null at k=1 where the O(V+E) complement trick
  // replaces them.
  std::shared_ptr<const NeighborLists> global;
  // List r = node members of set r; set features start as the member mean.
  std::shared_ptr<const NeighborLists> members;
};

inline constexpr std::size_t kMaxNodesForK2 = 64;

KSetSpace build_kset_space(const GeoGraph& graph, int k);

}  // namespace gwae

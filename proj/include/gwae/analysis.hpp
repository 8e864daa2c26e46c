#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "gwae/tensor.hpp"

namespace gwae {

struct PcaModel {
  std::vector<double> mean;
  Tensor components;  // n_components x d, orthonormal rows
  std::vector<double> explained_variance;  // descending, non-negative
};

// Eigendecomposition of the (population) sample covariance via Jacobi.
PcaModel pca_fit(const Tensor& codes, std::size_t n_components);
std::vector<double> pca_project(const PcaModel& model, const std::vector<double>& code);

struct TsneConfig {
  double perplexity = 30.0;
  int dims = 2;
  int iters = 1000;
  double learning_rate = 200.0;
  double momentum = 0.8;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
};

// Standard t-SNE: per-point bandwidths by binary search to the target
// perplexity, KL(P||Q) minimized by momentum gradient descent. Requires
// n >= 3 * perplexity. kl_history (optional) records KL per iteration,
// without the exaggeration factor.
Tensor tsne(const Tensor& codes, const TsneConfig& cfg, std::uint64_t seed,
            std::vector<double>* kl_history = nullptr);

inline constexpr double kInfiniteDeath = std::numeric_limits<double>::infinity();

struct PersistenceDiagram {
  int dimension = 0;
  std::vector<std::pair<double, double>> pairs;  // (birth, death)
};

// Euclidean MST edge weights (Prim), ascending; the H0 death times.
std::vector<double> mst_edge_weights(const Tensor& points);

// Max-min (farthest point) subsample indices; first point seeded by rng.
std::vector<std::size_t> farthest_point_subsample(const Tensor& points, std::size_t count,
                                                  std::uint64_t seed);

// H0 over all points from the MST; H1 by Vietoris-Rips boundary-matrix column
// reduction on a farthest-point subsample with threshold = 2x the largest MST
// edge of the subsample. Zero-persistence H1 pairs are dropped.
std::vector<PersistenceDiagram> persistence(const Tensor& codes, int max_dim = 1,
                                            std::size_t subsample = 200, std::uint64_t seed = 0);

}  // namespace gwae

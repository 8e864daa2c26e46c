#pragma once

#include <functional>
#include <vector>

#include "gwae/model.hpp"
#include "gwae/tape.hpp"
#include "gwae/tensor.hpp"

namespace gwae {

// Pull-back metric at a latent point: G = J_mu^T J_mu + J_sigma^T J_sigma,
// symmetric positive semi-definite by construction.
struct MetricTensor {
  std::vector<double> z;  // anchor point, length m
  std::vector<double> g;  // m x m row-major

  std::size_t dim() const { return z.size(); }
  void validate() const;  // symmetry and PSD within tolerance
};

enum class PathMetric : std::uint8_t { Euclidean = 0, Geodesic = 1 };

struct LatentPath {
  std::vector<std::vector<double>> points;
  PathMetric metric = PathMetric::Euclidean;
  double riemannian_length = 0.0;
  double euclidean_length = 0.0;
};

// A map from a latent row to a list of output tape nodes; the metric stacks
// the Jacobians of all outputs. Lets tests supply synthetic decoders.
using DifferentiableMap = std::function<std::vector<Tape::Id>(Tape&, Tape::Id)>;

MetricTensor pullback_metric_of(const DifferentiableMap& f, const std::vector<double>& z);
MetricTensor pullback_metric(const GwaeCheckpoint& ckpt, const std::vector<double>& z);

// Any source of metric tensors; production code uses the checkpoint decoder,
// tests can inject closed-form metrics.
using MetricProvider = std::function<MetricTensor(const std::vector<double>&)>;
MetricProvider checkpoint_metric(const GwaeCheckpoint& ckpt);

// 0.5 * logdet(G + eps*I), eps = 1e-9 * trace(G)/m; the inverse-density proxy
// (large in latent regions far from training data).
double log_volume(const MetricTensor& g);
double log_volume(const GwaeCheckpoint& ckpt, const std::vector<double>& z);

// Midpoint-quadrature length: sum_i sqrt(d_i^T * avg(G_i, G_{i+1}) * d_i).
double segment_length(const MetricTensor& ga, const MetricTensor& gb);
double riemannian_length(const MetricProvider& metric,
                         const std::vector<std::vector<double>>& points);
double riemannian_length(const GwaeCheckpoint& ckpt,
                         const std::vector<std::vector<double>>& points);

struct GeodesicConfig {
  int steps = 10;  // interpolation stations; the chain uses steps*4 points
  int knn = 12;
  int threads = 1;
};

// Anchor codes with their metrics evaluated once and reused across shortest
// path queries.
struct AnchorSet {
  Tensor codes;  // n x m
  std::vector<MetricTensor> metrics;
};
AnchorSet build_anchor_set(const MetricProvider& metric, const Tensor& codes, int threads = 1);
AnchorSet build_anchor_set(const GwaeCheckpoint& ckpt, const Tensor& codes, int threads = 1);

struct GeodesicResult {
  LatentPath path;
  // The straight z_a -> z_b chain measured on the same discretization; an
  // upper bound for the geodesic length by construction.
  double chain_riemannian_length = 0.0;
};

// Discrete shortest path: nodes = straight-line chain + anchors, edges = K
// nearest Euclidean neighbors plus the chain itself, weights = Riemannian
// segment lengths, Dijkstra from z_a to z_b.
GeodesicResult geodesic(const MetricProvider& metric, const std::vector<double>& z_a,
                        const std::vector<double>& z_b, const AnchorSet& anchors,
                        const GeodesicConfig& cfg);
GeodesicResult geodesic(const GwaeCheckpoint& ckpt, const std::vector<double>& z_a,
                        const std::vector<double>& z_b, const AnchorSet& anchors,
                        const GeodesicConfig& cfg);

struct InterpolationResult {
  LatentPath path;
  std::vector<std::vector<double>> stations;
  std::vector<double> station_log_volume;
  std::vector<Realisation> realisations;
};

// Resamples the chosen path at `steps` equal arc-length stations (Euclidean
// arc for the straight path, Riemannian arc for the geodesic) and decodes
// each station deterministically.
InterpolationResult interpolate(const GwaeCheckpoint& ckpt, const std::vector<double>& z_a,
                                const std::vector<double>& z_b, int steps, PathMetric metric,
                                const AnchorSet& anchors, const GeodesicConfig& cfg);

// Percentile (0..100) of log_volume over the rows of codes.
double log_volume_percentile(const GwaeCheckpoint& ckpt, const Tensor& codes, double percentile,
                             int threads = 1);

}  // namespace gwae

#include "gwae/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "gwae/errors.hpp"
#include "gwae/linalg.hpp"
#include "gwae/util.hpp"

namespace gwae {

void MetricTensor::validate() const {
  const std::size_t m = dim();
  if (g.size() != m * m) throw ConfigError("metric: size mismatch");
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) trace += g[i * m + i];
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (std::abs(g[i * m + j] - g[j * m + i]) > 1e-10) throw NumericError("metric: not symmetric");
  std::vector<double> w, v;
  jacobi_eigen(g, m, w, v);
  if (w[0] < -1e-8 * std::max(trace, 1e-30)) throw NumericError("metric: not PSD");
}

MetricTensor pullback_metric_of(const DifferentiableMap& f, const std::vector<double>& z) {
  const std::size_t m = z.size();
  Tape tape;
  const Tape::Id in = tape.leaf(Tensor(1, m, z));
  const std::vector<Tape::Id> outs = f(tape, in);
  if (outs.empty()) throw ConfigError("pullback_metric: map has no outputs");

  // Jacobian columns by m forward sweeps.
  std::size_t out_dim = 0;
  for (Tape::Id o : outs) out_dim += tape.value(o).size();
  std::vector<std::vector<double>> cols(m, std::vector<double>(out_dim));
  for (std::size_t i = 0; i < m; ++i) {
    Tensor dir(1, m);
    dir.data[i] = 1.0;
    const auto tangents = tape.jvp(outs, in, dir);
    std::size_t off = 0;
    for (const auto& t : tangents) {
      std::copy(t.data.begin(), t.data.end(), cols[i].begin() + off);
      off += t.data.size();
    }
  }

  MetricTensor g;
  g.z = z;
  g.g.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      const double v = dot(cols[i], cols[j]);
      if (!std::isfinite(v)) throw NumericError("pullback_metric: non-finite Jacobian");
      g.g[i * m + j] = v;
      g.g[j * m + i] = v;
    }
  return g;
}

MetricTensor pullback_metric(const GwaeCheckpoint& ckpt, const std::vector<double>& z) {
  if (z.size() != static_cast<std::size_t>(ckpt.arch.latent_dim))
    throw ConfigError("pullback_metric: wrong latent dimension");
  ckpt.warm_caches();
  return pullback_metric_of(
      [&](Tape& t, Tape::Id in) -> std::vector<Tape::Id> {
        // The metric stacks the mean head and the (exponentiated) spread head.
        const TapeWeights w = put_weights(t, ckpt);
        auto [mu, ls] = decode_on_tape(t, w, ckpt, in);
        return {mu, t.exp(ls)};
      },
      z);
}

MetricProvider checkpoint_metric(const GwaeCheckpoint& ckpt) {
  ckpt.warm_caches();
  return [&ckpt](const std::vector<double>& z) { return pullback_metric(ckpt, z); };
}

double log_volume(const MetricTensor& g) {
  const std::size_t m = g.dim();
  double trace = 0.0;
  for (std::size_t i = 0; i < m; ++i) trace += g.g[i * m + i];
  const double eps = 1e-9 * trace / static_cast<double>(m);
  std::vector<double> w, v;
  jacobi_eigen(g.g, m, w, v);
  double lv = 0.0;
  for (double lam : w) lv += std::log(std::max(lam + eps, 1e-300));
  return 0.5 * lv;
}

double log_volume(const GwaeCheckpoint& ckpt, const std::vector<double>& z) {
  return log_volume(pullback_metric(ckpt, z));
}

double segment_length(const MetricTensor& ga, const MetricTensor& gb) {
  const std::size_t m = ga.dim();
  double q = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double di = gb.z[i] - ga.z[i];
    for (std::size_t j = 0; j < m; ++j) {
      const double dj = gb.z[j] - ga.z[j];
      q += di * 0.5 * (ga.g[i * m + j] + gb.g[i * m + j]) * dj;
    }
  }
  return std::sqrt(std::max(q, 0.0));
}

double riemannian_length(const MetricProvider& metric,
                         const std::vector<std::vector<double>>& points) {
  if (points.size() < 2) return 0.0;
  std::vector<MetricTensor> gs(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) gs[i] = metric(points[i]);
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) len += segment_length(gs[i], gs[i + 1]);
  return len;
}

double riemannian_length(const GwaeCheckpoint& ckpt,
                         const std::vector<std::vector<double>>& points) {
  return riemannian_length(checkpoint_metric(ckpt), points);
}

AnchorSet build_anchor_set(const MetricProvider& metric, const Tensor& codes, int threads) {
  AnchorSet set;
  set.codes = codes;
  set.metrics.resize(codes.nrows);
  const std::size_t m = codes.ncols;
  parallel_for(codes.nrows, threads, [&](std::size_t i) {
    set.metrics[i] =
        metric(std::vector<double>(codes.data.begin() + i * m, codes.data.begin() + (i + 1) * m));
  });
  return set;
}

AnchorSet build_anchor_set(const GwaeCheckpoint& ckpt, const Tensor& codes, int threads) {
  return build_anchor_set(checkpoint_metric(ckpt), codes, threads);
}

namespace {

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

GeodesicResult geodesic(const MetricProvider& metric, const std::vector<double>& z_a,
                        const std::vector<double>& z_b, const AnchorSet& anchors,
                        const GeodesicConfig& cfg) {
  if (z_a.size() != z_b.size()) throw ConfigError("geodesic: endpoint dimensions differ");
  const std::size_t m = z_a.size();
  if (anchors.codes.nrows > 0 && anchors.codes.ncols != m)
    throw ConfigError("geodesic: anchor dimension mismatch");

  GeodesicResult result;
  result.path.metric = PathMetric::Geodesic;
  if (z_a == z_b) {
    result.path.points = {z_a};
    return result;
  }

  // node set: straight-line chain first (index 0 = start, chain_n-1 = end),
  // then the anchors
  const std::size_t chain_n = std::max(2, cfg.steps * 4);
  std::vector<std::vector<double>> nodes;
  for (std::size_t i = 0; i < chain_n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(chain_n - 1);
    std::vector<double> p(m);
    for (std::size_t d = 0; d < m; ++d) p[d] = z_a[d] + t * (z_b[d] - z_a[d]);
    nodes.push_back(std::move(p));
  }
  for (std::size_t r = 0; r < anchors.codes.nrows; ++r)
    nodes.emplace_back(anchors.codes.data.begin() + r * m,
                       anchors.codes.data.begin() + (r + 1) * m);
  const std::size_t n = nodes.size();

  std::vector<MetricTensor> metrics(n);
  parallel_for(chain_n, cfg.threads, [&](std::size_t i) { metrics[i] = metric(nodes[i]); });
  for (std::size_t r = 0; r < anchors.codes.nrows; ++r) metrics[chain_n + r] = anchors.metrics[r];

  // undirected edges: consecutive chain links guarantee connectivity, plus
  // K nearest Euclidean neighbors of every node
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t i = 0; i + 1 < chain_n; ++i)
    edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1)});
  const std::size_t knn = std::min<std::size_t>(cfg.knn, n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> dist(n);
    for (std::size_t j = 0; j < n; ++j) dist[j] = euclid(nodes[i], nodes[j]);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t x, std::size_t y) { return dist[x] < dist[y]; });
    std::size_t added = 0;
    for (std::size_t q = 0; q < n && added < knn; ++q) {
      if (idx[q] == i) continue;
      edges.push_back({static_cast<std::uint32_t>(std::min(i, idx[q])),
                       static_cast<std::uint32_t>(std::max(i, idx[q]))});
      ++added;
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(n);
  for (const auto& [a, b] : edges) {
    const double wgt = segment_length(metrics[a], metrics[b]);
    adj[a].push_back({b, wgt});
    adj[b].push_back({a, wgt});
  }

  // Dijkstra start=0 (z_a) to chain_n-1 (z_b)
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::int64_t> prev(n, -1);
  using Qe = std::pair<double, std::uint32_t>;
  std::priority_queue<Qe, std::vector<Qe>, std::greater<>> pq;
  dist[0] = 0.0;
  pq.push({0.0, 0});
  while (!pq.empty()) {
    const auto [dcur, u] = pq.top();
    pq.pop();
    if (dcur > dist[u]) continue;
    for (const auto& [v, wgt] : adj[u])
      if (dist[u] + wgt < dist[v]) {
        dist[v] = dist[u] + wgt;
        prev[v] = u;
        pq.push({dist[v], v});
      }
  }
  const auto target = static_cast<std::uint32_t>(chain_n - 1);
  if (!std::isfinite(dist[target]))
    throw NumericError("geodesic: target unreachable (chain edges missing)");

  std::vector<std::uint32_t> seq;
  for (std::int64_t at = target; at != -1; at = prev[at])
    seq.push_back(static_cast<std::uint32_t>(at));
  std::reverse(seq.begin(), seq.end());

  for (std::uint32_t id : seq) result.path.points.push_back(nodes[id]);
  result.path.riemannian_length = dist[target];
  for (std::size_t i = 0; i + 1 < seq.size(); ++i)
    result.path.euclidean_length += euclid(nodes[seq[i]], nodes[seq[i + 1]]);
  for (std::size_t i = 0; i + 1 < chain_n; ++i)
    result.chain_riemannian_length += segment_length(metrics[i], metrics[i + 1]);
  return result;
}

GeodesicResult geodesic(const GwaeCheckpoint& ckpt, const std::vector<double>& z_a,
                        const std::vector<double>& z_b, const AnchorSet& anchors,
                        const GeodesicConfig& cfg) {
  if (z_a.size() != static_cast<std::size_t>(ckpt.arch.latent_dim))
    throw ConfigError("geodesic: wrong latent dimension");
  return geodesic(checkpoint_metric(ckpt), z_a, z_b, anchors, cfg);
}

InterpolationResult interpolate(const GwaeCheckpoint& ckpt, const std::vector<double>& z_a,
                                const std::vector<double>& z_b, int steps, PathMetric metric,
                                const AnchorSet& anchors, const GeodesicConfig& cfg) {
  if (steps < 2) throw ConfigError("interpolate: need at least 2 stations");
  const std::size_t m = ckpt.arch.latent_dim;
  if (z_a.size() != m || z_b.size() != m) throw ConfigError("interpolate: wrong latent dimension");

  InterpolationResult out;
  if (metric == PathMetric::Euclidean) {
    out.path.metric = PathMetric::Euclidean;
    out.path.points = {z_a, z_b};
    out.path.euclidean_length = euclid(z_a, z_b);
    out.path.riemannian_length = riemannian_length(ckpt, out.path.points);
    for (int s = 0; s < steps; ++s) {
      if (s == 0) {
        out.stations.push_back(z_a);
        continue;
      }
      if (s == steps - 1) {
        out.stations.push_back(z_b);
        continue;
      }
      const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
      std::vector<double> p(m);
      for (std::size_t d = 0; d < m; ++d) p[d] = z_a[d] + t * (z_b[d] - z_a[d]);
      out.stations.push_back(std::move(p));
    }
  } else {
    GeodesicConfig gcfg = cfg;
    gcfg.steps = steps;
    GeodesicResult geo = geodesic(ckpt, z_a, z_b, anchors, gcfg);
    out.path = geo.path;
    const auto& pts = out.path.points;
    if (pts.size() == 1) {
      out.stations.assign(steps, pts[0]);
    } else {
      // cumulative Riemannian arc along the polyline
      const MetricProvider provider = checkpoint_metric(ckpt);
      std::vector<MetricTensor> gs(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) gs[i] = provider(pts[i]);
      std::vector<double> cum(pts.size(), 0.0);
      for (std::size_t i = 1; i < pts.size(); ++i)
        cum[i] = cum[i - 1] + segment_length(gs[i - 1], gs[i]);
      const double total = cum.back();
      for (int s = 0; s < steps; ++s) {
        if (s == 0) {
          out.stations.push_back(pts.front());
          continue;
        }
        if (s == steps - 1) {
          out.stations.push_back(pts.back());
          continue;
        }
        const double target = total * static_cast<double>(s) / static_cast<double>(steps - 1);
        std::size_t seg = 0;
        while (seg + 2 < pts.size() && cum[seg + 1] < target) ++seg;
        const double span = cum[seg + 1] - cum[seg];
        const double t = span > 0.0 ? (target - cum[seg]) / span : 0.0;
        std::vector<double> p(m);
        for (std::size_t d = 0; d < m; ++d)
          p[d] = pts[seg][d] + t * (pts[seg + 1][d] - pts[seg][d]);
        out.stations.push_back(std::move(p));
      }
    }
  }

  ckpt.warm_caches();
  out.station_log_volume.resize(out.stations.size());
  out.realisations.resize(out.stations.size());
  parallel_for(out.stations.size(), cfg.threads, [&](std::size_t s) {
    out.station_log_volume[s] = log_volume(ckpt, out.stations[s]);
    out.realisations[s] = decode_realisation(ckpt, out.stations[s]);
  });
  return out;
}

double log_volume_percentile(const GwaeCheckpoint& ckpt, const Tensor& codes, double percentile,
                             int threads) {
  if (codes.nrows == 0) throw ConfigError("log_volume_percentile: no codes");
  ckpt.warm_caches();
  std::vector<double> lv(codes.nrows);
  const std::size_t m = codes.ncols;
  parallel_for(codes.nrows, threads, [&](std::size_t i) {
    std::vector<double> z(codes.data.begin() + i * m, codes.data.begin() + (i + 1) * m);
    lv[i] = log_volume(ckpt, z);
  });
  std::sort(lv.begin(), lv.end());
  const double pos = std::clamp(percentile, 0.0, 100.0) / 100.0 * (lv.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, lv.size() - 1);
  const double frac = pos - lo;
  return lv[lo] * (1.0 - frac) + lv[hi] * frac;
}

}  // namespace gwae

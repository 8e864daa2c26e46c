#include "gwae/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gwae/errors.hpp"
#include "gwae/linalg.hpp"
#include "gwae/rng.hpp"

namespace gwae {

PcaModel pca_fit(const Tensor& codes, std::size_t n_components) {
  const std::size_t n = codes.nrows, d = codes.ncols;
  if (n == 0) throw ConfigError("pca_fit: no samples");
  n_components = std::min(n_components, d);

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += codes.at(i, j);
  for (auto& m : model.mean) m /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = codes.at(i, a) - model.mean[a];
      for (std::size_t b = a; b < d; ++b)
        cov[a * d + b] += xa * (codes.at(i, b) - model.mean[b]);
    }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      cov[a * d + b] /= static_cast<double>(n);
      cov[b * d + a] = cov[a * d + b];
    }

  std::vector<double> w, v;
  jacobi_eigen(cov, d, w, v);  // ascending
  model.components = Tensor(n_components, d);
  model.explained_variance.resize(n_components);
  for (std::size_t c = 0; c < n_components; ++c) {
    const std::size_t src = d - 1 - c;  // descending
    model.explained_variance[c] = std::max(w[src], 0.0);
    for (std::size_t j = 0; j < d; ++j) model.components.at(c, j) = v[j * d + src];
  }
  return model;
}

std::vector<double> pca_project(const PcaModel& model, const std::vector<double>& code) {
  if (code.size() != model.mean.size()) throw ConfigError("pca_project: dimension mismatch");
  std::vector<double> out(model.components.nrows, 0.0);
  for (std::size_t c = 0; c < model.components.nrows; ++c)
    for (std::size_t j = 0; j < code.size(); ++j)
      out[c] += (code[j] - model.mean[j]) * model.components.at(c, j);
  return out;
}

namespace {

std::vector<double> pairwise_sq(const Tensor& x) {
  const std::size_t n = x.nrows, d = x.ncols;
  std::vector<double> d2(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t q = 0; q < d; ++q) {
        const double diff = x.at(i, q) - x.at(j, q);
        s += diff * diff;
      }
      d2[i * n + j] = s;
      d2[j * n + i] = s;
    }
  return d2;
}

}  // namespace

Tensor tsne(const Tensor& codes, const TsneConfig& cfg, std::uint64_t seed,
            std::vector<double>* kl_history) {
  const std::size_t n = codes.nrows;
  if (cfg.dims != 2 && cfg.dims != 3) throw ConfigError("tsne: dims must be 2 or 3");
  if (static_cast<double>(n) < 3.0 * cfg.perplexity)
    throw ConfigError("tsne: perplexity infeasible, need n >= 3*perplexity");

  const std::vector<double> d2 = pairwise_sq(codes);

  // conditional distributions: per-point precision by bisection on entropy
  std::vector<double> p(n * n, 0.0);
  const double target_h = std::log(cfg.perplexity);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 50; ++it) {
      double sum = 0.0, dsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double e = std::exp(-beta * d2[i * n + j]);
        sum += e;
        dsum += d2[i * n + j] * e;
      }
      const double h = sum > 0.0 ? std::log(sum) + beta * dsum / sum : 0.0;
      if (std::abs(h - target_h) < 1e-7) break;
      if (h > target_h) {
        beta_lo = beta;
        beta = std::isfinite(beta_hi) ? 0.5 * (beta + beta_hi) : beta * 2.0;
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta + beta_lo);
      }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sum += std::exp(-beta * d2[i * n + j]);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) p[i * n + j] = std::exp(-beta * d2[i * n + j]) / std::max(sum, 1e-300);
  }
  // symmetrize
  std::vector<double> psym(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      psym[i * n + j] = std::max((p[i * n + j] + p[j * n + i]) / (2.0 * n), 1e-12);

  const std::size_t dims = cfg.dims;
  RngStream rng = RngStream(seed).derive("tsne");
  Tensor y(n, dims);
  for (auto& v : y.data) v = rng.normal() * 1e-4;
  std::vector<double> vel(n * dims, 0.0), grad(n * dims, 0.0), q(n * n, 0.0);
  std::vector<double> gain(n * dims, 1.0);

  for (int iter = 0; iter < cfg.iters; ++iter) {
    const double exag = iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;

    double qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < dims; ++d) {
          const double diff = y.at(i, d) - y.at(j, d);
          s += diff * diff;
        }
        const double num = 1.0 / (1.0 + s);
        q[i * n + j] = num;
        q[j * n + i] = num;
        qsum += 2.0 * num;
      }
    qsum = std::max(qsum, 1e-300);

    std::fill(grad.begin(), grad.end(), 0.0);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double pij = psym[i * n + j];
        const double qnum = q[i * n + j];
        const double qij = std::max(qnum / qsum, 1e-300);
        const double mult = 4.0 * (exag * pij - qij) * qnum;
        for (std::size_t d = 0; d < dims; ++d)
          grad[i * dims + d] += mult * (y.at(i, d) - y.at(j, d));
        if (j > i) kl += 2.0 * pij * std::log(pij / qij);
      }
    if (kl_history) kl_history->push_back(kl);

    // adaptive per-coordinate gains keep the fixed learning rate stable
    for (std::size_t k = 0; k < n * dims; ++k) {
      gain[k] = (grad[k] > 0.0) != (vel[k] > 0.0) ? gain[k] + 0.2 : gain[k] * 0.8;
      gain[k] = std::max(gain[k], 0.01);
      vel[k] = cfg.momentum * vel[k] - cfg.learning_rate * gain[k] * grad[k];
      y.data[k] += vel[k];
    }
    // re-center
    for (std::size_t d = 0; d < dims; ++d) {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += y.at(i, d);
      m /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y.at(i, d) -= m;
    }
  }
  return y;
}

std::vector<double> mst_edge_weights(const Tensor& points) {
  const std::size_t n = points.nrows;
  if (n <= 1) return {};
  const std::size_t d = points.ncols;
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<bool> used(n, false);
  std::vector<double> weights;
  used[0] = true;
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t q = 0; q < d; ++q) {
      const double diff = points.at(a, q) - points.at(b, q);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  for (std::size_t j = 1; j < n; ++j) best[j] = dist(0, j);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t pick = 0;
    double bw = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (!used[j] && best[j] < bw) {
        bw = best[j];
        pick = j;
      }
    used[pick] = true;
    weights.push_back(bw);
    for (std::size_t j = 0; j < n; ++j)
      if (!used[j]) best[j] = std::min(best[j], dist(pick, j));
  }
  std::sort(weights.begin(), weights.end());
  return weights;
}

std::vector<std::size_t> farthest_point_subsample(const Tensor& points, std::size_t count,
                                                  std::uint64_t seed) {
  const std::size_t n = points.nrows;
  count = std::min(count, n);
  if (count == 0) return {};
  const std::size_t d = points.ncols;
  RngStream rng = RngStream(seed).derive("fps");
  std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.next_below(n))};
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t q = 0; q < d; ++q) {
      const double diff = points.at(a, q) - points.at(b, q);
      s += diff * diff;
    }
    return std::sqrt(s);
  };
  while (chosen.size() < count) {
    const std::size_t last = chosen.back();
    for (std::size_t j = 0; j < n; ++j) mind[j] = std::min(mind[j], dist(last, j));
    std::size_t pick = 0;
    double bw = -1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (mind[j] > bw) {
        bw = mind[j];
        pick = j;
      }
    if (bw <= 0.0) break;  // all remaining points coincide with chosen ones
    chosen.push_back(pick);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

struct RipsEdge {
  double diam;
  std::uint32_t a, b;
  bool operator<(const RipsEdge& o) const {
    return std::tie(diam, a, b) < std::tie(o.diam, o.a, o.b);
  }
};

struct RipsTriangle {
  double diam;
  std::uint32_t a, b, c;
  bool operator<(const RipsTriangle& o) const {
    return std::tie(diam, a, b, c) < std::tie(o.diam, o.a, o.b, o.c);
  }
};

// Z/2 symmetric difference of sorted index vectors.
std::vector<std::uint32_t> xor_columns(const std::vector<std::uint32_t>& x,
                                       const std::vector<std::uint32_t>& y) {
  std::vector<std::uint32_t> out;
  out.reserve(x.size() + y.size());
  std::set_symmetric_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<PersistenceDiagram> persistence(const Tensor& codes, int max_dim,
                                            std::size_t subsample, std::uint64_t seed) {
  for (double v : codes.data)
    if (!std::isfinite(v)) throw ConfigError("persistence: non-finite input");
  std::vector<PersistenceDiagram> out;

  PersistenceDiagram h0;
  h0.dimension = 0;
  for (double w : mst_edge_weights(codes)) h0.pairs.push_back({0.0, w});
  h0.pairs.push_back({0.0, kInfiniteDeath});
  out.push_back(std::move(h0));
  if (max_dim < 1) return out;

  const auto keep = farthest_point_subsample(codes, subsample, seed);
  const std::size_t n = keep.size();
  if (n < 4) throw ConfigError("persistence: subsample too small for H1 (need >= 4 points)");
  Tensor pts(n, codes.ncols);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < codes.ncols; ++j) pts.at(i, j) = codes.at(keep[i], j);

  const auto sub_mst = mst_edge_weights(pts);
  const double threshold = 2.0 * sub_mst.back();

  std::vector<double> d2 = pairwise_sq(pts);
  auto pdist = [&](std::size_t a, std::size_t b) { return std::sqrt(d2[a * n + b]); };

  std::vector<RipsEdge> edges;
  for (std::uint32_t a = 0; a < n; ++a)
    for (std::uint32_t b = a + 1; b < n; ++b)
      if (pdist(a, b) <= threshold) edges.push_back({pdist(a, b), a, b});
  std::sort(edges.begin(), edges.end());

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> edge_index;
  for (std::uint32_t e = 0; e < edges.size(); ++e)
    edge_index[{edges[e].a, edges[e].b}] = e;

  // union-find in filtration order: edges that merge components are negative,
  // the rest create 1-cycles
  UnionFind uf(n);
  std::vector<bool> positive(edges.size(), false);
  for (std::uint32_t e = 0; e < edges.size(); ++e)
    positive[e] = !uf.unite(edges[e].a, edges[e].b);

  std::vector<RipsTriangle> tris;
  for (std::uint32_t a = 0; a < n; ++a)
    for (std::uint32_t b = a + 1; b < n; ++b) {
      if (pdist(a, b) > threshold) continue;
      for (std::uint32_t c = b + 1; c < n; ++c) {
        const double diam = std::max({pdist(a, b), pdist(a, c), pdist(b, c)});
        if (diam <= threshold) tris.push_back({diam, a, b, c});
      }
    }
  std::sort(tris.begin(), tris.end());

  // boundary-matrix column reduction over the edges
  std::map<std::uint32_t, std::vector<std::uint32_t>> pivot_col;
  std::vector<bool> edge_paired(edges.size(), false);
  PersistenceDiagram h1;
  h1.dimension = 1;
  for (const auto& t : tris) {
    std::vector<std::uint32_t> col = {edge_index.at({t.a, t.b}), edge_index.at({t.a, t.c}),
                                      edge_index.at({t.b, t.c})};
    std::sort(col.begin(), col.end());
    while (!col.empty()) {
      const std::uint32_t low = col.back();
      auto it = pivot_col.find(low);
      if (it == pivot_col.end()) break;
      col = xor_columns(col, it->second);
    }
    if (col.empty()) continue;
    const std::uint32_t low = col.back();
    pivot_col.emplace(low, std::move(col));
    edge_paired[low] = true;
    const double birth = edges[low].diam;
    if (t.diam > birth) h1.pairs.push_back({birth, t.diam});
  }
  for (std::uint32_t e = 0; e < edges.size(); ++e)
    if (positive[e] && !edge_paired[e]) h1.pairs.push_back({edges[e].diam, kInfiniteDeath});
  std::sort(h1.pairs.begin(), h1.pairs.end());
  out.push_back(std::move(h1));
  return out;
}

}  // namespace gwae

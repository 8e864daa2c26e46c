#pragma once

// Independent oracles used by the test suites: finite differences, brute-force
// neighborhood enumeration, dense linear solves, Kruskal MST. These must stay
// independent of the implementation paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "gwae/graph.hpp"
#include "gwae/rng.hpp"
#include "gwae/tensor.hpp"

namespace oracle {

inline gwae::Tensor fd_gradient(const std::function<double(const gwae::Tensor&)>& f,
                                gwae::Tensor x, double step = 1e-5) {
  gwae::Tensor g(x.nrows, x.ncols);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + step;
    const double hi = f(x);
    x.data[i] = keep - step;
    const double lo = f(x);
    x.data[i] = keep;
    g.data[i] = (hi - lo) / (2.0 * step);
  }
  return g;
}

inline double max_rel_err(const gwae::Tensor& a, const gwae::Tensor& b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a.data[i]), std::abs(b.data[i]), floor});
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

inline std::vector<gwae::KSet> all_ksets(std::size_t n, int k) {
  std::vector<gwae::KSet> out;
  if (k == 1) {
    for (std::uint32_t v = 0; v < n; ++v) out.push_back(gwae::KSet({v}));
  } else if (k == 2) {
    for (std::uint32_t a = 0; a < n; ++a)
      for (std::uint32_t b = a + 1; b < n; ++b) out.push_back(gwae::KSet({a, b}));
  }
  return out;
}

struct BruteNeighbourhood {
  std::vector<gwae::KSet> local, global;
};

// Scans every k-set and applies the definitions directly.
inline BruteNeighbourhood brute_neighbourhood(const gwae::KSet& s, const gwae::GeoGraph& g) {
  auto edge = [&](std::uint32_t a, std::uint32_t b) {
    const auto p = std::minmax(a, b);
    return std::binary_search(g.adjacency.begin(), g.adjacency.end(),
                              std::make_pair(p.first, p.second));
  };
  BruteNeighbourhood out;
  for (const auto& t : all_ksets(g.node_count, static_cast<int>(s.k()))) {
    std::vector<std::uint32_t> inter;
    std::set_intersection(s.members.begin(), s.members.end(), t.members.begin(), t.members.end(),
                          std::back_inserter(inter));
    if (inter.size() != s.k() - 1 || t == s) continue;
    std::vector<std::uint32_t> s_only, t_only;
    std::set_difference(s.members.begin(), s.members.end(), t.members.begin(), t.members.end(),
                        std::back_inserter(s_only));
    std::set_difference(t.members.begin(), t.members.end(), s.members.begin(), s.members.end(),
                        std::back_inserter(t_only));
    bool local = true;
    for (auto u : s_only)
      for (auto v : t_only)
        if (!edge(u, v)) local = false;
    if (local)
      out.local.push_back(t);
    else
      out.global.push_back(t);
  }
  return out;
}

inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b,
                                       std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
    std::swap(b[col], b[piv]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= a[r * n + c] * x[c];
    x[r] = s / a[r * n + r];
  }
  return x;
}

inline gwae::GeoGraph random_graph(std::size_t n, double edge_prob, std::uint64_t seed,
                                   std::size_t f = 2) {
  gwae::RngStream rng(seed);
  gwae::GeoGraph g;
  g.node_count = n;
  g.feature_count = f;
  for (std::size_t v = 0; v < n; ++v) {
    g.node_origin.push_back({static_cast<int>(v), 0, 0});
    for (std::size_t c = 0; c < f; ++c) g.node_features.push_back(rng.uniform(-1.0, 1.0));
  }
  for (std::uint32_t a = 0; a < n; ++a)
    for (std::uint32_t b = a + 1; b < n; ++b)
      if (rng.next_double() < edge_prob) g.adjacency.push_back({a, b});
  g.validate();
  return g;
}

inline std::vector<double> kruskal_mst(const gwae::Tensor& pts) {
  const std::size_t n = pts.nrows;
  struct E {
    double w;
    std::size_t a, b;
  };
  std::vector<E> edges;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double s = 0.0;
      for (std::size_t d = 0; d < pts.ncols; ++d) {
        const double diff = pts.at(a, d) - pts.at(b, d);
        s += diff * diff;
      }
      edges.push_back({std::sqrt(s), a, b});
    }
  std::sort(edges.begin(), edges.end(), [](const E& x, const E& y) { return x.w < y.w; });
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<double> weights;
  for (const auto& e : edges) {
    const auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    parent[ra] = rb;
    weights.push_back(e.w);
  }
  std::sort(weights.begin(), weights.end());
  return weights;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(std::max(sxx * syy, 1e-300));
}

}  // namespace oracle

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gwae/analysis.hpp"
#include "gwae/errors.hpp"
#include "gwae/rng.hpp"
#include "oracles.hpp"

using namespace gwae;

TEST_CASE("pca: collinear points put all variance on the first component") {
  Tensor pts(20, 2);
  for (int i = 0; i < 20; ++i) {
    pts.at(i, 0) = 0.5 * i;
    pts.at(i, 1) = -1.5 * i + 3.0;
  }
  const PcaModel m = pca_fit(pts, 2);
  CHECK(m.explained_variance[0] > 0.0);
  CHECK(m.explained_variance[1] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("pca: eigenpairs satisfy the covariance eigen equations") {
  RngStream rng(4);
  Tensor pts(10, 5);
  for (auto& x : pts.data) x = rng.uniform(-2.0, 2.0);
  const PcaModel m = pca_fit(pts, 5);

  // independent covariance assembly
  std::vector<double> mean(5, 0.0), cov(25, 0.0);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t a = 0; a < 5; ++a) mean[a] += pts.at(i, a) / 10.0;
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t b = 0; b < 5; ++b)
        cov[a * 5 + b] += (pts.at(i, a) - mean[a]) * (pts.at(i, b) - mean[b]) / 10.0;

  // residual ||C v - lambda v|| per component and variance ordering
  for (std::size_t c = 0; c < 5; ++c) {
    if (c > 0) CHECK(m.explained_variance[c] <= m.explained_variance[c - 1] + 1e-12);
    double resid = 0.0;
    for (std::size_t a = 0; a < 5; ++a) {
      double cv = 0.0;
      for (std::size_t b = 0; b < 5; ++b) cv += cov[a * 5 + b] * m.components.at(c, b);
      resid = std::max(resid, std::abs(cv - m.explained_variance[c] * m.components.at(c, a)));
    }
    CHECK(resid < 1e-8);
  }
  // orthonormal rows
  for (std::size_t c1 = 0; c1 < 5; ++c1)
    for (std::size_t c2 = 0; c2 < 5; ++c2) {
      double d = 0.0;
      for (std::size_t b = 0; b < 5; ++b) d += m.components.at(c1, b) * m.components.at(c2, b);
      CHECK(std::abs(d - (c1 == c2 ? 1.0 : 0.0)) < 1e-8);
    }
  // explained-variance sum = total variance
  double total = 0.0, sum = 0.0;
  for (std::size_t a = 0; a < 5; ++a) total += cov[a * 5 + a];
  for (double v : m.explained_variance) sum += v;
  CHECK(std::abs(total - sum) < 1e-8);
}

TEST_CASE("pca: project then back-project reproduces centered data") {
  RngStream rng(6);
  Tensor pts(15, 4);
  for (auto& x : pts.data) x = rng.uniform(-1.0, 1.0);
  const PcaModel m = pca_fit(pts, 4);
  for (std::size_t i = 0; i < pts.nrows; ++i) {
    std::vector<double> row(4);
    for (std::size_t d = 0; d < 4; ++d) row[d] = pts.at(i, d);
    const auto proj = pca_project(m, row);
    for (std::size_t d = 0; d < 4; ++d) {
      double back = m.mean[d];
      for (std::size_t c = 0; c < 4; ++c) back += proj[c] * m.components.at(c, d);
      CHECK(std::abs(back - row[d]) < 1e-8);
    }
  }
}

TEST_CASE("tsne: separates two far clusters") {
  RngStream rng(8);
  const std::size_t half = 40, m = 8;
  Tensor pts(2 * half, m);
  for (std::size_t i = 0; i < 2 * half; ++i)
    for (std::size_t d = 0; d < m; ++d)
      pts.at(i, d) = rng.normal() + (i < half && d == 0 ? 20.0 : 0.0);

  TsneConfig cfg;
  cfg.perplexity = 10.0;
  cfg.iters = 400;
  cfg.learning_rate = 20.0;  // scaled to the small point count
  const Tensor y = tsne(pts, cfg, 5);

  double c0[2] = {0, 0}, c1[2] = {0, 0};
  for (std::size_t i = 0; i < 2 * half; ++i)
    for (std::size_t d = 0; d < 2; ++d) (i < half ? c0[d] : c1[d]) += y.at(i, d) / half;
  double spread = 0.0;
  for (std::size_t i = 0; i < 2 * half; ++i) {
    const double* c = i < half ? c0 : c1;
    spread += std::hypot(y.at(i, 0) - c[0], y.at(i, 1) - c[1]) / (2 * half);
  }
  const double sep = std::hypot(c0[0] - c1[0], c0[1] - c1[1]);
  CHECK(sep >= 5.0 * spread);
}

TEST_CASE("tsne: smoke contract at the smallest feasible size") {
  Tensor pts(3, 2, {0.0, 0.0, 1.0, 0.0, 0.0, 1.0});
  TsneConfig cfg;
  cfg.perplexity = 1.0;
  cfg.iters = 50;
  const Tensor y = tsne(pts, cfg, 1);
  for (double v : y.data) CHECK(std::isfinite(v));
}

TEST_CASE("tsne: perplexity infeasibility rejected") {
  Tensor pts(5, 2);
  TsneConfig cfg;
  cfg.perplexity = 2.0;  // needs n >= 6
  CHECK_THROWS_AS(tsne(pts, cfg, 1), ConfigError);
}

TEST_CASE("tsne: deterministic for a fixed seed and KL settles") {
  RngStream rng(12);
  Tensor pts(45, 4);
  for (auto& x : pts.data) x = rng.normal();
  TsneConfig cfg;
  cfg.perplexity = 8.0;
  cfg.iters = 350;
  cfg.learning_rate = 20.0;
  std::vector<double> kl1, kl2;
  const Tensor a = tsne(pts, cfg, 3, &kl1);
  const Tensor b = tsne(pts, cfg, 3, &kl2);
  CHECK(a.data == b.data);
  CHECK(kl1 == kl2);
  // non-increasing over the last 100 iterations within noise
  for (std::size_t i = kl1.size() - 100; i + 1 < kl1.size(); ++i)
    CHECK(kl1[i + 1] <= kl1[i] + 1e-3);
}

TEST_CASE("persistence: three collinear points") {
  Tensor pts(3, 1, {0.0, 2.0, 4.0});
  const auto diagrams = persistence(pts, 0);
  REQUIRE(diagrams.size() == 1);
  const auto& h0 = diagrams[0].pairs;
  REQUIRE(h0.size() == 3);  // one bar per point
  CHECK(h0[0].second == doctest::Approx(2.0));
  CHECK(h0[1].second == doctest::Approx(2.0));
  CHECK(std::isinf(h0[2].second));
}

TEST_CASE("persistence: unit square has exactly one 1-cycle bar") {
  Tensor pts(4, 2, {0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0});
  const auto diagrams = persistence(pts, 1, 10, 1);
  REQUIRE(diagrams.size() == 2);
  const auto& h1 = diagrams[1].pairs;
  REQUIRE(h1.size() == 1);
  CHECK(h1[0].first == doctest::Approx(1.0));
  CHECK(h1[0].second == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("persistence: two far clusters give one dominant H0 death") {
  RngStream rng(14);
  Tensor pts(40, 3);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t d = 0; d < 3; ++d)
      pts.at(i, d) = 0.1 * rng.normal() + (i < 20 && d == 0 ? 50.0 : 0.0);
  const auto diagrams = persistence(pts, 0);
  std::vector<double> deaths;
  for (const auto& [b, d] : diagrams[0].pairs)
    if (std::isfinite(d)) deaths.push_back(d);
  std::sort(deaths.begin(), deaths.end());
  CHECK(deaths.back() > 5.0 * deaths[deaths.size() - 2]);
}

TEST_CASE("persistence: H0 deaths equal the Kruskal MST weights") {
  RngStream rng(16);
  for (std::size_t n : {10UL, 40UL, 100UL}) {
    Tensor pts(n, 4);
    for (auto& x : pts.data) x = rng.uniform(-3.0, 3.0);
    const auto diagrams = persistence(pts, 0);
    const auto mst = oracle::kruskal_mst(pts);
    REQUIRE(diagrams[0].pairs.size() == n);  // bar count = point count
    for (std::size_t i = 0; i + 1 < n; ++i)
      CHECK(diagrams[0].pairs[i].second == doctest::Approx(mst[i]).epsilon(1e-10));
  }
}

TEST_CASE("persistence: H1 needs at least 4 subsampled points") {
  Tensor pts(3, 2, {0.0, 0.0, 1.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(persistence(pts, 1, 3, 1), ConfigError);
}

TEST_CASE("farthest point subsample: deterministic, spread out") {
  RngStream rng(18);
  Tensor pts(50, 2);
  for (auto& x : pts.data) x = rng.uniform(0.0, 1.0);
  const auto a = farthest_point_subsample(pts, 10, 7);
  const auto b = farthest_point_subsample(pts, 10, 7);
  CHECK(a == b);
  CHECK(a.size() == 10);
  CHECK(std::adjacent_find(a.begin(), a.end()) == a.end());  // unique, sorted
}

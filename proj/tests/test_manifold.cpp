#include <doctest.h>

#include <cmath>

#include "gwae/errors.hpp"
#include "gwae/linalg.hpp"
#include "gwae/manifold.hpp"
#include "oracles.hpp"

using namespace gwae;

namespace {

GwaeCheckpoint tiny_checkpoint(int m = 3, std::uint64_t seed = 2) {
  ModelConfig arch;
  arch.latent_dim = m;
  arch.hidden1 = 5;
  arch.hidden2 = 6;
  return init_checkpoint(arch, make_grid(3, 2, 2), NormStats{}, seed);
}

// closed-form providers for controlled geometry
MetricProvider constant_metric(std::size_t m, double scale) {
  return [m, scale](const std::vector<double>& z) {
    MetricTensor g;
    g.z = z;
    g.g.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) g.g[i * m + i] = scale;
    return g;
  };
}

MetricProvider radial_metric(std::size_t m) {
  return [m](const std::vector<double>& z) {
    double r2 = 0.0;
    for (double v : z) r2 += v * v;
    MetricTensor g;
    g.z = z;
    g.g.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) g.g[i * m + i] = 1.0 + r2;
    return g;
  };
}

}  // namespace

TEST_CASE("metric: linear map gives exactly A^T A") {
  RngStream rng(3);
  const std::size_t m = 4, n = 7;
  Tensor a(m, n);
  for (auto& x : a.data) x = rng.uniform(-1.0, 1.0);
  const std::vector<double> z{0.2, -0.5, 1.0, 0.1};

  const MetricTensor g = pullback_metric_of(
      [&](Tape& t, Tape::Id in) -> std::vector<Tape::Id> {
        // mean head = z A, spread head constant (Jacobian zero)
        return {t.matmul(in, t.leaf(a)), t.leaf(Tensor::full(1, n, 0.3))};
      },
      z);

  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double expect = 0.0;
      for (std::size_t c = 0; c < n; ++c) expect += a.at(i, c) * a.at(j, c);
      CHECK(g.g[i * m + j] == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("metric: matches finite-difference Jacobians of the decoder") {
  const GwaeCheckpoint ckpt = tiny_checkpoint();
  RngStream rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> z(3);
    for (auto& v : z) v = rng.normal();
    const MetricTensor g = pullback_metric(ckpt, z);

    // FD Jacobians of mu and sigma, stacked
    const std::size_t out_dim = ckpt.node_count() * 2;
    const double h = 1e-6;
    std::vector<std::vector<double>> jmu(3), jsig(3);
    for (std::size_t d = 0; d < 3; ++d) {
      auto zp = z, zm = z;
      zp[d] += h;
      zm[d] -= h;
      const DecoderOutput op = decode(ckpt, zp);
      const DecoderOutput om = decode(ckpt, zm);
      jmu[d].resize(out_dim);
      jsig[d].resize(out_dim);
      for (std::size_t i = 0; i < out_dim; ++i) {
        jmu[d][i] = (op.mu.data[i] - om.mu.data[i]) / (2.0 * h);
        jsig[d][i] =
            (std::exp(op.log_sigma.data[i]) - std::exp(om.log_sigma.data[i])) / (2.0 * h);
      }
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double fd = 0.0;
        for (std::size_t q = 0; q < out_dim; ++q)
          fd += jmu[i][q] * jmu[j][q] + jsig[i][q] * jsig[j][q];
        worst = std::max(worst, std::abs(fd - g.g[i * 3 + j]) /
                                    std::max({std::abs(fd), std::abs(g.g[i * 3 + j]), 1e-6}));
      }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("metric: PSD and symmetric at random latent points") {
  const GwaeCheckpoint ckpt = tiny_checkpoint();
  RngStream rng(19);
  for (int i = 0; i < 30; ++i) {
    std::vector<double> z(3);
    for (auto& v : z) v = 2.0 * rng.normal();
    const MetricTensor g = pullback_metric(ckpt, z);
    CHECK_NOTHROW(g.validate());
  }
}

TEST_CASE("log volume: identity and scaled-identity metrics") {
  MetricTensor g;
  g.z = {0.0, 0.0};
  g.g = {1.0, 0.0, 0.0, 1.0};
  CHECK(log_volume(g) == doctest::Approx(0.0).epsilon(1e-8));
  g.g = {4.0, 0.0, 0.0, 4.0};  // linear decoder with A = 2I
  CHECK(log_volume(g) == doctest::Approx(std::log(4.0)).epsilon(1e-8));
}

TEST_CASE("log volume: invariant under latent rotations of a linear decoder") {
  RngStream rng(23);
  const std::size_t m = 3, n = 6;
  Tensor a(m, n);
  for (auto& x : a.data) x = rng.uniform(-1.0, 1.0);
  // orthonormal rotation from the eigenvectors of a random symmetric matrix
  std::vector<double> sym(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) sym[i * m + j] = sym[j * m + i] = rng.uniform(-1.0, 1.0);
  std::vector<double> w, rot;
  jacobi_eigen(sym, m, w, rot);

  // rotated decoder: z -> (z R) A = z (R A)
  Tensor ra(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += rot[i * m + k] * a.at(k, j);
      ra.at(i, j) = s;
    }
  const std::vector<double> z{0.4, -0.2, 0.9};
  auto lv = [&](const Tensor& mat) {
    return log_volume(pullback_metric_of(
        [&](Tape& t, Tape::Id in) -> std::vector<Tape::Id> {
          return {t.matmul(in, t.leaf(mat))};
        },
        z));
  };
  CHECK(lv(a) == doctest::Approx(lv(ra)).epsilon(1e-9));
}

TEST_CASE("riemannian length: degenerate and identity-metric paths") {
  const auto ident = constant_metric(2, 1.0);
  CHECK(riemannian_length(ident, {{0.0, 0.0}}) == 0.0);
  const std::vector<std::vector<double>> path{{0.0, 0.0}, {3.0, 0.0}, {3.0, 4.0}};
  CHECK(riemannian_length(ident, path) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("riemannian length: refinement changes a smooth segment by < 1%") {
  const auto metric = radial_metric(2);
  const std::vector<double> a{0.1, 0.2}, b{0.3, 0.3};
  const std::vector<double> mid{0.2, 0.25};
  const double coarse = riemannian_length(metric, {a, b});
  const double fine = riemannian_length(metric, {a, mid, b});
  CHECK(std::abs(fine - coarse) / coarse < 0.01);
}

TEST_CASE("geodesic: coincident endpoints collapse to a point") {
  const auto metric = constant_metric(2, 1.0);
  AnchorSet anchors;
  anchors.codes = Tensor(0, 2);
  const GeodesicResult r = geodesic(metric, {0.5, 0.5}, {0.5, 0.5}, anchors, GeodesicConfig{});
  CHECK(r.path.points.size() == 1);
  CHECK(r.path.riemannian_length == 0.0);
}

TEST_CASE("geodesic: constant metric keeps the straight chain") {
  const auto metric = constant_metric(2, 2.5);
  RngStream rng(9);
  Tensor codes(20, 2);
  for (auto& x : codes.data) x = rng.uniform(-2.0, 2.0);
  const AnchorSet anchors = build_anchor_set(metric, codes);
  const std::vector<double> a{-1.0, -1.0}, b{1.5, 0.5};
  const GeodesicResult r = geodesic(metric, a, b, anchors, GeodesicConfig{});
  CHECK(r.path.riemannian_length == doctest::Approx(r.chain_riemannian_length).epsilon(1e-9));
  const double euclid = std::sqrt(2.5 * 2.5 + 1.5 * 1.5) * std::sqrt(2.5);
  CHECK(r.path.riemannian_length == doctest::Approx(euclid).epsilon(1e-9));
}

TEST_CASE("geodesic: never longer than the straight chain, detours when it pays") {
  const auto metric = radial_metric(2);
  RngStream rng(29);
  // anchors on a ring of radius 2 where the metric is expensive but the ring
  // still shortcuts through low-radius space near the origin
  Tensor codes(40, 2);
  for (std::size_t i = 0; i < 40; ++i) {
    const double ang = 2.0 * 3.14159265358979 * i / 40.0;
    codes.at(i, 0) = 0.3 * std::cos(ang);
    codes.at(i, 1) = 0.3 * std::sin(ang);
  }
  const AnchorSet anchors = build_anchor_set(metric, codes);
  GeodesicConfig cfg;
  const std::vector<double> a{-2.0, 1.2}, b{2.0, 1.2};
  const GeodesicResult r = geodesic(metric, a, b, anchors, cfg);
  CHECK(r.path.riemannian_length <= r.chain_riemannian_length + 1e-12);
  CHECK(r.path.points.size() >= 2);
}

TEST_CASE("geodesic: triangle-ish inequality on a shared anchor set") {
  const auto metric = radial_metric(2);
  RngStream rng(31);
  Tensor codes(30, 2);
  for (auto& x : codes.data) x = rng.uniform(-1.5, 1.5);
  const AnchorSet anchors = build_anchor_set(metric, codes);
  GeodesicConfig cfg;
  const std::vector<double> a{-1.0, 0.0}, b{0.0, 1.0}, c{1.0, 0.0};
  const double ab = geodesic(metric, a, b, anchors, cfg).path.riemannian_length;
  const double bc = geodesic(metric, b, c, anchors, cfg).path.riemannian_length;
  const double ac = geodesic(metric, a, c, anchors, cfg).path.riemannian_length;
  CHECK(ac <= ab + bc + 1e-6);
}

TEST_CASE("interpolate: station layout for both path kinds") {
  const GwaeCheckpoint ckpt = tiny_checkpoint();
  const std::vector<double> a{-0.5, 0.1, 0.2}, b{0.7, -0.3, 0.0};
  AnchorSet anchors;
  anchors.codes = Tensor(0, 3);

  const InterpolationResult two =
      interpolate(ckpt, a, b, 2, PathMetric::Euclidean, anchors, GeodesicConfig{});
  REQUIRE(two.stations.size() == 2);
  CHECK(two.stations.front() == a);
  CHECK(two.stations.back() == b);
  CHECK(two.realisations.size() == 2);

  const InterpolationResult eu =
      interpolate(ckpt, a, b, 7, PathMetric::Euclidean, anchors, GeodesicConfig{});
  for (const auto& s : eu.stations) {
    // each station lies on the segment a-b
    double worst = 0.0;
    const double t = (s[0] - a[0]) / (b[0] - a[0]);
    for (std::size_t d = 0; d < 3; ++d) worst = std::max(worst, std::abs(a[d] + t * (b[d] - a[d]) - s[d]));
    CHECK(worst < 1e-9);
  }

  const InterpolationResult geo =
      interpolate(ckpt, a, b, 5, PathMetric::Geodesic, anchors, GeodesicConfig{});
  CHECK(geo.stations.size() == 5);
  CHECK(geo.station_log_volume.size() == 5);
  CHECK(geo.realisations.size() == 5);
  CHECK_THROWS_AS(interpolate(ckpt, a, b, 1, PathMetric::Euclidean, anchors, GeodesicConfig{}),
                  ConfigError);
}

TEST_CASE("log volume percentile: ordered and interpolated") {
  const GwaeCheckpoint ckpt = tiny_checkpoint();
  RngStream rng(83);
  Tensor codes(12, 3);
  for (auto& x : codes.data) x = rng.normal();
  const double p10 = log_volume_percentile(ckpt, codes, 10.0);
  const double p90 = log_volume_percentile(ckpt, codes, 90.0);
  CHECK(p10 <= p90);
}

#include "gwae/cma.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gwae/errors.hpp"
#include "gwae/linalg.hpp"
#include "gwae/rng.hpp"

namespace gwae {

CmaResult cma_es(const BatchObjective& f, const CmaConfig& cfg) {
  const std::size_t m = cfg.dim;
  if (m == 0) throw ConfigError("cma_es: dimension must be positive");
  if (cfg.popsize < 4) throw ConfigError("cma_es: population size must be >= 4");
  if (cfg.iterations < 1) throw ConfigError("cma_es: need at least one generation");
  if (!cfg.mean0.empty() && cfg.mean0.size() != m)
    throw ConfigError("cma_es: mean0 dimension mismatch");

  const std::size_t lambda = cfg.popsize;
  const std::size_t mu = lambda / 2;
  std::vector<double> w(mu);
  for (std::size_t i = 0; i < mu; ++i)
    w[i] = std::log(static_cast<double>(lambda + 1) / 2.0) - std::log(static_cast<double>(i + 1));
  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= wsum;
  double w2 = 0.0;
  for (double x : w) w2 += x * x;
  const double mueff = 1.0 / w2;

  const double md = static_cast<double>(m);
  const double c_sigma = (mueff + 2.0) / (md + mueff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (md + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mueff / md) / (md + 4.0 + 2.0 * mueff / md);
  const double c_1 = 2.0 / ((md + 1.3) * (md + 1.3) + mueff);
  const double c_mu =
      std::min(1.0 - c_1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((md + 2.0) * (md + 2.0) + mueff));
  const double chi_n = std::sqrt(md) * (1.0 - 1.0 / (4.0 * md) + 1.0 / (21.0 * md * md));

  CmaResult result;
  CmaState& st = result.state;
  st.mean = cfg.mean0.empty() ? std::vector<double>(m, 0.0) : cfg.mean0;
  st.sigma = cfg.sigma0;
  st.cov.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) st.cov[i * m + i] = 1.0;
  st.p_sigma.assign(m, 0.0);
  st.p_c.assign(m, 0.0);

  result.best_f = std::numeric_limits<double>::infinity();
  RngStream rng = RngStream(cfg.seed).derive("cma");

  std::vector<std::vector<double>> xs(lambda, std::vector<double>(m));
  std::vector<std::vector<double>> ys(lambda, std::vector<double>(m));

  for (int gen = 0; gen < cfg.iterations; ++gen) {
    // C = B diag(d^2) B^T; floor tiny/negative eigenvalues to keep C SPD
    std::vector<double> eig, b;
    jacobi_eigen(st.cov, m, eig, b);
    const double floor = 1e-14 * std::max(eig.back(), 1e-14);
    std::vector<double> dscale(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (eig[i] < floor) {
        eig[i] = floor;
        ++result.repairs;
      }
      dscale[i] = std::sqrt(eig[i]);
    }

    for (std::size_t i = 0; i < lambda; ++i) {
      std::vector<double> xi(m);
      for (auto& v : xi) v = rng.normal();
      for (std::size_t r = 0; r < m; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < m; ++c) s += b[r * m + c] * dscale[c] * xi[c];
        ys[i][r] = s;
        xs[i][r] = st.mean[r] + st.sigma * s;
      }
    }

    const std::vector<double> fs = f(xs);
    if (fs.size() != lambda) throw ConfigError("cma_es: objective returned wrong batch size");
    for (double v : fs)
      if (!std::isfinite(v)) throw NumericError("cma_es: non-finite objective value");
    result.evaluations += lambda;

    std::vector<std::size_t> order(lambda);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return fs[a] < fs[c]; });

    if (fs[order[0]] < result.best_f) {
      result.best_f = fs[order[0]];
      result.best_x = xs[order[0]];
    }
    CmaGeneration rec;
    rec.generation = gen;
    rec.best_f = fs[order[0]];
    rec.best_f_so_far = result.best_f;
    rec.median_f = fs[order[lambda / 2]];
    rec.best_index = order[0];
    rec.median_index = order[lambda / 2];
    result.history.push_back(rec);

    // weighted recombination of the top half
    std::vector<double> ybar(m, 0.0);
    for (std::size_t i = 0; i < mu; ++i)
      for (std::size_t r = 0; r < m; ++r) ybar[r] += w[i] * ys[order[i]][r];
    for (std::size_t r = 0; r < m; ++r) st.mean[r] += st.sigma * ybar[r];

    // p_sigma with C^{-1/2} ybar = B diag(1/d) B^T ybar
    std::vector<double> tmp(m, 0.0), cinv_y(m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < m; ++r) s += b[r * m + c] * ybar[r];
      tmp[c] = s / dscale[c];
    }
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < m; ++c) s += b[r * m + c] * tmp[c];
      cinv_y[r] = s;
    }
    const double cs_fac = std::sqrt(c_sigma * (2.0 - c_sigma) * mueff);
    for (std::size_t r = 0; r < m; ++r)
      st.p_sigma[r] = (1.0 - c_sigma) * st.p_sigma[r] + cs_fac * cinv_y[r];

    const double ps_norm = norm2(st.p_sigma);
    const double expected =
        std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1)));
    const bool h_sigma = ps_norm / expected < (1.4 + 2.0 / (md + 1.0)) * chi_n;

    const double cc_fac = std::sqrt(c_c * (2.0 - c_c) * mueff);
    for (std::size_t r = 0; r < m; ++r)
      st.p_c[r] = (1.0 - c_c) * st.p_c[r] + (h_sigma ? cc_fac * ybar[r] : 0.0);

    const double c1a = c_1 * (1.0 - (h_sigma ? 0.0 : 1.0) * c_c * (2.0 - c_c));
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c2 = 0; c2 < m; ++c2) {
        double v = (1.0 - c1a - c_mu) * st.cov[r * m + c2] + c_1 * st.p_c[r] * st.p_c[c2];
        for (std::size_t i = 0; i < mu; ++i)
          v += c_mu * w[i] * ys[order[i]][r] * ys[order[i]][c2];
        st.cov[r * m + c2] = v;
      }
    // exact symmetry against drift
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c2 = r + 1; c2 < m; ++c2) {
        const double v = 0.5 * (st.cov[r * m + c2] + st.cov[c2 * m + r]);
        st.cov[r * m + c2] = v;
        st.cov[c2 * m + r] = v;
      }

    st.sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));
    st.generation = gen + 1;
  }
  return result;
}

}  // namespace gwae

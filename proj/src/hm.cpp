#include "gwae/hm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gwae/errors.hpp"
#include "gwae/util.hpp"

namespace gwae {

void ObjectiveWeights::validate() const {
  if (flow < 0.0 || stat < 0.0 || realism < 0.0)
    throw ConfigError("objective weights must be non-negative");
  if (flow == 0.0 && stat == 0.0 && realism == 0.0)
    throw ConfigError("objective weights must not all be zero");
}

ReferenceCase build_reference(const Realisation& truth, const std::vector<WellSpec>& wells,
                              const std::vector<std::string>& observed_wells,
                              const NormStats& stats, const FluidProps& fluids,
                              const SimConfig& sim) {
  ReferenceCase ref;
  ref.wells = wells;
  ref.truth_seed = truth.seed;
  ref.rates = simulate(truth, fluids, wells, sim);

  ref.observed.assign(wells.size(), observed_wells.empty() ? 1 : 0);
  for (const auto& name : observed_wells) {
    bool found = false;
    for (std::size_t w = 0; w < wells.size(); ++w)
      if (wells[w].name == name) {
        ref.observed[w] = 1;
        found = true;
      }
    if (!found) throw ConfigError("build_reference: unknown observed well: " + name);
  }

  for (std::size_t w = 0; w < wells.size(); ++w) {
    if (!ref.observed[w]) continue;
    const WellSpec& ws = wells[w];
    for (int k = ws.k_lo; k <= ws.k_hi; ++k) {
      const std::size_t cell = truth.grid.dims.flat(ws.i, ws.j, k);
      ref.static_obs.push_back(
          {static_cast<std::uint32_t>(cell),
           (truth.porosity[cell] - stats.poro_mean) / stats.poro_std});
    }
  }
  return ref;
}

namespace {

struct RateChannel {
  std::size_t well = 0;
  bool oil = false;  // otherwise water
  double inv_std = 0.0;
};

std::vector<RateChannel> flow_channels(const ReferenceCase& ref) {
  std::vector<RateChannel> channels;
  const auto& r = ref.rates;
  for (std::size_t w = 0; w < r.n_wells(); ++w) {
    if (!ref.observed[w]) continue;
    const bool producer = r.kinds[w] == WellKind::Producer;
    for (int oil = producer ? 1 : 0; oil >= 0; --oil) {
      const auto& series = oil ? r.oil_rate : r.water_rate;
      double mean = 0.0, var = 0.0;
      for (int s = 0; s < r.n_steps; ++s) mean += r.at(series, s, w);
      mean /= r.n_steps;
      for (int s = 0; s < r.n_steps; ++s) {
        const double d = r.at(series, s, w) - mean;
        var += d * d;
      }
      var /= r.n_steps;
      const double sd = std::sqrt(var);
      if (sd > 1e-12 * std::max(std::abs(mean), 1.0))
        channels.push_back({w, oil == 1, 1.0 / sd});
      // zero-variance channels carry no information and are skipped
    }
  }
  return channels;
}

}  // namespace

ObjectiveBreakdown objective(const std::vector<double>& z, const HmProblem& problem) {
  const ReferenceCase& ref = *problem.reference;
  ObjectiveBreakdown b;
  b.z = z;
  try {
    const DecoderOutput out = decode(*problem.ckpt, z);
    const NormStats& stats = problem.ckpt->stats;

    // static mismatch in normalized porosity units (template graphs are
    // all-active, so node ids equal cell ids)
    if (!ref.static_obs.empty()) {
      double acc = 0.0;
      for (const auto& obs : ref.static_obs) {
        const double d = out.mu.at(obs.cell, 0) - obs.normalized_porosity;
        acc += d * d;
      }
      b.loss_static = acc / static_cast<double>(ref.static_obs.size());
    }

    const Realisation model = decode_realisation(*problem.ckpt, z);
    const RateSeries sim_rates = simulate(model, problem.fluids, ref.wells, problem.sim);

    const auto channels = flow_channels(ref);
    if (!channels.empty()) {
      double acc = 0.0;
      std::size_t count = 0;
      for (const auto& ch : channels) {
        const auto& sim_series = ch.oil ? sim_rates.oil_rate : sim_rates.water_rate;
        const auto& ref_series = ch.oil ? ref.rates.oil_rate : ref.rates.water_rate;
        for (int s = 0; s < ref.rates.n_steps; ++s) {
          const double d =
              (sim_rates.at(sim_series, s, ch.well) - ref.rates.at(ref_series, s, ch.well)) *
              ch.inv_std;
          acc += d * d;
          ++count;
        }
      }
      b.loss_flow = acc / static_cast<double>(count);
    }

    b.loss_realism =
        std::max(0.0, log_volume(*problem.ckpt, z) - problem.realism_baseline);
    (void)stats;

    b.total = problem.weights.flow * b.loss_flow + problem.weights.stat * b.loss_static +
              problem.weights.realism * b.loss_realism;
  } catch (const NumericError&) {
    b.failed = true;
    b.loss_flow = b.loss_static = b.loss_realism = 0.0;
    b.total = problem.penalty;
  }
  return b;
}

HmResult history_match(const GwaeCheckpoint& ckpt, const ReferenceCase& reference,
                       const Tensor& anchor_codes, const HmConfig& cfg, const FluidProps& fluids,
                       const SimConfig& sim) {
  cfg.weights.validate();
  if (cfg.restarts < 1) throw ConfigError("history_match: need at least one restart");

  HmResult result;
  result.realism_baseline =
      log_volume_percentile(ckpt, anchor_codes, cfg.realism_percentile, cfg.threads);

  HmProblem problem;
  problem.ckpt = &ckpt;
  problem.reference = &reference;
  problem.fluids = fluids;
  problem.sim = sim;
  problem.weights = cfg.weights;
  problem.realism_baseline = result.realism_baseline;
  problem.penalty = cfg.penalty;

  ckpt.warm_caches();
  const RngStream master(cfg.seed);

  for (int restart = 0; restart < cfg.restarts; ++restart) {
    RestartResult rr;
    rr.seed = master.derive("restart").derive(static_cast<std::uint64_t>(restart)).key();

    std::vector<GenerationRecord>& gens = rr.generations;
    std::size_t* failures = &rr.failures;
    std::vector<std::vector<double>>* initial_pop = &rr.initial_population;
    ObjectiveBreakdown best_so_far;
    best_so_far.total = std::numeric_limits<double>::infinity();

    auto batch = [&](const std::vector<std::vector<double>>& xs) {
      std::vector<ObjectiveBreakdown> bs(xs.size());
      parallel_for(xs.size(), cfg.threads,
                   [&](std::size_t i) { bs[i] = objective(xs[i], problem); });
      std::vector<double> fs(xs.size());
      std::vector<std::size_t> order(xs.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = 0; i < xs.size(); ++i) {
        fs[i] = bs[i].total;
        if (bs[i].failed) ++*failures;
      }
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b2) { return fs[a] < fs[b2]; });
      if (gens.empty() && initial_pop->empty())
        *initial_pop = xs;
      GenerationRecord rec;
      rec.generation = static_cast<int>(gens.size());
      rec.best = bs[order[0]];
      rec.median = bs[order[xs.size() / 2]];
      if (rec.best.total < best_so_far.total) best_so_far = rec.best;
      rec.best_total_so_far = best_so_far.total;
      gens.push_back(rec);
      return fs;
    };

    CmaConfig cma_cfg;
    cma_cfg.dim = ckpt.arch.latent_dim;
    cma_cfg.popsize = cfg.popsize;
    cma_cfg.iterations = cfg.iterations;
    cma_cfg.sigma0 = cfg.sigma0;
    cma_cfg.seed = rr.seed;
    const CmaResult cres = cma_es(batch, cma_cfg);

    rr.evaluations = cres.evaluations;
    rr.best = best_so_far;
    result.restarts.push_back(std::move(rr));
  }

  result.ranking.resize(result.restarts.size());
  std::iota(result.ranking.begin(), result.ranking.end(), std::size_t{0});
  std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](std::size_t a, std::size_t b) {
    return result.restarts[a].best.total < result.restarts[b].best.total;
  });
  return result;
}

AblationResult ablation_run(const GwaeCheckpoint& ckpt, const ReferenceCase& reference,
                            const Tensor& anchor_codes, const HmConfig& cfg,
                            const FluidProps& fluids, const SimConfig& sim) {
  AblationResult res;
  HmConfig off = cfg;
  off.weights.realism = 0.0;
  res.with_realism = history_match(ckpt, reference, anchor_codes, cfg, fluids, sim);
  res.without_realism = history_match(ckpt, reference, anchor_codes, off, fluids, sim);

  const auto& best_with = res.with_realism.restarts[res.with_realism.ranking[0]].best;
  const auto& best_without =
      res.without_realism.restarts[res.without_realism.ranking[0]].best;
  res.log_volume_with = log_volume(ckpt, best_with.z);
  res.log_volume_without = log_volume(ckpt, best_without.z);

  const PcaModel pca = pca_fit(anchor_codes, 2);
  res.pca_with = pca_project(pca, best_with.z);
  res.pca_without = pca_project(pca, best_without.z);
  return res;
}

}  // namespace gwae

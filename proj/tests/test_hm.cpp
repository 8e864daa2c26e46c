#include <doctest.h>

#include <cmath>

#include "gwae/errors.hpp"
#include "gwae/hm.hpp"

using namespace gwae;

namespace {

struct Fixture {
  GridSpec grid = make_grid(8, 6, 4);
  GwaeCheckpoint ckpt;
  std::vector<GeoGraph> graphs;
  Realisation truth;
  std::vector<WellSpec> wells;
  FluidProps fluids;
  SimConfig sim;
  ReferenceCase reference;
  Tensor anchors;

  Fixture() {
    const auto ensemble = generate_ensemble(12, grid, 321, 1);
    const NormStats stats = compute_norm_stats(ensemble);
    for (const auto& r : ensemble) graphs.push_back(realisation_to_graph(r, stats));
    ModelConfig arch;
    arch.latent_dim = 4;
    arch.hidden1 = 6;
    arch.hidden2 = 8;
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 4;
    ckpt = train(graphs, arch, grid, stats, tc, 17);
    truth = ensemble[0];
    wells = place_wells(grid.dims, fluids);
    sim.report_steps = 10;
    sim.horizon_days = 500.0;
    reference = build_reference(truth, wells, {}, stats, fluids, sim);
    anchors = encode_all(ckpt, graphs, 2);
  }

  HmProblem problem(ObjectiveWeights w, double baseline) const {
    HmProblem p;
    p.ckpt = &ckpt;
    p.reference = &reference;
    p.fluids = fluids;
    p.sim = sim;
    p.weights = w;
    p.realism_baseline = baseline;
    return p;
  }
};

}  // namespace

TEST_CASE("objective: weighted sum identity and flow-weight doubling") {
  const Fixture fx;
  const std::vector<double> z{0.3, -0.2, 0.5, 0.0};
  const double baseline = log_volume_percentile(fx.ckpt, fx.anchors, 90.0);

  const ObjectiveBreakdown a = objective(z, fx.problem({1.0, 1.0, 0.1}, baseline));
  CHECK_FALSE(a.failed);
  CHECK(std::abs(a.total - (1.0 * a.loss_flow + 1.0 * a.loss_static + 0.1 * a.loss_realism)) <
        1e-12);

  const ObjectiveBreakdown b = objective(z, fx.problem({2.0, 1.0, 0.1}, baseline));
  CHECK(b.loss_flow == a.loss_flow);
  CHECK(std::abs((b.total - a.total) - a.loss_flow) < 1e-12);
}

TEST_CASE("objective: realism hinge is zero below the baseline") {
  const Fixture fx;
  const std::vector<double> z{0.1, 0.1, -0.1, 0.2};
  const ObjectiveBreakdown b = objective(z, fx.problem({1.0, 1.0, 0.1}, 1e9));
  CHECK(b.loss_realism == 0.0);
}

TEST_CASE("objective: ablation weights still report the realism value") {
  const Fixture fx;
  const std::vector<double> z{0.0, 0.0, 0.0, 0.0};
  // a baseline low enough that the hinge is active
  const ObjectiveBreakdown b = objective(z, fx.problem({1.0, 1.0, 0.0}, -1e9));
  CHECK(b.loss_realism > 0.0);  // computed and reported
  CHECK(std::abs(b.total - (b.loss_flow + b.loss_static)) < 1e-12);  // but not weighted in
}

TEST_CASE("objective: simulation failure turns into the penalty") {
  const Fixture fx;
  HmProblem p = fx.problem({1.0, 1.0, 0.1}, 0.0);
  p.sim.max_substeps_per_report = 0;  // force a numerical failure
  p.penalty = 1e6;
  const ObjectiveBreakdown b = objective({0.0, 0.0, 0.0, 0.0}, p);
  CHECK(b.failed);
  CHECK(b.total == 1e6);
}

TEST_CASE("reference: static observations only at observed well columns") {
  const Fixture fx;
  std::size_t expected = 0;
  for (const auto& w : fx.wells) expected += static_cast<std::size_t>(w.k_hi - w.k_lo + 1);
  CHECK(fx.reference.static_obs.size() == expected);
  for (const auto& obs : fx.reference.static_obs) {
    const std::size_t cell = obs.cell;
    const int i = static_cast<int>(cell % fx.grid.dims.nx);
    const int j = static_cast<int>((cell / fx.grid.dims.nx) % fx.grid.dims.ny);
    bool at_well = false;
    for (const auto& w : fx.wells) at_well |= (w.i == i && w.j == j);
    CHECK(at_well);
  }

  const ReferenceCase partial =
      build_reference(fx.truth, fx.wells, {"P1", "P2", "I3"}, fx.ckpt.stats, fx.fluids, fx.sim);
  std::size_t observed = 0;
  for (auto o : partial.observed) observed += o;
  CHECK(observed == 3);
  CHECK(partial.static_obs.size() == 3 * fx.grid.dims.nz);

  CHECK_THROWS_AS(build_reference(fx.truth, fx.wells, {"NOPE"}, fx.ckpt.stats, fx.fluids, fx.sim),
                  ConfigError);
}

TEST_CASE("history match: degenerate single-restart run produces well-formed artifacts") {
  const Fixture fx;
  HmConfig cfg;
  cfg.popsize = 6;
  cfg.iterations = 1;
  cfg.restarts = 1;
  cfg.seed = 9;
  cfg.threads = 2;
  const HmResult res = history_match(fx.ckpt, fx.reference, fx.anchors, cfg, fx.fluids, fx.sim);
  REQUIRE(res.restarts.size() == 1);
  CHECK(res.restarts[0].evaluations == 6);
  CHECK(res.restarts[0].generations.size() == 1);
  CHECK(res.restarts[0].initial_population.size() == 6);
  CHECK(res.restarts[0].best.z.size() == 4);
  CHECK(res.ranking.size() == 1);
}

TEST_CASE("history match: deterministic across runs and thread counts") {
  const Fixture fx;
  HmConfig cfg;
  cfg.popsize = 6;
  cfg.iterations = 3;
  cfg.restarts = 2;
  cfg.seed = 11;
  cfg.threads = 1;
  const HmResult a = history_match(fx.ckpt, fx.reference, fx.anchors, cfg, fx.fluids, fx.sim);
  cfg.threads = 2;
  const HmResult b = history_match(fx.ckpt, fx.reference, fx.anchors, cfg, fx.fluids, fx.sim);
  REQUIRE(a.restarts.size() == b.restarts.size());
  for (std::size_t r = 0; r < a.restarts.size(); ++r) {
    CHECK(a.restarts[r].best.z == b.restarts[r].best.z);
    CHECK(a.restarts[r].best.total == b.restarts[r].best.total);
  }
  CHECK(a.ranking == b.ranking);
}

TEST_CASE("history match: per-generation best-so-far is non-increasing") {
  const Fixture fx;
  HmConfig cfg;
  cfg.popsize = 6;
  cfg.iterations = 5;
  cfg.restarts = 1;
  cfg.seed = 13;
  cfg.threads = 2;
  const HmResult res = history_match(fx.ckpt, fx.reference, fx.anchors, cfg, fx.fluids, fx.sim);
  const auto& gens = res.restarts[0].generations;
  for (std::size_t g = 1; g < gens.size(); ++g)
    CHECK(gens[g].best_total_so_far <= gens[g - 1].best_total_so_far);
}

TEST_CASE("ablation: paired runs share seeds and report both volumes") {
  const Fixture fx;
  HmConfig cfg;
  cfg.popsize = 6;
  cfg.iterations = 2;
  cfg.restarts = 1;
  cfg.seed = 15;
  cfg.threads = 2;
  cfg.weights = {1.0, 1.0, 0.1};
  const AblationResult res =
      ablation_run(fx.ckpt, fx.reference, fx.anchors, cfg, fx.fluids, fx.sim);
  CHECK(res.with_realism.restarts[0].seed == res.without_realism.restarts[0].seed);
  CHECK(res.pca_with.size() == 2);
  CHECK(res.pca_without.size() == 2);
  CHECK(std::isfinite(res.log_volume_with));
  CHECK(std::isfinite(res.log_volume_without));
}

TEST_CASE("weights: validation") {
  ObjectiveWeights w{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = {-1.0, 1.0, 0.0};
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = {1.0, 1.0, 0.0};
  CHECK_NOTHROW(w.validate());
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwae/analysis.hpp"
#include "gwae/cma.hpp"
#include "gwae/flowsim.hpp"
#include "gwae/manifold.hpp"
#include "gwae/model.hpp"

namespace gwae {

struct ObjectiveWeights {
  double flow = 1.0;
  double stat = 1.0;
  double realism = 0.1;

  void validate() const;  // non-negative, not all zero
};

struct ObjectiveBreakdown {
  double loss_flow = 0.0;
  double loss_static = 0.0;
  double loss_realism = 0.0;
  double total = 0.0;
  std::vector<double> z;
  bool failed = false;  // simulation failure, total is the penalty
};

struct StaticObservation {
  std::uint32_t cell = 0;
  double normalized_porosity = 0.0;
};

// What the optimizer is allowed to see: rates and well-column porosity of a
// hidden truth realisation. The truth seed is stored for audit only.
struct ReferenceCase {
  RateSeries rates;
  std::vector<WellSpec> wells;
  std::vector<std::uint8_t> observed;  // per well, which enter the losses
  std::vector<StaticObservation> static_obs;
  std::uint64_t truth_seed = 0;
};

ReferenceCase build_reference(const Realisation& truth, const std::vector<WellSpec>& wells,
                              const std::vector<std::string>& observed_wells,
                              const NormStats& stats, const FluidProps& fluids,
                              const SimConfig& sim);

// Rate channels entering the flow mismatch, normalized per well/channel by
// the reference series' standard deviation; zero-variance channels skipped.
struct HmProblem {
  const GwaeCheckpoint* ckpt = nullptr;
  const ReferenceCase* reference = nullptr;
  FluidProps fluids;
  SimConfig sim;
  ObjectiveWeights weights;
  double realism_baseline = 0.0;
  double penalty = 1e6;
};

ObjectiveBreakdown objective(const std::vector<double>& z, const HmProblem& problem);

struct HmConfig {
  int popsize = 51;
  int iterations = 100;
  int restarts = 4;
  double sigma0 = 0.5;
  ObjectiveWeights weights;
  double realism_percentile = 90.0;
  double penalty = 1e6;
  int threads = 1;
  std::uint64_t seed = 0;
};

struct GenerationRecord {
  int generation = 0;
  ObjectiveBreakdown best;    // best of the generation
  ObjectiveBreakdown median;  // by total
  double best_total_so_far = 0.0;
};

struct RestartResult {
  std::uint64_t seed = 0;
  ObjectiveBreakdown best;
  std::vector<GenerationRecord> generations;
  std::size_t evaluations = 0;
  std::size_t failures = 0;
  // rate fans for reporting: every member of the first generation and the
  // final best, simulated once more at reporting time
  std::vector<std::vector<double>> initial_population;
};

struct HmResult {
  double realism_baseline = 0.0;
  std::vector<RestartResult> restarts;      // in run order
  std::vector<std::size_t> ranking;         // restart indices by best total
};

// Independent CMA-ES restarts with seeds derived from config.seed, sharing
// one reference case; population members are decoded and simulated in
// parallel, gathered in member order.
HmResult history_match(const GwaeCheckpoint& ckpt, const ReferenceCase& reference,
                       const Tensor& anchor_codes, const HmConfig& cfg, const FluidProps& fluids,
                       const SimConfig& sim);

struct AblationResult {
  HmResult with_realism;
  HmResult without_realism;
  double log_volume_with = 0.0;
  double log_volume_without = 0.0;
  std::vector<double> pca_with;     // best-z coordinates in the anchor PCA
  std::vector<double> pca_without;
};

// Paired runs with identical seeds: the configured realism weight versus
// zero. loss_realism stays computed and reported in both runs.
AblationResult ablation_run(const GwaeCheckpoint& ckpt, const ReferenceCase& reference,
                            const Tensor& anchor_codes, const HmConfig& cfg,
                            const FluidProps& fluids, const SimConfig& sim);

}  // namespace gwae

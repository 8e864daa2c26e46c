#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace gwae {

struct CmaConfig {
  std::size_t dim = 0;
  int popsize = 51;
  int iterations = 100;
  double sigma0 = 0.5;
  std::vector<double> mean0;  // empty = origin
  std::uint64_t seed = 0;
};

// Strategy state after each generation; C stays symmetric positive definite
// (eigenvalue floor repair, counted in CmaResult::repairs).
struct CmaState {
  std::vector<double> mean;
  double sigma = 0.0;
  std::vector<double> cov;  // dim x dim
  std::vector<double> p_sigma, p_c;
  int generation = 0;
};

struct CmaGeneration {
  int generation = 0;
  double best_f = 0.0;         // best of this generation
  double best_f_so_far = 0.0;  // elitist bookkeeping, non-increasing
  double median_f = 0.0;
  std::size_t best_index = 0;   // within the generation
  std::size_t median_index = 0;
};

struct CmaResult {
  std::vector<double> best_x;
  double best_f = 0.0;
  std::size_t evaluations = 0;
  std::vector<CmaGeneration> history;
  int repairs = 0;
  CmaState state;
};

// Called once per generation with the full population; returns one finite
// objective value per member (use a penalty for failed evaluations).
using BatchObjective = std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

// (mu_w, lambda) covariance matrix adaptation with rank-one and rank-mu
// updates, cumulative step-size control, weighted recombination of the top
// half. Selection is purely rank-based and fully deterministic for a seed.
CmaResult cma_es(const BatchObjective& f, const CmaConfig& cfg);

}  // namespace gwae

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwae/geodata.hpp"

namespace gwae {

// Fluid and pressure controls. Pressures in bar, viscosities in cP,
// densities in kg/m3, depths in meters.
struct FluidProps {
  double mu_w_cp = 0.40;
  double mu_o_cp = 3.3;
  double rho_w = 1020.0;
  double rho_o = 875.0;
  double p_init_bar = 240.0;  // at the OWC
  double p_prod_bar = 45.0;
  double p_inj_bar = 330.0;
  double owc_depth = kOwcDepth;

  void validate() const;
};

// Per-cell saturation endpoints after clamping; the chain
// 0 <= swl <= swcr <= swatinit <= swu <= 1 always holds.
struct SatEndpoints {
  double swl = 0.0, swcr = 0.0, swatinit = 0.0, sowcr = 0.0, swu = 1.0;
};

struct SatFunctions {
  std::vector<SatEndpoints> cells;
  double corey_nw = 2.0;
  double corey_no = 2.0;

  double krw(std::size_t cell, double sw) const;
  double kro(std::size_t cell, double sw) const;
};

enum class WellKind : std::uint8_t { Producer = 0, Injector = 1 };

struct WellSpec {
  std::string name;
  WellKind kind = WellKind::Producer;
  int i = 0, j = 0;     // well column
  int k_lo = 0, k_hi = 0;  // inclusive perforated layer range
  double control_bar = 0.0;
};

// Per-well rate series over the report steps. Rates are positive volumes per
// day (production for producers, injection for injectors); injector oil rate
// is zero by construction.
struct RateSeries {
  std::vector<std::string> wells;
  std::vector<WellKind> kinds;
  int n_steps = 0;
  std::vector<double> day;                       // report-step end time
  std::vector<double> oil_rate, water_rate, bhp;  // [step * n_wells + well]

  std::size_t n_wells() const { return wells.size(); }
  double& at(std::vector<double>& v, int step, std::size_t w) { return v[step * n_wells() + w]; }
  double at(const std::vector<double>& v, int step, std::size_t w) const {
    return v[step * n_wells() + w];
  }
};

struct SimConfig {
  double horizon_days = 3000.0;
  int report_steps = 60;
  double corey_nw = 2.0;
  double corey_no = 2.0;
  double pc_ref = 1.0e5;      // capillary scaling constant for the initial J-function
  double well_radius = 0.1;   // m
  double cfl = 0.5;
  int max_substeps_per_report = 20000;
  // Pressure-solve tolerance. The contract is < 1e-8; the tighter default
  // keeps flux-imbalance drift of cells pinned at their saturation bounds
  // well below the reporting thresholds.
  double cg_rel_tol = 1e-10;
};

struct InitState {
  std::vector<double> pressure_pa;
  std::vector<double> sw;
  SatFunctions sat;
};

// Initial saturations from the endpoint formulas (connate from permeability,
// initial from height above OWC through a Leverett J-function), pressure
// hydrostatic from p_init at the OWC.
InitState init_state(const Realisation& r, const FluidProps& fluids, const SimConfig& cfg);

// Line drive: producers P1-P3 on the middle row (i = nx/2) at thirds of y,
// injectors I1-I3 on row i = 2 and I4-I6 on row i = nx-3, all perforated over
// the full layer range. Requires nx >= 8, ny >= 3.
std::vector<WellSpec> place_wells(const GridDims& dims, const FluidProps& fluids);

struct SimDiagnostics {
  std::vector<double> water_balance_rel_error;  // per report step
  std::vector<double> total_balance_rel_error;  // per report step
  // Largest excursion beyond [swl, swu] before the per-substep clamp; stays
  // at solver-residual scale when the CFL bound is honored.
  double max_sat_violation = 0.0;
  double min_pressure_bar = 0.0, max_pressure_bar = 0.0;
  std::vector<double> last_pressure_pa;  // field from the final solve
  std::size_t total_substeps = 0;
};

// Incompressible oil/water IMPES: 7-point finite-volume pressure solve with
// harmonic rock transmissibilities and Peaceman wells, explicit upwind
// saturation transport with CFL-limited sub-steps.
RateSeries simulate(const Realisation& r, const FluidProps& fluids,
                    const std::vector<WellSpec>& wells, const SimConfig& cfg,
                    SimDiagnostics* diag = nullptr);

// Sparse symmetric positive definite system in CSR form.
struct SparseSpd {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<double> val;

  static SparseSpd from_dense(const std::vector<double>& a, std::size_t n);
  void multiply(const std::vector<double>& x, std::vector<double>& y) const;
};

// Jacobi-preconditioned conjugate gradients; relative residual below rel_tol
// or NumericError after 10*n iterations.
std::vector<double> cg_solve(const SparseSpd& a, const std::vector<double>& b,
                             double rel_tol = 1e-8);

}  // namespace gwae

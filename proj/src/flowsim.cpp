#include "gwae/flowsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwae/errors.hpp"

namespace gwae {

namespace {

constexpr double kMdToM2 = 9.869233e-16;
constexpr double kCpToPas = 1.0e-3;
constexpr double kBarToPa = 1.0e5;
constexpr double kDayToS = 86400.0;
constexpr double kGravity = 9.81;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void FluidProps::validate() const {
  if (mu_w_cp <= 0 || mu_o_cp <= 0 || rho_w <= 0 || rho_o <= 0)
    throw ConfigError("fluids: viscosities and densities must be positive");
  if (!(p_inj_bar > p_init_bar && p_init_bar > p_prod_bar))
    throw ConfigError("fluids: require P_inj > P_init > P_prod");
}

double SatFunctions::krw(std::size_t cell, double sw) const {
  const SatEndpoints& e = cells[cell];
  const double span = e.swu - e.swcr;
  if (span <= 0.0) return sw >= e.swu ? 1.0 : 0.0;
  return std::pow(clamp01((sw - e.swcr) / span), corey_nw);
}

double SatFunctions::kro(std::size_t cell, double sw) const {
  const SatEndpoints& e = cells[cell];
  const double span = 1.0 - e.swcr - e.sowcr;
  if (span <= 0.0) return 0.0;
  return std::pow(clamp01((1.0 - sw - e.sowcr) / span), corey_no);
}

InitState init_state(const Realisation& r, const FluidProps& fluids, const SimConfig& cfg) {
  fluids.validate();
  const std::size_t n = r.grid.cell_count();
  if (r.permeability.size() != n || r.porosity.size() != n)
    throw ConfigError("init_state: property arrays do not match grid");

  InitState st;
  st.sat.corey_nw = cfg.corey_nw;
  st.sat.corey_no = cfg.corey_no;
  st.sat.cells.resize(n);
  st.pressure_pa.resize(n);
  st.sw.resize(n);

  const double drho = fluids.rho_w - fluids.rho_o;
  const auto& d = r.grid.dims;
  for (int k = 0; k < d.nz; ++k) {
    const double depth = r.grid.layer_depth(k);
    const double h = fluids.owc_depth - depth;  // height above OWC
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t c = d.flat(i, j, k);
        const double perm = r.permeability[c];
        if (perm <= 0.0) throw ConfigError("init_state: non-positive permeability");
        SatEndpoints& e = st.sat.cells[c];
        e.swl = std::clamp(-0.048 * std::log(perm) + 0.5, 0.02, 0.60);
        e.swcr = 1.1 * e.swl;
        if (h > 0.0) {
          const double jfun =
              (drho * kGravity * h / cfg.pc_ref) * std::sqrt(perm / std::max(r.porosity[c], 1e-6));
          e.swatinit = std::clamp(-0.18 * std::log(jfun) + 0.57, e.swl, 1.0);
        } else {
          e.swatinit = 1.0;  // water zone
        }
        e.swatinit = std::max(e.swatinit, e.swcr);
        e.sowcr = e.swatinit >= 1.0 ? 0.0 : 0.25;
        e.swu = e.swatinit >= 1.0 ? 1.0 : 1.0 - e.sowcr;
        e.swu = std::max(e.swu, e.swatinit);
        st.sw[c] = e.swatinit;

        const double p_owc = fluids.p_init_bar * kBarToPa;
        st.pressure_pa[c] = depth <= fluids.owc_depth
                                ? p_owc - fluids.rho_o * kGravity * (fluids.owc_depth - depth)
                                : p_owc + fluids.rho_w * kGravity * (depth - fluids.owc_depth);
      }
  }
  return st;
}

std::vector<WellSpec> place_wells(const GridDims& dims, const FluidProps& fluids) {
  if (dims.nx < 8 || dims.ny < 3)
    throw ConfigError("place_wells: grid too small (need nx >= 8, ny >= 3)");
  std::vector<WellSpec> wells;
  const int rows[3] = {dims.nx / 2, 2, dims.nx - 3};
  int jpos[3];
  for (int t = 0; t < 3; ++t) jpos[t] = ((2 * t + 1) * dims.ny) / 6;
  for (int t = 0; t < 3; ++t)
    wells.push_back({"P" + std::to_string(t + 1), WellKind::Producer, rows[0], jpos[t], 0,
                     dims.nz - 1, fluids.p_prod_bar});
  for (int line = 1; line <= 2; ++line)
    for (int t = 0; t < 3; ++t)
      wells.push_back({"I" + std::to_string((line - 1) * 3 + t + 1), WellKind::Injector,
                       rows[line], jpos[t], 0, dims.nz - 1, fluids.p_inj_bar});
  return wells;
}

SparseSpd SparseSpd::from_dense(const std::vector<double>& a, std::size_t n) {
  SparseSpd s;
  s.n = n;
  s.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (a[i * n + j] != 0.0) {
        s.col.push_back(static_cast<std::uint32_t>(j));
        s.val.push_back(a[i * n + j]);
      }
    s.row_ptr[i + 1] = s.col.size();
  }
  return s;
}

void SparseSpd::multiply(const std::vector<double>& x, std::vector<double>& y) const {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t e = row_ptr[i]; e < row_ptr[i + 1]; ++e) s += val[e] * x[col[e]];
    y[i] = s;
  }
}

std::vector<double> cg_solve(const SparseSpd& a, const std::vector<double>& b, double rel_tol) {
  const std::size_t n = a.n;
  if (b.size() != n) throw ConfigError("cg_solve: rhs size mismatch");
  std::vector<double> diag(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e)
      if (a.col[e] == i) diag[i] = a.val[e];
  for (std::size_t i = 0; i < n; ++i)
    if (diag[i] <= 0.0) throw NumericError("cg_solve: non-positive diagonal; matrix not SPD");

  double bnorm = 0.0;
  for (double x : b) bnorm += x * x;
  bnorm = std::sqrt(bnorm);
  std::vector<double> x(n, 0.0);
  if (bnorm == 0.0) return x;

  std::vector<double> r = b, z(n), p(n), ap(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

  const std::size_t max_iters = 10 * n;
  for (std::size_t it = 0; it < max_iters; ++it) {
    a.multiply(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    if (pap <= 0.0) throw NumericError("cg_solve: matrix not positive definite");
    const double alpha = rz / pap;
    double rnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      rnorm += r[i] * r[i];
    }
    if (std::sqrt(rnorm) < rel_tol * bnorm) return x;
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    double rz_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericError("cg_solve: no convergence within 10n iterations");
}

namespace {

struct Face {
  std::uint32_t a, b;
  double trans;  // geometric transmissibility [m3], harmonic perm
};

struct Perforation {
  std::uint32_t cell;
  std::size_t well;
  double wi;  // Peaceman well index [m3]
};

double fractional_flow(const SatFunctions& sat, std::size_t cell, double sw, double mu_w,
                       double mu_o) {
  const double lw = sat.krw(cell, sw) / mu_w;
  const double lo = sat.kro(cell, sw) / mu_o;
  return lw / (lw + lo);
}

}  // namespace

RateSeries simulate(const Realisation& r, const FluidProps& fluids,
                    const std::vector<WellSpec>& wells, const SimConfig& cfg,
                    SimDiagnostics* diag) {
  fluids.validate();
  if (wells.empty()) throw ConfigError("simulate: at least one well required");
  const auto& d = r.grid.dims;
  const std::size_t n = r.grid.cell_count();
  InitState st = init_state(r, fluids, cfg);

  const double mu_w = fluids.mu_w_cp * kCpToPas;
  const double mu_o = fluids.mu_o_cp * kCpToPas;

  // geometric transmissibilities (7-point stencil, harmonic permeability)
  std::vector<Face> faces;
  auto kperm = [&](std::size_t c) { return r.permeability[c] * kMdToM2; };
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t c = d.flat(i, j, k);
        if (i + 1 < d.nx) {
          const std::size_t nb = d.flat(i + 1, j, k);
          const double kh = 2.0 * kperm(c) * kperm(nb) / (kperm(c) + kperm(nb));
          faces.push_back({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(nb),
                           r.grid.dy * r.grid.dz * kh / r.grid.dx});
        }
        if (j + 1 < d.ny) {
          const std::size_t nb = d.flat(i, j + 1, k);
          const double kh = 2.0 * kperm(c) * kperm(nb) / (kperm(c) + kperm(nb));
          faces.push_back({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(nb),
                           r.grid.dx * r.grid.dz * kh / r.grid.dy});
        }
        if (k + 1 < d.nz) {
          const std::size_t nb = d.flat(i, j, k + 1);
          const double kh = 2.0 * kperm(c) * kperm(nb) / (kperm(c) + kperm(nb));
          faces.push_back({static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(nb),
                           r.grid.dx * r.grid.dy * kh / r.grid.dz});
        }
      }

  // Peaceman connections, isotropic equivalent radius
  const double r_eq = 0.28 * std::sqrt(r.grid.dx * r.grid.dx + r.grid.dy * r.grid.dy) / 2.0;
  std::vector<Perforation> perfs;
  for (std::size_t w = 0; w < wells.size(); ++w) {
    const WellSpec& ws = wells[w];
    if (ws.i < 0 || ws.i >= d.nx || ws.j < 0 || ws.j >= d.ny)
      throw ConfigError("simulate: well column outside grid: " + ws.name);
    if (ws.k_lo < 0 || ws.k_hi >= d.nz || ws.k_lo > ws.k_hi)
      throw ConfigError("simulate: bad perforation range: " + ws.name);
    for (int k = ws.k_lo; k <= ws.k_hi; ++k) {
      const std::size_t c = d.flat(ws.i, ws.j, k);
      const double wi =
          2.0 * 3.14159265358979323846 * kperm(c) * r.grid.dz / std::log(r_eq / cfg.well_radius);
      perfs.push_back({static_cast<std::uint32_t>(c), w, wi});
    }
  }

  std::vector<double> pv(n);
  for (std::size_t c = 0; c < n; ++c) pv[c] = std::max(r.porosity[c], 1e-6) * r.grid.cell_volume();

  // max |dfw/dS| per cell over its admissible range, for the CFL bound
  std::vector<double> lip(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& e = st.sat.cells[c];
    const int ns = 256;
    double lmax = 0.0;
    for (int q = 0; q < ns; ++q) {
      const double s0 = e.swcr + (e.swu - e.swcr) * q / ns;
      const double s1 = e.swcr + (e.swu - e.swcr) * (q + 1) / ns;
      if (s1 <= s0) continue;
      const double f0 = fractional_flow(st.sat, c, s0, mu_w, mu_o);
      const double f1 = fractional_flow(st.sat, c, s1, mu_w, mu_o);
      lmax = std::max(lmax, std::abs(f1 - f0) / (s1 - s0));
    }
    // sampled slope underestimates the true maximum; pad it
    lip[c] = std::max(1.5 * lmax, 1e-12);
  }

  RateSeries series;
  series.n_steps = cfg.report_steps;
  for (const auto& w : wells) {
    series.wells.push_back(w.name);
    series.kinds.push_back(w.kind);
  }
  const std::size_t nw = wells.size();
  series.day.resize(cfg.report_steps);
  series.oil_rate.assign(static_cast<std::size_t>(cfg.report_steps) * nw, 0.0);
  series.water_rate.assign(static_cast<std::size_t>(cfg.report_steps) * nw, 0.0);
  series.bhp.assign(static_cast<std::size_t>(cfg.report_steps) * nw, 0.0);

  if (diag) {
    diag->water_balance_rel_error.assign(cfg.report_steps, 0.0);
    diag->total_balance_rel_error.assign(cfg.report_steps, 0.0);
    diag->max_sat_violation = 0.0;
    diag->min_pressure_bar = fluids.p_inj_bar;
    diag->max_pressure_bar = fluids.p_prod_bar;
    diag->total_substeps = 0;
  }

  const double report_s = cfg.horizon_days * kDayToS / cfg.report_steps;
  std::vector<double> lam_t(n), pressure(n), rhs(n);
  std::vector<double> face_flux(faces.size());
  std::vector<double> perf_total(perfs.size());

  for (int step = 0; step < cfg.report_steps; ++step) {
    double remaining = report_s;
    int substeps = 0;
    std::vector<double> inj_w(nw, 0.0), prod_w(nw, 0.0), prod_o(nw, 0.0);
    double wip0 = 0.0;
    for (std::size_t c = 0; c < n; ++c) wip0 += pv[c] * st.sw[c];

    while (remaining > 1e-9) {
      if (++substeps > cfg.max_substeps_per_report)
        throw NumericError("simulate: CFL sub-step cap exceeded in report step " +
                           std::to_string(step));

      for (std::size_t c = 0; c < n; ++c)
        lam_t[c] = st.sat.krw(c, st.sw[c]) / mu_w + st.sat.kro(c, st.sw[c]) / mu_o;

      // assemble pressure system: SPD 7-point + well diagonal terms
      SparseSpd a;
      a.n = n;
      a.row_ptr.assign(n + 1, 0);
      std::vector<double> diag_term(n, 0.0);
      std::vector<std::vector<std::pair<std::uint32_t, double>>> offdiag(n);
      for (const auto& f : faces) {
        const double t = f.trans * 0.5 * (lam_t[f.a] + lam_t[f.b]);
        diag_term[f.a] += t;
        diag_term[f.b] += t;
        offdiag[f.a].push_back({f.b, -t});
        offdiag[f.b].push_back({f.a, -t});
      }
      rhs.assign(n, 0.0);
      for (const auto& pf : perfs) {
        const double t = pf.wi * lam_t[pf.cell];
        diag_term[pf.cell] += t;
        rhs[pf.cell] += t * wells[pf.well].control_bar * kBarToPa;
      }
      for (std::size_t c = 0; c < n; ++c) {
        offdiag[c].push_back({static_cast<std::uint32_t>(c), diag_term[c]});
        std::sort(offdiag[c].begin(), offdiag[c].end());
        for (const auto& [cc, vv] : offdiag[c]) {
          a.col.push_back(cc);
          a.val.push_back(vv);
        }
        a.row_ptr[c + 1] = a.col.size();
      }
      pressure = cg_solve(a, rhs, cfg.cg_rel_tol);

      if (diag) {
        for (double p : pressure) {
          diag->min_pressure_bar = std::min(diag->min_pressure_bar, p / kBarToPa);
          diag->max_pressure_bar = std::max(diag->max_pressure_bar, p / kBarToPa);
        }
        diag->last_pressure_pa = pressure;
      }

      // face and well total fluxes
      for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& fc = faces[f];
        face_flux[f] = fc.trans * 0.5 * (lam_t[fc.a] + lam_t[fc.b]) *
                       (pressure[fc.a] - pressure[fc.b]);
      }
      for (std::size_t p = 0; p < perfs.size(); ++p) {
        const auto& pf = perfs[p];
        perf_total[p] =
            pf.wi * lam_t[pf.cell] * (pressure[pf.cell] - wells[pf.well].control_bar * kBarToPa);
        // producers flow out of the cell (positive), injectors in (negative)
      }

      // CFL bound from total outflow per cell
      std::vector<double> outflow(n, 0.0);
      for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& fc = faces[f];
        if (face_flux[f] > 0.0)
          outflow[fc.a] += face_flux[f];
        else
          outflow[fc.b] -= face_flux[f];
      }
      for (std::size_t p = 0; p < perfs.size(); ++p)
        if (perf_total[p] > 0.0) outflow[perfs[p].cell] += perf_total[p];

      double dt = remaining;
      for (std::size_t c = 0; c < n; ++c)
        if (outflow[c] > 0.0) dt = std::min(dt, cfg.cfl * pv[c] / (outflow[c] * lip[c]));
      dt = std::max(dt, 1e-6);  // guard against a degenerate bound
      dt = std::min(dt, remaining);

      // explicit upwind water transport
      std::vector<double> dsw(n, 0.0);
      for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& fc = faces[f];
        const std::size_t up = face_flux[f] >= 0.0 ? fc.a : fc.b;
        const double fw = fractional_flow(st.sat, up, st.sw[up], mu_w, mu_o);
        const double qw = fw * face_flux[f];
        dsw[fc.a] -= qw * dt / pv[fc.a];
        dsw[fc.b] += qw * dt / pv[fc.b];
      }
      for (std::size_t p = 0; p < perfs.size(); ++p) {
        const auto& pf = perfs[p];
        const WellSpec& ws = wells[pf.well];
        if (ws.kind == WellKind::Injector) {
          const double q = -perf_total[p];  // into the cell
          dsw[pf.cell] += q * dt / pv[pf.cell];
          inj_w[pf.well] += q * dt;
        } else {
          const double lw = st.sat.krw(pf.cell, st.sw[pf.cell]) / mu_w;
          const double lo = st.sat.kro(pf.cell, st.sw[pf.cell]) / mu_o;
          const double dp = pressure[pf.cell] - ws.control_bar * kBarToPa;
          const double qw = pf.wi * lw * dp;
          const double qo = pf.wi * lo * dp;
          dsw[pf.cell] -= qw * dt / pv[pf.cell];
          prod_w[pf.well] += qw * dt;
          prod_o[pf.well] += qo * dt;
        }
      }
      for (std::size_t c = 0; c < n; ++c) {
        double s = st.sw[c] + dsw[c];
        const auto& e = st.sat.cells[c];
        if (diag)
          diag->max_sat_violation =
              std::max({diag->max_sat_violation, e.swl - s, s - e.swu});
        st.sw[c] = std::clamp(s, e.swl, e.swu);
      }
      remaining -= dt;
    }

    // report-step bookkeeping
    const double window_days = cfg.horizon_days / cfg.report_steps;
    series.day[step] = window_days * (step + 1);
    double wip1 = 0.0;
    for (std::size_t c = 0; c < n; ++c) wip1 += pv[c] * st.sw[c];
    double inj_sum = 0.0, prodw_sum = 0.0, prodo_sum = 0.0;
    for (std::size_t w = 0; w < nw; ++w) {
      inj_sum += inj_w[w];
      prodw_sum += prod_w[w];
      prodo_sum += prod_o[w];
      series.at(series.oil_rate, step, w) = prod_o[w] / window_days;
      series.at(series.water_rate, step, w) =
          (wells[w].kind == WellKind::Injector ? inj_w[w] : prod_w[w]) / window_days;
      series.at(series.bhp, step, w) = wells[w].control_bar;
    }
    if (diag) {
      const double scale = std::max({inj_sum, prodw_sum + prodo_sum, 1e-30});
      diag->water_balance_rel_error[step] = std::abs(inj_sum - prodw_sum - (wip1 - wip0)) / scale;
      diag->total_balance_rel_error[step] = std::abs(inj_sum - prodw_sum - prodo_sum) / scale;
      diag->total_substeps += substeps;
    }
  }
  return series;
}

}  // namespace gwae

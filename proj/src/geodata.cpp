#include "gwae/geodata.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gwae/errors.hpp"
#include "gwae/util.hpp"

namespace gwae {

namespace {

constexpr double kPi = 3.14159265358979323846;

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

struct ParamRange {
  double width_lo, width_hi;
  double thickness_lo, thickness_hi;
  double wavelength_lo, wavelength_hi;
  double amplitude_lo, amplitude_hi;
  double orientation;
};

constexpr ParamRange kSingleRange{300, 500, 10, 20, 1000, 2000, 0, 300, 90.0};
constexpr ParamRange kDoubleRange{300, 500, 10, 20, 500, 1000, 500, 900, 120.0};

struct ChannelPlacement {
  double phase = 0.0;
  double offset = 0.0;  // centerline cross-axis intercept
  int k_top = 0;
};

// Rasterize one sinusoidal channel into the facies mask. The centerline lives
// in a frame rotated by the orientation angle: s along the channel axis,
// n = offset + A*sin(2*pi*s/wavelength + phase) across it. A cell belongs to
// the channel when its center is within width/2 of the sampled centerline
// curve (true Euclidean distance, so steep meanders stay one connected tube)
// and its layer is inside the thickness band.
void rasterize_channel(const GridSpec& grid, const ChannelParams& p, const ChannelPlacement& pl,
                       int n_layers, std::vector<std::uint8_t>& facies) {
  const double theta = p.orientation_deg * kPi / 180.0;
  const double ux = std::cos(theta), uy = std::sin(theta);
  const double vx = -std::sin(theta), vy = std::cos(theta);
  const auto& d = grid.dims;

  // s-range of the grid corners, padded by a wavelength so the curve enters
  // and leaves cleanly
  double s_lo = 1e300, s_hi = -1e300;
  for (int cx = 0; cx <= 1; ++cx)
    for (int cy = 0; cy <= 1; ++cy) {
      const double x = cx * d.nx * grid.dx;
      const double y = cy * d.ny * grid.dy;
      const double s = ux * x + uy * y;
      s_lo = std::min(s_lo, s);
      s_hi = std::max(s_hi, s);
    }
  s_lo -= p.wavelength_m;
  s_hi += p.wavelength_m;

  const double step = std::min({grid.dx, grid.dy, p.wavelength_m / 64.0}) * 0.5;
  const double radius = p.width_m * 0.5;
  const int half_i = static_cast<int>(radius / grid.dx) + 1;
  const int half_j = static_cast<int>(radius / grid.dy) + 1;

  std::vector<std::uint8_t> areal(static_cast<std::size_t>(d.nx) * d.ny, 0);
  for (double s = s_lo; s <= s_hi; s += step) {
    const double n = pl.offset + p.amplitude_m * std::sin(2.0 * kPi * s / p.wavelength_m + pl.phase);
    const double x = ux * s + vx * n;
    const double y = uy * s + vy * n;
    const int ci = static_cast<int>(std::floor(x / grid.dx - 0.5));
    const int cj = static_cast<int>(std::floor(y / grid.dy - 0.5));
    for (int j = std::max(0, cj - half_j); j <= std::min(d.ny - 1, cj + half_j + 1); ++j)
      for (int i = std::max(0, ci - half_i); i <= std::min(d.nx - 1, ci + half_i + 1); ++i) {
        if (areal[static_cast<std::size_t>(j) * d.nx + i]) continue;
        const double px = (i + 0.5) * grid.dx - x;
        const double py = (j + 0.5) * grid.dy - y;
        if (px * px + py * py <= radius * radius)
          areal[static_cast<std::size_t>(j) * d.nx + i] = 1;
      }
  }
  for (int j = 0; j < d.ny; ++j)
    for (int i = 0; i < d.nx; ++i) {
      if (!areal[static_cast<std::size_t>(j) * d.nx + i]) continue;
      for (int k = pl.k_top; k < std::min(pl.k_top + n_layers, d.nz); ++k)
        facies[d.flat(i, j, k)] = 1;
    }
}

// Same-facies moving average over the 7-point stencil (self + face neighbors).
std::vector<double> smooth_within_facies(const std::vector<double>& field,
                                         const std::vector<std::uint8_t>& facies,
                                         const GridDims& d) {
  std::vector<double> out(field.size());
  for (int k = 0; k < d.nz; ++k)
    for (int j = 0; j < d.ny; ++j)
      for (int i = 0; i < d.nx; ++i) {
        const std::size_t c = d.flat(i, j, k);
        double acc = field[c];
        int cnt = 1;
        const int di[6] = {-1, 1, 0, 0, 0, 0};
        const int dj[6] = {0, 0, -1, 1, 0, 0};
        const int dk[6] = {0, 0, 0, 0, -1, 1};
        for (int q = 0; q < 6; ++q) {
          const int ni = i + di[q], nj = j + dj[q], nk = k + dk[q];
          if (ni < 0 || nj < 0 || nk < 0 || ni >= d.nx || nj >= d.ny || nk >= d.nz) continue;
          const std::size_t nc = d.flat(ni, nj, nk);
          if (facies[nc] != facies[c]) continue;
          acc += field[nc];
          ++cnt;
        }
        out[c] = acc / cnt;
      }
  return out;
}

}  // namespace

const char* scenario_name(Scenario s) { return s == Scenario::Single ? "single" : "double"; }

GridSpec make_grid(int nx, int ny, int nz, double dx, double dy, double dz) {
  GridSpec g;
  g.dims = {nx, ny, nz};
  g.dx = dx;
  g.dy = dy;
  g.dz = dz;
  g.top_depth = kOwcDepth - nz * dz;
  return g;
}

ChannelParams sample_channel_params(Scenario scenario, RngStream& rng) {
  const ParamRange& r = scenario == Scenario::Single ? kSingleRange : kDoubleRange;
  ChannelParams p;
  p.n_channels = scenario == Scenario::Single ? 1 : 2;
  p.width_m = rng.uniform(r.width_lo, r.width_hi);
  p.thickness_m = rng.uniform(r.thickness_lo, r.thickness_hi);
  p.wavelength_m = rng.uniform(r.wavelength_lo, r.wavelength_hi);
  p.amplitude_m = rng.uniform(r.amplitude_lo, r.amplitude_hi);
  p.orientation_deg = r.orientation;
  return p;
}

Realisation generate_realisation(Scenario scenario, const GridSpec& grid, RngStream& rng,
                                 int max_retries) {
  const auto& d = grid.dims;
  if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
    throw ConfigError("generate_realisation: grid dims must be positive");
  const std::size_t ncells = grid.cell_count();
  const double diag = std::hypot(d.nx * grid.dx, d.ny * grid.dy);

  Realisation r;
  r.grid = grid;
  r.scenario = scenario;
  r.seed = rng.key();

  std::vector<std::uint8_t> facies;
  bool placed = false;
  for (int attempt = 0; attempt < max_retries && !placed; ++attempt) {
    ChannelParams p = sample_channel_params(scenario, rng);
    const int n_layers = std::max(1, static_cast<int>(std::lround(p.thickness_m / grid.dz)));
    const int max_top = std::max(0, d.nz - n_layers);

    std::vector<ChannelPlacement> placements(p.n_channels);
    for (int c = 0; c < p.n_channels; ++c) {
      ChannelPlacement& pl = placements[c];
      if (c == 1 && max_top >= 1) {
        // second channel at a distinct stratigraphic level
        const int other = placements[0].k_top;
        int pick = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_top)));
        pl.k_top = pick >= other ? pick + 1 : pick;
      } else {
        pl.k_top = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_top + 1)));
      }
      pl.phase = rng.uniform(0.0, 2.0 * kPi);
      // anchor somewhere inside the areal footprint, then shift the
      // centerline so it passes through the anchor
      const double ax = rng.uniform(0.0, d.nx * grid.dx);
      const double ay = rng.uniform(0.0, d.ny * grid.dy);
      const double theta = p.orientation_deg * kPi / 180.0;
      const double s = std::cos(theta) * ax + std::sin(theta) * ay;
      const double n = -std::sin(theta) * ax + std::cos(theta) * ay;
      pl.offset = n - p.amplitude_m * std::sin(2.0 * kPi * s / p.wavelength_m + pl.phase);
      (void)diag;
    }

    facies.assign(ncells, 0);
    for (int c = 0; c < p.n_channels; ++c)
      rasterize_channel(grid, p, placements[c], n_layers, facies);

    if (count_components(facies, d) == static_cast<std::size_t>(p.n_channels)) {
      r.params = p;
      placed = true;
    }
  }
  if (!placed)
    throw NumericError("generate_realisation: channel placement failed after " +
                       std::to_string(max_retries) + " retries");

  // porosity per facies, smoothed within the facies so the two property
  // ranges stay disjoint
  std::vector<double> poro(ncells);
  for (std::size_t c = 0; c < ncells; ++c)
    poro[c] = facies[c] ? rng.uniform(kChannelPoroMin, kChannelPoroMax)
                        : rng.uniform(kBackgroundPoroMin, kBackgroundPoroMax);
  poro = smooth_within_facies(poro, facies, d);

  std::vector<double> perm = poro_perm_transform(poro, facies, rng);

  r.porosity.resize(ncells);
  r.permeability.resize(ncells);
  for (std::size_t c = 0; c < ncells; ++c) {
    r.porosity[c] = quantize_f32(poro[c]);
    r.permeability[c] = quantize_f32(perm[c]);
  }
  return r;
}

std::vector<double> poro_perm_transform(const std::vector<double>& porosity,
                                        const std::vector<std::uint8_t>& facies, RngStream& rng,
                                        const PoroPermLaw& channel, const PoroPermLaw& background) {
  if (porosity.size() != facies.size())
    throw ConfigError("poro_perm_transform: porosity/facies length mismatch");
  std::vector<double> perm(porosity.size());
  for (std::size_t c = 0; c < porosity.size(); ++c) {
    const PoroPermLaw& law = facies[c] ? channel : background;
    const double log10k = law.intercept + law.slope * porosity[c] + law.noise_std * rng.normal();
    perm[c] = std::clamp(std::pow(10.0, log10k), kPermMinMd, kPermMaxMd);
  }
  return perm;
}

std::vector<std::uint8_t> channel_mask(const Realisation& r, double threshold) {
  std::vector<std::uint8_t> mask(r.porosity.size());
  for (std::size_t c = 0; c < mask.size(); ++c) mask[c] = r.porosity[c] >= threshold ? 1 : 0;
  return mask;
}

std::size_t count_components(const std::vector<std::uint8_t>& mask, const GridDims& d) {
  std::vector<std::int8_t> seen(mask.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t components = 0;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    ++components;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(c % d.nx);
      const int j = static_cast<int>((c / d.nx) % d.ny);
      const int k = static_cast<int>(c / (static_cast<std::size_t>(d.nx) * d.ny));
      const int di[6] = {-1, 1, 0, 0, 0, 0};
      const int dj[6] = {0, 0, -1, 1, 0, 0};
      const int dk[6] = {0, 0, 0, 0, -1, 1};
      for (int q = 0; q < 6; ++q) {
        const int ni = i + di[q], nj = j + dj[q], nk = k + dk[q];
        if (ni < 0 || nj < 0 || nk < 0 || ni >= d.nx || nj >= d.ny || nk >= d.nz) continue;
        const std::size_t nc = d.flat(ni, nj, nk);
        if (mask[nc] && !seen[nc]) {
          seen[nc] = 1;
          stack.push_back(nc);
        }
      }
    }
  }
  return components;
}

std::vector<Realisation> generate_ensemble(std::size_t count, const GridSpec& grid,
                                           std::uint64_t seed, int threads) {
  std::vector<Realisation> out(count);
  const RngStream root = RngStream(seed).derive("dataset");
  parallel_for(count, threads, [&](std::size_t i) {
    RngStream rng = root.derive(static_cast<std::uint64_t>(i));
    const Scenario sc = (i % 2 == 0) ? Scenario::Single : Scenario::Double;
    out[i] = generate_realisation(sc, grid, rng);
  });
  return out;
}

NormStats compute_norm_stats(const std::vector<Realisation>& ensemble) {
  if (ensemble.empty()) throw ConfigError("compute_norm_stats: empty ensemble");
  double sp = 0.0, spp = 0.0, sk = 0.0, skk = 0.0;
  std::size_t n = 0;
  for (const auto& r : ensemble)
    for (std::size_t c = 0; c < r.porosity.size(); ++c) {
      const double phi = r.porosity[c];
      const double lk = std::log10(r.permeability[c]);
      sp += phi;
      spp += phi * phi;
      sk += lk;
      skk += lk * lk;
      ++n;
    }
  NormStats s;
  const double dn = static_cast<double>(n);
  s.poro_mean = sp / dn;
  s.poro_std = std::sqrt(std::max(spp / dn - s.poro_mean * s.poro_mean, 1e-30));
  s.logperm_mean = sk / dn;
  s.logperm_std = std::sqrt(std::max(skk / dn - s.logperm_mean * s.logperm_mean, 1e-30));
  return s;
}

GeoGraph realisation_to_graph(const Realisation& r, const NormStats& stats) {
  const std::size_t ncells = r.grid.cell_count();
  if (r.porosity.size() != ncells || r.permeability.size() != ncells)
    throw ConfigError("realisation_to_graph: property array size mismatch");
  if (stats.poro_std <= 0.0 || stats.logperm_std <= 0.0)
    throw ConfigError("realisation_to_graph: normalization stats missing or degenerate");
  std::vector<double> feats(ncells * 2);
  for (std::size_t c = 0; c < ncells; ++c) {
    feats[c * 2 + 0] = (r.porosity[c] - stats.poro_mean) / stats.poro_std;
    feats[c * 2 + 1] = (std::log10(r.permeability[c]) - stats.logperm_mean) / stats.logperm_std;
  }
  return build_grid_graph(r.grid.dims, std::vector<bool>(ncells, true), feats, 2);
}

Realisation graph_to_realisation(const GeoGraph& g, const NormStats& stats,
                                 const Realisation& tmpl) {
  if (g.feature_count != 2) throw ConfigError("graph_to_realisation: expected 2 feature channels");
  Realisation r = tmpl;
  const std::size_t ncells = r.grid.cell_count();
  r.porosity.assign(ncells, 0.0);
  r.permeability.assign(ncells, 0.0);
  for (std::size_t v = 0; v < g.node_count; ++v) {
    const auto& o = g.node_origin[v];
    const std::size_t c = r.grid.dims.flat(o.i, o.j, o.k);
    r.porosity[c] = g.node_features[v * 2 + 0] * stats.poro_std + stats.poro_mean;
    r.permeability[c] =
        std::pow(10.0, g.node_features[v * 2 + 1] * stats.logperm_std + stats.logperm_mean);
  }
  return r;
}

}  // namespace gwae

#pragma once

#include <cstdint>
#include <vector>

#include "gwae/graph.hpp"
#include "gwae/rng.hpp"
#include "gwae/tensor.hpp"

namespace gwae {

enum class Scenario : std::uint8_t { Single = 0, Double = 1 };

const char* scenario_name(Scenario s);

// Sampling ranges for the channel geometry, one row per scenario:
//   scenario  width [m]   thickness [m]  wavelength [m]  amplitude [m]  orientation
//   Single    [300,500]   [10,20]        [1000,2000]     [0,300]        90 deg
//   Double    [300,500]   [10,20]        [500,1000]      [500,900]      120 deg
struct ChannelParams {
  int n_channels = 1;
  double width_m = 0.0;
  double thickness_m = 0.0;
  double wavelength_m = 0.0;
  double amplitude_m = 0.0;
  double orientation_deg = 0.0;
};

inline constexpr double kOwcDepth = 2460.0;  // oil-water contact [m]

struct GridSpec {
  GridDims dims{16, 12, 10};
  double dx = 100.0, dy = 100.0, dz = 6.0;
  double top_depth = 2400.0;  // grid bottom sits at the OWC by default

  std::size_t cell_count() const { return dims.cell_count(); }
  double cell_volume() const { return dx * dy * dz; }
  // Depth of the center of layer k.
  double layer_depth(int k) const { return top_depth + (k + 0.5) * dz; }
  bool operator==(const GridSpec&) const = default;
};

GridSpec make_grid(int nx, int ny, int nz, double dx = 100.0, double dy = 100.0, double dz = 6.0);

// One sampled 3D porosity/permeability model. Property arrays are cell-major
// (i fastest) and quantized through float32 so in-memory values match the
// on-disk representation exactly.
struct Realisation {
  GridSpec grid;
  Scenario scenario = Scenario::Single;
  ChannelParams params;
  std::uint64_t seed = 0;               // derived stream key, for audit
  std::vector<double> porosity;         // fraction
  std::vector<double> permeability;     // millidarcy, > 0
};

// Facies property defaults (the construction is an artifact choice):
// channel porosity U[0.18, 0.30], background U[0.02, 0.08], both smoothed by a
// same-facies 1-cell moving average; log10(perm[mD]) = a + b*phi + N(0, s^2)
// with channel (1.0, 10.0, 0.15) and background (-1.5, 8.0, 0.25), clamped to
// [0.01, 10000] mD.
inline constexpr double kChannelPoroMin = 0.18, kChannelPoroMax = 0.30;
inline constexpr double kBackgroundPoroMin = 0.02, kBackgroundPoroMax = 0.08;
inline constexpr double kPermMinMd = 0.01, kPermMaxMd = 10000.0;
inline constexpr double kFaciesPoroThreshold = 0.13;

struct PoroPermLaw {
  double intercept, slope, noise_std;
};
inline constexpr PoroPermLaw kChannelLaw{1.0, 10.0, 0.15};
inline constexpr PoroPermLaw kBackgroundLaw{-1.5, 8.0, 0.25};

// Per-feature-channel normalization computed over a generated ensemble
// (population statistics of porosity and log10-permeability).
struct NormStats {
  double poro_mean = 0.0, poro_std = 1.0;
  double logperm_mean = 0.0, logperm_std = 1.0;
  bool operator==(const NormStats&) const = default;
};

struct DatasetManifest {
  std::uint32_t schema = 1;
  std::size_t count_single = 0, count_double = 0;
  GridSpec grid;
  NormStats stats;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t total() const { return count_single + count_double; }
};

ChannelParams sample_channel_params(Scenario scenario, RngStream& rng);

// Draws geometry until the rasterized channel bodies form exactly n_channels
// connected components inside the grid (bounded retries), then fills the
// property fields.
Realisation generate_realisation(Scenario scenario, const GridSpec& grid, RngStream& rng,
                                 int max_retries = 256);

// log-linear poro-perm cloud, one draw per cell; facies selects the law.
std::vector<double> poro_perm_transform(const std::vector<double>& porosity,
                                        const std::vector<std::uint8_t>& facies, RngStream& rng,
                                        const PoroPermLaw& channel = kChannelLaw,
                                        const PoroPermLaw& background = kBackgroundLaw);

// Channel-facies mask recovered from the porosity field (the two facies
// porosity ranges are disjoint at generator output).
std::vector<std::uint8_t> channel_mask(const Realisation& r,
                                       double threshold = kFaciesPoroThreshold);

std::size_t count_components(const std::vector<std::uint8_t>& mask, const GridDims& dims);

// Ensemble generation (scenarios alternate: even index Single, odd Double).
// Per-realisation streams derive from seed, so generation order and thread
// count do not affect results.
std::vector<Realisation> generate_ensemble(std::size_t count, const GridSpec& grid,
                                           std::uint64_t seed, int threads = 1);

NormStats compute_norm_stats(const std::vector<Realisation>& ensemble);

// features = [(phi - mean)/std, (log10 perm - mean)/std]; all cells active.
GeoGraph realisation_to_graph(const Realisation& r, const NormStats& stats);
Realisation graph_to_realisation(const GeoGraph& g, const NormStats& stats,
                                 const Realisation& tmpl);

}  // namespace gwae

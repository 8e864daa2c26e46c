#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwae/analysis.hpp"
#include "gwae/flowsim.hpp"
#include "gwae/geodata.hpp"
#include "gwae/hm.hpp"
#include "gwae/manifold.hpp"
#include "gwae/model.hpp"

namespace gwae {

// Sectioned run configuration with documented defaults (desk scale). Unknown
// keys are rejected; the GWAE_SEED environment variable overrides `seed`.
struct RunConfig {
  std::uint32_t schema_version = 1;
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = hardware concurrency

  struct Dataset {
    std::size_t count = 400;
    int nx = 8, ny = 6, nz = 4;
    double dx = 100.0, dy = 100.0, dz = 6.0;
    double top_depth = -1.0;  // negative = derive so the grid bottom sits at the OWC
  } dataset;

  struct Model {
    int latent_dim = 8;
    int hidden1 = 32, hidden2 = 64;
    int k = 1;
  } model;

  struct Training {
    int epochs = 60;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double lambda_mmd = 10.0;
  } training;

  struct Flow {
    double horizon_days = 3000.0;
    int report_steps = 60;
    double corey_nw = 2.0, corey_no = 2.0;
    double pc_ref = 1.0e5;
    double well_radius = 0.1;
    double cfl = 0.5;
    int max_substeps = 20000;
  } flow;

  struct Hm {
    int popsize = 51;
    int iterations = 100;
    int restarts = 4;
    double sigma0 = 0.5;
    double w_flow = 1.0, w_static = 1.0, w_realism = 0.1;
    std::vector<std::string> observed_wells;  // empty = all
    double realism_percentile = 90.0;
    double penalty = 1e6;
    std::size_t truth_index = 0;  // dataset record used as the hidden truth
  } hm;

  struct Analysis {
    double tsne_perplexity = 30.0;
    int tsne_dims = 2;
    int tsne_iters = 1000;
    double tsne_learning_rate = 200.0;
    std::size_t persistence_subsample = 200;
    int pca_components = 2;
  } analysis;

  GridSpec grid() const;
  FluidProps fluids() const { return FluidProps{}; }
  SimConfig sim_config() const;
  ModelConfig model_config() const;
  TrainConfig train_config() const;
  HmConfig hm_config() const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);
std::string config_to_json(const RunConfig& cfg);  // canonical form
std::string config_hash(const RunConfig& cfg);     // fnv1a64 of the canonical form, hex

// ---- dataset file ("GWDS") -------------------------------------------------
// little-endian layout:
//   magic 'GWDS' | u32 version | u32 count | u32 nx,ny,nz | f64 dx,dy,dz
//   | f64 top_depth                                  (56-byte header)
// then per record:
//   u8 scenario | u64 seed | f64 x6 channel params (n, width, thickness,
//   wavelength, amplitude, orientation) | f32 x ncells porosity
//   | f32 x ncells permeability                      (57 + 8*ncells bytes)
inline constexpr std::uint32_t kDatasetVersion = 1;
std::size_t dataset_file_size(std::size_t count, std::size_t ncells);

void write_dataset(const std::string& path, const std::vector<Realisation>& ensemble,
                   const DatasetManifest& manifest);  // manifest JSON at path + ".manifest.json"

struct Dataset {
  std::vector<Realisation> realisations;
  DatasetManifest manifest;
};
Dataset read_dataset(const std::string& path);

// Generates the ensemble, computes normalization stats and writes both files.
DatasetManifest generate_dataset(const RunConfig& cfg, const std::string& path);

// ---- checkpoint file ("GWAE") ----------------------------------------------
// magic 'GWAE' | u32 version | u32 json_len | json header (architecture, grid,
// stats, loss history, training config echo) | per weight: u32 rows, u32 cols,
// f64 data. Raw float64 blobs make save -> load -> decode bit-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void write_checkpoint(const std::string& path, const GwaeCheckpoint& ckpt);
GwaeCheckpoint read_checkpoint(const std::string& path);

// ---- CSV / JSONL -----------------------------------------------------------
// Rates: columns step,day,well,oil_rate,water_rate,bhp; wells alphabetical
// within each step, steps ascending.
void write_rates_csv(const std::string& path, const RateSeries& rates);

// Interpolation stations: station,<z coords...>,log_volume.
void write_path_csv(const std::string& path, const InterpolationResult& interp);

// Embeddings: sample,<coords...>,scenario.
void write_embedding_csv(const std::string& path, const Tensor& embedding,
                         const std::vector<Scenario>& labels);

void write_diagram_csv(const std::string& path, const std::vector<PersistenceDiagram>& diagrams);

// ---- run artifacts ----------------------------------------------------------
// Every command writes outdir/manifest.json carrying the command name, config
// hash, seed and output list; history matching adds config.json,
// generations.jsonl, summary.json, best realisations and rate CSVs.
void write_artifact_manifest(const std::string& outdir, const std::string& command,
                             const RunConfig& cfg, const std::vector<std::string>& outputs);

void write_hm_artifacts(const std::string& outdir, const HmResult& result,
                        const GwaeCheckpoint& ckpt, const ReferenceCase& reference,
                        const RunConfig& cfg, const FluidProps& fluids, const SimConfig& sim);

std::string breakdown_json(const ObjectiveBreakdown& b);  // one-line JSON

}  // namespace gwae

#include "gwae/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gwae/errors.hpp"
#include "gwae/util.hpp"

namespace gwae {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("config: unknown key '" +
                        (section.empty() ? it.key() : section + "." + it.key()) + "'");
  }
}

template <class T>
void get_if(const json& o, const char* k, T& dst) {
  if (o.contains(k)) dst = o.at(k).get<T>();
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// binary helpers, little-endian (native on every supported platform)
void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }
void put_u32(std::ostream& os, std::uint32_t v) { put_bytes(os, &v, 4); }
void put_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, &v, 8); }
void put_f64(std::ostream& os, double v) { put_bytes(os, &v, 8); }
void put_f32(std::ostream& os, float v) { put_bytes(os, &v, 4); }

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (is.gcount() != static_cast<std::streamsize>(n))
    throw IoError(std::string("truncated file while reading ") + what);
}
std::uint8_t get_u8(std::istream& is, const char* w) {
  std::uint8_t v;
  get_bytes(is, &v, 1, w);
  return v;
}
std::uint32_t get_u32(std::istream& is, const char* w) {
  std::uint32_t v;
  get_bytes(is, &v, 4, w);
  return v;
}
std::uint64_t get_u64(std::istream& is, const char* w) {
  std::uint64_t v;
  get_bytes(is, &v, 8, w);
  return v;
}
double get_f64(std::istream& is, const char* w) {
  double v;
  get_bytes(is, &v, 8, w);
  return v;
}
float get_f32(std::istream& is, const char* w) {
  float v;
  get_bytes(is, &v, 4, w);
  return v;
}

json grid_to_json(const GridSpec& g) {
  return json{{"nx", g.dims.nx}, {"ny", g.dims.ny}, {"nz", g.dims.nz},
              {"dx", g.dx},      {"dy", g.dy},      {"dz", g.dz},
              {"top_depth", g.top_depth}};
}

GridSpec grid_from_json(const json& j) {
  GridSpec g;
  g.dims = {j.at("nx").get<int>(), j.at("ny").get<int>(), j.at("nz").get<int>()};
  g.dx = j.at("dx").get<double>();
  g.dy = j.at("dy").get<double>();
  g.dz = j.at("dz").get<double>();
  g.top_depth = j.at("top_depth").get<double>();
  return g;
}

json stats_to_json(const NormStats& s) {
  return json{{"poro_mean", s.poro_mean},
              {"poro_std", s.poro_std},
              {"logperm_mean", s.logperm_mean},
              {"logperm_std", s.logperm_std}};
}

NormStats stats_from_json(const json& j) {
  NormStats s;
  s.poro_mean = j.at("poro_mean").get<double>();
  s.poro_std = j.at("poro_std").get<double>();
  s.logperm_mean = j.at("logperm_mean").get<double>();
  s.logperm_std = j.at("logperm_std").get<double>();
  return s;
}

}  // namespace

GridSpec RunConfig::grid() const {
  if (dataset.top_depth < 0.0)
    return make_grid(dataset.nx, dataset.ny, dataset.nz, dataset.dx, dataset.dy, dataset.dz);
  GridSpec g;
  g.dims = {dataset.nx, dataset.ny, dataset.nz};
  g.dx = dataset.dx;
  g.dy = dataset.dy;
  g.dz = dataset.dz;
  g.top_depth = dataset.top_depth;
  return g;
}

SimConfig RunConfig::sim_config() const {
  SimConfig s;
  s.horizon_days = flow.horizon_days;
  s.report_steps = flow.report_steps;
  s.corey_nw = flow.corey_nw;
  s.corey_no = flow.corey_no;
  s.pc_ref = flow.pc_ref;
  s.well_radius = flow.well_radius;
  s.cfl = flow.cfl;
  s.max_substeps_per_report = flow.max_substeps;
  return s;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.latent_dim = model.latent_dim;
  m.hidden1 = model.hidden1;
  m.hidden2 = model.hidden2;
  m.k = model.k;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = training.epochs;
  t.batch_size = training.batch_size;
  t.learning_rate = training.learning_rate;
  t.lambda_mmd = training.lambda_mmd;
  return t;
}

HmConfig RunConfig::hm_config() const {
  HmConfig h;
  h.popsize = hm.popsize;
  h.iterations = hm.iterations;
  h.restarts = hm.restarts;
  h.sigma0 = hm.sigma0;
  h.weights = {hm.w_flow, hm.w_static, hm.w_realism};
  h.realism_percentile = hm.realism_percentile;
  h.penalty = hm.penalty;
  h.threads = threads;
  h.seed = seed;
  return h;
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  check_keys(j, "", {"schema_version", "seed", "threads", "dataset", "model", "training", "flow",
                     "hm", "analysis"});
  get_if(j, "schema_version", c.schema_version);
  if (c.schema_version != 1)
    throw ConfigError("config: unsupported schema_version " + std::to_string(c.schema_version));
  get_if(j, "seed", c.seed);
  get_if(j, "threads", c.threads);
  if (j.contains("dataset")) {
    const json& s = j.at("dataset");
    check_keys(s, "dataset", {"count", "nx", "ny", "nz", "dx", "dy", "dz", "top_depth"});
    get_if(s, "count", c.dataset.count);
    get_if(s, "nx", c.dataset.nx);
    get_if(s, "ny", c.dataset.ny);
    get_if(s, "nz", c.dataset.nz);
    get_if(s, "dx", c.dataset.dx);
    get_if(s, "dy", c.dataset.dy);
    get_if(s, "dz", c.dataset.dz);
    get_if(s, "top_depth", c.dataset.top_depth);
  }
  if (j.contains("model")) {
    const json& s = j.at("model");
    check_keys(s, "model", {"latent_dim", "hidden1", "hidden2", "k"});
    get_if(s, "latent_dim", c.model.latent_dim);
    get_if(s, "hidden1", c.model.hidden1);
    get_if(s, "hidden2", c.model.hidden2);
    get_if(s, "k", c.model.k);
  }
  if (j.contains("training")) {
    const json& s = j.at("training");
    check_keys(s, "training", {"epochs", "batch_size", "learning_rate", "lambda_mmd"});
    get_if(s, "epochs", c.training.epochs);
    get_if(s, "batch_size", c.training.batch_size);
    get_if(s, "learning_rate", c.training.learning_rate);
    get_if(s, "lambda_mmd", c.training.lambda_mmd);
  }
  if (j.contains("flow")) {
    const json& s = j.at("flow");
    check_keys(s, "flow",
               {"horizon_days", "report_steps", "corey_nw", "corey_no", "pc_ref", "well_radius",
                "cfl", "max_substeps"});
    get_if(s, "horizon_days", c.flow.horizon_days);
    get_if(s, "report_steps", c.flow.report_steps);
    get_if(s, "corey_nw", c.flow.corey_nw);
    get_if(s, "corey_no", c.flow.corey_no);
    get_if(s, "pc_ref", c.flow.pc_ref);
    get_if(s, "well_radius", c.flow.well_radius);
    get_if(s, "cfl", c.flow.cfl);
    get_if(s, "max_substeps", c.flow.max_substeps);
  }
  if (j.contains("hm")) {
    const json& s = j.at("hm");
    check_keys(s, "hm",
               {"popsize", "iterations", "restarts", "sigma0", "w_flow", "w_static", "w_realism",
                "observed_wells", "realism_percentile", "penalty", "truth_index"});
    get_if(s, "popsize", c.hm.popsize);
    get_if(s, "iterations", c.hm.iterations);
    get_if(s, "restarts", c.hm.restarts);
    get_if(s, "sigma0", c.hm.sigma0);
    get_if(s, "w_flow", c.hm.w_flow);
    get_if(s, "w_static", c.hm.w_static);
    get_if(s, "w_realism", c.hm.w_realism);
    get_if(s, "observed_wells", c.hm.observed_wells);
    get_if(s, "realism_percentile", c.hm.realism_percentile);
    get_if(s, "penalty", c.hm.penalty);
    get_if(s, "truth_index", c.hm.truth_index);
  }
  if (j.contains("analysis")) {
    const json& s = j.at("analysis");
    check_keys(s, "analysis",
               {"tsne_perplexity", "tsne_dims", "tsne_iters", "tsne_learning_rate",
                "persistence_subsample", "pca_components"});
    get_if(s, "tsne_perplexity", c.analysis.tsne_perplexity);
    get_if(s, "tsne_dims", c.analysis.tsne_dims);
    get_if(s, "tsne_iters", c.analysis.tsne_iters);
    get_if(s, "tsne_learning_rate", c.analysis.tsne_learning_rate);
    get_if(s, "persistence_subsample", c.analysis.persistence_subsample);
    get_if(s, "pca_components", c.analysis.pca_components);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  RunConfig c = parse_config(ss.str());
  if (const char* env = std::getenv("GWAE_SEED")) c.seed = std::strtoull(env, nullptr, 10);
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["dataset"] = {{"count", c.dataset.count}, {"nx", c.dataset.nx},       {"ny", c.dataset.ny},
                  {"nz", c.dataset.nz},       {"dx", c.dataset.dx},       {"dy", c.dataset.dy},
                  {"dz", c.dataset.dz},       {"top_depth", c.dataset.top_depth}};
  j["model"] = {{"latent_dim", c.model.latent_dim},
                {"hidden1", c.model.hidden1},
                {"hidden2", c.model.hidden2},
                {"k", c.model.k}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"learning_rate", c.training.learning_rate},
                   {"lambda_mmd", c.training.lambda_mmd}};
  j["flow"] = {{"horizon_days", c.flow.horizon_days},
               {"report_steps", c.flow.report_steps},
               {"corey_nw", c.flow.corey_nw},
               {"corey_no", c.flow.corey_no},
               {"pc_ref", c.flow.pc_ref},
               {"well_radius", c.flow.well_radius},
               {"cfl", c.flow.cfl},
               {"max_substeps", c.flow.max_substeps}};
  j["hm"] = {{"popsize", c.hm.popsize},
             {"iterations", c.hm.iterations},
             {"restarts", c.hm.restarts},
             {"sigma0", c.hm.sigma0},
             {"w_flow", c.hm.w_flow},
             {"w_static", c.hm.w_static},
             {"w_realism", c.hm.w_realism},
             {"observed_wells", c.hm.observed_wells},
             {"realism_percentile", c.hm.realism_percentile},
             {"penalty", c.hm.penalty},
             {"truth_index", c.hm.truth_index}};
  j["analysis"] = {{"tsne_perplexity", c.analysis.tsne_perplexity},
                   {"tsne_dims", c.analysis.tsne_dims},
                   {"tsne_iters", c.analysis.tsne_iters},
                   {"tsne_learning_rate", c.analysis.tsne_learning_rate},
                   {"persistence_subsample", c.analysis.persistence_subsample},
                   {"pca_components", c.analysis.pca_components}};
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(cfg))));
  return buf;
}

std::size_t dataset_file_size(std::size_t count, std::size_t ncells) {
  return 56 + count * (57 + 8 * ncells);
}

void write_dataset(const std::string& path, const std::vector<Realisation>& ensemble,
                   const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  const GridSpec& g = manifest.grid;
  os.write("GWDS", 4);
  put_u32(os, kDatasetVersion);
  put_u32(os, static_cast<std::uint32_t>(ensemble.size()));
  put_u32(os, static_cast<std::uint32_t>(g.dims.nx));
  put_u32(os, static_cast<std::uint32_t>(g.dims.ny));
  put_u32(os, static_cast<std::uint32_t>(g.dims.nz));
  put_f64(os, g.dx);
  put_f64(os, g.dy);
  put_f64(os, g.dz);
  put_f64(os, g.top_depth);
  for (const auto& r : ensemble) {
    if (!(r.grid == g)) throw ConfigError("write_dataset: realisation grid mismatch");
    put_u8(os, static_cast<std::uint8_t>(r.scenario));
    put_u64(os, r.seed);
    put_f64(os, static_cast<double>(r.params.n_channels));
    put_f64(os, r.params.width_m);
    put_f64(os, r.params.thickness_m);
    put_f64(os, r.params.wavelength_m);
    put_f64(os, r.params.amplitude_m);
    put_f64(os, r.params.orientation_deg);
    for (double v : r.porosity) put_f32(os, static_cast<float>(v));
    for (double v : r.permeability) put_f32(os, static_cast<float>(v));
  }
  if (!os) throw IoError("write failed: " + path);
  os.close();

  json mj;
  mj["schema"] = manifest.schema;
  mj["count_single"] = manifest.count_single;
  mj["count_double"] = manifest.count_double;
  mj["grid"] = grid_to_json(g);
  mj["stats"] = stats_to_json(manifest.stats);
  mj["seed"] = manifest.seed;
  mj["config_hash"] = manifest.config_hash;
  std::ofstream ms(path + ".manifest.json", std::ios::trunc);
  if (!ms) throw IoError("cannot open for writing: " + path + ".manifest.json");
  ms << mj.dump(2) << "\n";
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  get_bytes(is, magic, 4, "magic");
  if (std::string(magic, 4) != "GWDS") throw IoError("not a dataset file (bad magic): " + path);
  const std::uint32_t version = get_u32(is, "version");
  if (version != kDatasetVersion)
    throw IoError("unsupported dataset version " + std::to_string(version) + " (expected " +
                  std::to_string(kDatasetVersion) + "): " + path);
  const std::uint32_t count = get_u32(is, "count");
  GridSpec g;
  g.dims.nx = static_cast<int>(get_u32(is, "nx"));
  g.dims.ny = static_cast<int>(get_u32(is, "ny"));
  g.dims.nz = static_cast<int>(get_u32(is, "nz"));
  g.dx = get_f64(is, "dx");
  g.dy = get_f64(is, "dy");
  g.dz = get_f64(is, "dz");
  g.top_depth = get_f64(is, "top_depth");
  const std::size_t ncells = g.cell_count();

  Dataset ds;
  ds.realisations.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Realisation& r = ds.realisations[i];
    r.grid = g;
    r.scenario = static_cast<Scenario>(get_u8(is, "scenario"));
    r.seed = get_u64(is, "seed");
    r.params.n_channels = static_cast<int>(get_f64(is, "params"));
    r.params.width_m = get_f64(is, "params");
    r.params.thickness_m = get_f64(is, "params");
    r.params.wavelength_m = get_f64(is, "params");
    r.params.amplitude_m = get_f64(is, "params");
    r.params.orientation_deg = get_f64(is, "params");
    r.porosity.resize(ncells);
    r.permeability.resize(ncells);
    for (std::size_t c = 0; c < ncells; ++c) r.porosity[c] = get_f32(is, "porosity");
    for (std::size_t c = 0; c < ncells; ++c) r.permeability[c] = get_f32(is, "permeability");
  }

  std::ifstream ms(path + ".manifest.json");
  if (!ms) throw IoError("missing dataset manifest: " + path + ".manifest.json");
  json mj;
  try {
    ms >> mj;
  } catch (const json::exception& e) {
    throw IoError(std::string("bad dataset manifest JSON: ") + e.what());
  }
  ds.manifest.schema = mj.at("schema").get<std::uint32_t>();
  ds.manifest.count_single = mj.at("count_single").get<std::size_t>();
  ds.manifest.count_double = mj.at("count_double").get<std::size_t>();
  ds.manifest.grid = grid_from_json(mj.at("grid"));
  ds.manifest.stats = stats_from_json(mj.at("stats"));
  ds.manifest.seed = mj.at("seed").get<std::uint64_t>();
  ds.manifest.config_hash = mj.at("config_hash").get<std::string>();
  if (ds.manifest.total() != count)
    throw IoError("dataset manifest count does not match file contents");
  return ds;
}

DatasetManifest generate_dataset(const RunConfig& cfg, const std::string& path) {
  const GridSpec grid = cfg.grid();
  const auto ensemble = generate_ensemble(cfg.dataset.count, grid, cfg.seed, cfg.threads);
  DatasetManifest manifest;
  manifest.grid = grid;
  manifest.stats = compute_norm_stats(ensemble);
  manifest.seed = cfg.seed;
  manifest.config_hash = config_hash(cfg);
  for (const auto& r : ensemble)
    (r.scenario == Scenario::Single ? manifest.count_single : manifest.count_double) += 1;
  write_dataset(path, ensemble, manifest);
  return manifest;
}

void write_checkpoint(const std::string& path, const GwaeCheckpoint& ckpt) {
  json h;
  h["arch"] = {{"latent_dim", ckpt.arch.latent_dim}, {"hidden1", ckpt.arch.hidden1},
               {"hidden2", ckpt.arch.hidden2},       {"k", ckpt.arch.k},
               {"logsig_min", ckpt.arch.logsig_min}, {"logsig_max", ckpt.arch.logsig_max}};
  h["grid"] = grid_to_json(ckpt.grid);
  h["stats"] = stats_to_json(ckpt.stats);
  json hist = json::array();
  for (const auto& [recon, reg] : ckpt.loss_history) hist.push_back(json::array({recon, reg}));
  h["loss_history"] = hist;
  h["train_config"] = ckpt.train_config_echo;
  const std::string header = h.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write("GWAE", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(header.size()));
  put_bytes(os, header.data(), header.size());
  for (const Tensor* t : ckpt.weight_list()) {
    put_u32(os, static_cast<std::uint32_t>(t->nrows));
    put_u32(os, static_cast<std::uint32_t>(t->ncols));
    put_bytes(os, t->data.data(), t->data.size() * sizeof(double));
  }
  if (!os) throw IoError("write failed: " + path);
}

GwaeCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  get_bytes(is, magic, 4, "magic");
  if (std::string(magic, 4) != "GWAE") throw IoError("not a checkpoint file (bad magic): " + path);
  const std::uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + "): " + path);
  const std::uint32_t hlen = get_u32(is, "header length");
  std::string header(hlen, '\0');
  get_bytes(is, header.data(), hlen, "header");
  json h;
  try {
    h = json::parse(header);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad checkpoint header JSON: ") + e.what());
  }

  GwaeCheckpoint ckpt;
  ckpt.version = version;
  const json& a = h.at("arch");
  ckpt.arch.latent_dim = a.at("latent_dim").get<int>();
  ckpt.arch.hidden1 = a.at("hidden1").get<int>();
  ckpt.arch.hidden2 = a.at("hidden2").get<int>();
  ckpt.arch.k = a.at("k").get<int>();
  ckpt.arch.logsig_min = a.at("logsig_min").get<double>();
  ckpt.arch.logsig_max = a.at("logsig_max").get<double>();
  ckpt.grid = grid_from_json(h.at("grid"));
  ckpt.stats = stats_from_json(h.at("stats"));
  for (const auto& e : h.at("loss_history"))
    ckpt.loss_history.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  ckpt.train_config_echo = h.at("train_config").get<std::string>();

  for (Tensor* t : ckpt.weight_list()) {
    const std::uint32_t rows = get_u32(is, "weight rows");
    const std::uint32_t cols = get_u32(is, "weight cols");
    *t = Tensor(rows, cols);
    get_bytes(is, t->data.data(), t->data.size() * sizeof(double), "weight data");
  }
  return ckpt;
}

void write_rates_csv(const std::string& path, const RateSeries& rates) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "step,day,well,oil_rate,water_rate,bhp\n";
  std::vector<std::size_t> order(rates.n_wells());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return rates.wells[a] < rates.wells[b]; });
  for (int s = 0; s < rates.n_steps; ++s)
    for (std::size_t w : order)
      os << s << "," << fmt(rates.day[s]) << "," << rates.wells[w] << ","
         << fmt(rates.at(rates.oil_rate, s, w)) << "," << fmt(rates.at(rates.water_rate, s, w))
         << "," << fmt(rates.at(rates.bhp, s, w)) << "\n";
}

void write_path_csv(const std::string& path, const InterpolationResult& interp) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  const std::size_t m = interp.stations.empty() ? 0 : interp.stations[0].size();
  os << "station";
  for (std::size_t d = 0; d < m; ++d) os << ",z" << d;
  os << ",log_volume\n";
  for (std::size_t s = 0; s < interp.stations.size(); ++s) {
    os << s;
    for (double v : interp.stations[s]) os << "," << fmt(v);
    os << "," << fmt(interp.station_log_volume[s]) << "\n";
  }
}

void write_embedding_csv(const std::string& path, const Tensor& embedding,
                         const std::vector<Scenario>& labels) {
  if (labels.size() != embedding.nrows)
    throw ConfigError("write_embedding_csv: one label per row required");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "sample";
  for (std::size_t d = 0; d < embedding.ncols; ++d) os << ",c" << d;
  os << ",scenario\n";
  for (std::size_t i = 0; i < embedding.nrows; ++i) {
    os << i;
    for (std::size_t d = 0; d < embedding.ncols; ++d) os << "," << fmt(embedding.at(i, d));
    os << "," << scenario_name(labels[i]) << "\n";
  }
}

void write_diagram_csv(const std::string& path, const std::vector<PersistenceDiagram>& diagrams) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "dimension,birth,death\n";
  for (const auto& d : diagrams)
    for (const auto& [birth, death] : d.pairs) {
      os << d.dimension << "," << fmt(birth) << ",";
      if (std::isfinite(death))
        os << fmt(death);
      else
        os << "inf";
      os << "\n";
    }
}

void write_artifact_manifest(const std::string& outdir, const std::string& command,
                             const RunConfig& cfg, const std::vector<std::string>& outputs) {
  json j;
  j["command"] = command;
  j["schema"] = 1;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["outputs"] = outputs;
  std::ofstream os(std::filesystem::path(outdir) / "manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + outdir + "/manifest.json");
  os << j.dump(2) << "\n";
}

std::string breakdown_json(const ObjectiveBreakdown& b) {
  json j;
  j["loss_flow"] = b.loss_flow;
  j["loss_static"] = b.loss_static;
  j["loss_realism"] = b.loss_realism;
  j["total"] = b.total;
  j["failed"] = b.failed;
  j["z"] = b.z;
  return j.dump();
}

void write_hm_artifacts(const std::string& outdir, const HmResult& result,
                        const GwaeCheckpoint& ckpt, const ReferenceCase& reference,
                        const RunConfig& cfg, const FluidProps& fluids, const SimConfig& sim) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  std::vector<std::string> outputs;

  {
    std::ofstream os(fs::path(outdir) / "config.json", std::ios::trunc);
    os << config_to_json(cfg);
    outputs.push_back("config.json");
  }
  {
    std::ofstream os(fs::path(outdir) / "generations.jsonl", std::ios::trunc);
    for (std::size_t r = 0; r < result.restarts.size(); ++r) {
      const auto& rr = result.restarts[r];
      for (const auto& gen : rr.generations) {
        json j;
        j["restart"] = r;
        j["seed"] = rr.seed;
        j["generation"] = gen.generation;
        j["best"] = json::parse(breakdown_json(gen.best));
        j["median"] = json::parse(breakdown_json(gen.median));
        j["best_total_so_far"] = gen.best_total_so_far;
        os << j.dump() << "\n";
      }
    }
    outputs.push_back("generations.jsonl");
  }

  for (std::size_t r = 0; r < result.restarts.size(); ++r) {
    const auto& rr = result.restarts[r];
    const std::string tag = "r" + std::to_string(r);

    const Realisation best = decode_realisation(ckpt, rr.best.z);
    DatasetManifest m;
    m.grid = ckpt.grid;
    m.stats = ckpt.stats;
    m.count_single = 1;
    m.seed = rr.seed;
    m.config_hash = config_hash(cfg);
    const std::string best_path = (fs::path(outdir) / ("best_realisation_" + tag + ".gwds")).string();
    write_dataset(best_path, {best}, m);
    outputs.push_back("best_realisation_" + tag + ".gwds");

    const RateSeries best_rates = simulate(best, fluids, reference.wells, sim);
    {
      std::ofstream os(fs::path(outdir) / ("rates_final_" + tag + ".csv"), std::ios::trunc);
      os << "step,day,well,oil_sim,water_sim,oil_ref,water_ref\n";
      std::vector<std::size_t> order(best_rates.n_wells());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return best_rates.wells[a] < best_rates.wells[b];
      });
      for (int s = 0; s < best_rates.n_steps; ++s)
        for (std::size_t w : order)
          os << s << "," << fmt(best_rates.day[s]) << "," << best_rates.wells[w] << ","
             << fmt(best_rates.at(best_rates.oil_rate, s, w)) << ","
             << fmt(best_rates.at(best_rates.water_rate, s, w)) << ","
             << fmt(reference.rates.at(reference.rates.oil_rate, s, w)) << ","
             << fmt(reference.rates.at(reference.rates.water_rate, s, w)) << "\n";
      outputs.push_back("rates_final_" + tag + ".csv");
    }

    // initial-population fans, simulated once at reporting time
    {
      std::vector<RateSeries> fans(rr.initial_population.size());
      ckpt.warm_caches();
      parallel_for(rr.initial_population.size(), cfg.threads, [&](std::size_t i) {
        try {
          fans[i] = simulate(decode_realisation(ckpt, rr.initial_population[i]), fluids,
                             reference.wells, sim);
        } catch (const NumericError&) {
          fans[i] = RateSeries{};  // failed members are skipped in the fan
        }
      });
      std::ofstream os(fs::path(outdir) / ("rates_initial_" + tag + ".csv"), std::ios::trunc);
      os << "member,step,day,well,oil_rate,water_rate\n";
      for (std::size_t i = 0; i < fans.size(); ++i) {
        const RateSeries& f = fans[i];
        if (f.n_steps == 0) continue;
        std::vector<std::size_t> order(f.n_wells());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return f.wells[a] < f.wells[b]; });
        for (int s = 0; s < f.n_steps; ++s)
          for (std::size_t w : order)
            os << i << "," << s << "," << fmt(f.day[s]) << "," << f.wells[w] << ","
               << fmt(f.at(f.oil_rate, s, w)) << "," << fmt(f.at(f.water_rate, s, w)) << "\n";
      }
      outputs.push_back("rates_initial_" + tag + ".csv");
    }
  }

  {
    json j;
    j["realism_baseline"] = result.realism_baseline;
    j["ranking"] = result.ranking;
    json rs = json::array();
    for (const auto& rr : result.restarts) {
      json e;
      e["seed"] = rr.seed;
      e["evaluations"] = rr.evaluations;
      e["failures"] = rr.failures;
      e["best"] = json::parse(breakdown_json(rr.best));
      rs.push_back(e);
    }
    j["restarts"] = rs;
    std::ofstream os(fs::path(outdir) / "summary.json", std::ios::trunc);
    os << j.dump(2) << "\n";
    outputs.push_back("summary.json");
  }

  write_artifact_manifest(outdir, "history-match", cfg, outputs);
}

}  // namespace gwae

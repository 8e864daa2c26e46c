#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gwae/errors.hpp"
#include "gwae/io.hpp"

using namespace gwae;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gwae_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config: defaults parse and round trip through canonical JSON") {
  const RunConfig def;
  const std::string text = config_to_json(def);
  const RunConfig back = parse_config(text);
  CHECK(config_to_json(back) == text);
  CHECK(config_hash(back) == config_hash(def));
  CHECK(back.dataset.count == 400);
  CHECK(back.model.latent_dim == 8);
}

TEST_CASE("config: unknown keys rejected with the offending name") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"bogus": 1})"), doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"dataset": {"cont": 5}})"),
                       doctest::Contains("dataset.cont"), ConfigError);
}

TEST_CASE("config: wrong schema version rejected") {
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), ConfigError);
}

TEST_CASE("config: invalid JSON rejected") {
  CHECK_THROWS_AS(parse_config("{nope"), ConfigError);
}

TEST_CASE("config: environment variable overrides the seed") {
  TempDir dir;
  {
    std::ofstream f(dir.file("c.json"));
    f << R"({"seed": 5})";
  }
  setenv("GWAE_SEED", "909", 1);
  const RunConfig c = load_config(dir.file("c.json"));
  unsetenv("GWAE_SEED");
  CHECK(c.seed == 909);
  const RunConfig c2 = load_config(dir.file("c.json"));
  CHECK(c2.seed == 5);
}

TEST_CASE("dataset: write-read round trip is exact, byte length matches the layout") {
  TempDir dir;
  RunConfig cfg;
  cfg.dataset.count = 2;
  cfg.dataset.nx = 8;
  cfg.dataset.ny = 6;
  cfg.dataset.nz = 4;
  cfg.seed = 77;
  const std::string path = dir.file("two.gwds");
  const DatasetManifest manifest = generate_dataset(cfg, path);
  CHECK(manifest.count_single == 1);
  CHECK(manifest.count_double == 1);

  CHECK(fs::file_size(path) == dataset_file_size(2, 8 * 6 * 4));

  const Dataset ds = read_dataset(path);
  REQUIRE(ds.realisations.size() == 2);
  CHECK(ds.manifest.stats == manifest.stats);
  CHECK(ds.manifest.config_hash == manifest.config_hash);

  // regenerate: identical bytes (determinism contract)
  const std::string path2 = dir.file("two_again.gwds");
  generate_dataset(cfg, path2);
  CHECK(slurp(path) == slurp(path2));
  CHECK(slurp(path + ".manifest.json") == slurp(path2 + ".manifest.json"));

  // properties survive the float32 quantization round trip bitwise
  const auto again = generate_ensemble(2, cfg.grid(), cfg.seed, 1);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(ds.realisations[i].porosity == again[i].porosity);
    CHECK(ds.realisations[i].permeability == again[i].permeability);
    CHECK(ds.realisations[i].seed == again[i].seed);
  }
}

TEST_CASE("dataset: bad magic and version bumps rejected") {
  TempDir dir;
  RunConfig cfg;
  cfg.dataset.count = 2;
  cfg.dataset.nx = 8;
  cfg.dataset.ny = 6;
  cfg.dataset.nz = 4;
  const std::string path = dir.file("d.gwds");
  generate_dataset(cfg, path);

  std::string bytes = slurp(path);
  bytes[4] = 9;  // version byte
  {
    std::ofstream f(dir.file("bad_version.gwds"), std::ios::binary);
    f << bytes;
    fs::copy_file(path + ".manifest.json", dir.file("bad_version.gwds.manifest.json"));
  }
  CHECK_THROWS_WITH_AS(read_dataset(dir.file("bad_version.gwds")),
                       doctest::Contains("unsupported dataset version"), IoError);

  bytes = slurp(path);
  bytes[0] = 'X';
  {
    std::ofstream f(dir.file("bad_magic.gwds"), std::ios::binary);
    f << bytes;
  }
  CHECK_THROWS_WITH_AS(read_dataset(dir.file("bad_magic.gwds")), doctest::Contains("magic"),
                       IoError);

  // truncated
  {
    std::ofstream f(dir.file("trunc.gwds"), std::ios::binary);
    f << bytes.substr(0, 40);
  }
  CHECK_THROWS_AS(read_dataset(dir.file("trunc.gwds")), IoError);
}

TEST_CASE("checkpoint: save, load, decode bit-identically") {
  TempDir dir;
  ModelConfig arch;
  arch.latent_dim = 3;
  arch.hidden1 = 4;
  arch.hidden2 = 5;
  NormStats stats{0.1, 0.2, 1.5, 0.7};
  GwaeCheckpoint ckpt = init_checkpoint(arch, make_grid(3, 2, 2), stats, 99);
  ckpt.loss_history = {{1.5, 0.2}, {1.1, 0.15}};
  ckpt.train_config_echo = R"({"epochs": 2})";

  const std::string path = dir.file("m.gwae");
  write_checkpoint(path, ckpt);
  const GwaeCheckpoint back = read_checkpoint(path);
  CHECK(back.arch.latent_dim == 3);
  CHECK(back.stats == stats);
  CHECK(back.loss_history == ckpt.loss_history);
  CHECK(back.train_config_echo == ckpt.train_config_echo);

  const std::vector<double> z{0.5, -0.25, 0.125};
  const DecoderOutput a = decode(ckpt, z);
  const DecoderOutput b = decode(back, z);
  CHECK(a.mu.data == b.mu.data);
  CHECK(a.log_sigma.data == b.log_sigma.data);

  // a second save produces identical bytes
  const std::string path2 = dir.file("m2.gwae");
  write_checkpoint(path2, back);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("checkpoint: magic and version validated") {
  TempDir dir;
  ModelConfig arch;
  arch.latent_dim = 2;
  arch.hidden1 = 3;
  arch.hidden2 = 3;
  const GwaeCheckpoint ckpt = init_checkpoint(arch, make_grid(2, 2, 1), NormStats{}, 1);
  const std::string path = dir.file("c.gwae");
  write_checkpoint(path, ckpt);

  std::string bytes = slurp(path);
  bytes[0] = 'Z';
  {
    std::ofstream f(dir.file("bad.gwae"), std::ios::binary);
    f << bytes;
  }
  CHECK_THROWS_WITH_AS(read_checkpoint(dir.file("bad.gwae")), doctest::Contains("magic"), IoError);

  bytes = slurp(path);
  bytes[4] = 2;
  {
    std::ofstream f(dir.file("badv.gwae"), std::ios::binary);
    f << bytes;
  }
  CHECK_THROWS_WITH_AS(read_checkpoint(dir.file("badv.gwae")),
                       doctest::Contains("unsupported checkpoint version"), IoError);
}

TEST_CASE("rates csv: stable ordering, wells alphabetical within ascending steps") {
  TempDir dir;
  RateSeries r;
  r.wells = {"P2", "I1", "P1"};
  r.kinds = {WellKind::Producer, WellKind::Injector, WellKind::Producer};
  r.n_steps = 2;
  r.day = {50.0, 100.0};
  r.oil_rate = {1, 2, 3, 4, 5, 6};
  r.water_rate = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  r.bhp = {45, 330, 45, 45, 330, 45};
  const std::string path = dir.file("rates.csv");
  write_rates_csv(path, r);

  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "step,day,well,oil_rate,water_rate,bhp");
  std::vector<std::string> wells_seen;
  std::vector<int> steps_seen;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string step, day, well;
    std::getline(ss, step, ',');
    std::getline(ss, day, ',');
    std::getline(ss, well, ',');
    steps_seen.push_back(std::stoi(step));
    wells_seen.push_back(well);
  }
  REQUIRE(wells_seen.size() == 6);
  CHECK(wells_seen == std::vector<std::string>{"I1", "P1", "P2", "I1", "P1", "P2"});
  CHECK(steps_seen == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("artifact manifest: carries command, hash and seed") {
  TempDir dir;
  RunConfig cfg;
  cfg.seed = 1234;
  write_artifact_manifest(dir.path.string(), "gen-dataset", cfg, {"a.gwds"});
  const std::string text = slurp(dir.file("manifest.json"));
  CHECK(text.find("gen-dataset") != std::string::npos);
  CHECK(text.find(config_hash(cfg)) != std::string::npos);
  CHECK(text.find("1234") != std::string::npos);
}

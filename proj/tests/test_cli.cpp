#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "ember/io.hpp"
#include "ember/testbed.hpp"
#include "ember/variogram.hpp"

using namespace ember;
namespace fs = std::filesystem;

namespace {

const std::string kCli = EMBER_CLI_PATH;

struct RunResult {
  int exit_code = 0;
  std::string output;
};

RunResult run(const std::string& args) {
  const auto log = fs::temp_directory_path() / "ember_cli_log.txt";
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(log);
  std::ostringstream buf;
  buf << in.rdbuf();
  result.output = buf.str();
  return result;
}

fs::path setup_workspace() {
  const fs::path dir = fs::temp_directory_path() / "ember_cli_ws";
  fs::remove_all(dir);
  fs::create_directories(dir);

  TestbedSpec spec;
  spec.nx = 12;
  spec.ny = 12;
  spec.nz = 2;
  spec.wells = 10;
  const Testbed bed = generate_testbed(spec, 21);
  write_samples(bed.wells, (dir / "wells.csv").string());
  write_grid(bed.seismic, (dir / "seismic.grd").string());
  write_grid(bed.noise, (dir / "noise.grd").string());

  VariogramModel vario;
  vario.structures.push_back(
      {VariogramShape::spherical, 1.0, {60.0, 60.0, 4.0}, {0, 0, 0}});
  save_variogram_model(vario, (dir / "vario.txt").string());
  VariogramModel resid;
  resid.structures.push_back(
      {VariogramShape::spherical, 0.002, {30.0, 30.0, 4.0}, {0, 0, 0}});
  save_variogram_model(resid, (dir / "resid.txt").string());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    files[fs::relative(entry.path(), root).string()] = buf.str();
  }
  return files;
}

}  // namespace

TEST_CASE("missing required keys exit with code 2 and name the key") {
  const fs::path dir = setup_workspace();
  write_text(dir / "nokey.cfg", "[output]\ndir = out_nokey\n");
  const auto res = run("train --config " + (dir / "nokey.cfg").string());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("[data].samples") != std::string::npos);
}

TEST_CASE("malformed config lines exit with code 2") {
  const fs::path dir = setup_workspace();
  write_text(dir / "broken.cfg", "[data\nsamples = wells.csv\n");
  const auto res = run("train --config " + (dir / "broken.cfg").string());
  CHECK(res.exit_code == 2);

  write_text(dir / "keyless.cfg", "samples = wells.csv\n");
  CHECK(run("train --config " + (dir / "keyless.cfg").string()).exit_code == 2);

  CHECK(run("train --config " + (dir / "missing.cfg").string()).exit_code == 2);
  CHECK(run("definitely-not-a-subcommand").exit_code == 2);
}

TEST_CASE("missing data files exit with code 3") {
  const fs::path dir = setup_workspace();
  write_text(dir / "nofile.cfg",
             "[data]\nsamples = nope.csv\ngrids = seismic.grd noise.grd\n"
             "[output]\ndir = out_nofile\n");
  const auto res = run("train --config " + (dir / "nofile.cfg").string());
  CHECK(res.exit_code == 3);
  CHECK(res.output.find("nope.csv") != std::string::npos);
}

TEST_CASE("train, estimate, simulate pipeline reuses the serialized model") {
  const fs::path dir = setup_workspace();
  write_text(dir / "pipeline.cfg",
             "[data]\n"
             "samples = wells.csv\n"
             "grids = seismic.grd, noise.grd\n"
             "model = model.json\n"
             "[forest]\n"
             "trees = 30\n"
             "seed = 5\n"
             "[embedded.long]\n"
             "kind = ordinary\n"
             "variogram = vario.txt\n"
             "[sampling]\n"
             "variogram = vario.txt\n"
             "realizations = 3\n"
             "seed = 11\n"
             "gibbs_iterations = 10\n"
             "[output]\n"
             "dir = out_pipe\n"
             "prob_thresholds = 0.2\n");
  const std::string cfg = (dir / "pipeline.cfg").string();

  REQUIRE(run("train --config " + cfg).exit_code == 0);
  const fs::path model_path = dir / "out_pipe" / "model.json";
  REQUIRE(fs::exists(model_path));
  const auto model_time = fs::last_write_time(model_path);

  REQUIRE(run("estimate --config " + cfg).exit_code == 0);
  for (const std::string name : {"envelope_mean.grd", "p10.grd", "p50.grd", "p90.grd",
                                 "spread.grd", "prob_above_0.2.grd", "manifest.txt"}) {
    CHECK(fs::exists(dir / "out_pipe" / name));
  }

  REQUIRE(run("simulate --config " + cfg).exit_code == 0);
  for (const std::string name : {"real_0001.grd", "real_0002.grd", "real_0003.grd",
                                 "posterior_mean.grd"}) {
    CHECK(fs::exists(dir / "out_pipe" / name));
  }
  // the model file is consumed, not regenerated
  CHECK(fs::last_write_time(model_path) == model_time);

  // realizations honor the training data exactly at data cells
  const GridVolume real = load_grid((dir / "out_pipe" / "real_0001.grd").string());
  const SampleSet wells = load_samples((dir / "wells.csv").string());
  for (std::size_t i = 0; i < wells.size(); ++i) {
    const auto cell = real.locate(wells[i].loc);
    REQUIRE(cell.has_value());
    CHECK(real[*cell] == wells[i].value);
  }
}

TEST_CASE("estimate requires the model key") {
  const fs::path dir = setup_workspace();
  write_text(dir / "nomodel.cfg",
             "[data]\nsamples = wells.csv\ngrids = seismic.grd noise.grd\n"
             "[output]\ndir = out_nm\n");
  const auto res = run("estimate --config " + (dir / "nomodel.cfg").string());
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("[data].model") != std::string::npos);
}

TEST_CASE("variogram subcommand writes the csv and fitted model") {
  const fs::path dir = setup_workspace();
  write_text(dir / "vario.cfg",
             "[data]\nsamples = wells.csv\n"
             "[variogram]\n"
             "direction = 1 0 0\n"
             "angle_tol = 90\n"
             "lag_width = 10\n"
             "n_lags = 6\n"
             "fit_shape = spherical\n"
             "[output]\ndir = out_vario\n");
  REQUIRE(run("variogram --config " + (dir / "vario.cfg").string()).exit_code == 0);
  CHECK(fs::exists(dir / "out_vario" / "variogram.csv"));
  CHECK(fs::exists(dir / "out_vario" / "variogram_model.txt"));
  const VariogramModel fitted =
      load_variogram_model((dir / "out_vario" / "variogram_model.txt").string());
  CHECK(fitted.total_sill() > 0.0);
}

TEST_CASE("baseline subcommand simulates around the kriging trend") {
  const fs::path dir = setup_workspace();
  write_text(dir / "base.cfg",
             "[data]\nsamples = wells.csv\ngrids = seismic.grd\n"
             "[baseline]\n"
             "trend_kind = ordinary\n"
             "trend_variogram = vario.txt\n"
             "residual_variogram = resid.txt\n"
             "[sampling]\nrealizations = 2\nseed = 3\n"
             "[output]\ndir = out_base\n");
  REQUIRE(run("baseline --config " + (dir / "base.cfg").string()).exit_code == 0);
  const GridVolume real = load_grid((dir / "out_base" / "real_0001.grd").string());
  const SampleSet wells = load_samples((dir / "wells.csv").string());
  for (std::size_t i = 0; i < wells.size(); ++i) {
    CHECK(real[*real.locate(wells[i].loc)] == Catch::Approx(wells[i].value).margin(1e-9));
  }
}

TEST_CASE("bench reruns are byte identical regardless of thread count") {
  const fs::path dir = setup_workspace();
  write_text(dir / "bench.cfg",
             "[testbed]\n"
             "nx = 14\nny = 14\nnz = 2\n"
             "wells_few = 6\nwells_many = 12\n"
             "seed = 9\n"
             "[forest]\ntrees = 20\n"
             "[sampling]\nrealizations = 4\ngibbs_iterations = 10\n"
             "[output]\ndir = out_bench_a\nwrite_realizations = true\n");
  const std::string cfg = (dir / "bench.cfg").string();
  REQUIRE(run("bench --config " + cfg + " --threads 1").exit_code == 0);
  REQUIRE(run("bench --config " + cfg + " --threads 3 --out-dir out_bench_b").exit_code == 0);
  const auto a = read_tree(dir / "out_bench_a");
  const auto b = read_tree(dir / "out_bench_b");
  REQUIRE(!a.empty());
  REQUIRE(a.size() == b.size());
  for (const auto& [name, content] : a) {
    REQUIRE(b.count(name) == 1);
    CHECK(content == b.at(name));
  }
  CHECK(a.count("metrics.csv") == 1);
  CHECK(a.count("manifest.txt") == 1);

  // seed sensitivity: a different seed changes the table
  REQUIRE(run("bench --config " + cfg + " --seed 10 --out-dir out_bench_c").exit_code == 0);
  const auto c = read_tree(dir / "out_bench_c");
  CHECK(c.at("metrics.csv") != a.at("metrics.csv"));
}

// Command-line front door: variography, training, envelope estimation,
// conditional simulation, the Gaussian baseline, the synthetic benchmark
// and blind-well reporting, all driven by a sectioned config file.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ember/bench.hpp"
#include "ember/config.hpp"
#include "ember/envelope.hpp"
#include "ember/io.hpp"
#include "ember/metrics.hpp"
#include "ember/model_io.hpp"
#include "ember/sampler.hpp"
#include "ember/testbed.hpp"

namespace fs = std::filesystem;
using namespace ember;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;     // overrides [output].dir
  std::uint64_t seed = 0;  // overrides the subcommand's primary seed
  bool seed_set = false;
  unsigned threads = 0;
};

struct RunContext {
  Config cfg;
  fs::path config_dir;
  fs::path out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> manifest_extra;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  std::string resolve(const std::string& path) const {
    fs::path p(path);
    if (p.is_absolute()) return p.string();
    return (config_dir / p).string();
  }

  std::string out_path(const std::string& name) {
    outputs.push_back(name);
    return (out_dir / name).string();
  }
};

RunContext make_context(const CliOptions& opt, const std::string& subcommand,
                        const std::string& seed_key, std::uint64_t default_seed) {
  RunContext ctx;
  ctx.cfg = Config::parse_file(opt.config_path);
  ctx.config_dir = fs::absolute(fs::path(opt.config_path)).parent_path();
  const std::string dir =
      opt.out_dir.empty() ? ctx.cfg.get_string("output.dir", "out") : opt.out_dir;
  fs::path out(dir);
  if (!out.is_absolute()) out = ctx.config_dir / out;
  ctx.out_dir = out;
  fs::create_directories(ctx.out_dir);
  ctx.seed = opt.seed_set ? opt.seed : ctx.cfg.get_seed(seed_key, default_seed);
  ctx.manifest_extra.push_back("subcommand " + subcommand);
  return ctx;
}

void write_manifest(RunContext& ctx, const CliOptions& opt) {
  // No timestamps and no thread counts: reruns must be byte-identical.
  std::ofstream out((ctx.out_dir / "manifest.txt").string());
  if (!out) throw DataError("cannot write manifest in '" + ctx.out_dir.string() + "'");
  out << "tool ember " << kVersion << "\n";
  for (const auto& line : ctx.manifest_extra) out << line << "\n";
  out << "config " << fs::path(opt.config_path).filename().string() << "\n";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(ctx.cfg.raw())));
  out << "config_fnv1a " << buf << "\n";
  out << "seed " << ctx.seed << "\n";
  for (const auto& p : ctx.inputs) out << "input " << p << "\n";
  for (const auto& p : ctx.outputs) out << "output " << p << "\n";
}

SampleSet load_config_samples(RunContext& ctx) {
  const std::string rel = ctx.cfg.get_string("data.samples");
  ctx.inputs.push_back(rel);
  return load_samples(ctx.resolve(rel));
}

std::vector<GridVolume> load_config_grids(RunContext& ctx) {
  std::vector<GridVolume> grids;
  for (const auto& rel : ctx.cfg.get_list("data.grids")) {
    ctx.inputs.push_back(rel);
    grids.push_back(load_grid(ctx.resolve(rel)));
  }
  if (grids.empty()) throw ConfigError("config key [data].grids lists no grid files");
  return grids;
}

KrigingSpec kriging_spec_from_section(RunContext& ctx, const std::string& section) {
  KrigingSpec spec;
  spec.kind = kriging_kind_from_string(ctx.cfg.get_string(section + ".kind", "ordinary"));
  if (ctx.cfg.has(section + ".mean")) spec.mean = ctx.cfg.get_double(section + ".mean");
  const std::string rel = ctx.cfg.get_string(section + ".variogram");
  ctx.inputs.push_back(rel);
  spec.variogram = load_variogram_model(ctx.resolve(rel));
  spec.search.max_neighbors = ctx.cfg.get_size(section + ".max_neighbors", 32);
  spec.search.max_radius =
      ctx.cfg.get_double(section + ".max_radius", std::numeric_limits<double>::infinity());
  spec.validate();
  return spec;
}

ForestParams forest_params_from_config(RunContext& ctx, std::uint64_t seed) {
  ForestParams params;
  params.n_trees = ctx.cfg.get_size("forest.trees", 100);
  params.mtry = ctx.cfg.get_size("forest.mtry", 0);
  params.min_node_size = ctx.cfg.get_size("forest.min_node_size", 1);
  params.subsample_fraction = ctx.cfg.get_double("forest.subsample", 0.632);
  params.bootstrap = ctx.cfg.get_bool("forest.bootstrap", false);
  params.seed = seed;
  for (const auto& section : ctx.cfg.sections_with_prefix("embedded.")) {
    params.embedded.push_back(kriging_spec_from_section(ctx, section));
    ctx.manifest_extra.push_back("embedded " + section);
  }
  params.validate();
  return params;
}

FieldGenerator generator_from_config(const RunContext& ctx) {
  const std::string g = ctx.cfg.get_string("sampling.generator", "auto");
  if (g == "auto") return FieldGenerator::automatic;
  if (g == "dense") return FieldGenerator::dense;
  if (g == "sgs") return FieldGenerator::sgs;
  throw ConfigError("config key [sampling].generator must be auto, dense or sgs, got '" + g +
                    "'");
}

SamplingSpec sampling_spec_from_config(RunContext& ctx, std::uint64_t seed) {
  SamplingSpec spec;
  const std::string rel = ctx.cfg.get_string("sampling.variogram");
  ctx.inputs.push_back(rel);
  spec.correlation = load_variogram_model(ctx.resolve(rel)).normalized();
  spec.n_realizations = ctx.cfg.get_size("sampling.realizations", 10);
  spec.seed = seed;
  spec.gibbs_iterations = ctx.cfg.get_size("sampling.gibbs_iterations", 100);
  spec.generator = generator_from_config(ctx);
  spec.sgs_neighbors = ctx.cfg.get_size("sampling.sgs_neighbors", 24);
  spec.dense_cell_cap = ctx.cfg.get_size("sampling.dense_cell_cap", 20000);
  spec.validate();
  return spec;
}

Envelope envelope_from_model_file(RunContext& ctx, EmberModel& model,
                                  std::vector<GridVolume>& grids) {
  // Relative model paths live under the output directory, where `train`
  // writes them; the pipeline stays self-contained under --out-dir.
  const std::string rel = ctx.cfg.get_string("data.model");
  ctx.inputs.push_back(rel);
  fs::path model_path(rel);
  if (!model_path.is_absolute()) model_path = ctx.out_dir / model_path;
  model = load_model(model_path.string());
  grids = load_config_grids(ctx);
  EnvelopeOptions options;
  options.quantile_table = ctx.cfg.get_bool("output.quantile_table", false);
  options.table_points = ctx.cfg.get_size("output.table_points", 101);
  return build_envelope(model, model.training_samples(), grids, options);
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

int run_variogram(RunContext& ctx, const CliOptions& opt) {
  const SampleSet samples = load_config_samples(ctx);
  std::array<double, 3> dir{1, 0, 0};
  if (ctx.cfg.has("variogram.direction")) {
    const auto v = ctx.cfg.get_double_list("variogram.direction");
    if (v.size() != 3) throw ConfigError("config key [variogram].direction needs 3 numbers");
    dir = {v[0], v[1], v[2]};
  }
  const double angle_tol = ctx.cfg.get_double("variogram.angle_tol", 90.0);
  const double lag_width = ctx.cfg.get_double("variogram.lag_width");
  const std::size_t n_lags = ctx.cfg.get_size("variogram.n_lags", 10);

  const auto exp = empirical_variogram(samples, dir, angle_tol, lag_width, n_lags);
  for (const auto& w : exp.warnings) std::cerr << "warning: " << w << "\n";
  write_experimental_csv(exp, ctx.out_path("variogram.csv"));

  if (ctx.cfg.has("variogram.fit_shape")) {
    const auto shape = variogram_shape_from_string(ctx.cfg.get_string("variogram.fit_shape"));
    VariogramModel init;
    if (ctx.cfg.has("variogram.fit_init")) {
      init = load_variogram_model(ctx.resolve(ctx.cfg.get_string("variogram.fit_init")));
    } else {
      double mean = 0.0, var = 0.0;
      for (const auto& s : samples.records()) mean += s.value;
      mean /= static_cast<double>(samples.size());
      for (const auto& s : samples.records()) var += (s.value - mean) * (s.value - mean);
      var /= static_cast<double>(samples.size());
      const double range = lag_width * static_cast<double>(n_lags) / 3.0;
      init.structures.push_back({shape, std::max(var, 1e-6), {range, range, range}, {0, 0, 0}});
    }
    const auto fit = fit_variogram({exp}, shape, init);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
    save_variogram_model(fit.model, ctx.out_path("variogram_model.txt"));
    char line[64];
    std::snprintf(line, sizeof(line), "fit_objective %.10g", fit.objective);
    ctx.manifest_extra.push_back(line);
  }
  write_manifest(ctx, opt);
  return 0;
}

int run_train(RunContext& ctx, const CliOptions& opt) {
  const SampleSet samples = load_config_samples(ctx);
  const auto grids = load_config_grids(ctx);
  const bool coords = ctx.cfg.get_bool("data.include_coords", true);
  const FeatureMatrix features = assemble_features(samples.locations(), grids, coords);
  const ForestParams params = forest_params_from_config(ctx, ctx.seed);
  const EmberModel model = train(samples, features, params);
  const std::string model_name = ctx.cfg.get_string("data.model", "model.json");
  fs::path model_path(model_name);
  if (!model_path.is_absolute()) model_path = ctx.out_dir / model_path;
  save_model(model, model_path.string());
  ctx.outputs.push_back(model_name);
  ctx.manifest_extra.push_back("model_id " + model.id());
  write_manifest(ctx, opt);
  return 0;
}

int run_estimate(RunContext& ctx, const CliOptions& opt) {
  EmberModel model;
  std::vector<GridVolume> grids;
  const Envelope env = envelope_from_model_file(ctx, model, grids);
  write_grid(product(env, Product::mean(), "envelope_mean"), ctx.out_path("envelope_mean.grd"));
  write_grid(product(env, Product::quantile(0.1), "p10"), ctx.out_path("p10.grd"));
  write_grid(product(env, Product::quantile(0.5), "p50"), ctx.out_path("p50.grd"));
  write_grid(product(env, Product::quantile(0.9), "p90"), ctx.out_path("p90.grd"));
  write_grid(product(env, Product::spread(0.1, 0.9), "spread"), ctx.out_path("spread.grd"));
  if (ctx.cfg.has("output.prob_thresholds")) {
    for (const double t : ctx.cfg.get_double_list("output.prob_thresholds")) {
      char name[64];
      std::snprintf(name, sizeof(name), "prob_above_%g.grd", t);
      write_grid(product(env, Product::prob_above(t), "prob_above"), ctx.out_path(name));
    }
  }
  if (ctx.cfg.get_bool("output.envelope_dump", false)) {
    write_envelope_csv(env, ctx.out_path("envelope.csv"));
  }
  write_manifest(ctx, opt);
  return 0;
}

int run_simulate(RunContext& ctx, const CliOptions& opt) {
  EmberModel model;
  std::vector<GridVolume> grids;
  const Envelope env = envelope_from_model_file(ctx, model, grids);
  const SamplingSpec spec = sampling_spec_from_config(ctx, ctx.seed);
  const SimulationResult result = simulate(model, env, model.training_samples(), spec);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  char name[64];
  for (std::size_t r = 0; r < result.realizations.size(); ++r) {
    std::snprintf(name, sizeof(name), "real_%04zu.grd", r + 1);
    write_grid(result.realizations[r], ctx.out_path(name));
  }
  write_grid(posterior_mean(result.realizations), ctx.out_path("posterior_mean.grd"));
  for (std::size_t r = 0; r < result.seeds.size(); ++r) {
    char line[64];
    std::snprintf(line, sizeof(line), "realization_seed %zu %llu", r + 1,
                  static_cast<unsigned long long>(result.seeds[r]));
    ctx.manifest_extra.push_back(line);
  }
  write_manifest(ctx, opt);
  return 0;
}

int run_baseline(RunContext& ctx, const CliOptions& opt) {
  const SampleSet samples = load_config_samples(ctx);
  const auto grids = load_config_grids(ctx);

  KrigingSpec trend;
  trend.kind = kriging_kind_from_string(ctx.cfg.get_string("baseline.trend_kind", "ordinary"));
  if (ctx.cfg.has("baseline.trend_mean")) {
    trend.mean = ctx.cfg.get_double("baseline.trend_mean");
  }
  trend.variogram =
      load_variogram_model(ctx.resolve(ctx.cfg.get_string("baseline.trend_variogram")));
  trend.search.max_neighbors = ctx.cfg.get_size("baseline.max_neighbors", 32);
  trend.search.max_radius =
      ctx.cfg.get_double("baseline.max_radius", std::numeric_limits<double>::infinity());
  trend.validate();
  const VariogramModel residual =
      load_variogram_model(ctx.resolve(ctx.cfg.get_string("baseline.residual_variogram")));

  const std::size_t n_real = ctx.cfg.get_size("sampling.realizations", 10);
  const auto reals = gaussian_baseline_simulate(samples, trend, residual, grids[0], n_real,
                                                ctx.seed, generator_from_config(ctx));
  char name[64];
  for (std::size_t r = 0; r < reals.size(); ++r) {
    std::snprintf(name, sizeof(name), "real_%04zu.grd", r + 1);
    write_grid(reals[r], ctx.out_path(name));
  }
  write_grid(posterior_mean(reals), ctx.out_path("posterior_mean.grd"));
  write_manifest(ctx, opt);
  return 0;
}

BenchConfig bench_config_from(const RunContext& ctx) {
  BenchConfig cfg;
  TestbedSpec& tb = cfg.testbed;
  tb.nx = ctx.cfg.get_size("testbed.nx", 32);
  tb.ny = ctx.cfg.get_size("testbed.ny", 32);
  tb.nz = ctx.cfg.get_size("testbed.nz", 4);
  tb.cell = {ctx.cfg.get_double("testbed.cell_x", 10.0),
             ctx.cfg.get_double("testbed.cell_y", 10.0),
             ctx.cfg.get_double("testbed.cell_z", 2.0)};
  tb.channel_belts = ctx.cfg.get_size("testbed.belts", 2);
  tb.channel_net_to_gross = ctx.cfg.get_double("testbed.net_to_gross", 0.30);
  tb.channel_poro_in = ctx.cfg.get_double("testbed.poro_in", 0.25);
  tb.channel_poro_out = ctx.cfg.get_double("testbed.poro_out", 0.08);
  tb.channel_noise = ctx.cfg.get_double("testbed.channel_noise", 0.015);
  tb.shoreface_base = ctx.cfg.get_double("testbed.shoreface_base", 0.10);
  tb.shoreface_amplitude = ctx.cfg.get_double("testbed.shoreface_amplitude", 0.08);
  tb.shoreface_noise = ctx.cfg.get_double("testbed.shoreface_noise", 0.01);
  tb.seismic_noise = ctx.cfg.get_double("testbed.seismic_noise", 0.5);
  tb.well_seed = ctx.cfg.get_seed("testbed.well_seed", 0);

  cfg.wells_few = ctx.cfg.get_size("testbed.wells_few", 8);
  cfg.wells_many = ctx.cfg.get_size("testbed.wells_many", 36);
  cfg.n_trees = ctx.cfg.get_size("forest.trees", 100);
  cfg.mtry = ctx.cfg.get_size("forest.mtry", 0);
  cfg.min_node_size = ctx.cfg.get_size("forest.min_node_size", 1);
  cfg.subsample_fraction = ctx.cfg.get_double("forest.subsample", 0.632);
  cfg.max_neighbors = ctx.cfg.get_size("testbed.max_neighbors", 32);
  cfg.n_realizations = ctx.cfg.get_size("sampling.realizations", 30);
  cfg.gibbs_iterations = ctx.cfg.get_size("sampling.gibbs_iterations", 50);
  cfg.short_range_factor = ctx.cfg.get_double("testbed.short_range_factor", 0.15);
  if (ctx.cfg.has("output.prob_thresholds")) {
    cfg.prob_thresholds = ctx.cfg.get_double_list("output.prob_thresholds");
  }
  if (ctx.cfg.has("testbed.blind_thresholds")) {
    cfg.blind_thresholds = ctx.cfg.get_double_list("testbed.blind_thresholds");
  }
  cfg.write_realizations = ctx.cfg.get_bool("output.write_realizations", true);
  cfg.seed = ctx.seed;
  return cfg;
}

int run_bench_cmd(RunContext& ctx, const CliOptions& opt) {
  const BenchConfig cfg = bench_config_from(ctx);
  const BenchResult result = run_bench(cfg, ctx.out_dir.string());
  ctx.outputs.push_back("metrics.csv");
  for (const auto& scenario : result.scenarios) {
    char line[96];
    std::snprintf(line, sizeof(line), "blind_coverage %s %.6f", scenario.label.c_str(),
                  scenario.blind_coverage);
    ctx.manifest_extra.push_back(line);
    ctx.outputs.push_back(scenario.label + "/");
  }
  write_manifest(ctx, opt);
  return 0;
}

int run_blindwell(RunContext& ctx, const CliOptions& opt) {
  EmberModel model;
  std::vector<GridVolume> grids;
  const Envelope env = envelope_from_model_file(ctx, model, grids);
  const std::string rel = ctx.cfg.get_string("blindwell.samples");
  ctx.inputs.push_back(rel);
  const SampleSet path = load_samples(ctx.resolve(rel));
  std::vector<double> thresholds{0.15};
  if (ctx.cfg.has("blindwell.thresholds")) {
    thresholds = ctx.cfg.get_double_list("blindwell.thresholds");
  }
  const BlindWellReport report = blind_well_report(env, path, thresholds);
  write_blind_well_csv(report, ctx.out_path("blindwell.csv"));
  write_blind_well_cdf_csv(env, report, ctx.out_path("blindwell_cdf.csv"));
  char line[64];
  std::snprintf(line, sizeof(line), "coverage %.10g", report.coverage);
  ctx.manifest_extra.push_back(line);
  write_manifest(ctx, opt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ember: embedded-model quantile forests for spatial estimation and simulation"};
  app.require_subcommand(1);

  CliOptions opt;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "config file")->required();
    sub->add_option("--out-dir", opt.out_dir, "output directory (overrides [output].dir)");
    sub->add_option("--seed", opt.seed, "seed override")
        ->each([&](const std::string&) { opt.seed_set = true; });
    sub->add_option("--threads", opt.threads, "worker thread count");
  };

  CLI::App* variogram = app.add_subcommand("variogram", "experimental variogram and model fit");
  CLI::App* train_cmd = app.add_subcommand("train", "train the embedded-model forest");
  CLI::App* estimate = app.add_subcommand("estimate", "build the envelope and product grids");
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "conditional stochastic simulation");
  CLI::App* baseline = app.add_subcommand("baseline", "classic Gaussian baseline simulation");
  CLI::App* bench = app.add_subcommand("bench", "synthetic benchmark with error tables");
  CLI::App* blindwell = app.add_subcommand("blindwell", "envelope report along a blind well");
  for (CLI::App* sub :
       {variogram, train_cmd, estimate, simulate_cmd, baseline, bench, blindwell}) {
    add_common(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (opt.threads > 0) set_thread_count(opt.threads);
    if (variogram->parsed()) {
      RunContext ctx = make_context(opt, "variogram", "variogram.seed", 0);
      return run_variogram(ctx, opt);
    }
    if (train_cmd->parsed()) {
      RunContext ctx = make_context(opt, "train", "forest.seed", 0);
      return run_train(ctx, opt);
    }
    if (estimate->parsed()) {
      RunContext ctx = make_context(opt, "estimate", "forest.seed", 0);
      return run_estimate(ctx, opt);
    }
    if (simulate_cmd->parsed()) {
      RunContext ctx = make_context(opt, "simulate", "sampling.seed", 0);
      return run_simulate(ctx, opt);
    }
    if (baseline->parsed()) {
      RunContext ctx = make_context(opt, "baseline", "sampling.seed", 0);
      return run_baseline(ctx, opt);
    }
    if (bench->parsed()) {
      RunContext ctx = make_context(opt, "bench", "testbed.seed", 7);
      return run_bench_cmd(ctx, opt);
    }
    if (blindwell->parsed()) {
      RunContext ctx = make_context(opt, "blindwell", "forest.seed", 0);
      return run_blindwell(ctx, opt);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

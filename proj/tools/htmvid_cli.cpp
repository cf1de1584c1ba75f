// htmvid command line: generate, run, noise-model, sweep.
//
// Every subcommand accepts --config <json>; explicit flags override values from
// the file. Failures print {"error": <code>, "message": <text>} on stderr.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "htmvid/dataset.hpp"
#include "htmvid/error.hpp"
#include "htmvid/pipeline.hpp"

namespace {

using namespace htmvid;
using nlohmann::json;

json load_json(const std::string& path) {
  const auto bytes = read_file(path);
  json j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
  require(!j.is_discarded() && j.is_object(), Errc::config_error, path + ": not a JSON object");
  return j;
}

int report_error(std::string_view code, const std::string& message, int exit_code) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << "\n";
  return exit_code;
}

template <typename T>
void apply(const CLI::Option* opt, const T& value, T& target) {
  if (opt->count() > 0) target = value;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out;
  std::string geometry;
  std::uint64_t seed = 0;
  std::uint16_t classes = 0;
  std::uint32_t videos = 0;
  std::uint32_t frames = 0;
  double train_fraction = 0.0;
  std::vector<double> sigmas;
  std::vector<double> targets;
  std::uint32_t block_size = 0;
  double threshold_c = 0.0;
  double object_scale = 0.0;
  bool static_camera = false;
  unsigned threads = 1;
};

void add_generate(CLI::App& app, GenerateArgs& a, std::vector<const CLI::Option*>& opts) {
  app.add_option("--config", a.config, "dataset config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", a.out, "output directory")->required();
  opts.push_back(app.add_option("--geometry", a.geometry, "frame geometry preset: R16, R8 or R4"));
  opts.push_back(app.add_option("--seed", a.seed, "global dataset seed"));
  opts.push_back(app.add_option("--classes", a.classes, "number of shape classes (2-6)"));
  opts.push_back(app.add_option("--videos-per-class", a.videos, "videos per class"));
  opts.push_back(app.add_option("--frames", a.frames, "frames per video"));
  opts.push_back(app.add_option("--train-fraction", a.train_fraction, "fraction of each class used for training"));
  opts.push_back(app.add_option("--sigma", a.sigmas, "noise sigma per level (repeatable)")->delimiter(','));
  opts.push_back(app.add_option("--target-flip", a.targets, "calibrated noise level as flipped-bit fraction")->delimiter(','));
  opts.push_back(app.add_option("--block-size", a.block_size, "calibration encoder block size"));
  opts.push_back(app.add_option("--threshold-c", a.threshold_c, "calibration encoder threshold constant"));
  opts.push_back(app.add_option("--object-scale", a.object_scale, "object radius relative to half the short side"));
  opts.push_back(app.add_flag("--static-camera", a.static_camera, "disable rotation, foreshortening and zoom"));
  app.add_option("--threads", a.threads, "worker threads (0 = all cores)");
}

int run_generate(const GenerateArgs& a, const std::vector<const CLI::Option*>& o) {
  DatasetConfig c;
  if (!a.config.empty()) update_from_json(c, load_json(a.config));
  if (o[0]->count() > 0) {
    const auto g = geometry_preset(a.geometry);
    c.width = g.width;
    c.height = g.height;
  }
  apply(o[1], a.seed, c.seed);
  apply(o[2], a.classes, c.classes);
  apply(o[3], a.videos, c.videos_per_class);
  apply(o[4], a.frames, c.frame_count);
  apply(o[5], a.train_fraction, c.train_fraction);
  if (o[6]->count() > 0 || o[7]->count() > 0) {
    c.noise.clear();
    for (double s : a.sigmas) c.noise.push_back({s, std::nullopt});
    for (double t : a.targets) c.noise.push_back({std::nullopt, t});
  }
  apply(o[8], a.block_size, c.calibration_encoder.block_size);
  apply(o[9], a.threshold_c, c.calibration_encoder.threshold_c);
  apply(o[10], a.object_scale, c.render.object_scale);
  if (a.static_camera) c.render.orbit = OrbitConfig::static_camera();
  validate(c);

  namespace fs = std::filesystem;
  const fs::path out(a.out);
  require(!fs::exists(out / "manifest.json"), Errc::config_error, a.out + ": already contains a dataset");
  const auto m = generate_dataset(c, out, a.threads);
  json summary{{"manifest", (out / "manifest.json").string()}, {"videos", m.entries.size()}};
  json levels = json::array();
  for (const auto& n : m.noise) {
    json l{{"sigma", n.sigma}};
    if (n.target_flip) l["target_flip"] = *n.target_flip;
    if (n.measured_flip) l["measured_flip"] = *n.measured_flip;
    levels.push_back(l);
  }
  summary["noise"] = levels;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ---- run / sweep shared flags -----------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::string manifest;
  std::string out;
  std::string mode;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::uint32_t epochs = 1;
  bool no_baseline = false;
  bool no_traces = false;
  bool overwrite = false;
  bool json_out = false;
  std::vector<int> levels;
  std::uint32_t columns = 0, synapses = 0, min_overlap = 0, winners = 0;
  double perm_inc = 0, perm_dec = 0, initial_perm = 0, connected_perm = 0, boost_strength = 0;
  std::uint32_t reduction = 0, block_size = 0;
  double threshold_c = 0, gaussian_sigma = 0;
  double svm_lambda = 0;
  std::uint32_t svm_epochs = 0;
  std::string svm_solver;

  // Options that override the config file only when given.
  const CLI::Option *o_manifest{}, *o_out{}, *o_mode{}, *o_seed{}, *o_threads{}, *o_epochs{}, *o_levels{};
  const CLI::Option *o_perm_inc{}, *o_perm_dec{}, *o_initial{}, *o_connected{}, *o_boost{};
  const CLI::Option *o_block{}, *o_c{}, *o_gsigma{}, *o_lambda{}, *o_svm_epochs{}, *o_solver{};
};

void add_experiment_flags(CLI::App& app, ExperimentArgs& a) {
  app.add_option("--config", a.config, "experiment config JSON")->check(CLI::ExistingFile);
  a.o_manifest = app.add_option("--manifest", a.manifest, "dataset manifest.json");
  a.o_out = app.add_option("--out", a.out, "output directory (created atomically)");
  a.o_mode = app.add_option("--mode", a.mode, "single, multiple or pass-through");
  a.o_seed = app.add_option("--seed", a.seed, "global experiment seed");
  a.o_threads = app.add_option("--threads", a.threads, "worker threads (0 = all cores); never changes results");
  a.o_epochs = app.add_option("--epochs", a.epochs, "max training passes; stops early once stable");
  a.o_levels = app.add_option("--noise-level", a.levels, "manifest noise level indices to evaluate")->delimiter(',');
  app.add_flag("--no-baseline", a.no_baseline, "skip the pass-through baseline and similarity ratios");
  app.add_flag("--no-traces", a.no_traces, "do not write CSV traces");
  app.add_flag("--overwrite", a.overwrite, "replace an existing output directory");
  app.add_flag("--json", a.json_out, "print JSON instead of a text table");
  a.o_perm_inc = app.add_option("--perm-increment", a.perm_inc);
  a.o_perm_dec = app.add_option("--perm-decrement", a.perm_dec);
  a.o_initial = app.add_option("--initial-perm", a.initial_perm);
  a.o_connected = app.add_option("--connected-perm", a.connected_perm);
  a.o_boost = app.add_option("--boost-strength", a.boost_strength, "duty-cycle boosting strength (0 = off)");
  a.o_block = app.add_option("--block-size", a.block_size, "encoder threshold window");
  a.o_c = app.add_option("--threshold-c", a.threshold_c, "encoder threshold constant");
  a.o_gsigma = app.add_option("--gaussian-sigma", a.gaussian_sigma, "encoder window sigma (0 = from block size)");
  a.o_lambda = app.add_option("--svm-lambda", a.svm_lambda);
  a.o_svm_epochs = app.add_option("--svm-epochs", a.svm_epochs);
  a.o_solver = app.add_option("--svm-solver", a.svm_solver, "dual_cd or pegasos");
}

ExperimentConfig experiment_from(const ExperimentArgs& a, const json* file) {
  ExperimentConfig c;
  if (file) update_from_json(c, *file);
  apply(a.o_manifest, a.manifest, c.manifest);
  apply(a.o_out, a.out, c.output_dir);
  if (a.o_mode->count() > 0) c.mode = parse_mode(a.mode);
  if (a.o_seed->count() > 0) c.seed = a.seed;
  apply(a.o_threads, a.threads, c.threads);
  apply(a.o_epochs, a.epochs, c.epochs);
  apply(a.o_levels, a.levels, c.noise_levels);
  if (a.no_baseline) c.baseline = false;
  if (a.no_traces) c.traces = false;
  if (a.overwrite) c.overwrite = true;
  apply(a.o_perm_inc, a.perm_inc, c.sp.perm_increment);
  apply(a.o_perm_dec, a.perm_dec, c.sp.perm_decrement);
  apply(a.o_initial, a.initial_perm, c.sp.initial_perm);
  apply(a.o_connected, a.connected_perm, c.sp.connected_perm);
  apply(a.o_boost, a.boost_strength, c.sp.boost_strength);
  apply(a.o_block, a.block_size, c.encoder.block_size);
  apply(a.o_c, a.threshold_c, c.encoder.threshold_c);
  apply(a.o_gsigma, a.gaussian_sigma, c.encoder.gaussian_sigma);
  apply(a.o_lambda, a.svm_lambda, c.svm.lambda);
  apply(a.o_svm_epochs, a.svm_epochs, c.svm.epochs);
  if (a.o_solver->count() > 0) c.svm.solver = parse_solver(a.svm_solver);
  return c;
}

// ---- run --------------------------------------------------------------------

struct RunArgs : ExperimentArgs {
  const CLI::Option *o_columns{}, *o_synapses{}, *o_min_overlap{}, *o_winners{}, *o_reduction{};
};

void add_run(CLI::App& app, RunArgs& a) {
  add_experiment_flags(app, a);
  a.o_columns = app.add_option("--columns", a.columns);
  a.o_synapses = app.add_option("--synapses", a.synapses, "synapses per column");
  a.o_min_overlap = app.add_option("--min-overlap", a.min_overlap);
  a.o_winners = app.add_option("--winners", a.winners, "winners set size k");
  a.o_reduction = app.add_option("--reduction", a.reduction, "encoder reduction ratio: 1, 4, 8 or 16");
}

int run_run(const RunArgs& a) {
  std::optional<json> file;
  if (!a.config.empty()) file = load_json(a.config);
  auto c = experiment_from(a, file ? &*file : nullptr);
  require(a.o_seed->count() > 0, Errc::config_error, "run: --seed is required");
  apply(a.o_columns, a.columns, c.sp.columns);
  apply(a.o_synapses, a.synapses, c.sp.synapses_per_column);
  apply(a.o_min_overlap, a.min_overlap, c.sp.min_overlap);
  apply(a.o_winners, a.winners, c.sp.winners_set_size);
  apply(a.o_reduction, a.reduction, c.encoder.reduction_ratio);
  const auto report = run_experiment(c);
  std::cout << (a.json_out ? to_json(report).dump(2) + "\n" : to_text(report));
  return 0;
}

// ---- sweep ------------------------------------------------------------------

struct SweepArgs : ExperimentArgs {
  std::vector<std::uint32_t> g_columns, g_synapses, g_min_overlap, g_winners, g_reduction;
  const CLI::Option *o_columns{}, *o_synapses{}, *o_min_overlap{}, *o_winners{}, *o_reduction{};
};

void add_sweep(CLI::App& app, SweepArgs& a) {
  add_experiment_flags(app, a);
  a.o_columns = app.add_option("--columns", a.g_columns, "column counts, comma separated")->delimiter(',');
  a.o_synapses = app.add_option("--synapses", a.g_synapses, "synapses per column values")->delimiter(',');
  a.o_min_overlap = app.add_option("--min-overlap", a.g_min_overlap, "min_overlap values")->delimiter(',');
  a.o_winners = app.add_option("--winners", a.g_winners, "winners set sizes")->delimiter(',');
  a.o_reduction = app.add_option("--reduction", a.g_reduction, "encoder reduction ratios")->delimiter(',');
}

std::vector<std::uint32_t> grid_axis(const json& grid, const char* key) {
  if (!grid.contains(key)) return {};
  return grid.at(key).get<std::vector<std::uint32_t>>();
}

int run_sweep_cmd(const SweepArgs& a) {
  SweepConfig s;
  std::optional<json> file;
  json grid = json::object();
  if (!a.config.empty()) {
    file = load_json(a.config);
    if (file->contains("grid")) {
      grid = file->at("grid");
      file->erase("grid");
      detail::reject_unknown(grid, {"columns", "synapses", "min_overlap", "winners", "reduction"}, "grid");
    }
  }
  s.base = experiment_from(a, file ? &*file : nullptr);
  try {
    s.columns = grid_axis(grid, "columns");
    s.synapses = grid_axis(grid, "synapses");
    s.min_overlap = grid_axis(grid, "min_overlap");
    s.winners = grid_axis(grid, "winners");
    s.reduction = grid_axis(grid, "reduction");
  } catch (const json::exception& ex) {
    fail(Errc::config_error, std::string("grid: ") + ex.what());
  }
  apply(a.o_columns, a.g_columns, s.columns);
  apply(a.o_synapses, a.g_synapses, s.synapses);
  apply(a.o_min_overlap, a.g_min_overlap, s.min_overlap);
  apply(a.o_winners, a.g_winners, s.winners);
  apply(a.o_reduction, a.g_reduction, s.reduction);
  const auto points = run_sweep(s);
  if (a.json_out) {
    std::cout << to_json(std::span<const SweepPoint>(points)).dump(2) << "\n";
  } else {
    std::printf("%8s %8s %11s %7s %9s %8s\n", "columns", "synapses", "min_overlap", "winners", "reduction", "mean_f1");
    for (const auto& p : points) {
      std::printf("%8u %8u %11u %7u %9u %8.4f\n", p.sp.columns, p.sp.synapses_per_column, p.sp.min_overlap,
                  p.sp.winners_set_size, p.reduction, p.mean_f1());
    }
  }
  return 0;
}

// ---- noise-model ------------------------------------------------------------

struct NoiseArgs {
  std::vector<std::uint32_t> n{1920}, n_b{192}, s{64}, c{2048}, o_m{8}, w{0}, w_b{0};
  std::vector<double> m{1.0};
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool json_out = false;
};

void add_noise(CLI::App& app, NoiseArgs& a) {
  app.add_option("--n", a.n, "input size")->delimiter(',')->capture_default_str();
  app.add_option("--n-b", a.n_b, "signal ones")->delimiter(',')->capture_default_str();
  app.add_option("--s", a.s, "synapses per column")->delimiter(',')->capture_default_str();
  app.add_option("--c", a.c, "columns")->delimiter(',')->capture_default_str();
  app.add_option("--m", a.m, "permanence reduction ratio")->delimiter(',')->capture_default_str();
  app.add_option("--o-m", a.o_m, "min overlap")->delimiter(',')->capture_default_str();
  app.add_option("--w", a.w, "noise bits")->delimiter(',')->capture_default_str();
  app.add_option("--w-b", a.w_b, "ones among the noise bits")->delimiter(',')->capture_default_str();
  app.add_option("--trials", a.trials, "Monte Carlo trials (0 = skip)")->capture_default_str();
  app.add_option("--seed", a.seed, "Monte Carlo seed")->capture_default_str();
  app.add_option("--threads", a.threads, "worker threads");
  app.add_flag("--json", a.json_out, "print JSON rows");
  app.footer("Every parameter accepts a comma separated list; the rows are the Cartesian product.");
}

int run_noise(const NoiseArgs& a) {
  std::vector<NoiseModelRow> rows;
  for (auto n : a.n)
    for (auto nb : a.n_b)
      for (auto s : a.s)
        for (auto c : a.c)
          for (auto m : a.m)
            for (auto om : a.o_m)
              for (auto w : a.w)
                for (auto wb : a.w_b) {
                  const PropagationParams p{n, nb, s, c, m, om, w, wb};
                  rows.push_back(analyse_noise_model(p, a.trials, a.seed, a.threads));
                }
  if (a.json_out) {
    json j = json::array();
    for (const auto& r : rows) j.push_back(to_json(r));
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << to_text(rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"htmvid: spatial pooler video classification experiments"};
  app.require_subcommand(1);
  GenerateArgs gen;
  std::vector<const CLI::Option*> gen_opts;
  RunArgs run;
  SweepArgs sweep;
  NoiseArgs noise;
  auto* gen_cmd = app.add_subcommand("generate", "render a synthetic shape-video dataset");
  add_generate(*gen_cmd, gen, gen_opts);
  auto* run_cmd = app.add_subcommand("run", "train and evaluate one experiment");
  add_run(*run_cmd, run);
  auto* noise_cmd = app.add_subcommand("noise-model", "closed-form propagation analysis with Monte Carlo check");
  add_noise(*noise_cmd, noise);
  auto* sweep_cmd = app.add_subcommand("sweep", "parameter grid over columns, synapses, min_overlap, winners, reduction");
  add_sweep(*sweep_cmd, sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 2);
  }

  try {
    if (gen_cmd->parsed()) return run_generate(gen, gen_opts);
    if (run_cmd->parsed()) return run_run(run);
    if (noise_cmd->parsed()) return run_noise(noise);
    if (sweep_cmd->parsed()) return run_sweep_cmd(sweep);
  } catch (const Error& e) {
    return report_error(to_string(e.code()), e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1);
  }
  return 0;
}

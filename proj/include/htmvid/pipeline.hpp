#pragma once

// Experiment orchestration: encode a dataset, train poolers (Single, Multiple or
// PassThrough), build per-video histograms, classify with the linear SVM and
// write reports and CSV traces.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "htmvid/dataset.hpp"
#include "htmvid/encoder.hpp"
#include "htmvid/error.hpp"
#include "htmvid/features.hpp"
#include "htmvid/metrics.hpp"
#include "htmvid/noise_model.hpp"
#include "htmvid/parallel.hpp"
#include "htmvid/params.hpp"
#include "htmvid/rng.hpp"
#include "htmvid/spatial_pooler.hpp"
#include "htmvid/svm.hpp"

namespace htmvid {

enum class Mode { single, multiple, pass_through };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::single:
      return "single";
    case Mode::multiple:
      return "multiple";
    case Mode::pass_through:
      return "pass-through";
  }
  return "?";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "single") return Mode::single;
  if (s == "multiple") return Mode::multiple;
  if (s == "pass-through" || s == "passthrough") return Mode::pass_through;
  fail(Errc::config_error, "unknown mode '" + std::string(s) + "' (expected single, multiple or pass-through)");
}

struct ExperimentConfig {
  Mode mode = Mode::multiple;
  std::string manifest;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  /// Training passes over the training set; above 1 training stops early once stable.
  std::uint32_t epochs = 1;
  /// Also evaluate the PassThrough baseline and similarity ratios.
  bool baseline = true;
  bool traces = true;
  bool overwrite = false;
  /// Manifest noise levels to evaluate; empty means all.
  std::vector<int> noise_levels;
  SpParams sp;  // input_size and rng_seed are derived at run time
  EncoderConfig encoder;
  SvmConfig svm;  // seed derived at run time
};

// ---- config JSON ------------------------------------------------------------

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      fail(Errc::config_error, std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace detail

inline nlohmann::json to_json(const SpParams& p) {
  return {{"columns", p.columns},
          {"synapses_per_column", p.synapses_per_column},
          {"input_size", p.input_size},
          {"min_overlap", p.min_overlap},
          {"winners_set_size", p.winners_set_size},
          {"perm_increment", p.perm_increment},
          {"perm_decrement", p.perm_decrement},
          {"initial_perm", p.initial_perm},
          {"connected_perm", p.connected_perm},
          {"boost", p.boost},
          {"initial_inhibition_radius", p.initial_inhibition_radius},
          {"rng_seed", p.rng_seed},
          {"boost_strength", p.boost_strength},
          {"duty_cycle_period", p.duty_cycle_period}};
}

inline void update_from_json(SpParams& p, const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"columns", "synapses_per_column", "input_size", "min_overlap", "winners_set_size",
                          "perm_increment", "perm_decrement", "initial_perm", "connected_perm", "boost",
                          "initial_inhibition_radius", "rng_seed", "boost_strength", "duty_cycle_period"},
                         "sp");
  detail::read_opt(j, "columns", p.columns);
  detail::read_opt(j, "synapses_per_column", p.synapses_per_column);
  detail::read_opt(j, "input_size", p.input_size);
  detail::read_opt(j, "min_overlap", p.min_overlap);
  detail::read_opt(j, "winners_set_size", p.winners_set_size);
  detail::read_opt(j, "perm_increment", p.perm_increment);
  detail::read_opt(j, "perm_decrement", p.perm_decrement);
  detail::read_opt(j, "initial_perm", p.initial_perm);
  detail::read_opt(j, "connected_perm", p.connected_perm);
  detail::read_opt(j, "boost", p.boost);
  detail::read_opt(j, "initial_inhibition_radius", p.initial_inhibition_radius);
  detail::read_opt(j, "rng_seed", p.rng_seed);
  detail::read_opt(j, "boost_strength", p.boost_strength);
  detail::read_opt(j, "duty_cycle_period", p.duty_cycle_period);
}

inline void update_from_json(EncoderConfig& e, const nlohmann::json& j) {
  detail::reject_unknown(j, {"reduction_ratio", "block_size", "threshold_c", "gaussian_sigma"}, "encoder");
  detail::read_opt(j, "reduction_ratio", e.reduction_ratio);
  detail::read_opt(j, "block_size", e.block_size);
  detail::read_opt(j, "threshold_c", e.threshold_c);
  detail::read_opt(j, "gaussian_sigma", e.gaussian_sigma);
}

inline nlohmann::json to_json(const SvmConfig& s) {
  return {{"lambda", s.lambda},
          {"solver", s.solver == SvmSolver::dual_cd ? "dual_cd" : "pegasos"},
          {"epochs", s.epochs},
          {"seed", s.seed},
          {"center", s.center},
          {"average", s.average}};
}

inline SvmSolver parse_solver(std::string_view s) {
  if (s == "dual_cd") return SvmSolver::dual_cd;
  if (s == "pegasos") return SvmSolver::pegasos;
  fail(Errc::config_error, "unknown svm solver '" + std::string(s) + "' (expected dual_cd or pegasos)");
}

inline void update_from_json(SvmConfig& s, const nlohmann::json& j) {
  detail::reject_unknown(j, {"lambda", "solver", "epochs", "seed", "center", "average"}, "svm");
  detail::read_opt(j, "lambda", s.lambda);
  if (j.contains("solver")) s.solver = parse_solver(j.at("solver").get<std::string>());
  detail::read_opt(j, "epochs", s.epochs);
  detail::read_opt(j, "seed", s.seed);
  detail::read_opt(j, "center", s.center);
  detail::read_opt(j, "average", s.average);
}

/// Everything that influences results; thread count and paths are left out so
/// reports compare equal across machines and parallelism.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["mode"] = std::string(to_string(c.mode));
  if (c.seed) j["seed"] = *c.seed;
  j["epochs"] = c.epochs;
  j["baseline"] = c.baseline;
  j["noise_levels"] = c.noise_levels;
  j["sp"] = to_json(c.sp);
  j["encoder"] = to_json(c.encoder);
  j["svm"] = to_json(c.svm);
  return j;
}

inline void update_from_json(ExperimentConfig& c, const nlohmann::json& j) {
  try {
    detail::reject_unknown(j,
                           {"mode", "manifest", "output_dir", "seed", "threads", "epochs", "baseline", "traces",
                            "overwrite", "noise_levels", "sp", "encoder", "svm"},
                           "config");
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    detail::read_opt(j, "manifest", c.manifest);
    detail::read_opt(j, "output_dir", c.output_dir);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    detail::read_opt(j, "threads", c.threads);
    detail::read_opt(j, "epochs", c.epochs);
    detail::read_opt(j, "baseline", c.baseline);
    detail::read_opt(j, "traces", c.traces);
    detail::read_opt(j, "overwrite", c.overwrite);
    detail::read_opt(j, "noise_levels", c.noise_levels);
    if (j.contains("sp")) update_from_json(c.sp, j.at("sp"));
    if (j.contains("encoder")) update_from_json(c.encoder, j.at("encoder"));
    if (j.contains("svm")) update_from_json(c.svm, j.at("svm"));
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::config_error, std::string("config: ") + ex.what());
  }
}

// ---- encoded dataset --------------------------------------------------------

struct EncodedVideo {
  std::size_t entry = 0;  // index into the manifest entries
  std::uint16_t class_id = 0;
  std::uint32_t video_index = 0;
  Split split = Split::train;
  int noise_level = -1;
  std::vector<SdrVector> frames;
};

struct EncodedDataset {
  DatasetManifest manifest;
  std::uint32_t width = 0;   // source geometry
  std::uint32_t height = 0;
  std::size_t input_size = 0;  // encoder output length
  std::vector<EncodedVideo> train;
  std::vector<EncodedVideo> test_clean;
  /// One entry per evaluated noise level, aligned with test_clean.
  std::vector<std::vector<EncodedVideo>> test_noisy;
  std::vector<int> levels;  // manifest noise indices of test_noisy
};

inline std::vector<SdrVector> encode_video(const Video& v, const EncoderConfig& enc) {
  std::vector<SdrVector> out;
  out.reserve(v.frames.size());
  for (const auto& f : v.frames) out.push_back(encode(f, enc));
  return out;
}

namespace detail {

inline std::vector<int> resolve_levels(const DatasetManifest& m, const std::vector<int>& requested) {
  std::vector<int> levels = requested;
  if (levels.empty()) {
    levels.resize(m.noise.size());
    std::iota(levels.begin(), levels.end(), 0);
  }
  for (int l : levels) {
    require(l >= 0 && l < static_cast<int>(m.noise.size()), Errc::config_error,
            "noise level " + std::to_string(l) + " not in manifest (" + std::to_string(m.noise.size()) + " levels)");
  }
  return levels;
}

}  // namespace detail

/// Checks the manifest's splits and returns its source geometry.
inline Geometry check_manifest(const DatasetManifest& m) {
  Geometry g;
  try {
    g.width = m.config.at("width").get<std::uint32_t>();
    g.height = m.config.at("height").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::config_error, std::string("manifest config: ") + ex.what());
  }
  std::size_t train = 0;
  std::size_t test = 0;
  for (const auto& e : m.entries) {
    if (e.split == Split::train) ++train;
    if (e.split == Split::test && e.noise_level < 0) ++test;
  }
  require(train > 0, Errc::config_error, "manifest has an empty training split");
  require(test > 0, Errc::config_error, "manifest has an empty test split");
  return g;
}

/// Reads and encodes every video the experiment needs. Manifest paths are relative to `root`.
inline EncodedDataset load_encoded(const DatasetManifest& m, const std::filesystem::path& root, const EncoderConfig& enc,
                                   const std::vector<int>& requested_levels, unsigned threads) {
  const auto geom = check_manifest(m);
  validate(enc, geom.width, geom.height);
  EncodedDataset d;
  d.manifest = m;
  d.width = geom.width;
  d.height = geom.height;
  d.input_size = static_cast<std::size_t>(geom.width / enc.reduction_ratio) * (geom.height / enc.reduction_ratio);
  d.levels = detail::resolve_levels(m, requested_levels);

  std::vector<std::size_t> wanted;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    if (e.noise_level < 0 || std::find(d.levels.begin(), d.levels.end(), e.noise_level) != d.levels.end()) {
      wanted.push_back(i);
    }
  }
  std::vector<EncodedVideo> loaded(wanted.size());
  parallel_for(wanted.size(), threads, [&](std::size_t k) {
    const auto& e = m.entries[wanted[k]];
    const Video v = read_video(root / e.path);
    require(v.width() == geom.width && v.height() == geom.height, Errc::length_mismatch,
            e.path + ": geometry differs from manifest");
    require(v.class_label == e.class_id, Errc::config_error, e.path + ": class label differs from manifest");
    loaded[k] = {wanted[k], e.class_id, e.video_index, e.split, e.noise_level, encode_video(v, enc)};
  });

  std::map<int, std::vector<EncodedVideo>> noisy;
  for (auto& ev : loaded) {
    if (ev.split == Split::train) {
      d.train.push_back(std::move(ev));
    } else if (ev.noise_level < 0) {
      d.test_clean.push_back(std::move(ev));
    } else {
      noisy[ev.noise_level].push_back(std::move(ev));
    }
  }
  auto key = [](const EncodedVideo& v) { return std::pair(v.class_id, v.video_index); };
  auto by_key = [&](const EncodedVideo& a, const EncodedVideo& b) { return key(a) < key(b); };
  std::sort(d.train.begin(), d.train.end(), by_key);
  std::sort(d.test_clean.begin(), d.test_clean.end(), by_key);
  for (int l : d.levels) {
    auto& set = noisy[l];
    std::sort(set.begin(), set.end(), by_key);
    require(set.size() == d.test_clean.size(), Errc::config_error,
            "noise level " + std::to_string(l) + " does not cover the clean test split");
    for (std::size_t i = 0; i < set.size(); ++i) {
      require(key(set[i]) == key(d.test_clean[i]), Errc::config_error,
              "noise level " + std::to_string(l) + " is not aligned with the clean test split");
    }
    d.test_noisy.push_back(std::move(set));
  }
  return d;
}

/// Same content as generate_dataset followed by load_encoded, without touching disk.
inline EncodedDataset build_encoded(const DatasetConfig& c, const EncoderConfig& enc, unsigned threads = 1) {
  validate(c);
  validate(enc, c.width, c.height);
  const auto train_n = c.train_per_class();
  const auto test_n = c.test_per_class();
  EncodedDataset d;
  d.manifest.seed = c.seed;
  d.manifest.noise_seed = dataset_noise_seed(c.seed);
  d.manifest.config = to_json(c);
  d.width = c.width;
  d.height = c.height;
  d.input_size = static_cast<std::size_t>(c.width / enc.reduction_ratio) * (c.height / enc.reduction_ratio);

  const auto clean_test = render_test_videos(c, threads);
  d.manifest.noise = resolve_noise(c, clean_test, threads);
  d.levels.resize(d.manifest.noise.size());
  std::iota(d.levels.begin(), d.levels.end(), 0);

  std::size_t entry = 0;
  for (std::uint16_t cls = 0; cls < c.classes; ++cls) {
    for (std::uint32_t i = 0; i < c.videos_per_class; ++i) {
      if (i < train_n) {
        d.train.push_back({entry++, cls, i, Split::train, -1, {}});
      } else {
        d.test_clean.push_back({entry++, cls, i, Split::test, -1, {}});
        entry += d.levels.size();
      }
    }
  }
  d.test_noisy.assign(d.levels.size(), {});
  for (std::size_t l = 0; l < d.levels.size(); ++l) {
    for (const auto& v : d.test_clean) d.test_noisy[l].push_back({v.entry + 1 + l, v.class_id, v.video_index, Split::test, static_cast<int>(l), {}});
  }
  parallel_for(d.train.size(), threads, [&](std::size_t i) {
    auto& ev = d.train[i];
    ev.frames = encode_video(generate_video(ev.class_id, c.frame_count, c.width, c.height,
                                            video_seed(c.seed, ev.class_id, ev.video_index), c.render),
                             enc);
  });
  parallel_for(d.test_clean.size(), threads, [&](std::size_t i) {
    const Video& clean = clean_test[i];
    d.test_clean[i].frames = encode_video(clean, enc);
    for (std::size_t l = 0; l < d.levels.size(); ++l) {
      d.test_noisy[l][i].frames = encode_video(add_gaussian_noise(clean, d.manifest.noise[l].sigma, d.manifest.noise_seed), enc);
    }
  });
  (void)test_n;
  return d;
}

// ---- traces -----------------------------------------------------------------

enum class Phase { learn, test };

struct TraceRow {
  Phase phase = Phase::learn;
  int pooler = 0;          // -1 when the pooler is bypassed
  std::size_t entry = 0;   // manifest entry
  std::uint32_t frame = 0;
  ProfileRecord record;
};

struct HistogramRow {
  std::size_t entry = 0;
  std::uint16_t class_id = 0;
  Split split = Split::train;
  int noise_level = -1;
  std::vector<double> histogram;
};

struct RunTrace {
  std::vector<TraceRow> frames;
  std::vector<HistogramRow> histograms;
};

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline const char* phase_name(Phase p) { return p == Phase::learn ? "learn" : "test"; }

}  // namespace detail

/// Writes the five trace CSV files into `dir`.
inline void emit_traces(const RunTrace& trace, const std::filesystem::path& dir) {
  require(!trace.frames.empty(), Errc::invalid_argument, "emit_traces: empty trace");
  using detail::fmt_num;
  std::string inputs = "phase,pooler,entry,frame,active_pct\n";
  std::string outputs = "phase,pooler,entry,frame,active_pct\n";
  std::string radius = "phase,pooler,entry,frame,inhibition_radius\n";
  std::string overlap = "phase,pooler,entry,frame,overlap_min,overlap_mean,overlap_max\n";
  for (const auto& row : trace.frames) {
    const std::string prefix = std::string(detail::phase_name(row.phase)) + "," + std::to_string(row.pooler) + "," +
                               std::to_string(row.entry) + "," + std::to_string(row.frame) + ",";
    inputs += prefix + fmt_num(row.record.input_active_pct) + "\n";
    outputs += prefix + fmt_num(row.record.output_active_pct) + "\n";
    radius += prefix + fmt_num(row.record.inhibition_radius) + "\n";
    overlap += prefix + fmt_num(row.record.overlap_min) + "," + fmt_num(row.record.overlap_mean) + "," +
               fmt_num(row.record.overlap_max) + "\n";
  }
  std::string hist = "phase,entry,class,split,noise_level";
  const std::size_t dim = trace.histograms.empty() ? 0 : trace.histograms.front().histogram.size();
  for (std::size_t j = 0; j < dim; ++j) hist += ",h" + std::to_string(j);
  hist += "\n";
  for (const auto& row : trace.histograms) {
    hist += std::string("test,") + std::to_string(row.entry) + "," + std::to_string(row.class_id) + "," +
            (row.split == Split::train ? "train" : "test") + "," + std::to_string(row.noise_level);
    for (double v : row.histogram) hist += "," + fmt_num(v);
    hist += "\n";
  }
  write_text_atomic(dir / "active_inputs.csv", inputs);
  write_text_atomic(dir / "active_outputs.csv", outputs);
  write_text_atomic(dir / "inhibition_radius.csv", radius);
  write_text_atomic(dir / "overlap_stats.csv", overlap);
  write_text_atomic(dir / "class_histograms.csv", hist);
}

// ---- experiment -------------------------------------------------------------

struct LevelResult {
  std::string name;  // "clean" or "noise_<k>"
  int noise_level = -1;
  double sigma = 0.0;
  std::optional<double> target_flip;
  double measured_flip = 0.0;  // on the evaluated test split with the experiment's encoder
  EvalReport eval;
  std::optional<EvalReport> baseline;
  std::optional<SimilarityRatios> similarity;
};

struct ExperimentReport {
  nlohmann::json config;
  Mode mode = Mode::multiple;
  std::size_t feature_dimension = 0;
  std::size_t baseline_dimension = 0;
  std::size_t input_size = 0;
  std::uint32_t epochs_run = 0;
  bool stable = false;
  std::uint64_t learn_calls = 0;
  std::uint64_t test_learn_calls = 0;
  std::size_t train_videos = 0;
  std::size_t test_videos = 0;
  std::vector<LevelResult> levels;
};

struct ExperimentResult {
  ExperimentReport report;
  RunTrace trace;
};

inline std::uint64_t pooler_seed(std::uint64_t seed, int pooler) {
  return derive_seed(seed, {0x53504F4F4CULL, static_cast<std::uint64_t>(pooler)});
}

namespace detail {

struct TrainedPooler {
  SpatialPooler sp;
  std::uint32_t epochs = 0;
  bool stable = false;
  std::uint64_t test_learn_calls = 0;
  std::vector<TraceRow> trace;
};

// One pooler over a fixed list of training videos; order reshuffled every epoch.
inline TrainedPooler train_one(const SpParams& params, std::span<const EncodedVideo* const> videos, std::uint32_t max_epochs,
                               std::uint64_t seed, int pooler_id, bool keep_trace) {
  TrainedPooler out{SpatialPooler(params), 0, false, 0, {}};
  std::vector<SdrVector> previous;
  std::vector<std::size_t> order(videos.size());
  for (std::uint32_t epoch = 0; epoch < max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0x4F52444552ULL, static_cast<std::uint64_t>(pooler_id), epoch}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<SdrVector> current;
    for (std::size_t vi : order) {
      const auto& v = *videos[vi];
      if (v.split != Split::train) ++out.test_learn_calls;
      for (std::uint32_t f = 0; f < v.frames.size(); ++f) {
        const auto res = out.sp.step(v.frames[f]);
        if (keep_trace) out.trace.push_back({Phase::learn, pooler_id, v.entry, f, profile_snapshot(out.sp, v.frames[f], res)});
        if (max_epochs > 1) current.push_back(res.active_columns);
      }
    }
    out.epochs = epoch + 1;
    if (max_epochs > 1) {
      // Compare in a fixed video order, independent of this epoch's shuffle.
      std::vector<SdrVector> canonical(current.size());
      std::size_t pos = 0;
      std::vector<std::size_t> offset(videos.size());
      for (std::size_t vi : order) {
        offset[vi] = pos;
        pos += videos[vi]->frames.size();
      }
      std::size_t k = 0;
      for (std::size_t vi = 0; vi < videos.size(); ++vi) {
        for (std::size_t f = 0; f < videos[vi]->frames.size(); ++f) canonical[k++] = current[offset[vi] + f];
      }
      if (!previous.empty() && canonical == previous) {
        out.stable = true;
        break;
      }
      previous = std::move(canonical);
    }
  }
  out.sp.set_learn_enabled(false);
  return out;
}

inline std::vector<double> pass_through_features(const EncodedVideo& v) { return accumulate_histogram(v.frames).counts; }

inline std::vector<double> pooled_features(std::span<const TrainedPooler> poolers, const EncodedVideo& v,
                                           std::vector<TraceRow>* trace) {
  std::vector<double> feature;
  std::vector<SdrVector> outputs(v.frames.size());
  for (std::size_t p = 0; p < poolers.size(); ++p) {
    const auto& sp = poolers[p].sp;
    for (std::uint32_t f = 0; f < v.frames.size(); ++f) {
      auto res = sp.infer(v.frames[f]);
      if (trace) trace->push_back({Phase::test, static_cast<int>(p), v.entry, f, profile_snapshot(sp, v.frames[f], res)});
      outputs[f] = std::move(res.active_columns);
    }
    const auto h = accumulate_histogram(outputs);
    feature.insert(feature.end(), h.counts.begin(), h.counts.end());
  }
  return feature;
}

inline std::vector<TraceRow> pass_through_trace(const EncodedVideo& v, Phase phase) {
  std::vector<TraceRow> rows;
  for (std::uint32_t f = 0; f < v.frames.size(); ++f) {
    ProfileRecord r;
    r.input_active_pct = 100.0 * sparsity(v.frames[f]);
    r.output_active_pct = r.input_active_pct;
    rows.push_back({phase, -1, v.entry, f, r});
  }
  return rows;
}

inline double measured_flip(const std::vector<EncodedVideo>& clean, const std::vector<EncodedVideo>& noisy) {
  std::uint64_t flipped = 0;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    for (std::size_t f = 0; f < clean[i].frames.size(); ++f) {
      flipped += hamming_distance(clean[i].frames[f], noisy[i].frames[f]);
      total += clean[i].frames[f].length();
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(flipped) / static_cast<double>(total);
}

}  // namespace detail

/// Validates everything that does not need the dataset on disk.
inline void validate(const ExperimentConfig& c) {
  require(c.seed.has_value(), Errc::config_error, "config: seed is required");
  require(c.epochs >= 1, Errc::config_error, "config: epochs must be >= 1");
  validate(c.encoder);
  require(c.svm.lambda > 0.0 && c.svm.epochs >= 1, Errc::config_error, "config: svm lambda and epochs must be positive");
  if (c.mode != Mode::pass_through) {
    SpParams p = c.sp;
    p.input_size = std::max<std::uint32_t>(p.input_size, p.synapses_per_column);
    validate(p);
  }
}

/// Runs the experiment on an already encoded dataset.
inline ExperimentResult run_on_encoded(const ExperimentConfig& cfg, const EncodedDataset& data) {
  validate(cfg);
  const std::uint64_t seed = *cfg.seed;
  const unsigned threads = cfg.threads;
  ExperimentResult result;
  auto& rep = result.report;
  rep.mode = cfg.mode;
  rep.input_size = data.input_size;
  rep.train_videos = data.train.size();
  rep.test_videos = data.test_clean.size();

  SpParams sp_params = cfg.sp;
  sp_params.input_size = static_cast<std::uint32_t>(data.input_size);
  if (cfg.mode != Mode::pass_through) validate(sp_params);

  ExperimentConfig echoed = cfg;
  echoed.sp = sp_params;
  echoed.sp.rng_seed = 0;
  rep.config = to_json(echoed);
  rep.config["noise_levels"] = data.levels;

  // Training.
  std::vector<detail::TrainedPooler> poolers;
  if (cfg.mode != Mode::pass_through) {
    std::vector<std::vector<const EncodedVideo*>> groups;
    if (cfg.mode == Mode::single) {
      groups.emplace_back();
      for (const auto& v : data.train) groups.back().push_back(&v);
    } else {
      std::map<std::uint16_t, std::vector<const EncodedVideo*>> by_class;
      for (const auto& v : data.train) by_class[v.class_id].push_back(&v);
      for (auto& [cls, vids] : by_class) groups.push_back(std::move(vids));
    }
    std::vector<std::optional<detail::TrainedPooler>> slots(groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t g) {
      SpParams p = sp_params;
      p.rng_seed = pooler_seed(seed, static_cast<int>(g));
      slots[g] = detail::train_one(p, groups[g], cfg.epochs, seed, static_cast<int>(g), cfg.traces);
    });
    rep.stable = true;
    for (auto& s : slots) {
      rep.epochs_run = std::max(rep.epochs_run, s->epochs);
      rep.stable = rep.stable && s->stable;
      rep.learn_calls += s->sp.learn_calls();
      rep.test_learn_calls += s->test_learn_calls;
      result.trace.frames.insert(result.trace.frames.end(), s->trace.begin(), s->trace.end());
      s->trace.clear();
      poolers.push_back(std::move(*s));
    }
  } else if (cfg.traces) {
    for (const auto& v : data.train) {
      auto rows = detail::pass_through_trace(v, Phase::learn);
      result.trace.frames.insert(result.trace.frames.end(), rows.begin(), rows.end());
    }
  }
  std::vector<std::uint64_t> frozen_calls;
  for (const auto& p : poolers) frozen_calls.push_back(p.sp.learn_calls());

  // Feature extraction over train, clean test and every noisy test copy.
  std::vector<const EncodedVideo*> all;
  for (const auto& v : data.train) all.push_back(&v);
  for (const auto& v : data.test_clean) all.push_back(&v);
  for (const auto& set : data.test_noisy) {
    for (const auto& v : set) all.push_back(&v);
  }
  std::vector<std::vector<double>> mode_feat(all.size());
  std::vector<std::vector<double>> raw_feat(all.size());
  std::vector<std::vector<TraceRow>> test_rows(all.size());
  parallel_for(all.size(), threads, [&](std::size_t i) {
    const auto& v = *all[i];
    raw_feat[i] = detail::pass_through_features(v);
    if (cfg.mode == Mode::pass_through) {
      mode_feat[i] = raw_feat[i];
      if (cfg.traces) test_rows[i] = detail::pass_through_trace(v, Phase::test);
    } else {
      mode_feat[i] = detail::pooled_features(poolers, v, cfg.traces ? &test_rows[i] : nullptr);
    }
  });
  for (std::size_t p = 0; p < poolers.size(); ++p) {
    rep.test_learn_calls += poolers[p].sp.learn_calls() - frozen_calls[p];
  }
  if (cfg.traces) {
    for (std::size_t i = 0; i < all.size(); ++i) {
      result.trace.frames.insert(result.trace.frames.end(), test_rows[i].begin(), test_rows[i].end());
      result.trace.histograms.push_back({all[i]->entry, all[i]->class_id, all[i]->split, all[i]->noise_level, mode_feat[i]});
    }
  }
  rep.feature_dimension = mode_feat.front().size();
  rep.baseline_dimension = raw_feat.front().size();

  // Classification.
  const std::size_t n_train = data.train.size();
  const std::size_t n_test = data.test_clean.size();
  std::vector<int> train_labels;
  for (const auto& v : data.train) train_labels.push_back(v.class_id);
  std::vector<int> test_labels;
  for (const auto& v : data.test_clean) test_labels.push_back(v.class_id);

  SvmConfig svm = cfg.svm;
  svm.seed = derive_seed(seed, {0x53564DULL});
  const auto span_of = [](const std::vector<std::vector<double>>& f, std::size_t begin, std::size_t count) {
    return std::span<const std::vector<double>>(f.data() + begin, count);
  };
  const LinearModel model = train_svm(span_of(mode_feat, 0, n_train), train_labels, svm);
  std::optional<LinearModel> base_model;
  const bool with_baseline = cfg.baseline && cfg.mode != Mode::pass_through;
  if (with_baseline) base_model = train_svm(span_of(raw_feat, 0, n_train), train_labels, svm);

  auto evaluate = [&](const LinearModel& m, const std::vector<std::vector<double>>& feats, std::size_t begin) {
    std::vector<int> predicted(n_test);
    for (std::size_t i = 0; i < n_test; ++i) predicted[i] = predict(m, feats[begin + i]);
    return f1_report(test_labels, predicted);
  };

  const std::size_t clean_begin = n_train;
  {
    LevelResult lr;
    lr.name = "clean";
    lr.eval = evaluate(model, mode_feat, clean_begin);
    if (base_model) lr.baseline = evaluate(*base_model, raw_feat, clean_begin);
    rep.levels.push_back(std::move(lr));
  }
  for (std::size_t k = 0; k < data.levels.size(); ++k) {
    const std::size_t begin = n_train + n_test * (k + 1);
    const auto& noise = data.manifest.noise[static_cast<std::size_t>(data.levels[k])];
    LevelResult lr;
    lr.name = "noise_" + std::to_string(data.levels[k]);
    lr.noise_level = data.levels[k];
    lr.sigma = noise.sigma;
    lr.target_flip = noise.target_flip;
    lr.measured_flip = detail::measured_flip(data.test_clean, data.test_noisy[k]);
    lr.eval = evaluate(model, mode_feat, begin);
    if (base_model) lr.baseline = evaluate(*base_model, raw_feat, begin);
    if (with_baseline) {
      lr.similarity = similarity_ratio(span_of(mode_feat, clean_begin, n_test), span_of(mode_feat, begin, n_test),
                                       span_of(raw_feat, clean_begin, n_test), span_of(raw_feat, begin, n_test),
                                       test_labels);
      lr.eval.similarity = lr.similarity;
    }
    rep.levels.push_back(std::move(lr));
  }
  return result;
}

inline nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["config"] = r.config;
  j["mode"] = std::string(to_string(r.mode));
  j["input_size"] = r.input_size;
  j["feature_dimension"] = r.feature_dimension;
  j["baseline_dimension"] = r.baseline_dimension;
  j["train_videos"] = r.train_videos;
  j["test_videos"] = r.test_videos;
  j["training"] = {{"epochs_run", r.epochs_run},
                   {"stable", r.stable},
                   {"learn_calls", r.learn_calls},
                   {"test_learn_calls", r.test_learn_calls}};
  auto& levels = j["levels"] = nlohmann::json::array();
  for (const auto& l : r.levels) {
    nlohmann::json e;
    e["name"] = l.name;
    e["noise_level"] = l.noise_level;
    e["sigma"] = l.sigma;
    if (l.target_flip) e["target_flip"] = *l.target_flip;
    e["measured_flip"] = l.measured_flip;
    e["f1"] = l.eval.weighted_f1;
    if (l.baseline) e["baseline_f1"] = l.baseline->weighted_f1;
    if (l.similarity) e["similarity_ratio"] = l.similarity->overall.mean;
    e["eval"] = to_json(l.eval);
    if (l.baseline) e["baseline_eval"] = to_json(*l.baseline);
    levels.push_back(std::move(e));
  }
  return j;
}

/// Table with one row per noise level: baseline F1, mode F1 and the similarity ratio.
inline std::string to_text(const ExperimentReport& r) {
  std::string out;
  char line[200];
  std::snprintf(line, sizeof line, "mode %s, features %zu (baseline %zu), train %zu, test %zu, epochs %u\n",
                std::string(to_string(r.mode)).c_str(), r.feature_dimension, r.baseline_dimension, r.train_videos,
                r.test_videos, r.epochs_run);
  out += line;
  std::snprintf(line, sizeof line, "%-10s %8s %8s %10s %10s %10s\n", "level", "sigma", "flips", "SVM", "mode+SVM", "cos ratio");
  out += line;
  for (const auto& l : r.levels) {
    const std::string base = l.baseline ? detail::fmt_num(l.baseline->weighted_f1) : "-";
    const std::string ratio = l.similarity ? detail::fmt_num(l.similarity->overall.mean) : "-";
    std::snprintf(line, sizeof line, "%-10s %8.3f %8.4f %10s %10.4f %10s\n", l.name.c_str(), l.sigma, l.measured_flip,
                  base.c_str(), l.eval.weighted_f1, ratio.c_str());
    out += line;
  }
  for (const auto& l : r.levels) {
    out += "\n[" + l.name + "] " + std::string(to_string(r.mode)) + "\n" + to_text(l.eval);
  }
  return out;
}

namespace detail {

// Runs `produce` into a fresh sibling directory, then renames it over `out`.
template <typename Fn>
void publish_directory(const std::filesystem::path& out, bool overwrite, Fn&& produce) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(out, ec) && !overwrite) fail(Errc::config_error, out.string() + ": output directory already exists");
  fs::path tmp = out;
  tmp += ".partial";
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp, ec);
  require(!ec, Errc::io_error, tmp.string() + ": " + ec.message());
  try {
    produce(tmp);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
  if (fs::exists(out, ec)) fs::remove_all(out, ec);
  fs::rename(tmp, out, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove_all(tmp, ignore);
    fail(Errc::io_error, out.string() + ": " + ec.message());
  }
}

}  // namespace detail

/// Pre-flight checks that touch the filesystem: manifest, video files, output directory.
inline DatasetManifest preflight(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  validate(cfg);
  require(!cfg.manifest.empty(), Errc::config_error, "config: manifest path is required");
  require(!cfg.output_dir.empty(), Errc::config_error, "config: output_dir is required");
  const fs::path manifest_path(cfg.manifest);
  require(fs::exists(manifest_path), Errc::config_error, manifest_path.string() + ": manifest not found");
  const auto m = read_manifest(manifest_path);
  const auto geom = check_manifest(m);
  validate(cfg.encoder, geom.width, geom.height);
  const auto levels = detail::resolve_levels(m, cfg.noise_levels);
  for (const auto& e : m.entries) {
    const bool needed = e.noise_level < 0 || std::find(levels.begin(), levels.end(), e.noise_level) != levels.end();
    if (needed) require(fs::exists(manifest_path.parent_path() / e.path), Errc::config_error, e.path + ": missing video file");
  }
  if (cfg.mode != Mode::pass_through) {
    SpParams p = cfg.sp;
    p.input_size = (geom.width / cfg.encoder.reduction_ratio) * (geom.height / cfg.encoder.reduction_ratio);
    validate(p);
  }
  if (!cfg.overwrite) {
    require(!fs::exists(cfg.output_dir), Errc::config_error, cfg.output_dir + ": output directory already exists");
  }
  return m;
}

/// Full run: pre-flight, load, compute, then publish report.json, report.txt and traces atomically.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  const auto manifest = preflight(cfg);
  const auto data =
      load_encoded(manifest, std::filesystem::path(cfg.manifest).parent_path(), cfg.encoder, cfg.noise_levels, cfg.threads);
  auto result = run_on_encoded(cfg, data);
  detail::publish_directory(cfg.output_dir, cfg.overwrite, [&](const std::filesystem::path& dir) {
    write_text_atomic(dir / "report.json", to_json(result.report).dump(2) + "\n");
    write_text_atomic(dir / "report.txt", to_text(result.report));
    if (cfg.traces) emit_traces(result.trace, dir);
  });
  return result.report;
}

// ---- parameter sweep --------------------------------------------------------

/// Grid over pooler and encoder parameters. An empty axis keeps the base value.
struct SweepConfig {
  ExperimentConfig base;
  std::vector<std::uint32_t> columns;
  std::vector<std::uint32_t> synapses;
  std::vector<std::uint32_t> min_overlap;
  std::vector<std::uint32_t> winners;
  std::vector<std::uint32_t> reduction;
};

struct SweepPoint {
  SpParams sp;
  std::uint32_t reduction = 1;
  ExperimentReport report;

  /// Unweighted mean of the weighted F1 over every evaluated level.
  double mean_f1() const {
    double total = 0.0;
    for (const auto& l : report.levels) total += l.eval.weighted_f1;
    return report.levels.empty() ? 0.0 : total / static_cast<double>(report.levels.size());
  }
};

namespace detail {

template <typename T>
std::vector<T> axis_or(const std::vector<T>& axis, T fallback) {
  return axis.empty() ? std::vector<T>{fallback} : axis;
}

}  // namespace detail

/// Pooler grid in row-major order: columns, synapses, min_overlap, winners.
inline std::vector<SpParams> sweep_grid(const SweepConfig& c) {
  std::vector<SpParams> out;
  for (auto cols : detail::axis_or(c.columns, c.base.sp.columns)) {
    for (auto syn : detail::axis_or(c.synapses, c.base.sp.synapses_per_column)) {
      for (auto mo : detail::axis_or(c.min_overlap, c.base.sp.min_overlap)) {
        for (auto k : detail::axis_or(c.winners, c.base.sp.winners_set_size)) {
          SpParams p = c.base.sp;
          p.columns = cols;
          p.synapses_per_column = syn;
          p.min_overlap = mo;
          p.winners_set_size = k;
          out.push_back(p);
        }
      }
    }
  }
  return out;
}

/// Runs every grid point on one encoded dataset; `base.encoder` must match the encoding.
inline std::vector<SweepPoint> sweep_on_encoded(const ExperimentConfig& base, const EncodedDataset& data,
                                                std::span<const SpParams> grid) {
  std::vector<SweepPoint> out;
  for (const auto& sp : grid) {
    ExperimentConfig cfg = base;
    cfg.sp = sp;
    cfg.traces = false;
    out.push_back({sp, base.encoder.reduction_ratio, run_on_encoded(cfg, data).report});
  }
  return out;
}

inline std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "columns,synapses,min_overlap,winners,reduction,level,sigma,f1,baseline_f1,similarity_ratio\n";
  for (const auto& pt : points) {
    for (const auto& l : pt.report.levels) {
      out += std::to_string(pt.sp.columns) + "," + std::to_string(pt.sp.synapses_per_column) + "," +
             std::to_string(pt.sp.min_overlap) + "," + std::to_string(pt.sp.winners_set_size) + "," +
             std::to_string(pt.reduction) + "," + l.name + "," + detail::fmt_num(l.sigma) + "," +
             detail::fmt_num(l.eval.weighted_f1) + "," + (l.baseline ? detail::fmt_num(l.baseline->weighted_f1) : "") +
             "," + (l.similarity ? detail::fmt_num(l.similarity->overall.mean) : "") + "\n";
    }
  }
  return out;
}

inline nlohmann::json to_json(std::span<const SweepPoint> points) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& pt : points) {
    j.push_back({{"sp", to_json(pt.sp)}, {"reduction", pt.reduction}, {"mean_f1", pt.mean_f1()}, {"report", to_json(pt.report)}});
  }
  return j;
}

/// Validates the whole grid, then runs it one reduction ratio at a time and
/// publishes sweep.csv and sweep.json.
inline std::vector<SweepPoint> run_sweep(const SweepConfig& c) {
  const auto reductions = detail::axis_or(c.reduction, c.base.encoder.reduction_ratio);
  const auto grid = sweep_grid(c);
  const auto manifest = preflight(c.base);
  const auto geom = check_manifest(manifest);
  for (auto r : reductions) {
    EncoderConfig enc = c.base.encoder;
    enc.reduction_ratio = r;
    validate(enc, geom.width, geom.height);
    if (c.base.mode == Mode::pass_through) continue;
    for (auto p : grid) {
      p.input_size = (geom.width / r) * (geom.height / r);
      validate(p);
    }
  }
  std::vector<SweepPoint> points;
  for (auto r : reductions) {
    ExperimentConfig cfg = c.base;
    cfg.encoder.reduction_ratio = r;
    const auto data =
        load_encoded(manifest, std::filesystem::path(cfg.manifest).parent_path(), cfg.encoder, cfg.noise_levels, cfg.threads);
    auto part = sweep_on_encoded(cfg, data, grid);
    points.insert(points.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  detail::publish_directory(c.base.output_dir, c.base.overwrite, [&](const std::filesystem::path& dir) {
    write_text_atomic(dir / "sweep.csv", sweep_csv(points));
    write_text_atomic(dir / "sweep.json", to_json(std::span<const SweepPoint>(points)).dump(2) + "\n");
  });
  return points;
}

// ---- noise-model analysis ---------------------------------------------------

struct NoiseModelRow {
  PropagationParams params;
  PropagationExpectations expected;
  Probability p_signal;
  Probability p_noise;
  double p_signal_exact = 0.0;
  double p_noise_exact = 0.0;
  std::optional<double> impact_ratio;
  std::optional<MonteCarloResult> mc;
};

inline NoiseModelRow analyse_noise_model(const PropagationParams& p, std::uint64_t trials, std::uint64_t seed,
                                         unsigned threads = 1) {
  NoiseModelRow row;
  row.params = p;
  row.expected = propagation_expectations(p);
  row.p_signal = match_probability_signal(p);
  row.p_noise = match_probability_noise(p);
  row.p_signal_exact = match_probability_signal_hypergeometric(p);
  row.p_noise_exact = match_probability_noise_hypergeometric(p);
  if (row.p_noise.value > 0.0) row.impact_ratio = noise_impact_ratio(p);
  if (trials > 0) row.mc = monte_carlo_propagation(p, trials, seed, threads);
  return row;
}

inline nlohmann::json to_json(const PropagationParams& p) {
  return {{"n", p.n}, {"n_b", p.n_b}, {"s", p.s}, {"c", p.c}, {"m", p.m}, {"o_m", p.o_m}, {"w", p.w}, {"w_b", p.w_b}};
}

inline nlohmann::json to_json(const PropagationExpectations& e) {
  return {{"e_scm", e.e_scm}, {"e_spm", e.e_spm}, {"e_ncm", e.e_ncm}, {"e_npm", e.e_npm}, {"e_nb", e.e_nb}};
}

inline nlohmann::json to_json(const NoiseModelRow& r) {
  nlohmann::json j;
  j["params"] = to_json(r.params);
  j["expected"] = to_json(r.expected);
  j["p_match_signal"] = {{"value", r.p_signal.value}, {"log", r.p_signal.log_value}, {"clamped", r.p_signal.clamped}};
  j["p_match_noise"] = {{"value", r.p_noise.value}, {"log", r.p_noise.log_value}, {"clamped", r.p_noise.clamped}};
  j["p_match_signal_exact"] = r.p_signal_exact;
  j["p_match_noise_exact"] = r.p_noise_exact;
  j["impact_ratio"] = r.impact_ratio ? nlohmann::json(*r.impact_ratio) : nlohmann::json(nullptr);
  if (r.mc) {
    j["monte_carlo"] = {{"trials", r.mc->trials},
                        {"mean", to_json(r.mc->mean)},
                        {"std_error", to_json(r.mc->std_error)},
                        {"p_match_signal", r.mc->p_match_signal},
                        {"p_match_signal_se", r.mc->p_match_signal_se},
                        {"p_match_noise", r.mc->p_match_noise},
                        {"p_match_noise_se", r.mc->p_match_noise_se}};
  }
  return j;
}

inline std::string to_text(std::span<const NoiseModelRow> rows) {
  std::string out;
  char line[400];
  std::snprintf(line, sizeof line, "%5s %5s %4s %5s %4s %4s %5s %5s | %9s %9s %9s %9s %9s | %9s %9s %9s %9s | %9s | %9s %9s %9s\n",
                "n", "n_b", "s", "c", "m", "o_m", "w", "w_b", "E_SCM", "E_SPM", "E_NCM", "E_NPM", "E_NB", "Psig", "Pnoise",
                "Psig_ex", "Pnoi_ex", "impact", "MC_SPM", "MC_NB", "MC_Psig");
  out += line;
  for (const auto& r : rows) {
    const auto& p = r.params;
    const std::string impact = r.impact_ratio ? detail::fmt_num(*r.impact_ratio) : "-";
    const std::string mc_spm = r.mc ? detail::fmt_num(r.mc->mean.e_spm) : "-";
    const std::string mc_nb = r.mc ? detail::fmt_num(r.mc->mean.e_nb) : "-";
    const std::string mc_p = r.mc ? detail::fmt_num(r.mc->p_match_signal) : "-";
    std::snprintf(line, sizeof line,
                  "%5u %5u %4u %5u %4.2f %4u %5u %5u | %9.4f %9.4f %9.4f %9.4f %9.4f | %9.4g %9.4g %9.4g %9.4g | %9s | %9s "
                  "%9s %9s\n",
                  p.n, p.n_b, p.s, p.c, p.m, p.o_m, p.w, p.w_b, r.expected.e_scm, r.expected.e_spm, r.expected.e_ncm,
                  r.expected.e_npm, r.expected.e_nb, r.p_signal.value, r.p_noise.value, r.p_signal_exact, r.p_noise_exact,
                  impact.c_str(), mc_spm.c_str(), mc_nb.c_str(), mc_p.c_str());
    out += line;
  }
  return out;
}

}  // namespace htmvid

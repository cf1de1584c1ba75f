#pragma once

// Procedural shape videos, Gaussian noise injection, the HTMV container and
// the JSON dataset manifest.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "htmvid/binary_io.hpp"
#include "htmvid/encoder.hpp"
#include "htmvid/error.hpp"
#include "htmvid/parallel.hpp"
#include "htmvid/rng.hpp"

namespace htmvid {

enum class ShapeClass : std::uint16_t { disk = 0, square, triangle, ring, cross, ellipse };

inline constexpr std::uint16_t kShapeClassCount = 6;

inline constexpr std::array<std::string_view, kShapeClassCount> kShapeNames = {"disk", "square", "triangle",
                                                                              "ring", "cross",  "ellipse"};

inline std::string_view shape_name(std::uint16_t class_id) {
  require(class_id < kShapeClassCount, Errc::invalid_argument, "unknown shape class " + std::to_string(class_id));
  return kShapeNames[class_id];
}

struct Geometry {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

/// Named frame geometries: R16, R8 and R4.
inline Geometry geometry_preset(std::string_view name) {
  if (name == "R16") return {60, 32};
  if (name == "R8") return {120, 66};
  if (name == "R4") return {240, 134};
  fail(Errc::invalid_argument, "unknown geometry preset '" + std::string(name) + "' (expected R16, R8 or R4)");
}

/// Which parts of the simulated camera orbit are animated.
struct OrbitConfig {
  bool rotation = true;       // full turn over the clip
  bool foreshortening = true;  // anisotropic scale in [0.6, 1.0]
  bool zoom = true;           // distance zoom in [0.7, 1.3]

  static OrbitConfig static_camera() { return {false, false, false}; }
  friend bool operator==(const OrbitConfig&, const OrbitConfig&) = default;
};

struct RenderConfig {
  std::uint8_t background = 40;
  std::uint8_t foreground = 215;
  /// Object radius as a fraction of half the smaller frame side.
  double object_scale = 0.7;
  OrbitConfig orbit;
  friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

struct Video {
  std::vector<GrayFrame> frames;
  std::uint16_t class_label = 0;
  std::uint64_t seed = 0;
  float noise_sigma = 0.0F;

  std::uint32_t width() const noexcept { return frames.empty() ? 0 : frames.front().width; }
  std::uint32_t height() const noexcept { return frames.empty() ? 0 : frames.front().height; }
  friend bool operator==(const Video&, const Video&) = default;
};

namespace detail {

// Canonical shapes live roughly inside the unit disk.
inline bool inside_shape(ShapeClass cls, double x, double y) {
  switch (cls) {
    case ShapeClass::disk:
      return x * x + y * y <= 0.8 * 0.8;
    case ShapeClass::square:
      return std::abs(x) <= 0.65 && std::abs(y) <= 0.65;
    case ShapeClass::triangle: {
      // Equilateral, circumradius 0.9, apex up.
      constexpr double r = 0.9;
      const double s3 = std::sqrt(3.0);
      if (y < -0.5 * r) return false;
      return s3 * x + y <= r && -s3 * x + y <= r;
    }
    case ShapeClass::ring: {
      const double rr = x * x + y * y;
      return rr >= 0.45 * 0.45 && rr <= 0.85 * 0.85;
    }
    case ShapeClass::cross:
      return (std::abs(x) <= 0.25 && std::abs(y) <= 0.85) || (std::abs(y) <= 0.25 && std::abs(x) <= 0.85);
    case ShapeClass::ellipse:
      return (x / 0.9) * (x / 0.9) + (y / 0.45) * (y / 0.45) <= 1.0;
  }
  return false;
}

struct OrbitPath {
  double phase = 0.0;
  double direction = 1.0;
  double axis = 0.0;
  double fore_freq = 1.0;
  double fore_phase = 0.0;
  double zoom_freq = 1.0;
  double zoom_phase = 0.0;
};

}  // namespace detail

/// Renders a centred anti-aliased silhouette under a seeded orbit. Deterministic per (class, seed).
inline Video generate_video(std::uint16_t class_id, std::uint32_t frame_count, std::uint32_t width, std::uint32_t height,
                            std::uint64_t seed, const RenderConfig& render = {}) {
  require(class_id < kShapeClassCount, Errc::invalid_argument, "generate_video: unknown class " + std::to_string(class_id));
  require(width >= 16 && height >= 16, Errc::invalid_argument,
          "generate_video: frame " + std::to_string(width) + "x" + std::to_string(height) + " below 16x16");
  require(frame_count >= 1, Errc::invalid_argument, "generate_video: frame_count must be positive");
  require(render.object_scale > 0.0 && render.object_scale <= 1.0, Errc::invalid_argument,
          "generate_video: object_scale must be in (0, 1]");

  constexpr double two_pi = 2.0 * std::numbers::pi;
  Rng rng(derive_seed(seed, {0x5348415045ULL, class_id}));
  detail::OrbitPath path;
  path.phase = two_pi * rng.uniform();
  path.direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
  path.axis = two_pi * rng.uniform();
  path.fore_freq = 1.0 + static_cast<double>(rng.below(2));
  path.fore_phase = two_pi * rng.uniform();
  path.zoom_freq = 1.0 + static_cast<double>(rng.below(2));
  path.zoom_phase = two_pi * rng.uniform();

  const auto cls = static_cast<ShapeClass>(class_id);
  const double radius = render.object_scale * 0.5 * static_cast<double>(std::min(width, height));
  const double cx = 0.5 * width;
  const double cy = 0.5 * height;
  constexpr int kSuper = 4;
  const double lo = render.background;
  const double hi = render.foreground;

  Video video;
  video.class_label = class_id;
  video.seed = seed;
  video.frames.reserve(frame_count);
  for (std::uint32_t f = 0; f < frame_count; ++f) {
    const double t = static_cast<double>(f) / static_cast<double>(frame_count);
    const double angle = path.phase + (render.orbit.rotation ? path.direction * two_pi * t : 0.0);
    const double fore =
        render.orbit.foreshortening ? 0.8 + 0.2 * std::cos(two_pi * path.fore_freq * t + path.fore_phase) : 1.0;
    const double zoom = render.orbit.zoom ? 1.0 + 0.3 * std::sin(two_pi * path.zoom_freq * t + path.zoom_phase) : 1.0;
    const double ca = std::cos(path.axis);
    const double sa = std::sin(path.axis);
    const double cr = std::cos(angle);
    const double sr = std::sin(angle);

    GrayFrame frame(width, height);
    for (std::uint32_t py = 0; py < height; ++py) {
      for (std::uint32_t px = 0; px < width; ++px) {
        int covered = 0;
        for (int sy = 0; sy < kSuper; ++sy) {
          for (int sx = 0; sx < kSuper; ++sx) {
            const double u = (px + (sx + 0.5) / kSuper - cx) / (radius * zoom);
            const double v = (py + (sy + 0.5) / kSuper - cy) / (radius * zoom);
            // Undo foreshortening along the orbit axis.
            const double along = (u * ca + v * sa) / fore;
            const double across = -u * sa + v * ca;
            const double x1 = along * ca - across * sa;
            const double y1 = along * sa + across * ca;
            // Undo rotation. Image y grows downward, so flip for the canonical frame.
            const double xr = x1 * cr + y1 * sr;
            const double yr = -x1 * sr + y1 * cr;
            if (detail::inside_shape(cls, xr, -yr)) ++covered;
          }
        }
        const double value = lo + (hi - lo) * covered / double(kSuper * kSuper);
        frame.at(px, py) = static_cast<std::uint8_t>(std::lround(value));
      }
    }
    video.frames.push_back(std::move(frame));
  }
  return video;
}

/// value + round(g), g ~ N(0, sigma^2), clamped to [0, 255]. Frame f draws from
/// the substream (noise_seed, video.seed, f), so equal seeds give coupled noise across sigmas.
inline Video add_gaussian_noise(const Video& video, double sigma, std::uint64_t noise_seed) {
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_argument, "add_gaussian_noise: sigma must be >= 0");
  Video out = video;
  out.noise_sigma = static_cast<float>(sigma);
  if (sigma == 0.0) return out;
  for (std::size_t f = 0; f < out.frames.size(); ++f) {
    Rng rng(derive_seed(noise_seed, {video.seed, f}));
    for (auto& px : out.frames[f].pixels) {
      const double g = std::round(sigma * rng.normal());
      px = static_cast<std::uint8_t>(std::clamp(static_cast<double>(px) + g, 0.0, 255.0));
    }
  }
  return out;
}

// ---- HTMV container ---------------------------------------------------------

inline constexpr std::uint16_t kVideoFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_video(const Video& video) {
  require(!video.frames.empty(), Errc::invalid_argument, "serialize_video: video has no frames");
  const auto w = video.width();
  const auto h = video.height();
  ByteWriter out;
  out.tag("HTMV");
  out.u16(kVideoFormatVersion);
  out.u16(video.class_label);
  out.u32(w);
  out.u32(h);
  out.u32(static_cast<std::uint32_t>(video.frames.size()));
  out.f32(video.noise_sigma);
  out.u64(video.seed);
  for (const auto& frame : video.frames) {
    require(frame.width == w && frame.height == h, Errc::length_mismatch, "serialize_video: frames differ in geometry");
    out.bytes(frame.pixels);
  }
  return out.take();
}

inline Video deserialize_video(std::span<const std::uint8_t> data, const std::string& what = "video") {
  ByteReader in(data, what);
  if (in.remaining() < 4 || !in.tag_matches("HTMV")) fail(Errc::bad_magic, what + ": not an HTMV container");
  const auto version = in.u16();
  require(version == kVideoFormatVersion, Errc::version_mismatch,
          what + ": unsupported HTMV version " + std::to_string(version));
  Video v;
  v.class_label = in.u16();
  const auto w = in.u32();
  const auto h = in.u32();
  const auto count = in.u32();
  v.noise_sigma = in.f32();
  v.seed = in.u64();
  require(w > 0 && h > 0 && count > 0, Errc::invalid_argument, what + ": empty geometry or frame count");
  const std::uint64_t frame_bytes = static_cast<std::uint64_t>(w) * h;
  require(frame_bytes * count <= in.remaining(), Errc::truncated,
          what + ": truncated (" + std::to_string(in.remaining()) + " bytes for " + std::to_string(count) + " frames)");
  v.frames.reserve(count);
  for (std::uint32_t f = 0; f < count; ++f) {
    auto px = in.bytes(static_cast<std::size_t>(frame_bytes));
    v.frames.emplace_back(w, h, std::vector<std::uint8_t>(px.begin(), px.end()));
  }
  require(in.remaining() == 0, Errc::length_mismatch, what + ": trailing bytes after last frame");
  return v;
}

/// Writes to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    require(!ec, Errc::io_error, path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), Errc::io_error, tmp.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignore;
      fs::remove(tmp, ignore);
      fail(Errc::io_error, tmp.string() + ": write failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignore;
    fs::remove(tmp, ignore);
    fail(Errc::io_error, path.string() + ": " + ec.message());
  }
}

inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_error, path.string() + ": cannot open");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!in.bad(), Errc::io_error, path.string() + ": read failed");
  return data;
}

inline void write_video(const Video& video, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_video(video));
}

inline Video read_video(const std::filesystem::path& path) { return deserialize_video(read_file(path), path.string()); }

// ---- noise calibration ------------------------------------------------------

/// Fraction of encoder bits that differ between each clean frame and its noisy copy.
inline double flip_fraction(std::span<const Video> clean, double sigma, std::uint64_t noise_seed,
                            const EncoderConfig& enc, unsigned threads = 1) {
  require(!clean.empty(), Errc::invalid_argument, "flip_fraction: no videos");
  std::vector<std::uint64_t> flipped(clean.size(), 0);
  std::vector<std::uint64_t> total(clean.size(), 0);
  parallel_for(clean.size(), threads, [&](std::size_t i) {
    const Video noisy = add_gaussian_noise(clean[i], sigma, noise_seed);
    for (std::size_t f = 0; f < clean[i].frames.size(); ++f) {
      const auto a = encode(clean[i].frames[f], enc);
      const auto b = encode(noisy.frames[f], enc);
      flipped[i] += hamming_distance(a, b);
      total[i] += a.length();
    }
  });
  std::uint64_t fl = 0;
  std::uint64_t tot = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    fl += flipped[i];
    tot += total[i];
  }
  return static_cast<double>(fl) / static_cast<double>(tot);
}

struct CalibrationPoint {
  double sigma = 0.0;
  double flip_fraction = 0.0;
};

/// Bisection on sigma in [0, sigma_max] for a target flipped-bit fraction.
inline CalibrationPoint calibrate_sigma(std::span<const Video> clean, double target, std::uint64_t noise_seed,
                                        const EncoderConfig& enc, unsigned threads = 1, double sigma_max = 64.0,
                                        int iterations = 24) {
  require(target > 0.0 && target < 1.0, Errc::invalid_argument, "calibrate_sigma: target must be in (0, 1)");
  double lo = 0.0;
  double hi = sigma_max;
  const double at_max = flip_fraction(clean, hi, noise_seed, enc, threads);
  require(at_max >= target, Errc::domain_error,
          "calibrate_sigma: target " + std::to_string(target) + " not reached at sigma " + std::to_string(sigma_max) +
              " (max " + std::to_string(at_max) + ")");
  CalibrationPoint best{hi, at_max};
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double frac = flip_fraction(clean, mid, noise_seed, enc, threads);
    if (std::abs(frac - target) < std::abs(best.flip_fraction - target)) best = {mid, frac};
    if (frac < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

// ---- dataset generation -----------------------------------------------------

/// A noise level given either as sigma directly or as a target flipped-bit fraction.
struct NoiseLevel {
  std::optional<double> sigma;
  std::optional<double> target_flip;
};

struct DatasetConfig {
  std::uint16_t classes = kShapeClassCount;
  std::uint32_t videos_per_class = 40;
  double train_fraction = 0.8;
  std::uint32_t frame_count = 32;
  std::uint32_t width = 60;
  std::uint32_t height = 32;
  std::uint64_t seed = 0;
  std::vector<NoiseLevel> noise;
  /// Encoder used to turn target flip fractions into sigmas.
  EncoderConfig calibration_encoder;
  RenderConfig render;

  std::uint32_t train_per_class() const {
    return static_cast<std::uint32_t>(std::lround(train_fraction * static_cast<double>(videos_per_class)));
  }
  std::uint32_t test_per_class() const { return videos_per_class - train_per_class(); }
};

inline void validate(const DatasetConfig& c) {
  require(c.classes >= 2 && c.classes <= kShapeClassCount, Errc::config_error,
          "dataset: classes must be in [2, " + std::to_string(kShapeClassCount) + "]");
  require(c.videos_per_class >= 2, Errc::config_error, "dataset: videos_per_class must be >= 2");
  require(c.train_fraction > 0.0 && c.train_fraction < 1.0, Errc::config_error, "dataset: train_fraction must be in (0, 1)");
  require(c.train_per_class() >= 1 && c.test_per_class() >= 1, Errc::config_error,
          "dataset: split leaves an empty train or test set");
  require(c.frame_count >= 1, Errc::config_error, "dataset: frame_count must be positive");
  require(c.width >= 16 && c.height >= 16, Errc::config_error, "dataset: frames must be at least 16x16");
  for (const auto& level : c.noise) {
    require(level.sigma.has_value() != level.target_flip.has_value(), Errc::config_error,
            "dataset: each noise level needs exactly one of sigma or target_flip");
    if (level.sigma) require(*level.sigma > 0.0, Errc::config_error, "dataset: noise sigma must be positive");
    if (level.target_flip) {
      require(*level.target_flip > 0.0 && *level.target_flip < 1.0, Errc::config_error,
              "dataset: target_flip must be in (0, 1)");
    }
  }
  if (std::any_of(c.noise.begin(), c.noise.end(), [](const NoiseLevel& l) { return l.target_flip.has_value(); })) {
    validate(c.calibration_encoder, c.width, c.height);
  }
}

enum class Split { train, test };

struct ManifestEntry {
  std::string path;  // relative to the manifest directory
  std::uint16_t class_id = 0;
  Split split = Split::train;
  std::uint32_t video_index = 0;  // index within its class
  int noise_level = -1;           // -1 clean, otherwise index into DatasetManifest::noise
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ResolvedNoise {
  double sigma = 0.0;
  std::optional<double> target_flip;
  std::optional<double> measured_flip;
  friend bool operator==(const ResolvedNoise&, const ResolvedNoise&) = default;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::uint64_t noise_seed = 0;
  nlohmann::json config;
  std::vector<ResolvedNoise> noise;
  std::vector<ManifestEntry> entries;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline std::uint64_t video_seed(std::uint64_t global_seed, std::uint16_t class_id, std::uint32_t index) {
  return derive_seed(global_seed, {0x564944ULL, class_id, index});
}

inline std::uint64_t dataset_noise_seed(std::uint64_t global_seed) { return derive_seed(global_seed, {0x4E4F495345ULL}); }

inline nlohmann::json to_json(const EncoderConfig& e) {
  return {{"reduction_ratio", e.reduction_ratio},
          {"block_size", e.block_size},
          {"threshold_c", e.threshold_c},
          {"gaussian_sigma", e.gaussian_sigma}};
}

inline nlohmann::json to_json(const RenderConfig& r) {
  return {{"background", r.background},
          {"foreground", r.foreground},
          {"object_scale", r.object_scale},
          {"orbit", {{"rotation", r.orbit.rotation}, {"foreshortening", r.orbit.foreshortening}, {"zoom", r.orbit.zoom}}}};
}

inline nlohmann::json to_json(const DatasetConfig& c) {
  nlohmann::json noise = nlohmann::json::array();
  for (const auto& l : c.noise) {
    if (l.sigma) {
      noise.push_back({{"sigma", *l.sigma}});
    } else {
      noise.push_back({{"target_flip", *l.target_flip}});
    }
  }
  return {{"classes", c.classes},
          {"videos_per_class", c.videos_per_class},
          {"train_fraction", c.train_fraction},
          {"frame_count", c.frame_count},
          {"width", c.width},
          {"height", c.height},
          {"seed", c.seed},
          {"noise", noise},
          {"calibration_encoder", to_json(c.calibration_encoder)},
          {"render", to_json(c.render)}};
}

/// Overrides fields present in `j`; unknown keys are rejected. Inverse of to_json.
inline void update_from_json(DatasetConfig& c, const nlohmann::json& j) {
  auto check_keys = [](const nlohmann::json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
    require(obj.is_object(), Errc::config_error, where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
      require(std::find(known.begin(), known.end(), key) != known.end(), Errc::config_error,
              where + ": unknown key '" + key + "'");
    }
  };
  try {
    check_keys(j,
               {"classes", "videos_per_class", "train_fraction", "frame_count", "width", "height", "seed", "noise",
                "calibration_encoder", "render"},
               "dataset");
    if (j.contains("classes")) c.classes = j.at("classes").get<std::uint16_t>();
    if (j.contains("videos_per_class")) c.videos_per_class = j.at("videos_per_class").get<std::uint32_t>();
    if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("frame_count")) c.frame_count = j.at("frame_count").get<std::uint32_t>();
    if (j.contains("width")) c.width = j.at("width").get<std::uint32_t>();
    if (j.contains("height")) c.height = j.at("height").get<std::uint32_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("noise")) {
      c.noise.clear();
      for (const auto& level : j.at("noise")) {
        check_keys(level, {"sigma", "target_flip"}, "dataset.noise");
        NoiseLevel l;
        if (level.contains("sigma")) l.sigma = level.at("sigma").get<double>();
        if (level.contains("target_flip")) l.target_flip = level.at("target_flip").get<double>();
        c.noise.push_back(l);
      }
    }
    if (j.contains("calibration_encoder")) {
      const auto& e = j.at("calibration_encoder");
      check_keys(e, {"reduction_ratio", "block_size", "threshold_c", "gaussian_sigma"}, "dataset.calibration_encoder");
      auto& enc = c.calibration_encoder;
      if (e.contains("reduction_ratio")) enc.reduction_ratio = e.at("reduction_ratio").get<std::uint32_t>();
      if (e.contains("block_size")) enc.block_size = e.at("block_size").get<std::uint32_t>();
      if (e.contains("threshold_c")) enc.threshold_c = e.at("threshold_c").get<double>();
      if (e.contains("gaussian_sigma")) enc.gaussian_sigma = e.at("gaussian_sigma").get<double>();
    }
    if (j.contains("render")) {
      const auto& r = j.at("render");
      check_keys(r, {"background", "foreground", "object_scale", "orbit"}, "dataset.render");
      if (r.contains("background")) c.render.background = r.at("background").get<std::uint8_t>();
      if (r.contains("foreground")) c.render.foreground = r.at("foreground").get<std::uint8_t>();
      if (r.contains("object_scale")) c.render.object_scale = r.at("object_scale").get<double>();
      if (r.contains("orbit")) {
        const auto& o = r.at("orbit");
        check_keys(o, {"rotation", "foreshortening", "zoom"}, "dataset.render.orbit");
        if (o.contains("rotation")) c.render.orbit.rotation = o.at("rotation").get<bool>();
        if (o.contains("foreshortening")) c.render.orbit.foreshortening = o.at("foreshortening").get<bool>();
        if (o.contains("zoom")) c.render.orbit.zoom = o.at("zoom").get<bool>();
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::config_error, std::string("dataset: ") + ex.what());
  }
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["format"] = "htmvid-manifest";
  j["version"] = 1;
  j["seed"] = m.seed;
  j["noise_seed"] = m.noise_seed;
  j["config"] = m.config;
  auto& noise = j["noise"] = nlohmann::json::array();
  for (const auto& n : m.noise) {
    nlohmann::json e = {{"sigma", n.sigma}};
    if (n.target_flip) e["target_flip"] = *n.target_flip;
    if (n.measured_flip) e["measured_flip"] = *n.measured_flip;
    noise.push_back(e);
  }
  auto& videos = j["videos"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    videos.push_back({{"path", e.path},
                      {"class_id", e.class_id},
                      {"split", e.split == Split::train ? "train" : "test"},
                      {"video_index", e.video_index},
                      {"noise_level", e.noise_level}});
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    require(j.at("format").get<std::string>() == "htmvid-manifest", Errc::config_error, "manifest: unknown format");
    require(j.at("version").get<int>() == 1, Errc::version_mismatch, "manifest: unsupported version");
    DatasetManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    m.config = j.at("config");
    for (const auto& n : j.at("noise")) {
      ResolvedNoise r;
      r.sigma = n.at("sigma").get<double>();
      if (n.contains("target_flip")) r.target_flip = n["target_flip"].get<double>();
      if (n.contains("measured_flip")) r.measured_flip = n["measured_flip"].get<double>();
      m.noise.push_back(r);
    }
    for (const auto& v : j.at("videos")) {
      ManifestEntry e;
      e.path = v.at("path").get<std::string>();
      e.class_id = v.at("class_id").get<std::uint16_t>();
      const auto split = v.at("split").get<std::string>();
      require(split == "train" || split == "test", Errc::config_error, "manifest: bad split '" + split + "'");
      e.split = split == "train" ? Split::train : Split::test;
      e.video_index = v.at("video_index").get<std::uint32_t>();
      e.noise_level = v.at("noise_level").get<int>();
      require(e.noise_level >= -1 && e.noise_level < static_cast<int>(m.noise.size()), Errc::config_error,
              "manifest: noise_level out of range for " + e.path);
      require(e.split == Split::test || e.noise_level == -1, Errc::config_error,
              "manifest: training video with noise: " + e.path);
      m.entries.push_back(std::move(e));
    }
    return m;
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::config_error, std::string("manifest: ") + ex.what());
  }
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
  require(!j.is_discarded(), Errc::config_error, path.string() + ": not valid JSON");
  return manifest_from_json(j);
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  write_text_atomic(path, to_json(m).dump(2) + "\n");
}

inline std::string video_filename(std::uint16_t class_id, std::uint32_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04u.htmv", kShapeNames[class_id].data(), index);
  return buf;
}

/// Clean test videos of every class, in (class, index) order.
inline std::vector<Video> render_test_videos(const DatasetConfig& c, unsigned threads = 1) {
  const auto train = c.train_per_class();
  const auto test = c.test_per_class();
  std::vector<Video> out(static_cast<std::size_t>(c.classes) * test);
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const auto cls = static_cast<std::uint16_t>(i / test);
    const auto idx = train + static_cast<std::uint32_t>(i % test);
    out[i] = generate_video(cls, c.frame_count, c.width, c.height, video_seed(c.seed, cls, idx), c.render);
  });
  return out;
}

/// Resolves every configured noise level to a sigma; target fractions are calibrated on the clean test split.
inline std::vector<ResolvedNoise> resolve_noise(const DatasetConfig& c, std::span<const Video> clean_test,
                                                unsigned threads = 1) {
  const auto noise_seed = dataset_noise_seed(c.seed);
  std::vector<ResolvedNoise> out;
  for (const auto& level : c.noise) {
    ResolvedNoise r;
    if (level.sigma) {
      r.sigma = *level.sigma;
    } else {
      const auto point = calibrate_sigma(clean_test, *level.target_flip, noise_seed, c.calibration_encoder, threads);
      r.sigma = point.sigma;
      r.target_flip = level.target_flip;
      r.measured_flip = point.flip_fraction;
    }
    out.push_back(r);
  }
  return out;
}

/// Renders the dataset into `dir` and writes `dir/manifest.json` last.
inline DatasetManifest generate_dataset(const DatasetConfig& c, const std::filesystem::path& dir, unsigned threads = 1) {
  validate(c);
  const auto train = c.train_per_class();
  const auto test = c.test_per_class();
  DatasetManifest m;
  m.seed = c.seed;
  m.noise_seed = dataset_noise_seed(c.seed);
  m.config = to_json(c);

  const auto clean_test = render_test_videos(c, threads);
  m.noise = resolve_noise(c, clean_test, threads);

  for (std::uint16_t cls = 0; cls < c.classes; ++cls) {
    for (std::uint32_t i = 0; i < c.videos_per_class; ++i) {
      const bool is_train = i < train;
      const std::string name = video_filename(cls, i);
      if (is_train) {
        m.entries.push_back({"train/" + name, cls, Split::train, i, -1});
        continue;
      }
      m.entries.push_back({"test/clean/" + name, cls, Split::test, i, -1});
      for (std::size_t l = 0; l < m.noise.size(); ++l) {
        m.entries.push_back({"test/noise_" + std::to_string(l) + "/" + name, cls, Split::test, i, static_cast<int>(l)});
      }
    }
  }

  parallel_for(m.entries.size(), threads, [&](std::size_t e) {
    const auto& entry = m.entries[e];
    Video v;
    if (entry.split == Split::train) {
      v = generate_video(entry.class_id, c.frame_count, c.width, c.height, video_seed(c.seed, entry.class_id, entry.video_index),
                         c.render);
    } else {
      const auto& clean = clean_test[static_cast<std::size_t>(entry.class_id) * test + (entry.video_index - train)];
      v = entry.noise_level < 0 ? clean : add_gaussian_noise(clean, m.noise[static_cast<std::size_t>(entry.noise_level)].sigma, m.noise_seed);
    }
    write_video(v, dir / entry.path);
  });
  write_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace htmvid

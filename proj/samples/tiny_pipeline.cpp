// Smallest end-to-end run: render a few clips in memory, train one pooler per
// class, and compare against the raw-encoder baseline.

#include <cstdio>

#include "htmvid/pipeline.hpp"

int main() {
  using namespace htmvid;
  EncoderConfig enc;
  enc.block_size = 5;
  enc.threshold_c = -10;

  DatasetConfig data;
  data.classes = 4;
  data.videos_per_class = 10;
  data.frame_count = 16;
  data.seed = 7;
  data.render.object_scale = 0.5;
  data.calibration_encoder = enc;
  data.noise = {{std::nullopt, 0.13}};

  ExperimentConfig cfg;
  cfg.mode = Mode::multiple;
  cfg.seed = 7;
  cfg.threads = 4;
  cfg.traces = false;
  cfg.encoder = enc;
  cfg.sp.columns = 256;
  cfg.sp.synapses_per_column = 1920;
  cfg.sp.min_overlap = 4;
  cfg.sp.winners_set_size = 20;

  const auto encoded = build_encoded(data, enc, cfg.threads);
  const auto result = run_on_encoded(cfg, encoded);
  std::fputs(to_text(result.report).c_str(), stdout);
}

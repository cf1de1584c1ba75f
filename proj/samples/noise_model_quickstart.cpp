// Signal and noise match probabilities for one pooler column, with a Monte Carlo check.

#include <cstdio>
#include <vector>

#include "htmvid/pipeline.hpp"

int main() {
  using namespace htmvid;
  std::vector<NoiseModelRow> rows;
  for (std::uint32_t w : {0U, 250U, 460U}) {
    PropagationParams p;
    p.n = 1920;
    p.n_b = 192;
    p.s = 64;
    p.c = 2048;
    p.m = 1.0;
    p.o_m = 8;
    p.w = w;
    p.w_b = w / 2;
    rows.push_back(analyse_noise_model(p, 20000, 1));
  }
  std::fputs(to_text(rows).c_str(), stdout);
}

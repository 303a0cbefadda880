#pragma once

#include <random>
#include <string>
#include <vector>

#include "kolnet/netvm.hpp"

namespace kolnet::testing {

// Seeded random valid network: mixed layer kinds, no duplicate coordinates,
// alphabet values only. Exactly `w` non-zero parameters when the coordinate
// space allows it.
inline Network random_network(std::mt19937_64& rng, const PrecisionSpec& spec,
                              uint64_t w, int32_t max_d, int32_t max_p,
                              bool allow_attention) {
  Network net;
  net.spec = spec;
  net.width = 3 + int32_t(rng() % uint64_t(std::max(1, max_d - 2)));
  net.positions = 1 + int32_t(rng() % uint64_t(std::max(1, max_p)));
  int layers = 1 + int(rng() % 3);
  std::vector<int> kinds;
  for (int i = 0; i < layers; ++i) {
    int kind = int(rng() % (allow_attention ? 3 : 2));  // 0 aff, 1 pb, 2 attn
    kinds.push_back(kind);
    if (kind == 0) net.layers.emplace_back(TiedAffine{});
    if (kind == 1) net.layers.emplace_back(PerPositionBias{});
    if (kind == 2) net.layers.emplace_back(HardAttention{});
  }
  auto value = [&]() {
    int64_t mq = spec.mag_quanta();
    int64_t q = int64_t(rng() % uint64_t(2 * mq)) - mq;
    return q >= 0 ? q + 1 : q;
  };
  const int32_t d = net.width, p = net.positions;
  uint64_t placed = 0, guard = 0;
  while (placed < w && ++guard < w * 40 + 400) {
    size_t li = rng() % net.layers.size();
    LayerSpec& ls = net.layers[li];
    if (auto* aff = std::get_if<TiedAffine>(&ls)) {
      if (rng() % 4 == 0) {
        int32_t ch = 1 + int32_t(rng() % uint64_t(d));
        bool dup = false;
        for (auto& b : aff->biases) dup |= b.ch == ch;
        if (dup) continue;
        aff->biases.push_back({ch, value()});
      } else {
        // occasionally read the position block
        int32_t src = (rng() % 8 == 0) ? d + 1 + int32_t(rng() % uint64_t(p))
                                       : 1 + int32_t(rng() % uint64_t(d));
        int32_t tgt = 1 + int32_t(rng() % uint64_t(d));
        bool dup = false;
        for (auto& ww : aff->weights) dup |= ww.src == src && ww.tgt == tgt;
        if (dup) continue;
        aff->weights.push_back({src, tgt, value()});
      }
    } else if (auto* pb = std::get_if<PerPositionBias>(&ls)) {
      int32_t pos = 1 + int32_t(rng() % uint64_t(p));
      int32_t ch = 1 + int32_t(rng() % uint64_t(d));
      bool dup = false;
      for (auto& e : pb->entries) dup |= e.pos == pos && e.ch == ch;
      if (dup) continue;
      pb->entries.push_back({pos, ch, value()});
    } else if (auto* attn = std::get_if<HardAttention>(&ls)) {
      auto* mat = &attn->query;
      switch (rng() % 4) {
        case 0: mat = &attn->query; break;
        case 1: mat = &attn->key; break;
        case 2: mat = &attn->value; break;
        default: mat = &attn->output; break;
      }
      bool is_output = mat == &attn->output;
      int32_t src = is_output || rng() % 6 != 0
                        ? 1 + int32_t(rng() % uint64_t(d))
                        : d + 1 + int32_t(rng() % uint64_t(p));
      int32_t tgt = 1 + int32_t(rng() % uint64_t(d));
      bool dup = false;
      for (auto& ww : *mat) dup |= ww.src == src && ww.tgt == tgt;
      if (dup) continue;
      mat->push_back({src, tgt, value()});
    }
    ++placed;
  }
  return net;
}

// Fifty RM-4 programs: straight-line output, loops, register arithmetic,
// nested loops, jumps past the end. All halt well within 1000 steps and
// keep registers below 64.
inline std::vector<std::string> program_corpus() {
  std::vector<std::string> corpus = {
      "HALT",
      "OUT0 HALT",
      "OUT1 HALT",
      "OUT1",
      "OUT0 OUT1 HALT",
      "OUT1 OUT1 OUT0 OUT1 HALT",
      "OUT0 OUT0 OUT0 OUT0 OUT0 HALT",
      "OUT1 OUT0 OUT1 OUT0 OUT1 OUT0 HALT",
      "JMP 1 HALT",
      "JMP 2 OUT1 HALT",
      "JMP 3 OUT0 HALT OUT1 JMP 1",
      "JMP 4 OUT1 OUT1 HALT JMP 1",
      "INC r0 HALT",
      "INC r0 INC r0 INC r1 HALT",
      "INC r3 DECJZ r3 3 OUT1 HALT",
      "DECJZ r0 2 OUT0 HALT",
      "DECJZ r1 3 OUT1 HALT OUT0 HALT",
      "INC r0 DECJZ r0 4 OUT1 JMP 1",
      "INC r0 INC r0 DECJZ r0 5 OUT1 JMP 2 HALT",
      "INC r0 INC r0 INC r0 DECJZ r0 6 OUT1 JMP 3 HALT",
      "INC r1 INC r1 INC r1 INC r1 DECJZ r1 7 OUT0 JMP 4 OUT1 HALT",
      "INC r2 INC r2 DECJZ r2 5 OUT1 JMP 2 OUT0 OUT0 HALT",
      "INC r0 INC r0 INC r0 INC r0 INC r0 DECJZ r0 8 OUT1 JMP 5 HALT",
      "OUT1 INC r0 INC r0 DECJZ r0 6 OUT0 JMP 3 OUT1 HALT",
      "INC r3 INC r3 INC r3 DECJZ r3 6 OUT0 JMP 3 OUT1 OUT1 HALT",
      "INC r0 DECJZ r1 4 OUT0 HALT OUT1 HALT",
      "DECJZ r2 3 OUT1 JMP 0 OUT0 HALT",
      "INC r0 INC r1 DECJZ r0 5 OUT1 JMP 2 DECJZ r1 8 OUT0 JMP 5 HALT",
      "INC r0 INC r0 INC r0 INC r0 DECJZ r0 7 OUT0 JMP 4 OUT1 OUT1 HALT",
      "JMP 5 OUT1 OUT1 OUT1 HALT OUT0 JMP 1",
      "INC r1 DECJZ r1 4 OUT1 JMP 1 DECJZ r0 7 OUT0 JMP 4 HALT",
      "OUT0 OUT1 OUT1 OUT0 OUT0 OUT1 HALT",
      "INC r0 INC r0 INC r0 INC r0 INC r0 INC r0 DECJZ r0 9 OUT1 JMP 6 HALT",
      "INC r2 DECJZ r2 4 OUT0 JMP 1 OUT1 HALT",
      "DECJZ r3 2 JMP 0 OUT1 OUT0 HALT",
      "INC r0 INC r1 INC r2 INC r3 OUT1 HALT",
      "INC r0 DECJZ r0 3 JMP 1 OUT1 OUT1 HALT",
      "OUT1 JMP 3 HALT OUT0 JMP 2",
      "INC r1 INC r1 INC r1 INC r1 INC r1 DECJZ r1 8 OUT1 JMP 5 OUT0 HALT",
      "INC r0 INC r0 INC r0 INC r0 INC r0 INC r0 INC r0 DECJZ r0 10 OUT0 "
      "JMP 7 HALT",
      "JMP 6 INC r0 OUT1 DECJZ r0 5 JMP 2 HALT JMP 1",
      "INC r0 INC r0 INC r0 DECJZ r0 6 INC r1 JMP 3 DECJZ r1 9 OUT1 JMP 6 "
      "HALT",
      "OUT0 INC r3 INC r3 DECJZ r3 6 OUT1 JMP 3 HALT",
      "INC r0 INC r0 INC r0 INC r0 INC r0 INC r0 INC r0 INC r0 DECJZ r0 11 "
      "OUT1 JMP 8 HALT",
      "DECJZ r0 2 JMP 4 OUT1 HALT OUT0 HALT",
      "INC r1 INC r2 DECJZ r1 5 OUT0 JMP 2 DECJZ r2 8 OUT1 JMP 5 HALT",
      "OUT1 OUT0 JMP 4 HALT OUT0 OUT1 HALT",
      "INC r0 DECJZ r0 4 OUT1 JMP 1 INC r1 DECJZ r1 8 OUT0 JMP 5 HALT",
      "INC r2 INC r2 INC r2 INC r2 DECJZ r2 7 OUT1 JMP 4 OUT0 OUT0 OUT1 HALT",
      "OUT0 OUT0 OUT1 OUT1 OUT0 OUT1 OUT0 OUT1 HALT",
  };
  return corpus;
}

}  // namespace kolnet::testing

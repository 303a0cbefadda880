#include "kolnet/netvm.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

namespace kolnet {

namespace {

using i128 = __int128;

int64_t round_half_away(i128 num, i128 den) {
  // den > 0; rounds num/den to the nearest integer, halves away from zero.
  bool neg = num < 0;
  i128 a = neg ? -num : num;
  i128 q = (2 * a + den) / (2 * den);
  return int64_t(neg ? -q : q);
}

int64_t clip(int64_t v, int64_t bound) {
  return std::max(-bound, std::min(bound, v));
}

struct AffineTargetPlan {
  int32_t tgt;
  int64_t bias;
  std::vector<WeightEntry> terms;
};

struct AffinePlan {
  std::vector<AffineTargetPlan> targets;
};

struct AttnPlan {
  const HardAttention* spec;
  // Channels that appear as targets of both Q and K; only these can
  // contribute to a score.
  std::vector<int32_t> score_channels;
  std::vector<int32_t> out_targets;  // distinct O targets
};

struct PosBiasPlan {
  const PerPositionBias* spec;
};

using LayerPlan = std::variant<AffinePlan, AttnPlan, PosBiasPlan>;

struct ExecPlan {
  int32_t positions, width;
  int64_t act_q;       // clip bound in quanta
  int64_t delta_num;   // delta = num/den, lowest terms
  int64_t delta_den;
  std::vector<LayerPlan> layers;

  // Scratch reused across iterations.
  mutable std::vector<i128> qbuf, kbuf;
  mutable std::vector<int64_t> vbuf, obuf;
  mutable std::vector<std::vector<int32_t>> qnz;
};

ExecPlan build_plan(const Network& net) {
  ExecPlan plan;
  plan.positions = net.positions;
  plan.width = net.width;
  plan.act_q = net.spec.act_quanta();
  plan.delta_num = numerator(net.spec.delta()).convert_to<int64_t>();
  plan.delta_den = denominator(net.spec.delta()).convert_to<int64_t>();
  for (const LayerSpec& layer : net.layers) {
    if (const auto* aff = std::get_if<TiedAffine>(&layer)) {
      AffinePlan ap;
      std::unordered_map<int32_t, size_t> index;
      auto slot = [&](int32_t tgt) -> AffineTargetPlan& {
        auto it = index.find(tgt);
        if (it == index.end()) {
          index.emplace(tgt, ap.targets.size());
          ap.targets.push_back(AffineTargetPlan{tgt, 0, {}});
          return ap.targets.back();
        }
        return ap.targets[it->second];
      };
      for (const WeightEntry& w : aff->weights) slot(w.tgt).terms.push_back(w);
      for (const BiasEntry& b : aff->biases) slot(b.ch).bias += b.q;
      plan.layers.emplace_back(std::move(ap));
    } else if (const auto* attn = std::get_if<HardAttention>(&layer)) {
      AttnPlan tp;
      tp.spec = attn;
      std::set<int32_t> qt, kt, ot;
      for (const WeightEntry& w : attn->query) qt.insert(w.tgt);
      for (const WeightEntry& w : attn->key) kt.insert(w.tgt);
      for (const WeightEntry& w : attn->output) ot.insert(w.tgt);
      std::set_intersection(qt.begin(), qt.end(), kt.begin(), kt.end(),
                            std::back_inserter(tp.score_channels));
      tp.out_targets.assign(ot.begin(), ot.end());
      plan.layers.emplace_back(std::move(tp));
    } else {
      plan.layers.emplace_back(
          PosBiasPlan{std::get_if<PerPositionBias>(&layer)});
    }
  }
  size_t sc_max = 0;
  for (const LayerPlan& lp : plan.layers) {
    if (const auto* tp = std::get_if<AttnPlan>(&lp)) {
      sc_max = std::max(sc_max, tp->score_channels.size());
    }
  }
  plan.qbuf.resize(size_t(plan.positions) * sc_max);
  plan.kbuf.resize(size_t(plan.positions) * sc_max);
  plan.vbuf.resize(size_t(plan.width) + 1);
  plan.obuf.resize(size_t(plan.width) + 1);
  plan.qnz.resize(plan.positions);
  return plan;
}

// Value of an augmented source at `pos` in delta units: state channels read
// the state; position sources carry 1 (i.e. the value delta) at their own
// position.
inline int64_t aug_value(const std::vector<int64_t>& state, int32_t width,
                         int32_t pos, int32_t src) {
  if (src <= width) return state[size_t(pos - 1) * width + (src - 1)];
  return (src - width) == pos ? 1 : 0;
}

void apply_affine(const ExecPlan& plan, const AffinePlan& ap,
                  const std::vector<int64_t>& in, std::vector<int64_t>& out) {
  const int32_t P = plan.positions, d = plan.width;
  const i128 num = plan.delta_num, den = plan.delta_den;
  for (int32_t pos = 1; pos <= P; ++pos) {
    for (const AffineTargetPlan& t : ap.targets) {
      i128 s = 0;  // sum of w_q * x_q over state sources, + w_q for pos hits
      for (const WeightEntry& w : t.terms) {
        s += i128(w.q) * aug_value(in, d, pos, w.src);
      }
      // pre / delta = delta * s + bias = (num*s + den*bias) / den
      i128 scaled = num * s + den * i128(t.bias);
      int64_t q = scaled <= 0 ? 0 : round_half_away(scaled, den);  // ReLU
      out[size_t(pos - 1) * d + (t.tgt - 1)] = clip(q, plan.act_q);
    }
  }
}

void apply_attention(const ExecPlan& plan, const AttnPlan& tp,
                     const std::vector<int64_t>& in,
                     std::vector<int64_t>& out) {
  const int32_t P = plan.positions, d = plan.width;
  const auto& sc = tp.score_channels;
  const size_t scn = sc.size();
  const i128 num = plan.delta_num, den = plan.delta_den;

  // Projected queries/keys restricted to channels that can score.
  std::fill(plan.qbuf.begin(), plan.qbuf.begin() + size_t(P) * scn, 0);
  std::fill(plan.kbuf.begin(), plan.kbuf.begin() + size_t(P) * scn, 0);
  std::unordered_map<int32_t, size_t> scidx;
  for (size_t i = 0; i < scn; ++i) scidx.emplace(sc[i], i);
  auto project = [&](const std::vector<WeightEntry>& mat,
                     std::vector<i128>& buf) {
    for (const WeightEntry& w : mat) {
      auto it = scidx.find(w.tgt);
      if (it == scidx.end()) continue;
      for (int32_t pos = 1; pos <= P; ++pos) {
        int64_t x = aug_value(in, d, pos, w.src);
        if (x) buf[size_t(pos - 1) * scn + it->second] += i128(w.q) * x;
      }
    }
  };
  project(tp.spec->query, plan.qbuf);
  project(tp.spec->key, plan.kbuf);

  for (int32_t pos = 1; pos <= P; ++pos) {
    auto& nz = plan.qnz[pos - 1];
    nz.clear();
    for (size_t i = 0; i < scn; ++i) {
      if (plan.qbuf[size_t(pos - 1) * scn + i] != 0) nz.push_back(int32_t(i));
    }
  }

  for (int32_t pos = 1; pos <= P; ++pos) {
    // argmax_j score(pos, j), lowest index wins ties
    int32_t best_j = 1;
    i128 best_score = 0;
    bool first = true;
    for (int32_t j = 1; j <= P; ++j) {
      i128 score = 0;
      for (int32_t i : plan.qnz[pos - 1]) {
        score += plan.qbuf[size_t(pos - 1) * scn + i] *
                 plan.kbuf[size_t(j - 1) * scn + i];
      }
      if (first || score > best_score) {
        best_score = score;
        best_j = j;
        first = false;
      }
    }
    // v = V * aug(best_j); o = O * v, in delta^3 units
    std::fill(plan.vbuf.begin(), plan.vbuf.end(), 0);
    for (const WeightEntry& w : tp.spec->value) {
      int64_t x = aug_value(in, d, best_j, w.src);
      if (x) plan.vbuf[w.tgt] += w.q * x;
    }
    std::fill(plan.obuf.begin(), plan.obuf.end(), 0);
    for (const WeightEntry& w : tp.spec->output) {
      if (plan.vbuf[w.src]) plan.obuf[w.tgt] += w.q * plan.vbuf[w.src];
    }
    for (int32_t tgt : tp.out_targets) {
      // x + o = (den^2 * x_q + num^2 * o_q) / den^2 in delta units
      i128 scaled = den * den * i128(out[size_t(pos - 1) * d + (tgt - 1)]) +
                    num * num * i128(plan.obuf[tgt]);
      int64_t q = round_half_away(scaled, den * den);
      out[size_t(pos - 1) * d + (tgt - 1)] = clip(q, plan.act_q);
    }
  }
}

void apply_posbias(const ExecPlan& plan, const PosBiasPlan& pp,
                   std::vector<int64_t>& out) {
  const int32_t d = plan.width;
  for (const PosBiasEntry& e : pp.spec->entries) {
    int64_t& slot = out[size_t(e.pos - 1) * d + (e.ch - 1)];
    slot = clip(slot + e.q, plan.act_q);
  }
}

void step_inplace(const ExecPlan& plan, std::vector<int64_t>& state,
                  std::vector<int64_t>& scratch) {
  for (const LayerPlan& lp : plan.layers) {
    if (const auto* ap = std::get_if<AffinePlan>(&lp)) {
      scratch = state;
      apply_affine(plan, *ap, state, scratch);
      state.swap(scratch);
    } else if (const auto* tp = std::get_if<AttnPlan>(&lp)) {
      scratch = state;
      apply_attention(plan, *tp, state, scratch);
      state.swap(scratch);
    } else {
      apply_posbias(plan, *std::get_if<PosBiasPlan>(&lp), state);
    }
  }
}

}  // namespace

std::string Violation::to_string() const {
  std::string s = "layer " + std::to_string(layer) + ": " + rule;
  if (!where.empty()) s += " (" + where + ")";
  return s;
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::halted: return "halted";
    case StopReason::budget_exhausted: return "budget-exhausted";
    case StopReason::output_limit: return "output-limit";
  }
  return "?";
}

namespace {

void check_entry_value(std::vector<Violation>& out, int32_t layer, int64_t q,
                       int64_t mag_q, const std::string& where) {
  if (q == 0) {
    out.push_back({layer, "explicit zero entry", where});
  } else if (q < -mag_q || q > mag_q) {
    out.push_back({layer, "value outside alphabet", where});
  }
}

void check_weights(std::vector<Violation>& out, int32_t layer,
                   const std::vector<WeightEntry>& ws, int64_t mag_q,
                   int32_t src_max, int32_t tgt_max, const char* tag) {
  std::set<std::pair<int32_t, int32_t>> seen;
  for (const WeightEntry& w : ws) {
    std::string where = std::string(tag) + " " + std::to_string(w.src) +
                        "->" + std::to_string(w.tgt);
    check_entry_value(out, layer, w.q, mag_q, where);
    if (w.src < 1 || w.src > src_max) {
      out.push_back({layer, "source index out of range", where});
    }
    if (w.tgt < 1 || w.tgt > tgt_max) {
      out.push_back({layer, "target index out of range", where});
    }
    if (!seen.emplace(w.src, w.tgt).second) {
      out.push_back({layer, "duplicate coordinate", where});
    }
  }
}

}  // namespace

std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  if (net.positions < 1) out.push_back({0, "P must be >= 1", ""});
  if (net.width < 3) out.push_back({0, "d must be >= 3", ""});
  const int64_t mag_q = net.spec.mag_quanta();
  const int32_t d = net.width;
  const int32_t aug = net.width + net.positions;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    int32_t layer = int32_t(li) + 1;
    const LayerSpec& ls = net.layers[li];
    if (const auto* aff = std::get_if<TiedAffine>(&ls)) {
      check_weights(out, layer, aff->weights, mag_q, aug, d, "w");
      std::set<int32_t> seen;
      for (const BiasEntry& b : aff->biases) {
        std::string where = "b " + std::to_string(b.ch);
        check_entry_value(out, layer, b.q, mag_q, where);
        if (b.ch < 1 || b.ch > d) {
          out.push_back({layer, "target index out of range", where});
        }
        if (!seen.insert(b.ch).second) {
          out.push_back({layer, "duplicate coordinate", where});
        }
      }
    } else if (const auto* attn = std::get_if<HardAttention>(&ls)) {
      check_weights(out, layer, attn->query, mag_q, aug, d, "q");
      check_weights(out, layer, attn->key, mag_q, aug, d, "k");
      check_weights(out, layer, attn->value, mag_q, aug, d, "v");
      check_weights(out, layer, attn->output, mag_q, d, d, "o");
    } else if (const auto* pb = std::get_if<PerPositionBias>(&ls)) {
      std::set<std::pair<int32_t, int32_t>> seen;
      for (const PosBiasEntry& e : pb->entries) {
        std::string where = "pb " + std::to_string(e.pos) + "," +
                            std::to_string(e.ch);
        check_entry_value(out, layer, e.q, mag_q, where);
        if (e.pos < 1 || e.pos > net.positions) {
          out.push_back({layer, "position index out of range", where});
        }
        if (e.ch < 1 || e.ch > d) {
          out.push_back({layer, "target index out of range", where});
        }
        if (!seen.emplace(e.pos, e.ch).second) {
          out.push_back({layer, "duplicate coordinate", where});
        }
      }
    }
  }
  return out;
}

StateMatrix step(const Network& net, const StateMatrix& state) {
  if (state.positions != net.positions || state.width != net.width) {
    throw std::invalid_argument("step: state shape mismatch");
  }
  ExecPlan plan = build_plan(net);
  StateMatrix next = state;
  std::vector<int64_t> scratch;
  step_inplace(plan, next.q, scratch);
  return next;
}

RunResult run(const Network& net, uint64_t step_budget,
              uint64_t output_limit) {
  if (step_budget < 1 || output_limit < 1) {
    throw std::invalid_argument("run: budgets must be >= 1");
  }
  ExecPlan plan = build_plan(net);
  std::vector<int64_t> state(size_t(net.positions) * net.width, 0);
  std::vector<int64_t> scratch;
  const size_t halt_i = kHaltChannel - 1, emit_i = kEmitChannel - 1,
               bit_i = kBitChannel - 1;
  RunResult result;
  for (uint64_t t = 1; t <= step_budget; ++t) {
    step_inplace(plan, state, scratch);
    result.iterations = t;
    if (state[halt_i] > 0) {
      result.halted = true;
      result.reason = StopReason::halted;
      return result;
    }
    if (state[emit_i] > 0) {
      result.output.push_back(state[bit_i] > 0 ? '1' : '0');
      if (result.output.size() >= output_limit) {
        result.reason = StopReason::output_limit;
        return result;
      }
    }
  }
  result.reason = StopReason::budget_exhausted;
  return result;
}

uint64_t nonzero_count(const Network& net) {
  uint64_t w = 0;
  for (const LayerSpec& ls : net.layers) {
    if (const auto* aff = std::get_if<TiedAffine>(&ls)) {
      w += aff->weights.size() + aff->biases.size();
    } else if (const auto* attn = std::get_if<HardAttention>(&ls)) {
      w += attn->query.size() + attn->key.size() + attn->value.size() +
           attn->output.size();
    } else if (const auto* pb = std::get_if<PerPositionBias>(&ls)) {
      w += pb->entries.size();
    }
  }
  return w;
}

struct Runner::Impl {
  ExecPlan plan;
  std::vector<int64_t> scratch;
};

Runner::Runner(const Network& net)
    : impl_(std::make_unique<Impl>(Impl{build_plan(net), {}})),
      state_(StateMatrix::zeros(net.positions, net.width)) {}

Runner::~Runner() = default;
Runner::Runner(Runner&&) noexcept = default;
Runner& Runner::operator=(Runner&&) noexcept = default;

void Runner::advance() {
  step_inplace(impl_->plan, state_.q, impl_->scratch);
  ++iteration_;
}

std::optional<CycleInfo> find_cycle(const Network& net,
                                    uint64_t max_iterations) {
  ExecPlan plan = build_plan(net);
  std::vector<int64_t> state(size_t(net.positions) * net.width, 0);
  std::vector<int64_t> scratch;
  std::unordered_map<uint64_t, std::vector<std::pair<uint64_t,
                     std::vector<int64_t>>>> seen;
  auto hash_state = [](const std::vector<int64_t>& s) {
    uint64_t h = 1469598103934665603ull;
    for (int64_t v : s) {
      h ^= uint64_t(v);
      h *= 1099511628211ull;
    }
    return h;
  };
  seen[hash_state(state)].push_back({0, state});
  const size_t halt_i = kHaltChannel - 1;
  for (uint64_t t = 1; t <= max_iterations; ++t) {
    step_inplace(plan, state, scratch);
    if (state[halt_i] > 0) return std::nullopt;  // halts: no cycle claim
    auto& bucket = seen[hash_state(state)];
    for (const auto& [t0, s0] : bucket) {
      if (s0 == state) return CycleInfo{t0, t - t0};
    }
    bucket.push_back({t, state});
  }
  return std::nullopt;
}

}  // namespace kolnet

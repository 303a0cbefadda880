#include "kolnet/codec.hpp"

#include <algorithm>
#include <map>

namespace kolnet {

namespace {

constexpr uint32_t kKindAffine = 0;
constexpr uint32_t kKindAttn = 1;
constexpr uint32_t kKindPosBias = 2;

bool has_attention(const Network& net) {
  for (const LayerSpec& ls : net.layers) {
    if (std::holds_alternative<HardAttention>(ls)) return true;
  }
  return false;
}

bool layer_empty(const LayerSpec& ls) {
  if (const auto* aff = std::get_if<TiedAffine>(&ls)) {
    return aff->weights.empty() && aff->biases.empty();
  }
  if (const auto* attn = std::get_if<HardAttention>(&ls)) {
    return attn->query.empty() && attn->key.empty() && attn->value.empty() &&
           attn->output.empty();
  }
  return std::get_if<PerPositionBias>(&ls)->entries.empty();
}

}  // namespace

Network prune(const Network& net) {
  const int32_t d = net.width, P = net.positions;
  std::vector<bool> ch_used(size_t(d) + 1, false);
  std::vector<bool> pos_used(size_t(P) + 1, false);
  ch_used[kHaltChannel] = ch_used[kEmitChannel] = ch_used[kBitChannel] = true;
  pos_used[1] = true;

  auto touch_src = [&](int32_t src) {
    if (src <= d) {
      ch_used[src] = true;
    } else {
      pos_used[src - d] = true;
    }
  };
  for (const LayerSpec& ls : net.layers) {
    if (const auto* aff = std::get_if<TiedAffine>(&ls)) {
      for (const WeightEntry& w : aff->weights) {
        touch_src(w.src);
        ch_used[w.tgt] = true;
      }
      for (const BiasEntry& b : aff->biases) ch_used[b.ch] = true;
    } else if (const auto* attn = std::get_if<HardAttention>(&ls)) {
      for (const auto* mat :
           {&attn->query, &attn->key, &attn->value, &attn->output}) {
        for (const WeightEntry& w : *mat) {
          touch_src(w.src);
          ch_used[w.tgt] = true;
        }
      }
    } else if (const auto* pb = std::get_if<PerPositionBias>(&ls)) {
      for (const PosBiasEntry& e : pb->entries) {
        pos_used[e.pos] = true;
        ch_used[e.ch] = true;
      }
    }
  }
  if (has_attention(net)) {
    std::fill(pos_used.begin() + 1, pos_used.end(), true);
  }

  std::vector<int32_t> ch_map(size_t(d) + 1, 0), pos_map(size_t(P) + 1, 0);
  int32_t new_d = 0, new_p = 0;
  for (int32_t c = 1; c <= d; ++c) {
    if (ch_used[c]) ch_map[c] = ++new_d;
  }
  for (int32_t p = 1; p <= P; ++p) {
    if (pos_used[p]) pos_map[p] = ++new_p;
  }

  auto map_src = [&](int32_t src) {
    return src <= d ? ch_map[src] : new_d + pos_map[src - d];
  };
  Network out;
  out.spec = net.spec;
  out.width = new_d;
  out.positions = new_p;
  for (const LayerSpec& ls : net.layers) {
    if (layer_empty(ls)) continue;
    if (const auto* aff = std::get_if<TiedAffine>(&ls)) {
      TiedAffine na;
      for (const WeightEntry& w : aff->weights) {
        na.weights.push_back({map_src(w.src), ch_map[w.tgt], w.q});
      }
      for (const BiasEntry& b : aff->biases) {
        na.biases.push_back({ch_map[b.ch], b.q});
      }
      out.layers.emplace_back(std::move(na));
    } else if (const auto* attn = std::get_if<HardAttention>(&ls)) {
      HardAttention na;
      auto remap = [&](const std::vector<WeightEntry>& in,
                       std::vector<WeightEntry>& dst) {
        for (const WeightEntry& w : in) {
          dst.push_back({map_src(w.src), ch_map[w.tgt], w.q});
        }
      };
      remap(attn->query, na.query);
      remap(attn->key, na.key);
      remap(attn->value, na.value);
      remap(attn->output, na.output);
      out.layers.emplace_back(std::move(na));
    } else if (const auto* pb = std::get_if<PerPositionBias>(&ls)) {
      PerPositionBias np;
      for (const PosBiasEntry& e : pb->entries) {
        np.entries.push_back({pos_map[e.pos], ch_map[e.ch], e.q});
      }
      out.layers.emplace_back(std::move(np));
    }
  }
  return out;
}

uint64_t length_bound(uint64_t w) {
  return 3 * w * ceil_log2_u64(w) + kLengthLawPerTuple * w +
         kLengthLawConstant;
}

namespace {

struct Widths {
  uint32_t layer, src, ch, pos, val;
};

Widths field_widths(uint64_t d, uint64_t p, uint64_t layers,
                    uint64_t alphabet) {
  Widths w;
  w.layer = layers <= 1 ? 0 : ceil_log2_u64(layers);
  w.src = ceil_log2_u64(d + p + 1);  // 0 reserved for bias source
  w.ch = ceil_log2_u64(d);
  w.pos = p <= 1 ? 0 : ceil_log2_u64(p);
  w.val = ceil_log2_u64(alphabet);
  return w;
}

}  // namespace

std::pair<BitString, EncodingStats> encode(const Network& net) {
  const uint64_t w_count = nonzero_count(net);
  if (w_count > UINT64_MAX - 2) {
    throw std::invalid_argument("encode: parameter count exceeds capacity");
  }
  const uint64_t d = uint64_t(net.width), p = uint64_t(net.positions);
  const uint64_t layers = net.layers.size();
  BitString bits;
  bits.append_elias_delta(w_count + 1);
  bits.append_elias_delta(d);
  bits.append_elias_delta(p);
  bits.append_elias_delta(layers + 1);
  uint32_t kinds = 0;
  for (const LayerSpec& ls : net.layers) {
    if (std::holds_alternative<TiedAffine>(ls)) kinds |= 4;
    if (std::holds_alternative<HardAttention>(ls)) kinds |= 2;
    if (std::holds_alternative<PerPositionBias>(ls)) kinds |= 1;
  }
  bits.append_uint(uint64_t(net.spec.preset()), 3);
  bits.append_uint(kinds, 3);
  bits.append_uint(0, 2);
  EncodingStats stats;
  stats.w = w_count;
  stats.header_bits = bits.size();

  const Widths fw = field_widths(d, p, layers, net.spec.alphabet_size());
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const LayerSpec& ls = net.layers[li];
    auto tuple_head = [&](uint32_t kind) {
      bits.append_uint(li, fw.layer);
      bits.append_uint(kind, 2);
    };
    auto val_field = [&](int64_t q) {
      bits.append_uint(net.spec.quanta_to_index(q), fw.val);
    };
    if (const auto* aff = std::get_if<TiedAffine>(&ls)) {
      for (const WeightEntry& we : aff->weights) {
        tuple_head(kKindAffine);
        bits.append_uint(uint64_t(we.src), fw.src);
        bits.append_uint(uint64_t(we.tgt) - 1, fw.ch);
        val_field(we.q);
      }
      for (const BiasEntry& be : aff->biases) {
        tuple_head(kKindAffine);
        bits.append_uint(0, fw.src);  // bias source
        bits.append_uint(uint64_t(be.ch) - 1, fw.ch);
        val_field(be.q);
      }
    } else if (const auto* attn = std::get_if<HardAttention>(&ls)) {
      const std::vector<WeightEntry>* mats[4] = {&attn->query, &attn->key,
                                                 &attn->value, &attn->output};
      for (uint32_t m = 0; m < 4; ++m) {
        for (const WeightEntry& we : *mats[m]) {
          tuple_head(kKindAttn);
          bits.append_uint(m, 2);
          bits.append_uint(uint64_t(we.src), fw.src);
          bits.append_uint(uint64_t(we.tgt) - 1, fw.ch);
          val_field(we.q);
        }
      }
    } else if (const auto* pb = std::get_if<PerPositionBias>(&ls)) {
      for (const PosBiasEntry& e : pb->entries) {
        tuple_head(kKindPosBias);
        bits.append_uint(uint64_t(e.pos) - 1, fw.pos);
        bits.append_uint(uint64_t(e.ch) - 1, fw.ch);
        val_field(e.q);
      }
    }
  }
  stats.total_bits = bits.size();
  stats.tuple_bits = stats.total_bits - stats.header_bits;
  stats.bound_value = length_bound(w_count);
  return {std::move(bits), stats};
}

Network decode(const BitString& bits, const PrecisionSpec& spec) {
  BitReader r(bits);
  const uint64_t w_plus = r.read_elias_delta("W+1");
  if (w_plus < 1) throw ParseError("W+1", 0, "must be >= 1");
  const uint64_t w_count = w_plus - 1;
  const uint64_t d = r.read_elias_delta("d");
  const uint64_t p = r.read_elias_delta("P");
  const uint64_t layers_plus = r.read_elias_delta("L+1");
  const uint64_t layers = layers_plus - 1;
  if (d < 3) throw ParseError("d", r.position(), "width below 3");
  if (p < 1) throw ParseError("P", r.position(), "positions below 1");
  const uint64_t preset = r.read_uint(3, "preset");
  r.read_uint(3, "kinds");
  if (r.read_uint(2, "reserved") != 0) {
    throw ParseError("reserved", r.position(), "non-zero reserved bits");
  }
  if (preset != uint64_t(Preset::custom) &&
      preset != uint64_t(spec.preset())) {
    throw ParseError("preset", r.position(), "precision preset mismatch");
  }
  if (d > 1u << 24 || p > 1u << 24 || layers > 1u << 20) {
    throw ParseError("header", r.position(), "implausible header");
  }

  Network net;
  net.spec = spec;
  net.width = int32_t(d);
  net.positions = int32_t(p);
  net.layers.resize(layers, LayerSpec{TiedAffine{}});
  std::vector<int> kind_of(layers, -1);

  const Widths fw = field_widths(d, p, layers, spec.alphabet_size());
  for (uint64_t i = 0; i < w_count; ++i) {
    const uint64_t li = r.read_uint(fw.layer, "layer");
    if (li >= layers) {
      throw ParseError("layer", r.position(), "layer index out of range");
    }
    const uint64_t kind = r.read_uint(2, "kind");
    if (kind > kKindPosBias) {
      throw ParseError("kind", r.position(), "invalid kind-tag");
    }
    if (kind_of[li] == -1) {
      kind_of[li] = int(kind);
      if (kind == kKindAttn) net.layers[li] = HardAttention{};
      if (kind == kKindPosBias) net.layers[li] = PerPositionBias{};
    } else if (kind_of[li] != int(kind)) {
      throw ParseError("kind", r.position(), "conflicting layer kinds");
    }
    auto read_val = [&]() {
      uint64_t idx = r.read_uint(fw.val, "value");
      if (idx >= spec.alphabet_size()) {
        throw ParseError("value", r.position(), "value index out of range");
      }
      return spec.index_to_quanta(idx);
    };
    if (kind == kKindAffine) {
      const uint64_t src = r.read_uint(fw.src, "source");
      if (src > d + p) {
        throw ParseError("source", r.position(), "source index out of range");
      }
      const uint64_t tgt = r.read_uint(fw.ch, "target") + 1;
      if (tgt > d) {
        throw ParseError("target", r.position(), "target index out of range");
      }
      int64_t q = read_val();
      auto& aff = std::get<TiedAffine>(net.layers[li]);
      if (src == 0) {
        aff.biases.push_back({int32_t(tgt), q});
      } else {
        aff.weights.push_back({int32_t(src), int32_t(tgt), q});
      }
    } else if (kind == kKindAttn) {
      const uint64_t mat = r.read_uint(2, "matrix");
      const uint64_t src = r.read_uint(fw.src, "source");
      if (src < 1 || src > d + p) {
        throw ParseError("source", r.position(), "source index out of range");
      }
      const uint64_t tgt = r.read_uint(fw.ch, "target") + 1;
      if (tgt > d) {
        throw ParseError("target", r.position(), "target index out of range");
      }
      int64_t q = read_val();
      auto& attn = std::get<HardAttention>(net.layers[li]);
      WeightEntry we{int32_t(src), int32_t(tgt), q};
      switch (mat) {
        case 0: attn.query.push_back(we); break;
        case 1: attn.key.push_back(we); break;
        case 2: attn.value.push_back(we); break;
        default: attn.output.push_back(we); break;
      }
    } else {
      const uint64_t pos = r.read_uint(fw.pos, "position") + 1;
      if (pos > p) {
        throw ParseError("position", r.position(),
                         "position index out of range");
      }
      const uint64_t ch = r.read_uint(fw.ch, "channel") + 1;
      if (ch > d) {
        throw ParseError("channel", r.position(), "channel index out of range");
      }
      int64_t q = read_val();
      auto& pb = std::get<PerPositionBias>(net.layers[li]);
      pb.entries.push_back({int32_t(pos), int32_t(ch), q});
    }
  }
  // Byte-alignment padding of up to 7 zero bits is accepted.
  if (r.remaining() >= 8) {
    throw ParseError("padding", r.position(), "trailing garbage");
  }
  while (!r.exhausted()) {
    if (r.read_bit("padding")) {
      throw ParseError("padding", r.position(), "non-zero padding bit");
    }
  }
  return net;
}

uint64_t k_upper_via_codec(const Network& net, uint64_t c_pi) {
  return encode(prune(net)).first.size() + c_pi;
}

}  // namespace kolnet

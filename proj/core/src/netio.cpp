#include "kolnet/netio.hpp"

#include <sstream>

namespace kolnet {

namespace {

std::string fmt_q(const PrecisionSpec& spec, int64_t q) {
  return format_rational(spec.quanta_to_value(q));
}

}  // namespace

std::string to_netfile(const Network& net) {
  std::ostringstream os;
  os << "net P=" << net.positions << " d=" << net.width << " delta="
     << format_rational(net.spec.delta()) << " M="
     << format_rational(net.spec.magnitude()) << " A="
     << format_rational(net.spec.activation()) << "\n";
  for (const LayerSpec& ls : net.layers) {
    if (const auto* aff = std::get_if<TiedAffine>(&ls)) {
      os << "affine\n";
      for (const WeightEntry& w : aff->weights) {
        os << "w " << w.src << " " << w.tgt << " " << fmt_q(net.spec, w.q)
           << "\n";
      }
      for (const BiasEntry& b : aff->biases) {
        os << "b " << b.ch << " " << fmt_q(net.spec, b.q) << "\n";
      }
    } else if (const auto* attn = std::get_if<HardAttention>(&ls)) {
      os << "attn\n";
      auto emit = [&](const char* tag, const std::vector<WeightEntry>& ws) {
        for (const WeightEntry& w : ws) {
          os << "w " << tag << " " << w.src << " " << w.tgt << " "
             << fmt_q(net.spec, w.q) << "\n";
        }
      };
      emit("q", attn->query);
      emit("k", attn->key);
      emit("v", attn->value);
      emit("o", attn->output);
    } else if (const auto* pb = std::get_if<PerPositionBias>(&ls)) {
      os << "posbias\n";
      for (const PosBiasEntry& e : pb->entries) {
        os << "pb " << e.pos << " " << e.ch << " " << fmt_q(net.spec, e.q)
           << "\n";
      }
    }
    os << "end\n";
  }
  return os.str();
}

Network from_netfile(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  Network net;
  bool have_header = false;
  LayerSpec* current = nullptr;
  size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw std::invalid_argument("netfile line " + std::to_string(lineno) +
                                ": " + msg);
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    if (!have_header) {
      if (tok != "net") fail("expected 'net' header");
      int32_t positions = 0, width = 0;
      std::optional<Rat> delta, mag, act;
      std::string kv;
      while (ls >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) fail("expected key=value");
        std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "P") {
          positions = std::stoi(val);
        } else if (key == "d") {
          width = std::stoi(val);
        } else if (key == "delta") {
          delta = parse_rational(val);
        } else if (key == "M") {
          mag = parse_rational(val);
        } else if (key == "A") {
          act = parse_rational(val);
        } else {
          fail("unknown header key " + key);
        }
      }
      if (positions < 1 || width < 1 || !delta || !mag) {
        fail("incomplete header");
      }
      net.positions = positions;
      net.width = width;
      net.spec = act ? PrecisionSpec::make(*delta, *mag, *act)
                     : PrecisionSpec::make(*delta, *mag);
      have_header = true;
      continue;
    }
    if (tok == "affine") {
      if (current) fail("layer not closed");
      net.layers.emplace_back(TiedAffine{});
      current = &net.layers.back();
    } else if (tok == "attn") {
      if (current) fail("layer not closed");
      net.layers.emplace_back(HardAttention{});
      current = &net.layers.back();
    } else if (tok == "posbias") {
      if (current) fail("layer not closed");
      net.layers.emplace_back(PerPositionBias{});
      current = &net.layers.back();
    } else if (tok == "end") {
      if (!current) fail("'end' outside layer");
      current = nullptr;
    } else if (tok == "w") {
      if (!current) fail("entry outside layer");
      if (auto* aff = std::get_if<TiedAffine>(current)) {
        int32_t src, tgt;
        std::string val;
        if (!(ls >> src >> tgt >> val)) fail("bad weight entry");
        aff->weights.push_back(
            {src, tgt, net.spec.value_to_quanta(parse_rational(val))});
      } else if (auto* attn = std::get_if<HardAttention>(current)) {
        std::string mat;
        int32_t src, tgt;
        std::string val;
        if (!(ls >> mat >> src >> tgt >> val)) fail("bad attn entry");
        WeightEntry w{src, tgt,
                      net.spec.value_to_quanta(parse_rational(val))};
        if (mat == "q") {
          attn->query.push_back(w);
        } else if (mat == "k") {
          attn->key.push_back(w);
        } else if (mat == "v") {
          attn->value.push_back(w);
        } else if (mat == "o") {
          attn->output.push_back(w);
        } else {
          fail("bad attn matrix tag " + mat);
        }
      } else {
        fail("'w' in posbias layer");
      }
    } else if (tok == "b") {
      auto* aff = current ? std::get_if<TiedAffine>(current) : nullptr;
      if (!aff) fail("'b' outside affine layer");
      int32_t ch;
      std::string val;
      if (!(ls >> ch >> val)) fail("bad bias entry");
      aff->biases.push_back(
          {ch, net.spec.value_to_quanta(parse_rational(val))});
    } else if (tok == "pb") {
      auto* pb = current ? std::get_if<PerPositionBias>(current) : nullptr;
      if (!pb) fail("'pb' outside posbias layer");
      int32_t pos, ch;
      std::string val;
      if (!(ls >> pos >> ch >> val)) fail("bad posbias entry");
      pb->entries.push_back(
          {pos, ch, net.spec.value_to_quanta(parse_rational(val))});
    } else {
      fail("unknown directive " + tok);
    }
  }
  if (!have_header) fail("missing header");
  if (current) fail("unterminated layer");
  return net;
}

}  // namespace kolnet

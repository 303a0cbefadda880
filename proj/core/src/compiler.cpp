#include "kolnet/compiler.hpp"

#include <algorithm>
#include <sstream>

namespace kolnet {

uint32_t CapacityConfig::max_instructions() const {
  // Min header is 1 bit, min instruction 3 bits; the unrolled Elias parser
  // handles values up to 31, so counts are capped at 30 (addresses reach
  // count+1).
  return std::min<uint32_t>((max_program_bits - 1) / 3, 30);
}

uint32_t CapacityConfig::register_bits() const {
  uint32_t bits = 0;
  while ((uint64_t(1) << bits) < register_cap) ++bits;
  return std::max<uint32_t>(bits, 1);
}

uint32_t CapacityConfig::addr_bits() const {
  uint32_t slots = max_instructions() + 1;
  uint32_t bits = 1;
  while ((uint64_t(1) << bits) <= slots) ++bits;
  return bits;
}

void CapacityConfig::validate() const {
  if (max_program_bits < 4 || max_program_bits > 91) {
    throw std::invalid_argument(
        "capacity: max_program_bits must be in [4, 91]");
  }
  if (register_cap < 2 || (register_cap & (register_cap - 1)) != 0) {
    throw std::invalid_argument("capacity: register_cap must be a power of 2");
  }
  if (step_cap < 1) throw std::invalid_argument("capacity: step_cap >= 1");
}

std::string CompileReport::to_kv() const {
  std::ostringstream os;
  os << "routing_count=" << routing_count << "\n"
     << "gate_count=" << gate_count << "\n"
     << "control_count=" << control_count << "\n"
     << "total=" << total << "\n"
     << "iterations_per_step=" << iterations_per_step << "\n";
  return os.str();
}

std::string CompileReport::csv_header() {
  return "program_bits,routing_count,gate_count,control_count,total,"
         "iterations_per_step";
}

std::string CompileReport::to_csv_row(uint64_t program_bits) const {
  std::ostringstream os;
  os << program_bits << ',' << routing_count << ',' << gate_count << ','
     << control_count << ',' << total << ',' << iterations_per_step;
  return os.str();
}

Network build_gate_fragment() {
  Network net;
  net.spec = PrecisionSpec::ternary();
  net.positions = 1;
  net.width = 5;
  TiedAffine gate;
  gate.weights.push_back({5, 4, -1});
  gate.biases.push_back({4, 1});
  gate.weights.push_back({5, 5, 1});
  gate.biases.push_back({5, 1});
  net.layers.emplace_back(std::move(gate));
  return net;
}

namespace {

// One ReLU assignment: tgt <- relu(sum w_i * src_i + bias), clipped. A
// `fresh` source must be produced earlier in the same iteration; a stale
// source reads the value latched by the previous iteration.
struct Term {
  int32_t ch;
  int64_t w;
  bool fresh;
};

struct Def {
  int32_t tgt = 0;
  std::vector<Term> terms;
  int64_t bias = 0;
  int level = 0;
  int min_level = 3;  // 0 = gate, 1 = routing, 2 = fetch head
};

class CircuitBuilder {
 public:
  explicit CircuitBuilder(int32_t reserved) : next_(reserved + 1) {}

  int32_t ch(const std::string& name) {
    auto [it, fresh] = names_.emplace(name, next_);
    if (fresh) ++next_;
    return it->second;
  }
  int32_t channel_count() const { return next_ - 1; }
  const std::map<std::string, int32_t>& names() const { return names_; }

  static Term F(int32_t c, int64_t w = 1) { return {c, w, true}; }
  static Term O(int32_t c, int64_t w = 1) { return {c, w, false}; }

  int32_t def(const std::string& name, std::vector<Term> terms,
              int64_t bias = 0, int min_level = 3) {
    int32_t tgt = ch(name);
    if (def_of_.count(tgt)) {
      throw std::logic_error("circuit: second definition of " + name);
    }
    def_of_[tgt] = defs_.size();
    defs_.push_back(Def{tgt, std::move(terms), bias, min_level, min_level});
    defs_.back().level = min_level;
    return tgt;
  }

  int32_t andg(const std::string& name, Term a, Term b) {
    return def(name, {a, b}, -1);
  }

  // Marks a channel as produced outside the affine schedule (the fetch
  // head writes `fetched` at the attention level).
  void external(int32_t chan, int level) { external_[chan] = level; }

  // Resolves levels: fresh reads happen strictly after the writer, stale
  // reads strictly before (same level is fine, layers read pre-layer
  // state).
  void schedule() {
    for (int pass = 0; pass < 10000; ++pass) {
      bool changed = false;
      for (Def& d : defs_) {
        int lv = d.min_level;
        for (const Term& t : d.terms) {
          if (!t.fresh) continue;
          if (auto it = external_.find(t.ch); it != external_.end()) {
            lv = std::max(lv, it->second + 1);
          } else if (auto jt = def_of_.find(t.ch); jt != def_of_.end()) {
            lv = std::max(lv, defs_[jt->second].level + 1);
          } else {
            throw std::logic_error("circuit: fresh read of undefined channel");
          }
        }
        if (lv != d.level) {
          d.level = lv;
          changed = true;
        }
      }
      for (Def& d : defs_) {
        for (const Term& t : d.terms) {
          if (t.fresh) continue;
          auto jt = def_of_.find(t.ch);
          if (jt == def_of_.end()) continue;  // pure input, always stale-ok
          Def& w = defs_[jt->second];
          if (w.level < d.level) {
            w.min_level = std::max(w.min_level, d.level);
            w.level = std::max(w.level, d.level);
            changed = true;
          }
        }
      }
      if (!changed) return;
    }
    throw std::logic_error("circuit: scheduling did not converge");
  }

  int max_level() const {
    int m = 0;
    for (const Def& d : defs_) m = std::max(m, d.level);
    return m;
  }

  // Emits one TiedAffine per level, skipping the reserved slots.
  std::vector<std::pair<int, TiedAffine>> affine_levels() const {
    std::map<int, TiedAffine> by_level;
    for (const Def& d : defs_) {
      TiedAffine& layer = by_level[d.level];
      for (const Term& t : d.terms) {
        layer.weights.push_back({t.ch, d.tgt, t.w});
      }
      if (d.bias != 0) layer.biases.push_back({d.tgt, d.bias});
    }
    std::vector<std::pair<int, TiedAffine>> out;
    for (auto& [lv, layer] : by_level) out.emplace_back(lv, std::move(layer));
    return out;
  }

  uint64_t param_count() const {
    uint64_t n = 0;
    for (const Def& d : defs_) n += d.terms.size() + (d.bias != 0 ? 1 : 0);
    return n;
  }

 private:
  int32_t next_;
  std::map<std::string, int32_t> names_;
  std::vector<Def> defs_;
  std::map<int32_t, size_t> def_of_;
  std::map<int32_t, int> external_;
};

std::string idx(const std::string& base, int i) {
  return base + "_" + std::to_string(i);
}

}  // namespace

ControlFragment build_control(const CapacityConfig& cfg) {
  cfg.validate();
  const int32_t B = int32_t(cfg.max_program_bits);
  const int32_t S = int32_t(cfg.max_instructions()) + 1;  // pc slot count
  const int32_t AB = int32_t(cfg.addr_bits());
  const int32_t RB = int32_t(cfg.register_bits());
  const int32_t P = 1 + B;

  CircuitBuilder cb(/*reserved=*/3);
  using T = CircuitBuilder;

  // --- channels with fixed roles ---
  const int32_t g1 = cb.ch("g1"), g2 = cb.ch("g2");
  const int32_t prog = cb.ch("prog");
  const int32_t fetched = cb.ch("fetched");
  std::vector<int32_t> cur(B + 1);
  for (int i = 0; i <= B; ++i) cur[i] = cb.ch(idx("cur", i));
  std::vector<int32_t> sl(S + 1), pc(S + 1);
  for (int k = 1; k <= S; ++k) sl[k] = cb.ch(idx("sl", k));
  for (int k = 1; k <= S; ++k) pc[k] = cb.ch(idx("pc", k));
  std::vector<int32_t> cnt(AB), acc(AB), jt(AB);
  for (int j = 0; j < AB; ++j) cnt[j] = cb.ch(idx("cnt", j));
  for (int j = 0; j < AB; ++j) acc[j] = cb.ch(idx("acc", j));
  for (int j = 0; j < AB; ++j) jt[j] = cb.ch(idx("jt", j));
  int32_t reg[4][64];
  for (int r = 0; r < 4; ++r) {
    for (int j = 0; j < RB; ++j) reg[r][j] = cb.ch(idx(idx("r", r), j));
  }
  const char* phase_names[] = {"hs0", "hs1", "hs2", "hs3", "hs4", "hs5",
                               "hv4", "hv3", "hv2", "hv1", "op1", "op2",
                               "op3", "rg1", "rg2", "as0", "as1", "as2",
                               "as3", "as4", "as5", "av4", "av3", "av2",
                               "av1"};
  for (const char* n : phase_names) cb.ch(n);
  auto C = [&](const char* n) { return cb.ch(n); };
  for (const char* n : {"pb1", "pb2", "rb1", "rb0", "c_halt", "c_out0",
                        "c_out1", "c_inc", "c_dec", "c_jmp", "capt", "done",
                        "pendj", "fault", "hdr_done"}) {
    cb.ch(n);
  }

  // --- iteration-1 gate (level 0, exactly 4 parameters) ---
  cb.def("g1", {T::O(g2, -1)}, 1, 0);
  cb.def("g2", {T::O(g2, 1)}, 1, 0);

  // --- hard-attention fetch head (level 2) ---
  HardAttention fetch;
  for (int i = 1; i <= B; ++i) fetch.query.push_back({cur[i], cur[i], 1});
  // Position 1+i carries program bit i; its position source index is
  // width + (1+i), patched in once the final width is known.
  for (int i = 1; i <= B; ++i) fetch.key.push_back({-(1 + i), cur[i], 1});
  fetch.value.push_back({prog, fetched, 1});
  fetch.output.push_back({fetched, fetched, 1});
  cb.external(fetched, 2);

  // --- bit signals ---
  int32_t bitv = cb.def("bitv", {T::F(fetched)});
  int32_t nbv = cb.def("nbv", {T::F(fetched, -1)});
  int32_t nonz = cb.def("nonz", {T::F(bitv), T::F(nbv)});

  // --- cursor: cyclic gap -> 1 -> ... -> B -> gap, seeded by the gate ---
  cb.def(idx("cur", 0), {T::O(cur[B]), T::F(g1)});
  for (int i = 1; i <= B; ++i) {
    cb.def(idx("cur", i), {T::O(cur[i - 1])});
  }

  // --- derived stale-signal helpers ---
  int32_t npb1 = cb.def("npb1", {T::O(C("pb1"), -1)}, 1);
  int32_t npb2 = cb.def("npb2", {T::O(C("pb2"), -1)}, 1);
  int32_t nrb1 = cb.def("nrb1", {T::O(C("rb1"), -1)}, 1);
  int32_t nrb0 = cb.def("nrb0", {T::O(C("rb0"), -1)}, 1);
  int32_t zr[4];
  for (int r = 0; r < 4; ++r) {
    std::vector<Term> t;
    for (int j = 0; j < RB; ++j) t.push_back(T::O(reg[r][j], -1));
    zr[r] = cb.def(idx("zr", r), std::move(t), 1);
  }
  int32_t in_av = cb.def("in_av", {T::O(C("av4")), T::O(C("av3")),
                                   T::O(C("av2")), T::O(C("av1"))});

  // --- phase/bit pair gadgets ---
  auto pair_b = [&](const char* ph) {
    return cb.andg(std::string(ph) + "_b", T::O(C(ph)), T::F(bitv));
  };
  auto pair_nb = [&](const char* ph) {
    return cb.andg(std::string(ph) + "_nb", T::O(C(ph)), T::F(nbv));
  };
  int32_t hs0_b = pair_b("hs0"), hs0_nb = pair_nb("hs0");
  int32_t hs1_b = pair_b("hs1"), hs1_nb = pair_nb("hs1");
  int32_t hs2_b = pair_b("hs2"), hs2_nb = pair_nb("hs2");
  int32_t hs3_b = pair_b("hs3");
  int32_t hs4_nb = pair_nb("hs4");
  int32_t hs5_b = pair_b("hs5"), hs5_nb = pair_nb("hs5");
  int32_t as0_b = pair_b("as0"), as0_nb = pair_nb("as0");
  int32_t as1_b = pair_b("as1"), as1_nb = pair_nb("as1");
  int32_t as2_b = pair_b("as2"), as2_nb = pair_nb("as2");
  int32_t as3_b = pair_b("as3");
  int32_t as4_nb = pair_nb("as4");
  int32_t as5_b = pair_b("as5"), as5_nb = pair_nb("as5");

  // --- opcode decode at op3 ---
  int32_t a_pb2b = cb.andg("a_pb2b", T::O(C("pb2")), T::F(bitv));
  int32_t a_10 = cb.andg("a_10", T::F(npb1), T::O(C("pb2")));   // opcode 01x
  int32_t a_01 = cb.andg("a_01", T::O(C("pb1")), T::F(npb2));   // opcode 10x
  int32_t a_00 = cb.andg("a_00", T::F(npb1), T::F(npb2));       // opcode 00x
  int32_t t3 = cb.def("t3", {T::O(C("pb1"), -1), T::F(a_pb2b, -1)}, 1);
  int32_t op3_end = cb.andg("op3_end", T::O(C("op3")), T::F(t3));
  int32_t op_halt = cb.andg("op_halt", T::F(a_00), T::F(nbv));
  int32_t op_out0 = cb.andg("op_out0", T::F(a_00), T::F(bitv));
  int32_t op_out1 = cb.andg("op_out1", T::F(a_10), T::F(nbv));
  int32_t op_inc = cb.andg("op_inc", T::F(a_10), T::F(bitv));
  int32_t op_dec = cb.andg("op_dec", T::F(a_01), T::F(nbv));
  int32_t op_jmp = cb.andg("op_jmp", T::F(a_01), T::F(bitv));

  // --- opcode/register-bit latches (write at the consuming phase) ---
  auto latch = [&](const char* name, int32_t set_gate_phase, Term value) {
    int32_t s = cb.andg(std::string("set_") + name, value,
                        T::O(set_gate_phase));
    int32_t h = cb.def(std::string("hold_") + name,
                       {T::O(C(name)), T::O(set_gate_phase, -1)});
    cb.def(name, {T::F(s), T::F(h)});
  };
  latch("pb1", C("op1"), T::F(bitv));
  latch("pb2", C("op2"), T::F(bitv));
  latch("rb1", C("rg1"), T::F(bitv));
  latch("rb0", C("rg2"), T::F(bitv));

  // --- class latches, written at op3 ---
  auto class_latch = [&](const char* name, int32_t cond) {
    int32_t s = cb.andg(std::string("set_") + name, T::F(cond),
                        T::O(C("op3")));
    int32_t h = cb.def(std::string("hold_") + name,
                       {T::O(C(name)), T::O(C("op3"), -1)});
    cb.def(name, {T::F(s), T::F(h)});
    return s;
  };
  class_latch("c_halt", op_halt);
  class_latch("c_out0", op_out0);
  class_latch("c_out1", op_out1);
  int32_t set_inc = class_latch("c_inc", op_inc);
  int32_t set_dec = class_latch("c_dec", op_dec);
  int32_t set_jmp = class_latch("c_jmp", op_jmp);

  // --- register select from operand latches ---
  int32_t regsel[4];
  regsel[0] = cb.andg("regsel_0", T::F(nrb1), T::F(nrb0));
  regsel[1] = cb.andg("regsel_1", T::F(nrb1), T::O(C("rb0")));
  regsel[2] = cb.andg("regsel_2", T::O(C("rb1")), T::F(nrb0));
  regsel[3] = cb.andg("regsel_3", T::O(C("rb1")), T::O(C("rb0")));

  // --- execution pulses at instruction boundaries ---
  int32_t a_oc = cb.andg("a_oc", T::O(C("op1")), T::O(C("capt")));
  int32_t e_halt = cb.andg("e_halt", T::F(a_oc), T::O(C("c_halt")));
  int32_t e_out0 = cb.andg("e_out0", T::F(a_oc), T::O(C("c_out0")));
  int32_t e_out1 = cb.andg("e_out1", T::F(a_oc), T::O(C("c_out1")));
  int32_t e_inc = cb.andg("e_inc", T::F(a_oc), T::O(C("c_inc")));
  int32_t e_dec = cb.andg("e_dec", T::F(a_oc), T::O(C("c_dec")));
  int32_t e_jmp = cb.andg("e_jmp", T::F(a_oc), T::O(C("c_jmp")));
  std::vector<Term> selz_terms;
  for (int r = 0; r < 4; ++r) {
    selz_terms.push_back(T::F(
        cb.andg(idx("selz", r), T::F(regsel[r]), T::F(zr[r]))));
  }
  int32_t rz_sel = cb.def("rz_sel", std::move(selz_terms));
  int32_t e_decz = cb.andg("e_decz", T::F(e_dec), T::F(rz_sel));
  int32_t e_decnz = cb.def("e_decnz", {T::F(e_dec), T::F(rz_sel, -1)});
  int32_t pc_adv = cb.def("pc_adv", {T::F(e_out0), T::F(e_out1), T::F(e_inc),
                                     T::F(e_decnz)});
  int32_t set_pend = cb.def("set_pend", {T::F(e_jmp), T::F(e_decz)});

  // --- machine outputs ---
  cb.def("emit_sig", {T::F(e_out0), T::F(e_out1)});
  cb.def("bit_sig", {T::F(e_out1)});
  int32_t end_e = cb.def("end_e", {T::O(C("op1")), T::F(nonz, -1)});
  int32_t i_halt = cb.def("i_halt",
                          {T::F(end_e), T::O(C("done"), -1), T::F(a_oc, -1)});

  // --- sweep-slot one-hot and binary slot counter ---
  int32_t sl_init = cb.andg("sl_init", T::O(C("op1")), T::O(C("hdr_done")));
  int32_t sl_shift = cb.def("sl_shift",
                            {T::O(C("op1")), T::O(C("hdr_done"), -1)});
  for (int k = 1; k <= S; ++k) {
    int32_t hold = cb.def(idx("sl_hold", k),
                          {T::O(sl[k]), T::O(C("op1"), -1)});
    if (k == 1) {
      cb.def(idx("sl", k), {T::F(hold), T::F(sl_init)});
    } else {
      int32_t sh = cb.andg(idx("sl_sh", k), T::O(sl[k - 1]), T::F(sl_shift));
      cb.def(idx("sl", k), {T::F(hold), T::F(sh)});
    }
  }
  std::vector<int32_t> cc(AB + 1);
  cc[0] = sl_shift;
  for (int j = 0; j < AB; ++j) {
    cc[j + 1] = cb.andg(idx("cc", j + 1), T::O(cnt[j]), T::F(cc[j]));
  }
  for (int j = 0; j < AB; ++j) {
    int32_t xp = cb.def(idx("cxp", j), {T::O(cnt[j]), T::F(cc[j], -1)});
    int32_t xn = cb.def(idx("cxn", j), {T::F(cc[j]), T::O(cnt[j], -1)});
    if (j == 0) {
      cb.def(idx("cnt", j), {T::F(xp), T::F(xn), T::F(sl_init)});
    } else {
      cb.def(idx("cnt", j), {T::F(xp), T::F(xn), T::F(sl_init, -1)});
    }
  }

  // --- address accumulator (value of the Elias operand, = target slot) ---
  int32_t acc_init = cb.def("acc_init",
                            {T::F(as0_b), T::O(C("as2")), T::O(C("as5"))});
  int32_t a_in = cb.andg("a_in", T::F(bitv), T::F(in_av));
  for (int j = 0; j < AB; ++j) {
    int32_t hold = cb.def(idx("acc_hold", j),
                          {T::O(acc[j]), T::F(in_av, -1), T::F(acc_init, -1)});
    if (j == 0) {
      cb.def(idx("acc", j), {T::F(a_in), T::F(hold), T::F(acc_init)});
    } else {
      int32_t sh = cb.andg(idx("acc_sh", j), T::O(acc[j - 1]), T::F(in_av));
      cb.def(idx("acc", j), {T::F(sh), T::F(hold), T::F(acc_init, -1)});
    }
  }

  // --- pending-jump target, latched when the jump executes (the address
  // accumulator is clobbered by later instructions' parses) ---
  for (int j = 0; j < AB; ++j) {
    int32_t s = cb.andg(idx("jt_set", j), T::O(acc[j]), T::F(set_pend));
    int32_t h = cb.def(idx("jt_hold", j), {T::O(jt[j]), T::F(set_pend, -1)});
    cb.def(idx("jt", j), {T::F(s), T::F(h)});
  }

  // --- pending-jump resolution: target equals the fresh slot counter ---
  std::vector<Term> mism;
  for (int j = 0; j < AB; ++j) {
    int32_t xp = cb.def(idx("mxp", j),
                        {T::O(jt[j]), T::F(cnt[j], -1)});
    int32_t xn = cb.def(idx("mxn", j),
                        {T::F(cnt[j]), T::O(jt[j], -1)});
    mism.push_back(T::F(xp, -1));
    mism.push_back(T::F(xn, -1));
  }
  int32_t eq_raw = cb.def("eq_raw", std::move(mism), 1);
  int32_t pend_eff = cb.def("pend_eff", {T::O(C("pendj")), T::F(set_pend)});
  int32_t a_j = cb.andg("a_j", T::F(pend_eff), T::F(eq_raw));
  int32_t jres = cb.andg("jres", T::F(a_j), T::O(C("op1")));
  cb.def("pendj", {T::F(pend_eff), T::F(jres, -1)});

  // --- one-hot program counter ---
  for (int k = 1; k <= S; ++k) {
    int32_t hold = cb.def(idx("pc_hold", k),
                          {T::O(pc[k]), T::F(pc_adv, -1), T::F(jres, -1)});
    int32_t jmp = cb.andg(idx("pc_jmp", k), T::F(cb.ch(idx("sl", k))),
                          T::F(jres));
    if (k == 1) {
      cb.def(idx("pc", k), {T::F(hold), T::F(jmp), T::F(g1)});
    } else {
      int32_t adv = cb.andg(idx("pc_adv", k), T::O(pc[k - 1]), T::F(pc_adv));
      cb.def(idx("pc", k), {T::F(hold), T::F(jmp), T::F(adv)});
    }
  }

  // --- match and capture ---
  std::vector<Term> mats;
  for (int k = 1; k <= S; ++k) {
    mats.push_back(T::F(cb.andg(idx("mat", k), T::F(sl[k]), T::F(pc[k]))));
  }
  mats.push_back(T::F(C("pendj"), -1));
  int32_t match = cb.def("match", std::move(mats));
  // Captures never survive a sweep: the fresh cursor (sweep start) clears
  // the latch, otherwise a stale capture at the final boundary would
  // re-execute at the next sweep's first boundary.
  int32_t a_mb = cb.andg("a_mb", T::F(match), T::O(C("op1")));
  int32_t h_capt = cb.def("h_capt", {T::O(C("capt")), T::O(C("op1"), -1)});
  cb.def("capt", {T::F(a_mb), T::F(h_capt), T::F(cur[1], -1)});
  cb.def("done", {T::F(a_oc), T::O(C("done")), T::F(cur[1], -1)});

  // --- registers: ripple increment / decrement, gated by exec pulses ---
  int32_t inc_p[4], dec_p[4];
  for (int r = 0; r < 4; ++r) {
    inc_p[r] = cb.andg(idx("inc_p", r), T::F(e_inc), T::F(regsel[r]));
    dec_p[r] = cb.andg(idx("dec_p", r), T::F(e_decnz), T::F(regsel[r]));
  }
  std::vector<Term> overflow;
  for (int r = 0; r < 4; ++r) {
    std::vector<int32_t> carry(RB + 1), borrow(RB + 1);
    carry[0] = inc_p[r];
    borrow[0] = dec_p[r];
    for (int j = 0; j < RB; ++j) {
      carry[j + 1] = cb.andg(idx(idx("rc", r), j + 1), T::O(reg[r][j]),
                             T::F(carry[j]));
      borrow[j + 1] = cb.def(idx(idx("rbw", r), j + 1),
                             {T::F(borrow[j]), T::O(reg[r][j], -1)});
    }
    for (int j = 0; j < RB; ++j) {
      int32_t xp = cb.def(idx(idx("rxp", r), j),
                          {T::O(reg[r][j]), T::F(carry[j], -1),
                           T::F(borrow[j], -1)});
      int32_t xn = cb.def(idx(idx("rxn", r), j),
                          {T::F(carry[j]), T::F(borrow[j]),
                           T::O(reg[r][j], -1)});
      cb.def(idx(idx("r", r), j), {T::F(xp), T::F(xn)});
    }
    overflow.push_back(T::F(carry[RB]));
  }
  overflow.push_back(T::O(C("fault")));
  cb.def("fault", std::move(overflow));
  cb.def("halt_sig", {T::F(e_halt), T::F(i_halt), T::F(C("fault"))});

  // --- phase transitions (sweep start on the fresh cursor) ---
  auto phase = [&](const char* name, std::vector<Term> terms) {
    terms.push_back(T::F(cur[1], -1));
    cb.def(name, std::move(terms));
  };
  // Elias-delta structure: (G-1) zeros, then binary(bitlen n) on G bits,
  // then the low bitlen(n)-1 bits of n. Two leading zeros mean a 3-bit
  // length field; values above 31 are out of capacity and leave the parser
  // dormant (compile() rejects such programs up front).
  cb.def("hs0", {T::F(cur[1])});
  phase("hs1", {T::F(hs0_nb)});
  phase("hs2", {T::F(hs1_b)});
  phase("hs3", {T::F(hs1_nb)});
  phase("hs4", {T::F(hs3_b)});
  phase("hs5", {T::F(hs4_nb)});
  phase("hv4", {T::F(hs5_b)});
  phase("hv3", {T::F(hs5_nb), T::O(C("hv4"))});
  phase("hv2", {T::F(hs2_b), T::O(C("hv3"))});
  phase("hv1", {T::F(hs2_nb), T::O(C("hv2"))});
  cb.def("hdr_done", {T::F(hs0_b), T::O(C("hv1"))});
  int32_t rg2_inc = cb.andg("rg2_inc", T::O(C("rg2")), T::O(C("c_inc")));
  int32_t rg2_dec = cb.andg("rg2_dec", T::O(C("rg2")), T::O(C("c_dec")));
  int32_t addr_done = cb.def("addr_done", {T::F(as0_b), T::O(C("av1"))});
  phase("op1", {T::F(C("hdr_done")), T::F(op3_end), T::F(rg2_inc),
                T::F(addr_done)});
  int32_t a_op1nz = cb.andg("a_op1nz", T::O(C("op1")), T::F(nonz));
  phase("op2", {T::F(a_op1nz)});
  phase("op3", {T::O(C("op2"))});
  phase("rg1", {T::F(set_inc), T::F(set_dec)});
  phase("rg2", {T::O(C("rg1"))});
  phase("as0", {T::F(set_jmp), T::F(rg2_dec)});
  phase("as1", {T::F(as0_nb)});
  phase("as2", {T::F(as1_b)});
  phase("as3", {T::F(as1_nb)});
  phase("as4", {T::F(as3_b)});
  phase("as5", {T::F(as4_nb)});
  phase("av4", {T::F(as5_b)});
  phase("av3", {T::F(as5_nb), T::O(C("av4"))});
  phase("av2", {T::F(as2_b), T::O(C("av3"))});
  phase("av1", {T::F(as2_nb), T::O(C("av2"))});

  cb.schedule();

  // The control row's halt/emit/bit are driven off the exec signals in a
  // final layer; the fetch staging channel resets there too.
  TiedAffine outputs;
  outputs.weights.push_back({C("halt_sig"), kHaltChannel, 1});
  outputs.weights.push_back({C("emit_sig"), kEmitChannel, 1});
  outputs.weights.push_back({C("bit_sig"), kBitChannel, 1});
  outputs.biases.push_back({fetched, -1});

  // --- assemble layers ---
  ControlFragment out;
  out.width = cb.channel_count();
  out.positions = P;
  // Patch the fetch head's position sources now that the width is known.
  for (WeightEntry& w : fetch.key) w.src = out.width + (-w.src);

  TiedAffine gate_layer;
  auto levels = cb.affine_levels();
  std::vector<LayerSpec> mid;
  for (auto& [lv, layer] : levels) {
    if (lv == 0) {
      gate_layer = std::move(layer);
    } else {
      mid.emplace_back(std::move(layer));
    }
  }
  if (gate_layer.weights.size() + gate_layer.biases.size() != 4) {
    throw std::logic_error("control: gate layer must hold exactly 4 params");
  }
  mid.emplace_back(std::move(outputs));

  out.layers.emplace_back(std::move(gate_layer));
  out.routing_slot = 1;
  out.layers.emplace_back(std::move(fetch));
  for (auto& l : mid) out.layers.emplace_back(std::move(l));

  out.gate_count = 4;
  {
    uint64_t total = 0;
    Network probe;
    probe.spec = PrecisionSpec::ternary();
    probe.positions = P;
    probe.width = out.width;
    probe.layers = out.layers;
    total = nonzero_count(probe);
    out.control_count = total - out.gate_count;
  }

  // --- layout ---
  CompiledLayout& lay = out.layout;
  lay.gate = g1;
  lay.gate_sat = g2;
  lay.prog = prog;
  lay.fetched = fetched;
  lay.fault = C("fault");
  lay.pc_base = pc[1];
  lay.pc_slots = uint32_t(S);
  for (int r = 0; r < 4; ++r) lay.reg_base[r] = reg[r][0];
  lay.reg_bits = uint32_t(RB);
  lay.channels = cb.names();
  return out;
}

PerPositionBias build_routing(const Program& p, const ControlFragment& ctl) {
  PerPositionBias routing;
  for (size_t i = 0; i < p.bits.size(); ++i) {
    routing.entries.push_back({int32_t(i) + 2, ctl.layout.prog,
                               p.bits.at(i) ? 1 : -1});
  }
  return routing;
}

CompiledProgram compile(const Program& p, const CapacityConfig& cfg) {
  cfg.validate();
  if (p.bits.size() > cfg.max_program_bits) {
    throw std::invalid_argument("compile: program exceeds max_program_bits");
  }
  if (p.instructions.size() > cfg.max_instructions()) {
    throw std::invalid_argument("compile: too many instructions for config");
  }
  ControlFragment ctl = build_control(cfg);
  CompiledProgram out;
  out.net.spec = PrecisionSpec::ternary();
  out.net.positions = ctl.positions;
  out.net.width = ctl.width;
  out.net.layers = ctl.layers;
  out.net.layers.insert(out.net.layers.begin() + ctl.routing_slot,
                        LayerSpec{build_routing(p, ctl)});
  out.layout = ctl.layout;
  out.report.routing_count = p.bits.size();
  out.report.gate_count = ctl.gate_count;
  out.report.control_count = ctl.control_count;
  out.report.total = nonzero_count(out.net);
  out.report.iterations_per_step = 2 * (uint64_t(cfg.max_program_bits) + 1);
  return out;
}

uint64_t run_budget(const CapacityConfig& cfg) {
  return 2 * (uint64_t(cfg.max_program_bits) + 1) * cfg.step_cap +
         cfg.max_program_bits + 8;
}

MachineProbe read_probe(const StateMatrix& state, const CompiledLayout& lay) {
  MachineProbe probe;
  int hits = 0;
  for (uint32_t k = 0; k < lay.pc_slots; ++k) {
    if (state.at(1, lay.pc_base + int32_t(k)) > 0) {
      ++hits;
      probe.pc_slot = k + 1;
    }
  }
  if (hits != 1) probe.pc_slot.reset();
  for (int r = 0; r < 4; ++r) {
    uint64_t v = 0;
    for (uint32_t j = 0; j < lay.reg_bits; ++j) {
      if (state.at(1, lay.reg_base[r] + int32_t(j)) > 0) {
        v |= uint64_t(1) << j;
      }
    }
    probe.reg[r] = v;
  }
  probe.fault = state.at(1, lay.fault) > 0;
  return probe;
}

}  // namespace kolnet

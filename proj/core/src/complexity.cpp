#include "kolnet/complexity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "kolnet/codec.hpp"

namespace kolnet {

namespace {

// Layer slots in canonical order: the d*d tied weights (source-major), then
// the d biases.
uint64_t slot_count(int32_t d) { return uint64_t(d) * d + uint64_t(d); }

void add_slot_entry(TiedAffine& layer, int32_t d, uint64_t slot, int64_t q) {
  if (slot < uint64_t(d) * d) {
    layer.weights.push_back({int32_t(slot / d) + 1, int32_t(slot % d) + 1, q});
  } else {
    layer.biases.push_back({int32_t(slot - uint64_t(d) * d) + 1, q});
  }
}

BigInt binomial(uint64_t n, uint64_t k) {
  if (k > n) return 0;
  BigInt r = 1;
  for (uint64_t i = 0; i < k; ++i) {
    r *= BigInt(n - i);
    r /= BigInt(i + 1);
  }
  return r;
}

}  // namespace

BigInt space_size(const ArchBounds& bounds) {
  const uint64_t slots = slot_count(bounds.d_max);
  const uint64_t vals = bounds.spec.alphabet_size();
  // ways[w]: one layer holding exactly w of the slots, any values
  std::vector<BigInt> ways(bounds.w_max + 1);
  for (uint64_t w = 0; w <= bounds.w_max; ++w) {
    ways[w] = binomial(slots, w) * pow_int(BigInt(vals), unsigned(w));
  }
  // f[l][w]: w entries split over exactly l non-empty layers
  BigInt total = 1;  // the empty network
  std::vector<BigInt> prev(bounds.w_max + 1);
  prev[0] = 1;
  for (int32_t l = 1; l <= bounds.l_max; ++l) {
    std::vector<BigInt> next(bounds.w_max + 1);
    for (uint64_t w = 1; w <= bounds.w_max; ++w) {
      for (uint64_t take = 1; take <= w; ++take) {
        if (ways[take] == 0) continue;
        next[w] += prev[w - take] * ways[take];
      }
    }
    for (uint64_t w = 1; w <= bounds.w_max; ++w) total += next[w];
    prev = std::move(next);
  }
  return total;
}

namespace {

struct Enumerator {
  const ArchBounds& bounds;
  const std::function<bool(const Network&)>& visit;
  uint64_t slots;
  uint64_t vals;
  Network net;

  bool layers(uint64_t remaining_w, int32_t remaining_l) {
    if (remaining_l == 0) {
      return remaining_w == 0 ? visit(net) : true;
    }
    uint64_t max_here =
        std::min(remaining_w - uint64_t(remaining_l - 1), slots);
    for (uint64_t take = 1; take <= max_here; ++take) {
      net.layers.emplace_back(TiedAffine{});
      if (!fill(take, 0, remaining_w - take, remaining_l - 1)) return false;
      net.layers.pop_back();
    }
    return true;
  }

  bool fill(uint64_t left, uint64_t from_slot, uint64_t rest_w,
            int32_t rest_l) {
    if (left == 0) return layers(rest_w, rest_l);
    TiedAffine& layer = std::get<TiedAffine>(net.layers.back());
    for (uint64_t slot = from_slot; slot + left <= slots; ++slot) {
      for (uint64_t v = 0; v < vals; ++v) {
        int64_t q = bounds.spec.index_to_quanta(v);
        size_t wn = layer.weights.size(), bn = layer.biases.size();
        add_slot_entry(layer, bounds.d_max, slot, q);
        if (!fill(left - 1, slot + 1, rest_w, rest_l)) return false;
        layer.weights.resize(wn);
        layer.biases.resize(bn);
      }
    }
    return true;
  }
};

}  // namespace

void enumerate_networks(const ArchBounds& bounds,
                        const std::function<bool(const Network&)>& visit) {
  Network net;
  net.spec = bounds.spec;
  net.positions = 1;
  net.width = bounds.d_max;
  Enumerator en{bounds, visit, slot_count(bounds.d_max),
                bounds.spec.alphabet_size(), std::move(net)};
  if (!visit(en.net)) return;  // W = 0
  for (uint64_t w = 1; w <= bounds.w_max; ++w) {
    for (int32_t l = 1; l <= std::min<int64_t>(bounds.l_max, int64_t(w));
         ++l) {
      if (!en.layers(w, l)) return;
    }
  }
}

namespace {

// Evaluates the enumeration stream in deterministic batches: workers share
// a batch, results merge by in-batch index, so the outcome is independent
// of the worker count.
template <typename Eval, typename Hit>
void batched_scan(const ArchBounds& bounds, unsigned jobs, size_t batch_size,
                  const Eval& eval, const Hit& hit) {
  std::vector<Network> batch;
  batch.reserve(batch_size);
  using Result = decltype(eval(Network{}));
  std::vector<Result> results(batch_size);
  bool stop = false;
  auto flush = [&]() {
    if (batch.empty() || stop) return;
    unsigned workers = std::max(1u, jobs);
    if (workers == 1) {
      for (size_t i = 0; i < batch.size(); ++i) results[i] = eval(batch[i]);
    } else {
      std::atomic<size_t> next{0};
      auto work = [&]() {
        for (;;) {
          size_t i = next.fetch_add(1);
          if (i >= batch.size()) return;
          results[i] = eval(batch[i]);
        }
      };
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    for (size_t i = 0; i < batch.size() && !stop; ++i) {
      if (!hit(batch[i], results[i])) stop = true;
    }
    batch.clear();
  };
  enumerate_networks(bounds, [&](const Network& net) {
    batch.push_back(net);
    if (batch.size() >= batch_size) flush();
    return !stop;
  });
  flush();
}

}  // namespace

NUpperResult n_upper(std::string_view s, const ArchBounds& bounds,
                     unsigned jobs) {
  NUpperResult out;
  std::string target(s);
  uint64_t limit = std::min<uint64_t>(bounds.output_limit, target.size() + 1);
  limit = std::max<uint64_t>(limit, 1);
  batched_scan(
      bounds, jobs, 512,
      [&](const Network& net) {
        RunResult r = run(net, bounds.step_budget, limit);
        return r.halted && r.output == target;
      },
      [&](const Network& net, bool matched) {
        ++out.networks_tried;
        if (matched) {
          out.n_hat = nonzero_count(net);
          out.witness = net;
          return false;
        }
        return true;
      });
  out.space_exhausted = !out.n_hat.has_value();
  return out;
}

const char* to_string(SandwichCheck c) {
  switch (c) {
    case SandwichCheck::ok: return "ok";
    case SandwichCheck::violated: return "violated";
    case SandwichCheck::indeterminate: return "indeterminate";
  }
  return "?";
}

ComplexityReport sandwich_verify(std::string_view s,
                                 const SandwichBudgets& budgets,
                                 unsigned jobs) {
  ComplexityReport report;
  report.s = std::string(s);

  ControlFragment ctl = build_control(budgets.compile_cfg);
  report.c_u_hat = ctl.gate_count + ctl.control_count;

  SearchResult k = search_k_upper(s, budgets.k_max_len, budgets.k_step_budget,
                                  jobs);
  report.k_hat = k.k_hat;
  report.k_witness = k.witness;
  KtResult kt = kt_upper(s, budgets.k_max_len, budgets.k_step_budget, jobs);
  report.kt_hat = kt.kt_hat;

  NUpperResult n = n_upper(s, budgets.arch, jobs);
  report.n_hat = n.n_hat;
  report.n_witness = n.witness;

  if (report.k_witness) {
    report.n_from_k = report.k_witness->bits.size() + report.c_u_hat;
    if (report.k_witness->bits.size() <=
            budgets.compile_cfg.max_program_bits &&
        report.k_witness->instructions.size() <=
            budgets.compile_cfg.max_instructions()) {
      CompiledProgram cp = compile(*report.k_witness, budgets.compile_cfg);
      RunResult r = run(cp.net, run_budget(budgets.compile_cfg),
                        report.s.size() + 1);
      report.compiled_matches = r.halted && r.output == report.s;
    }
  }
  if (report.n_witness) {
    report.k_from_n = k_upper_via_codec(*report.n_witness, budgets.c_pi);
    if (report.n_hat && *report.n_hat >= 2) {
      report.c_d_hat =
          double(*report.k_from_n - budgets.c_pi) /
          (double(*report.n_hat) * std::log2(double(*report.n_hat)));
    }
  }
  if (report.n_hat && report.k_hat) {
    report.dir_network = *report.n_hat <= *report.k_hat + report.c_u_hat
                             ? SandwichCheck::ok
                             : SandwichCheck::violated;
  }
  if (report.k_hat && report.k_from_n) {
    report.dir_program = *report.k_hat <= *report.k_from_n
                             ? SandwichCheck::ok
                             : SandwichCheck::violated;
  }
  return report;
}

namespace {

std::string opt_str(const std::optional<uint64_t>& v) {
  return v ? std::to_string(*v) : "none";
}

}  // namespace

std::string complexity_csv_header() {
  return "s,n_hat,k_hat,kt_hat,c_u_hat,n_from_k,k_from_n,c_d_hat,"
         "compiled_matches,dir_network,dir_program";
}

std::string complexity_csv_row(const ComplexityReport& r) {
  std::ostringstream os;
  os << (r.s.empty() ? "(empty)" : r.s) << ',' << opt_str(r.n_hat) << ','
     << opt_str(r.k_hat) << ',';
  if (r.kt_hat) {
    os << *r.kt_hat;
  } else {
    os << "none";
  }
  os << ',' << r.c_u_hat << ',' << opt_str(r.n_from_k) << ','
     << opt_str(r.k_from_n) << ',';
  if (r.c_d_hat) {
    os << *r.c_d_hat;
  } else {
    os << "none";
  }
  os << ',' << (r.compiled_matches ? "yes" : "no") << ','
     << to_string(r.dir_network) << ',' << to_string(r.dir_program);
  return os.str();
}

namespace {

// 2^(-e) for a non-negative integer exponent.
Rat pow2_neg(const BigInt& e) {
  if (e > 1u << 20) {
    throw std::invalid_argument("prior: exponent too large for exact mass");
  }
  return Rat(1, pow_int(BigInt(2), e.convert_to<unsigned>()));
}

Rat l2_norm_sq(const Network& net) {
  BigInt sum = 0;
  auto add = [&](int64_t q) { sum += BigInt(q) * q; };
  for (const LayerSpec& ls : net.layers) {
    const auto& aff = std::get<TiedAffine>(ls);
    for (const WeightEntry& w : aff.weights) add(w.q);
    for (const BiasEntry& b : aff.biases) add(b.q);
  }
  return Rat(sum) * pow_rat(net.spec.delta(), 2);
}

}  // namespace

PriorTable prior_estimate(const ArchBounds& bounds, const BigInt& space_cap,
                          unsigned jobs) {
  PriorTable table;
  table.space = space_size(bounds);
  if (table.space > space_cap) {
    std::ostringstream os;
    os << "prior: space size " << table.space << " exceeds cap " << space_cap;
    throw std::invalid_argument(os.str());
  }

  struct Acc {
    Rat mass0;
    Rat mass2;
    double mass2d = 0;
    uint64_t min_w = UINT64_MAX;
  };
  std::map<std::string, Acc> by_output;
  Rat undefined0 = 0;
  Rat z0 = 0, z2 = 0;
  double z2d = 0;
  table.q2_exact = true;

  struct Outcome {
    bool halted;
    std::string output;
    uint64_t w;
    Rat n2sq;
  };
  batched_scan(
      bounds, jobs, 512,
      [&](const Network& net) {
        RunResult r = run(net, bounds.step_budget, bounds.output_limit);
        return Outcome{r.halted, r.output, nonzero_count(net),
                       l2_norm_sq(net)};
      },
      [&](const Network&, const Outcome& o) {
        Rat m0 = pow2_neg(BigInt(o.w));
        z0 += m0;
        Rat m2 = 0;
        double m2d = std::exp2(-to_double(o.n2sq));
        z2d += m2d;
        bool exact2 = denominator(o.n2sq) == 1;
        if (!exact2) table.q2_exact = false;
        if (exact2) {
          m2 = pow2_neg(numerator(o.n2sq));
          z2 += m2;
        }
        if (o.halted) {
          Acc& acc = by_output[o.output];
          acc.mass0 += m0;
          acc.mass2 += m2;
          acc.mass2d += m2d;
          acc.min_w = std::min(acc.min_w, o.w);
        } else {
          undefined0 += m0;
        }
        return true;
      });

  table.z0 = z0;
  if (table.q2_exact) table.z2 = z2;
  table.z2_approx = z2d;
  table.undefined_mass = undefined0 / z0;
  for (auto& [s, acc] : by_output) {
    PriorRow row;
    row.s = s;
    row.q0 = acc.mass0 / z0;
    if (table.q2_exact) row.q2 = acc.mass2 / z2;
    row.q2_approx = acc.mass2d / z2d;
    row.witness_w = acc.min_w;
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const PriorRow& a, const PriorRow& b) {
              if (a.q0 != b.q0) return a.q0 > b.q0;
              return a.s < b.s;
            });
  return table;
}

void annotate_k_anchors(PriorTable& table, uint64_t max_len,
                        uint64_t step_budget, unsigned jobs) {
  for (PriorRow& row : table.rows) {
    SearchResult r = search_k_upper(row.s, max_len, step_budget, jobs);
    row.k_hat = r.k_hat;
  }
}

std::string prior_csv(const PriorTable& table) {
  std::ostringstream os;
  os << "s,q0,q0_decimal,q2,q2_decimal,witness_w,neg_log2_q0,k_hat\n";
  for (const PriorRow& row : table.rows) {
    os << (row.s.empty() ? "(empty)" : row.s) << ','
       << format_rational(row.q0) << ',' << to_double(row.q0) << ',';
    if (row.q2) {
      os << format_rational(*row.q2);
    } else {
      os << "approx";
    }
    os << ',' << row.q2_approx << ',' << row.witness_w << ','
       << -log2_rational(row.q0) << ',';
    os << (row.k_hat ? std::to_string(*row.k_hat) : "none") << "\n";
  }
  os << "UNDEFINED," << format_rational(table.undefined_mass) << ','
     << to_double(table.undefined_mass) << ",,,,,\n";
  return os.str();
}

double mdl_penalty(const Rat& norm2sq, uint64_t m, const Rat& eta,
                   const Rat& c_d) {
  if (m < 1) throw std::invalid_argument("mdl: m >= 1 required");
  if (eta <= 0 || eta >= 1) {
    throw std::invalid_argument("mdl: eta must lie in (0,1)");
  }
  if (norm2sq < 0 || c_d < 0) {
    throw std::invalid_argument("mdl: negative inputs");
  }
  Rat floored = norm2sq < 2 ? Rat(2) : norm2sq;
  double num = to_double(c_d) * to_double(norm2sq) * log2_rational(floored) +
               log2_rational(Rat(1) / eta);
  return std::sqrt(num / double(m));
}

}  // namespace kolnet

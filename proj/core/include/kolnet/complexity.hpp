#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kolnet/compiler.hpp"
#include "kolnet/machine.hpp"
#include "kolnet/netvm.hpp"
#include "kolnet/precision.hpp"

namespace kolnet {

// Finite space of single-position affine networks: width d_max, up to l_max
// non-empty layers, at most w_max non-zero entries. Slots are the d^2
// weight coordinates plus the d bias coordinates, each holding any
// alphabet value.
struct ArchBounds {
  int32_t d_max = 3;
  int32_t l_max = 1;
  uint64_t w_max = 2;
  PrecisionSpec spec = PrecisionSpec::ternary();
  uint64_t step_budget = 16;
  uint64_t output_limit = 16;
};

BigInt space_size(const ArchBounds& bounds);

// Visits every network exactly once, ordered by (W, layer count, entry
// lexicographic order); the callback returns false to stop. Deterministic.
void enumerate_networks(const ArchBounds& bounds,
                        const std::function<bool(const Network&)>& visit);

struct NUpperResult {
  std::optional<uint64_t> n_hat;
  std::optional<Network> witness;
  bool space_exhausted = false;
  uint64_t networks_tried = 0;
};

// First network in enumeration order that halts with output exactly s
// within the bounds' budgets. Worker count never changes the result.
NUpperResult n_upper(std::string_view s, const ArchBounds& bounds,
                     unsigned jobs = 1);

struct SandwichBudgets {
  ArchBounds arch;
  uint64_t k_max_len = 14;
  uint64_t k_step_budget = 1000;
  CapacityConfig compile_cfg;
  uint64_t c_pi = 0;
};

enum class SandwichCheck { ok, violated, indeterminate };
const char* to_string(SandwichCheck c);

// Every bound is an upper bound with a witness; the two directions are
// consistency checks between upper bounds, not tightness proofs.
struct ComplexityReport {
  std::string s;
  std::optional<uint64_t> n_hat;
  std::optional<Network> n_witness;
  std::optional<uint64_t> k_hat;
  std::optional<Program> k_witness;
  std::optional<double> kt_hat;
  uint64_t c_u_hat = 0;                      // gate + control of compile_cfg
  std::optional<uint64_t> n_from_k;          // |p*| + c_u_hat
  std::optional<uint64_t> k_from_n;          // codec bound on the N witness
  std::optional<double> c_d_hat;             // measured codec-direction slope
  bool compiled_matches = false;             // run(compile(p*)) emitted s
  SandwichCheck dir_network = SandwichCheck::indeterminate;  // N <= K + c_U
  SandwichCheck dir_program = SandwichCheck::indeterminate;  // K <= codec(N)
};

ComplexityReport sandwich_verify(std::string_view s,
                                 const SandwichBudgets& budgets,
                                 unsigned jobs = 1);

std::string complexity_csv_header();
std::string complexity_csv_row(const ComplexityReport& report);

struct PriorRow {
  std::string s;
  Rat q0;                      // sparsity-prior mass, normalized
  std::optional<Rat> q2;       // Gaussian-prior mass when exactly computable
  double q2_approx = 0;
  uint64_t witness_w = 0;      // smallest W emitting s
  std::optional<uint64_t> k_hat;  // filled by annotate_k_anchors
};

struct PriorTable {
  BigInt space;
  Rat z0;                      // sparsity normalizer
  std::optional<Rat> z2;
  double z2_approx = 0;
  std::vector<PriorRow> rows;  // sorted by descending q0, then by string
  Rat undefined_mass;
  bool q2_exact = false;       // all squared-norm exponents integral
};

// Exhaustive prior over the bounded space; throws std::invalid_argument if
// space_size exceeds space_cap.
PriorTable prior_estimate(const ArchBounds& bounds, const BigInt& space_cap,
                          unsigned jobs = 1);

void annotate_k_anchors(PriorTable& table, uint64_t max_len,
                        uint64_t step_budget, unsigned jobs = 1);

std::string prior_csv(const PriorTable& table);

// sqrt((c_d * n2 * log2(max(n2, 2)) + log2(1/eta)) / m); the floor at 2
// regularizes the log at n2 <= 1.
double mdl_penalty(const Rat& norm2sq, uint64_t m, const Rat& eta,
                   const Rat& c_d);

}  // namespace kolnet

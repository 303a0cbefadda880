#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kolnet/netvm.hpp"

namespace kolnet {

struct Permutation {
  std::vector<uint32_t> image;  // image[i-1] = pi(i), values 1..N

  uint32_t size() const { return uint32_t(image.size()); }
  uint32_t operator()(uint32_t i) const { return image[i - 1]; }
  bool valid() const;

  static Permutation identity(uint32_t n);
  static Permutation parse(std::string_view text);  // "2,3,1"
  static Permutation random(uint32_t n, uint64_t seed);
  std::string to_string() const;
};

// Row-major serialisation of the permutation matrix: N^2 bits with bit
// (i,j) = 1 iff pi(i) = j.
std::string perm_string(const Permutation& pi);

struct WitnessCounts {
  uint64_t pi_dependent = 0;  // exactly N
  uint64_t control = 0;       // independent of pi at fixed N
};

struct WitnessNet {
  Network net;
  WitnessCounts counts;
};

// Ternary looped network scanning (i, j) over [N]^2 and emitting the match
// bit each iteration: output equals perm_string(pi) in exactly N^2
// emissions, after which the halt channel fires.
WitnessNet build_perm_network(const Permutation& pi);

struct TightnessRow {
  uint32_t n = 0;
  uint32_t samples = 0;
  double log2_factorial = 0;   // log2(N!), N! computed exactly
  uint64_t n_hat = 0;          // nonzero count of the witness
  uint64_t k_hat = 0;          // k_upper_via_codec of the witness (c_pi = 0)
  double ratio_k = 0;          // k_hat / (n_hat * log2(n_hat))
  double ratio_info = 0;       // log2(N!) / (n_hat * log2(n_hat))
};

std::vector<TightnessRow> tightness_report(const std::vector<uint32_t>& ns,
                                           uint32_t samples_per_n,
                                           uint64_t seed);
std::string tightness_csv(const std::vector<TightnessRow>& rows);

double log2_factorial(uint32_t n);

}  // namespace kolnet

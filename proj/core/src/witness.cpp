#include "kolnet/witness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "kolnet/codec.hpp"

namespace kolnet {

bool Permutation::valid() const {
  std::vector<bool> seen(image.size(), false);
  for (uint32_t v : image) {
    if (v < 1 || v > image.size() || seen[v - 1]) return false;
    seen[v - 1] = true;
  }
  return !image.empty();
}

Permutation Permutation::identity(uint32_t n) {
  Permutation p;
  p.image.resize(n);
  std::iota(p.image.begin(), p.image.end(), 1);
  return p;
}

Permutation Permutation::parse(std::string_view text) {
  Permutation p;
  std::string s(text);
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream is(s);
  uint32_t v;
  while (is >> v) p.image.push_back(v);
  if (!p.valid()) {
    throw std::invalid_argument("not a permutation: " + std::string(text));
  }
  return p;
}

Permutation Permutation::random(uint32_t n, uint64_t seed) {
  Permutation p = identity(n);
  std::mt19937_64 rng(seed);
  std::shuffle(p.image.begin(), p.image.end(), rng);
  return p;
}

std::string Permutation::to_string() const {
  std::string s;
  for (size_t i = 0; i < image.size(); ++i) {
    if (i) s.push_back(',');
    s += std::to_string(image[i]);
  }
  return s;
}

std::string perm_string(const Permutation& pi) {
  const uint32_t n = pi.size();
  std::string s(size_t(n) * n, '0');
  for (uint32_t i = 1; i <= n; ++i) {
    s[size_t(i - 1) * n + (pi(i) - 1)] = '1';
  }
  return s;
}

// Channel layout: 1..3 control, 4 = gate, 5 = gate saturation, then four
// N-blocks: row one-hot r, column scanner c, shift helpers u, hold helpers
// v, and the match units h.
WitnessNet build_perm_network(const Permutation& pi) {
  const int32_t n = int32_t(pi.size());
  const int32_t g1 = 4, g2 = 5;
  auto r = [&](int32_t k) { return 5 + k; };
  auto c = [&](int32_t k) { return 5 + n + k; };
  auto u = [&](int32_t k) { return 5 + 2 * n + k; };
  auto v = [&](int32_t k) { return 5 + 3 * n + k; };
  auto h = [&](int32_t k) { return 5 + 4 * n + k; };

  Network net;
  net.spec = PrecisionSpec::ternary();
  net.positions = 1;
  net.width = 5 + 5 * n;

  // Fires exactly on the first iteration.
  TiedAffine gate;
  gate.weights.push_back({g2, g1, -1});
  gate.biases.push_back({g1, 1});
  gate.weights.push_back({g2, g2, 1});
  gate.biases.push_back({g2, 1});

  // Scanner advance: u_k = AND(r_{k-1}, c_N) detects the row shift,
  // v_k = AND(r_k, not c_N) holds the row, and c shifts cyclically with the
  // gate injecting the initial one-hot.
  TiedAffine advance;
  for (int32_t k = 1; k <= n; ++k) {
    int32_t prev = k == 1 ? n : k - 1;
    advance.weights.push_back({r(prev), u(k), 1});
    advance.weights.push_back({c(n), u(k), 1});
    advance.biases.push_back({u(k), -1});
    advance.weights.push_back({r(k), v(k), 1});
    advance.weights.push_back({c(n), v(k), -1});
  }
  advance.weights.push_back({c(n), c(1), 1});
  advance.weights.push_back({g1, c(1), 1});
  for (int32_t k = 2; k <= n; ++k) {
    advance.weights.push_back({c(k - 1), c(k), 1});
  }

  // Row update plus the match layer; halting fires when the row indicator
  // would wrap past N. The c(pi(k)) -> h(k) edges are the only
  // pi-dependent parameters.
  TiedAffine match;
  for (int32_t k = 1; k <= n; ++k) {
    match.weights.push_back({u(k), r(k), 1});
    match.weights.push_back({v(k), r(k), 1});
  }
  match.weights.push_back({g1, r(1), 1});
  match.weights.push_back({u(1), kHaltChannel, 1});
  for (int32_t k = 1; k <= n; ++k) {
    match.weights.push_back({u(k), h(k), 1});
    match.weights.push_back({v(k), h(k), 1});
    match.biases.push_back({h(k), -1});
  }
  match.weights.push_back({g1, h(1), 1});
  uint64_t control_so_far =
      4 + uint64_t(advance.weights.size() + advance.biases.size()) +
      uint64_t(match.weights.size() + match.biases.size());
  for (int32_t k = 1; k <= n; ++k) {
    match.weights.push_back({c(int32_t(pi(uint32_t(k)))), h(k), 1});
  }

  TiedAffine emitters;
  for (int32_t k = 1; k <= n; ++k) {
    emitters.weights.push_back({h(k), kBitChannel, 1});
  }
  emitters.biases.push_back({kEmitChannel, 1});

  net.layers.emplace_back(std::move(gate));
  net.layers.emplace_back(std::move(advance));
  net.layers.emplace_back(std::move(match));
  net.layers.emplace_back(std::move(emitters));

  WitnessNet out;
  out.counts.pi_dependent = uint64_t(n);
  out.counts.control = control_so_far + uint64_t(n) + 1;  // emitters
  out.net = std::move(net);
  return out;
}

double log2_factorial(uint32_t n) {
  BigInt f = 1;
  for (uint32_t k = 2; k <= n; ++k) f *= k;
  return n <= 1 ? 0.0 : log2_bigint(f);
}

std::vector<TightnessRow> tightness_report(const std::vector<uint32_t>& ns,
                                           uint32_t samples_per_n,
                                           uint64_t seed) {
  std::vector<TightnessRow> rows;
  for (uint32_t n : ns) {
    TightnessRow row;
    row.n = n;
    row.samples = samples_per_n;
    row.log2_factorial = log2_factorial(n);
    for (uint32_t s = 0; s < samples_per_n; ++s) {
      Permutation pi = samples_per_n == 1
                           ? Permutation::identity(n)
                           : Permutation::random(n, seed + s);
      WitnessNet w = build_perm_network(pi);
      uint64_t n_hat = nonzero_count(w.net);
      uint64_t k_hat = k_upper_via_codec(w.net, 0);
      if (s == 0) {
        row.n_hat = n_hat;
        row.k_hat = k_hat;
      } else if (row.n_hat != n_hat || row.k_hat != k_hat) {
        throw std::logic_error("witness counts vary across permutations");
      }
    }
    double denom = double(row.n_hat) * std::log2(double(row.n_hat));
    row.ratio_k = double(row.k_hat) / denom;
    row.ratio_info = row.log2_factorial / denom;
    rows.push_back(row);
  }
  return rows;
}

std::string tightness_csv(const std::vector<TightnessRow>& rows) {
  std::ostringstream os;
  os << "n,samples,log2_factorial,n_hat,k_hat,ratio_k,ratio_info\n";
  for (const TightnessRow& r : rows) {
    os << r.n << ',' << r.samples << ',' << r.log2_factorial << ',' << r.n_hat
       << ',' << r.k_hat << ',' << r.ratio_k << ',' << r.ratio_info << "\n";
  }
  return os.str();
}

}  // namespace kolnet

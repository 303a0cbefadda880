#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kolnet/rational.hpp"

namespace kolnet {

enum class Preset : uint8_t { ternary = 0, int8 = 1, dyadic = 2, custom = 7 };

// Fixed-precision regime: resolution delta, magnitude bound M for parameters,
// clip bound A for activations. Internally everything is counted in quanta
// (integer multiples of delta), so arithmetic stays exact.
class PrecisionSpec {
 public:
  // Requires delta <= M, M and A integer multiples of delta, all positive.
  static PrecisionSpec make(const Rat& delta, const Rat& magnitude,
                            const Rat& activation);
  // Activation bound defaults to M.
  static PrecisionSpec make(const Rat& delta, const Rat& magnitude) {
    return make(delta, magnitude, magnitude);
  }

  static PrecisionSpec ternary() { return make(1, 1); }          // {-1,+1}
  static PrecisionSpec int8() { return make(1, 127); }
  static PrecisionSpec dyadic() { return make(Rat(1, 16), 8); }  // 2^-4 grid

  // Textual form: "delta=<rational> M=<rational> A=<rational>"
  // (A optional, defaults to M). Also accepts preset names.
  static PrecisionSpec parse(std::string_view text);
  std::string to_string() const;

  const Rat& delta() const { return delta_; }
  const Rat& magnitude() const { return magnitude_; }
  const Rat& activation() const { return activation_; }

  int64_t mag_quanta() const { return mag_quanta_; }  // M / delta
  int64_t act_quanta() const { return act_quanta_; }  // A / delta

  uint64_t alphabet_size() const { return 2 * uint64_t(mag_quanta_); }
  // V sorted ascending, zero excluded.
  std::vector<Rat> value_alphabet() const;

  Rat quanta_to_value(int64_t q) const { return Rat(q) * delta_; }
  // Throws std::invalid_argument if v is not in V ∪ {0}.
  int64_t value_to_quanta(const Rat& v) const;
  bool representable(const Rat& v) const;

  // Index of a non-zero quanta value in the ascending alphabet, and back.
  uint64_t quanta_to_index(int64_t q) const;
  int64_t index_to_quanta(uint64_t idx) const;

  Preset preset() const;

  bool operator==(const PrecisionSpec& other) const {
    return delta_ == other.delta_ && magnitude_ == other.magnitude_ &&
           activation_ == other.activation_;
  }

 private:
  PrecisionSpec() = default;
  Rat delta_, magnitude_, activation_;
  int64_t mag_quanta_ = 0, act_quanta_ = 0;
};

// Parameter vector over V ∪ {0}, stored in quanta.
struct ParamVector {
  PrecisionSpec spec;
  std::vector<int64_t> quanta;

  static ParamVector from_values(const PrecisionSpec& spec,
                                 const std::vector<Rat>& values);
  std::vector<Rat> values() const;
};

size_t l0_norm(const ParamVector& theta);

// ||theta||_p^p as an exact rational; p >= 1. (Non-integer p cannot be
// evaluated exactly; the double-valued front end below covers it.)
Rat lp_norm_pow(const ParamVector& theta, unsigned p);

// The norm itself. p = 0 returns the non-zero count; integral p >= 1 goes
// through the exact path; other p >= 1 is evaluated in floating point.
// Rejects p in (0, 1) and negative p.
double lp_norm(const ParamVector& theta, double p);

struct CollapseCheck {
  Rat lower;   // delta^p * ||theta||_0
  Rat value;   // ||theta||_p^p
  Rat upper;   // M^p * ||theta||_0
  bool holds;  // lower <= value <= upper
};
CollapseCheck collapse_check(const ParamVector& theta, unsigned p);

// Given an Lp-norm value n_p (not raised to p), evaluates the K(s) interval
// the Lp sandwich permits: k_lower = max(0, n_p^p / M^p - c_u) and
// k_upper = (c_d / delta^p) * n_p^p * log2(n_p^p / delta^p) + c_d.
struct KInterval {
  double k_lower;
  double k_upper;
};
KInterval lp_transfer_bounds(const Rat& np_value, unsigned p,
                             const PrecisionSpec& spec, double c_u,
                             double c_d);

}  // namespace kolnet

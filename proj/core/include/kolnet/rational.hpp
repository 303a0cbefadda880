#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <boost/multiprecision/cpp_int.hpp>

namespace kolnet {

using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

// Accepts "3", "-2", "1/4", "-3/8", "0.0625". Throws std::invalid_argument.
Rat parse_rational(std::string_view text);

// Canonical form: integers without denominator ("3"), otherwise "num/den"
// in lowest terms with the sign on the numerator.
std::string format_rational(const Rat& r);

double to_double(const Rat& r);

BigInt pow_int(const BigInt& base, unsigned exp);
Rat pow_rat(const Rat& base, unsigned exp);

// log2 of a positive rational, as a double.
double log2_rational(const Rat& r);

// log2 of a positive integer, as a double (exact bit scan + mantissa).
double log2_bigint(const BigInt& n);

inline uint32_t ceil_log2_u64(uint64_t n) {
  uint32_t bits = 0;
  uint64_t v = 1;
  while (v < n) {
    v <<= 1;
    ++bits;
  }
  return bits;
}

}  // namespace kolnet

#include "kolnet/bitstring.hpp"

#include "kolnet/rational.hpp"

namespace kolnet {

void BitString::append_uint(uint64_t value, uint32_t width) {
  for (uint32_t i = width; i-- > 0;) {
    bits_.push_back((value >> i) & 1);
  }
}

void BitString::append_elias_delta(uint64_t n) {
  if (n == 0) throw std::invalid_argument("elias delta needs n >= 1");
  uint32_t nbits = 64 - __builtin_clzll(n);        // bitlen(n)
  uint32_t gbits = 32 - __builtin_clz(nbits);      // bitlen(bitlen(n))
  for (uint32_t i = 0; i + 1 < gbits; ++i) bits_.push_back(false);
  append_uint(nbits, gbits);
  if (nbits > 1) append_uint(n & ((uint64_t(1) << (nbits - 1)) - 1), nbits - 1);
}

bool BitString::is_prefix_of(const BitString& other) const {
  if (size() > other.size()) return false;
  for (size_t i = 0; i < size(); ++i) {
    if (bits_[i] != other.bits_[i]) return false;
  }
  return true;
}

std::vector<uint8_t> BitString::to_bytes() const {
  std::vector<uint8_t> out((bits_.size() + 7) / 8, 0);
  for (size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out[i / 8] |= uint8_t(0x80u >> (i % 8));
  }
  return out;
}

BitString BitString::from_bytes(const std::vector<uint8_t>& bytes,
                                size_t nbits) {
  if (nbits > bytes.size() * 8) {
    throw std::invalid_argument("from_bytes: nbits exceeds data");
  }
  BitString out;
  out.bits_.reserve(nbits);
  for (size_t i = 0; i < nbits; ++i) {
    out.bits_.push_back((bytes[i / 8] >> (7 - i % 8)) & 1);
  }
  return out;
}

std::string BitString::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (bool b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

BitString BitString::parse(std::string_view s) {
  BitString out;
  for (char c : s) {
    if (c == '0') {
      out.push_back(false);
    } else if (c == '1') {
      out.push_back(true);
    } else if (c == ' ' || c == '_') {
      continue;  // grouping allowed
    } else {
      throw std::invalid_argument("bitstring literal: bad char");
    }
  }
  return out;
}

std::string BitString::to_hex() const {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (uint8_t b : to_bytes()) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

BitString BitString::from_hex(std::string_view s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (s.size() % 2 != 0) throw std::invalid_argument("hex: odd length");
  std::vector<uint8_t> bytes;
  bytes.reserve(s.size() / 2);
  for (size_t i = 0; i < s.size(); i += 2) {
    int hi = nibble(s[i]), lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("hex: bad digit");
    bytes.push_back(uint8_t(hi << 4 | lo));
  }
  return from_bytes(bytes, bytes.size() * 8);
}

bool BitReader::read_bit(const char* field) {
  if (pos_ >= bits_->size()) {
    throw ParseError(field, pos_, "truncated stream");
  }
  return bits_->at(pos_++);
}

uint64_t BitReader::read_uint(uint32_t width, const char* field) {
  uint64_t v = 0;
  for (uint32_t i = 0; i < width; ++i) {
    v = (v << 1) | uint64_t(read_bit(field));
  }
  return v;
}

uint64_t BitReader::read_elias_delta(const char* field) {
  uint32_t zeros = 0;
  while (!read_bit(field)) {
    if (++zeros > 63) throw ParseError(field, pos_, "elias prefix too long");
  }
  // The '1' just read is the leading bit of bitlen(n), which has zeros more
  // bits; then n itself has bitlen(n)-1 explicit low bits.
  uint64_t nbits = 1;
  for (uint32_t i = 0; i < zeros; ++i) {
    nbits = (nbits << 1) | uint64_t(read_bit(field));
  }
  if (nbits > 64) throw ParseError(field, pos_, "elias value exceeds 64 bits");
  uint64_t n = 1;
  for (uint64_t i = 0; i + 1 < nbits; ++i) {
    n = (n << 1) | uint64_t(read_bit(field));
  }
  return n;
}

BitString elias_delta(uint64_t n) {
  BitString out;
  out.append_elias_delta(n);
  return out;
}

uint64_t elias_delta_decode(const BitString& bits) {
  BitReader reader(bits);
  uint64_t n = reader.read_elias_delta();
  if (!reader.exhausted()) {
    throw ParseError("elias", reader.position(), "trailing bits");
  }
  return n;
}

}  // namespace kolnet

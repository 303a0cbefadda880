#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kolnet {

// Thrown on malformed bit streams; carries the offending bit offset and the
// field being parsed so callers can report exact positions.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string field, size_t bit_offset, const std::string& what)
      : std::runtime_error("parse error in field '" + field + "' at bit " +
                           std::to_string(bit_offset) + ": " + what),
        field_(std::move(field)),
        bit_offset_(bit_offset) {}

  const std::string& field() const { return field_; }
  size_t bit_offset() const { return bit_offset_; }

 private:
  std::string field_;
  size_t bit_offset_;
};

class BitString {
 public:
  BitString() = default;

  void push_back(bool b) { bits_.push_back(b); }
  void append(const BitString& other) {
    bits_.insert(bits_.end(), other.bits_.begin(), other.bits_.end());
  }
  // Fixed-width big-endian field.
  void append_uint(uint64_t value, uint32_t width);
  // Elias delta code for n >= 1.
  void append_elias_delta(uint64_t n);

  bool at(size_t i) const { return bits_[i]; }
  size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  bool operator==(const BitString& other) const = default;
  // Lexicographic, shorter-is-prefix compares less.
  bool lex_less(const BitString& other) const { return bits_ < other.bits_; }
  bool is_prefix_of(const BitString& other) const;

  // MSB-first packing, zero-padded tail.
  std::vector<uint8_t> to_bytes() const;
  static BitString from_bytes(const std::vector<uint8_t>& bytes, size_t nbits);

  std::string to_string() const;                 // e.g. "0100"
  static BitString parse(std::string_view s);    // inverse of to_string
  std::string to_hex() const;                    // packed bytes as lower hex
  static BitString from_hex(std::string_view s); // size() is 8*bytes

  void flip(size_t i) { bits_[i] = !bits_[i]; }

 private:
  std::vector<bool> bits_;
};

// Sequential reader with offset tracking for error reporting.
class BitReader {
 public:
  explicit BitReader(const BitString& bits) : bits_(&bits) {}

  size_t position() const { return pos_; }
  size_t remaining() const { return bits_->size() - pos_; }
  bool exhausted() const { return pos_ >= bits_->size(); }

  bool read_bit(const char* field = "bit");
  uint64_t read_uint(uint32_t width, const char* field = "uint");
  uint64_t read_elias_delta(const char* field = "elias");

 private:
  const BitString* bits_;
  size_t pos_ = 0;
};

BitString elias_delta(uint64_t n);  // n >= 1
uint64_t elias_delta_decode(const BitString& bits);  // whole-string decode

}  // namespace kolnet

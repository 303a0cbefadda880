#pragma once

#include <cstdint>
#include <utility>

#include "kolnet/bitstring.hpp"
#include "kolnet/netvm.hpp"

namespace kolnet {

// Removes channels and positions that no non-zero parameter touches, drops
// empty layers, and relabels by order-preserving bijections. The halt, emit
// and bit channels and the control row are always retained. Positions are
// only pruned in attention-free networks: removing a position changes the
// hard-attention argmax domain, so with attention present every position is
// kept. Run behaviour is identical for any budgets.
Network prune(const Network& net);

struct EncodingStats {
  uint64_t w = 0;
  uint64_t header_bits = 0;
  uint64_t tuple_bits = 0;
  uint64_t total_bits = 0;
  uint64_t bound_value = 0;  // 3*W*ceil(log2 W) + c*W + c'
};

// Frozen length-law constants: total_bits <= 3*W*ceil(log2 W) + c*W + c'
// must hold for every pruned network (measured once over the regression
// corpus, then pinned).
inline constexpr uint64_t kLengthLawPerTuple = 17;   // c
inline constexpr uint64_t kLengthLawConstant = 60;   // c'

uint64_t length_bound(uint64_t w);

// Self-delimiting bit encoding: Elias-delta header (W+1, d, P, L'+1), an
// 8-bit architecture byte (precision preset, layer kinds present), then W
// fixed-width tuples whose field widths are derived from the header.
std::pair<BitString, EncodingStats> encode(const Network& net);

// Left inverse of encode after prune. Throws ParseError with bit offset and
// field name on malformed input.
Network decode(const BitString& bits, const PrecisionSpec& spec);

// |encode(prune(net))| + c_pi, the K upper bound attributed to this network
// modulo the declared simulator-program constant.
uint64_t k_upper_via_codec(const Network& net, uint64_t c_pi);

}  // namespace kolnet

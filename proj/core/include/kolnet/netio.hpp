#pragma once

#include <string>
#include <string_view>

#include "kolnet/netvm.hpp"

namespace kolnet {

// Line-oriented canonical form:
//   net P=<int> d=<int> delta=<r> M=<r> A=<r>
//   affine            attn                posbias
//   w <src> <tgt> <v> w q <src> <tgt> <v> pb <pos> <ch> <v>
//   b <ch> <v>        ... (q|k|v|o) ...
//   end               end                 end
// Entry order is preserved exactly. Lines starting with '#' are skipped.
std::string to_netfile(const Network& net);
Network from_netfile(std::string_view text);

}  // namespace kolnet

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kolnet/bitstring.hpp"
#include "kolnet/netvm.hpp"  // RunResult

namespace kolnet {

// RM-4: a 4-register Minsky-style machine with bit-output instructions.
// Binary format: elias_delta(instruction count) ++ packed instructions,
// each 3-bit opcode + 2-bit register operand (INC, DECJZ) +
// elias_delta(address+1) (DECJZ, JMP). Addresses are absolute instruction
// indices in [0, count]; count is a legal target and means halt.
enum class Opcode : uint8_t {
  halt = 0,
  out0 = 1,
  out1 = 2,
  inc = 3,
  decjz = 4,
  jmp = 5,
};

struct Instruction {
  Opcode op = Opcode::halt;
  uint8_t reg = 0;     // r0..r3
  uint32_t addr = 0;   // jump target
  bool operator==(const Instruction&) const = default;
};

struct Program {
  BitString bits;  // canonical self-delimiting encoding; |bits| enters K
  std::vector<Instruction> instructions;
  bool operator==(const Program&) const = default;
};

Program program_from_instructions(const std::vector<Instruction>& ins);
Program program_from_bits(const BitString& bits);  // throws ParseError

// Assembly text: one instruction per line (';' also separates), mnemonics
// HALT OUT0 OUT1 INC DECJZ JMP, registers r0..r3, absolute addresses.
Program assemble(std::string_view text);  // throws std::invalid_argument
std::string disassemble(const Program& p);

// "rm4:<hex>" with MSB-first byte packing; the format is self-delimiting so
// the zero padding in the final byte is unambiguous.
std::string to_hex_text(const Program& p);
Program from_hex_text(std::string_view text);

RunResult interpret(const Program& p, uint64_t step_budget,
                    uint64_t output_limit);

struct MachineState {
  uint64_t pc = 0;
  uint64_t reg[4] = {0, 0, 0, 0};
  std::string emitted;
  uint64_t steps = 0;
  bool halted = false;
};
// Single-step access for instrumented comparisons.
MachineState machine_step(const Program& p, MachineState state);

// Enumerates every well-formed program with |bits| <= max_len in
// (length, lexicographic) order. Stops early when the callback returns
// false. Deterministic.
void enumerate_programs(uint64_t max_len,
                        const std::function<bool(const Program&)>& visit);

struct SearchResult {
  std::optional<uint64_t> k_hat;
  std::optional<Program> witness;
  uint64_t programs_tried = 0;
};

// Shortest (then lexicographically least) program emitting exactly s within
// step_budget. Partitioned deterministically across jobs workers: results
// are identical for any worker count.
SearchResult search_k_upper(std::string_view s, uint64_t max_len,
                            uint64_t step_budget, unsigned jobs = 1);

struct KtResult {
  std::optional<double> kt_hat;  // min |p| + log2(steps)
  std::optional<Program> witness;
  uint64_t programs_tried = 0;
};

KtResult kt_upper(std::string_view s, uint64_t max_len, uint64_t step_budget,
                  unsigned jobs = 1);

}  // namespace kolnet

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kolnet/machine.hpp"
#include "kolnet/netvm.hpp"

namespace kolnet {

// Compiled-network dimensions are a function of this config only, never of
// the program content.
struct CapacityConfig {
  uint32_t max_program_bits = 48;  // bit positions reserved for the program
  uint64_t register_cap = 64;      // power of two; values 0..cap-1
  uint64_t step_cap = 1000;        // interpreter steps the run budget covers

  uint32_t max_instructions() const;  // slots the cursor sweep can track
  uint32_t register_bits() const;
  uint32_t addr_bits() const;
  void validate() const;  // throws std::invalid_argument
};

struct CompileReport {
  uint64_t routing_count = 0;       // == |p|
  uint64_t gate_count = 0;          // == 4
  uint64_t control_count = 0;       // depends only on the config
  uint64_t total = 0;               // nonzero_count of the emitted network
  uint64_t iterations_per_step = 0; // rho bound: iterations per machine step
  std::string to_kv() const;
  static std::string csv_header();
  std::string to_csv_row(uint64_t program_bits) const;
};

// Channel indices for instrumented traces, keyed by role. Fixed by the
// config; independent of the program.
struct CompiledLayout {
  int32_t gate = 0;        // fires exactly at t=1
  int32_t gate_sat = 0;
  int32_t prog = 0;        // program channel (bits live at positions 2..)
  int32_t fetched = 0;
  int32_t fault = 0;       // register overflow indicator
  int32_t pc_base = 0;     // one-hot program counter over instruction slots
  uint32_t pc_slots = 0;
  int32_t reg_base[4] = {0, 0, 0, 0};  // LSB-first register bits
  uint32_t reg_bits = 0;
  std::map<std::string, int32_t> channels;  // every named channel
};

// Decoded machine-visible state recovered from a compiled network's state
// matrix (control row).
struct MachineProbe {
  std::optional<uint32_t> pc_slot;  // 1-based slot if the one-hot is clean
  uint64_t reg[4] = {0, 0, 0, 0};
  bool fault = false;
};
MachineProbe read_probe(const StateMatrix& state, const CompiledLayout& lay);

// The iteration-1 gate as a standalone runnable network (P=1, d=5,
// channels 4/5): exactly four ternary parameters.
Network build_gate_fragment();

struct ControlFragment {
  std::vector<LayerSpec> layers;  // gate layer, fetch head, control levels
  CompiledLayout layout;
  uint64_t gate_count = 0;
  uint64_t control_count = 0;
  int32_t width = 0;
  int32_t positions = 0;
  size_t routing_slot = 0;  // index where the routing layer is inserted
};

// Program-independent universal circuit: cursor sweep, hard-attention
// fetch, instruction parser, one-hot pc, binary registers, output wiring.
ControlFragment build_control(const CapacityConfig& cfg);

// Exactly one per-position ternary entry per program bit: +delta for 1,
// -delta for 0, landing on the program channel of bit i's position.
PerPositionBias build_routing(const Program& p, const ControlFragment& ctl);

struct CompiledProgram {
  Network net;
  CompileReport report;
  CompiledLayout layout;
};

// run(compile(p).net) emits interpret(p)'s output whenever the interpreter
// halts within step_cap steps and registers stay below register_cap.
CompiledProgram compile(const Program& p, const CapacityConfig& cfg);

// Step budget that covers step_cap machine steps.
uint64_t run_budget(const CapacityConfig& cfg);

}  // namespace kolnet

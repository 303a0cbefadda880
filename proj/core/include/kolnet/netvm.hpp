#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kolnet/precision.hpp"

namespace kolnet {

// Fixed control channels, 1-based, on the control row (position 1).
inline constexpr int32_t kHaltChannel = 1;
inline constexpr int32_t kEmitChannel = 2;
inline constexpr int32_t kBitChannel = 3;

// Weight values are stored in quanta (integer multiples of delta). A source
// index in [1, d] reads a state channel; an index in [d+1, d+P] reads the
// architecture-level position indicator, which carries the value delta at
// its own position and 0 elsewhere. Position sources cost no parameters to
// provide but each weight reading them counts as usual.
struct WeightEntry {
  int32_t src = 0;
  int32_t tgt = 0;
  int64_t q = 0;
};

struct BiasEntry {
  int32_t ch = 0;
  int64_t q = 0;
};

struct PosBiasEntry {
  int32_t pos = 0;
  int32_t ch = 0;
  int64_t q = 0;
};

// Applied identically at every position. Channels with at least one incoming
// weight or a bias are replaced by clip(round(relu(Wx + b))); all other
// channels pass through unchanged.
struct TiedAffine {
  std::vector<WeightEntry> weights;
  std::vector<BiasEntry> biases;
};

// Single-head hard attention. Every position attends to the position with
// the highest score (ties broken by lowest index); the projected value is
// added residually to the channels targeted by the output projection, then
// clipped and rounded. Scores are compared exactly in integer arithmetic.
struct HardAttention {
  std::vector<WeightEntry> query;
  std::vector<WeightEntry> key;
  std::vector<WeightEntry> value;
  std::vector<WeightEntry> output;  // src indexes the value vector: [1, d]
};

// The only position-untied parameters: value added to (pos, ch) every
// iteration, then clipped.
struct PerPositionBias {
  std::vector<PosBiasEntry> entries;
};

using LayerSpec = std::variant<TiedAffine, HardAttention, PerPositionBias>;

struct Network {
  PrecisionSpec spec = PrecisionSpec::ternary();
  int32_t positions = 1;  // P
  int32_t width = 3;      // d
  std::vector<LayerSpec> layers;
};

struct StateMatrix {
  int32_t positions = 0;
  int32_t width = 0;
  std::vector<int64_t> q;  // position-major quanta

  static StateMatrix zeros(int32_t positions, int32_t width) {
    return StateMatrix{positions, width,
                       std::vector<int64_t>(size_t(positions) * width, 0)};
  }
  int64_t& at(int32_t pos, int32_t ch) {
    return q[size_t(pos - 1) * width + (ch - 1)];
  }
  int64_t at(int32_t pos, int32_t ch) const {
    return q[size_t(pos - 1) * width + (ch - 1)];
  }
  bool operator==(const StateMatrix&) const = default;
};

struct Violation {
  int32_t layer = 0;  // 1-based; 0 = network-level
  std::string rule;
  std::string where;
  std::string to_string() const;
};

// Never throws; empty result iff the network satisfies every invariant.
std::vector<Violation> validate(const Network& net);

// One full application of the layer block. Throws on shape mismatch.
StateMatrix step(const Network& net, const StateMatrix& state);

enum class StopReason { halted, budget_exhausted, output_limit };

const char* to_string(StopReason reason);

struct RunResult {
  std::string output;  // '0'/'1' characters in emission order
  bool halted = false;
  uint64_t iterations = 0;
  StopReason reason = StopReason::budget_exhausted;
  bool operator==(const RunResult&) const = default;
};

RunResult run(const Network& net, uint64_t step_budget, uint64_t output_limit);

// Tied weights count once regardless of P; per-position entries count
// individually; biases count like weights.
uint64_t nonzero_count(const Network& net);

// Stateful stepper for instrumented traces.
class Runner {
 public:
  explicit Runner(const Network& net);
  ~Runner();
  Runner(Runner&&) noexcept;
  Runner& operator=(Runner&&) noexcept;

  void advance();  // one full iteration
  uint64_t iteration() const { return iteration_; }
  const StateMatrix& state() const { return state_; }
  bool halt_fired() const { return state_.at(1, kHaltChannel) > 0; }
  bool emit_fired() const { return state_.at(1, kEmitChannel) > 0; }
  bool bit_value() const { return state_.at(1, kBitChannel) > 0; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  StateMatrix state_;
  uint64_t iteration_ = 0;
};

// If the state recurs before max_iterations without the halt channel firing,
// the trajectory is periodic and the network can never halt; the claim is
// exact because the dynamics are deterministic over a finite state space.
struct CycleInfo {
  uint64_t entry = 0;   // iteration index of the first repeated state
  uint64_t period = 0;
};
std::optional<CycleInfo> find_cycle(const Network& net,
                                    uint64_t max_iterations);

}  // namespace kolnet

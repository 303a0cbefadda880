#include "kolnet/netvm.hpp"

#include <gtest/gtest.h>

#include <random>

#include "kolnet/netio.hpp"
#include "testing_util.hpp"

using namespace kolnet;

namespace {

Network ternary_net(int32_t p, int32_t d) {
  Network net;
  net.spec = PrecisionSpec::ternary();
  net.positions = p;
  net.width = d;
  return net;
}

}  // namespace

TEST(Validate, EmptyIsValid) {
  EXPECT_TRUE(validate(ternary_net(1, 3)).empty());
}

TEST(Validate, AlphabetMembership) {
  Network net = ternary_net(1, 3);
  TiedAffine l;
  l.weights.push_back({1, 2, 2});  // |2| > M under ternary
  net.layers.emplace_back(l);
  auto v = validate(net);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "value outside alphabet");
  EXPECT_EQ(v[0].layer, 1);
}

TEST(Validate, DuplicateCoordinate) {
  Network net = ternary_net(2, 3);
  PerPositionBias pb;
  pb.entries.push_back({2, 1, 1});
  pb.entries.push_back({2, 1, -1});
  net.layers.emplace_back(pb);
  auto v = validate(net);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "duplicate coordinate");
}

TEST(Validate, IndexRangesAndZeros) {
  Network net = ternary_net(1, 3);
  TiedAffine l;
  l.weights.push_back({9, 1, 1});   // src beyond d + P = 4
  l.weights.push_back({1, 4, 1});   // tgt beyond d
  l.biases.push_back({2, 0});       // explicit zero
  net.layers.emplace_back(l);
  EXPECT_EQ(validate(net).size(), 3u);
}

TEST(Step, ZeroNetworkFixedPoint) {
  Network net = ternary_net(1, 3);
  net.layers.emplace_back(TiedAffine{});
  auto s = StateMatrix::zeros(1, 3);
  EXPECT_EQ(step(net, s), s);
}

TEST(Step, BiasThroughRelu) {
  Network net = ternary_net(2, 5);
  TiedAffine l;
  l.biases.push_back({5, 1});
  net.layers.emplace_back(l);
  auto s = step(net, StateMatrix::zeros(2, 5));
  EXPECT_EQ(s.at(1, 5), 1);
  EXPECT_EQ(s.at(2, 5), 1);  // tied: applied at every position
  EXPECT_EQ(s.at(1, 4), 0);
}

TEST(Step, GateRecurrenceTrace) {
  Network net = ternary_net(1, 5);
  TiedAffine gate;
  gate.weights.push_back({5, 4, -1});
  gate.biases.push_back({4, 1});
  gate.weights.push_back({5, 5, 1});
  gate.biases.push_back({5, 1});
  net.layers.emplace_back(gate);
  auto s = StateMatrix::zeros(1, 5);
  s = step(net, s);
  EXPECT_EQ(s.at(1, 4), 1);
  EXPECT_EQ(s.at(1, 5), 1);
  for (int t = 2; t <= 10; ++t) {
    s = step(net, s);
    EXPECT_EQ(s.at(1, 4), 0) << "t=" << t;
    EXPECT_EQ(s.at(1, 5), 1) << "t=" << t;
  }
}

TEST(Step, ShapeMismatchThrows) {
  Network net = ternary_net(1, 3);
  EXPECT_THROW(step(net, StateMatrix::zeros(2, 3)), std::invalid_argument);
}

TEST(Step, RoundHalfAwayFromZero) {
  // delta = 1/2: an attention output of delta^3 = 1/8 rounds to 0; the
  // affine path stays on the lattice so rounding stays exact there.
  auto spec = PrecisionSpec::make(Rat(1, 2), 1);
  Network net;
  net.spec = spec;
  net.positions = 1;
  net.width = 4;
  HardAttention attn;
  attn.query.push_back({4, 4, spec.value_to_quanta(Rat(1, 2))});
  attn.key.push_back({5, 4, spec.value_to_quanta(Rat(1, 2))});  // pos source
  attn.value.push_back({4, 4, spec.value_to_quanta(Rat(1, 2))});
  attn.output.push_back({4, 3, spec.value_to_quanta(Rat(1, 2))});
  net.layers.emplace_back(attn);
  TiedAffine seed;
  seed.biases.push_back({4, spec.value_to_quanta(1)});
  net.layers.emplace_back(seed);
  ASSERT_TRUE(validate(net).empty());
  auto s = StateMatrix::zeros(1, 4);
  s = step(net, s);             // ch4 = 1 (2 quanta)
  s = step(net, s);             // attention adds (1/2)^3 * 2 = 1/4 -> rounds
  // x + o = 0 + 1/4 -> nearest half-step is 1/2 (half away from zero).
  EXPECT_EQ(s.at(1, 3), 1);     // 1 quantum = 1/2
}

TEST(Run, ZeroNetworkExhaustsBudget) {
  Network net = ternary_net(1, 3);
  net.layers.emplace_back(TiedAffine{});
  auto r = run(net, 100, 100);
  EXPECT_EQ(r.output, "");
  EXPECT_FALSE(r.halted);
  EXPECT_EQ(r.iterations, 100u);
  EXPECT_EQ(r.reason, StopReason::budget_exhausted);
}

TEST(Run, HaltBeforeEmit) {
  Network net = ternary_net(1, 3);
  TiedAffine l;
  l.biases.push_back({kHaltChannel, 1});
  net.layers.emplace_back(l);
  auto r = run(net, 100, 100);
  EXPECT_TRUE(r.halted);
  EXPECT_EQ(r.output, "");
  EXPECT_EQ(r.iterations, 1u);
}

TEST(Run, EmitThenHalt) {
  Network net = ternary_net(1, 3);
  TiedAffine l;
  l.biases.push_back({kEmitChannel, 1});
  l.weights.push_back({kEmitChannel, kHaltChannel, 1});
  net.layers.emplace_back(l);
  auto r = run(net, 100, 100);
  EXPECT_TRUE(r.halted);
  EXPECT_EQ(r.output, "0");
  EXPECT_EQ(r.iterations, 2u);
}

TEST(Run, OutputLimit) {
  Network net = ternary_net(1, 3);
  TiedAffine l;
  l.biases.push_back({kEmitChannel, 1});
  l.biases.push_back({kBitChannel, 1});
  net.layers.emplace_back(l);
  auto r = run(net, 1000, 5);
  EXPECT_FALSE(r.halted);
  EXPECT_EQ(r.output, "11111");
  EXPECT_EQ(r.reason, StopReason::output_limit);
}

TEST(Run, Determinism) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 30; ++i) {
    Network net = kolnet::testing::random_network(
        rng, PrecisionSpec::ternary(), 20, 6, 4, true);
    ASSERT_TRUE(validate(net).empty());
    EXPECT_EQ(run(net, 300, 64), run(net, 300, 64));
  }
}

TEST(Run, ClosureUnderStep) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    auto spec = i % 2 ? PrecisionSpec::dyadic() : PrecisionSpec::int8();
    Network net = kolnet::testing::random_network(rng, spec, 24, 6, 3, true);
    ASSERT_TRUE(validate(net).empty());
    auto s = StateMatrix::zeros(net.positions, net.width);
    int64_t aq = spec.act_quanta();
    for (int t = 0; t < 20; ++t) {
      s = step(net, s);
      for (int64_t q : s.q) {
        ASSERT_GE(q, -aq);
        ASSERT_LE(q, aq);
      }
    }
  }
}

TEST(NonzeroCount, TyingDoesNotMultiply) {
  Network net = ternary_net(16, 3);
  EXPECT_EQ(nonzero_count(net), 0u);
  TiedAffine l;
  l.weights.push_back({1, 2, 1});
  l.biases.push_back({3, -1});
  net.layers.emplace_back(l);
  EXPECT_EQ(nonzero_count(net), 2u);
  PerPositionBias pb;
  for (int i = 1; i <= 7; ++i) pb.entries.push_back({i, 1, 1});
  net.layers.emplace_back(pb);
  EXPECT_EQ(nonzero_count(net), 9u);
}

TEST(Attention, ArgmaxLowestIndexTieBreak) {
  // Keys identical at positions 2 and 3: position 2 must win.
  Network net = ternary_net(3, 5);
  TiedAffine seed;  // ch4 <- 1 everywhere, ch5 position-dependent via pos src
  seed.biases.push_back({4, 1});
  seed.weights.push_back({5 + 2, 5, 1});  // pos 2 indicator -> ch5
  seed.weights.push_back({5 + 3, 5, 1});  // pos 3 indicator -> ch5
  net.layers.emplace_back(seed);
  HardAttention attn;
  attn.query.push_back({4, 4, 1});
  attn.key.push_back({5, 4, 1});
  attn.value.push_back({5 + 2, 5, 1});  // v = 1 iff fetched position is 2
  attn.output.push_back({5, 3, 1});
  net.layers.emplace_back(attn);
  ASSERT_TRUE(validate(net).empty());
  auto s = StateMatrix::zeros(3, 5);
  s = step(net, s);
  s = step(net, s);
  EXPECT_EQ(s.at(1, 3), 1);  // fetched from position 2, not 3
}

TEST(Netfile, RoundTripPreservesBytes) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 25; ++i) {
    auto spec = i % 3 == 0 ? PrecisionSpec::dyadic() : PrecisionSpec::ternary();
    Network net = kolnet::testing::random_network(rng, spec, 18, 6, 4, true);
    std::string text = to_netfile(net);
    Network back = from_netfile(text);
    EXPECT_EQ(to_netfile(back), text);
    EXPECT_EQ(nonzero_count(back), nonzero_count(net));
    EXPECT_EQ(run(back, 200, 32), run(net, 200, 32));
  }
}

TEST(Netfile, CommentsAndErrors) {
  Network net = from_netfile("# comment\nnet P=1 d=3 delta=1 M=1 A=1\n");
  EXPECT_EQ(net.width, 3);
  EXPECT_THROW(from_netfile("net P=1 d=3 delta=1 M=1\naffine\n"),
               std::invalid_argument);  // unterminated layer
  EXPECT_THROW(from_netfile("affine\nend\n"), std::invalid_argument);
  EXPECT_THROW(from_netfile("net P=1 d=3 delta=1 M=1\nbogus\n"),
               std::invalid_argument);
}

TEST(Cycle, ZeroNetworkHasTrivialCycle) {
  Network net = ternary_net(1, 3);
  net.layers.emplace_back(TiedAffine{});
  auto c = find_cycle(net, 100);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->entry, 0u);
  EXPECT_EQ(c->period, 1u);
}

TEST(Cycle, HaltingNetworkHasNone) {
  Network net = ternary_net(1, 3);
  TiedAffine l;
  l.biases.push_back({kHaltChannel, 1});
  net.layers.emplace_back(l);
  EXPECT_FALSE(find_cycle(net, 100).has_value());
}

TEST(Cycle, TwoCycleDetected) {
  // ch4 <- relu(1 - ch4): oscillates 1, 0, 1, 0, ...
  Network net = ternary_net(1, 4);
  TiedAffine l;
  l.weights.push_back({4, 4, -1});
  l.biases.push_back({4, 1});
  net.layers.emplace_back(l);
  auto c = find_cycle(net, 100);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(c->period, 2u);
}

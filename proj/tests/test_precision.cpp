#include "kolnet/precision.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace kolnet;

TEST(Precision, TernaryAlphabet) {
  auto v = PrecisionSpec::ternary().value_alphabet();
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], Rat(-1));
  EXPECT_EQ(v[1], Rat(1));
}

TEST(Precision, IntegerAlphabet) {
  auto v = PrecisionSpec::make(1, 3).value_alphabet();
  std::vector<Rat> want = {-3, -2, -1, 1, 2, 3};
  EXPECT_EQ(v, want);
}

TEST(Precision, HalfStepAlphabet) {
  auto v = PrecisionSpec::make(Rat(1, 2), 1).value_alphabet();
  std::vector<Rat> want = {-1, Rat(-1, 2), Rat(1, 2), 1};
  EXPECT_EQ(v, want);
}

TEST(Precision, AlphabetSymmetricNoZero) {
  for (auto spec : {PrecisionSpec::ternary(), PrecisionSpec::int8(),
                    PrecisionSpec::dyadic()}) {
    auto v = spec.value_alphabet();
    EXPECT_EQ(v.size(), spec.alphabet_size());
    for (size_t i = 0; i < v.size(); ++i) {
      EXPECT_NE(v[i], 0);
      EXPECT_EQ(v[i], -v[v.size() - 1 - i]);
    }
  }
}

TEST(Precision, InvariantsRejected) {
  EXPECT_THROW(PrecisionSpec::make(2, 1), std::invalid_argument);     // d > M
  EXPECT_THROW(PrecisionSpec::make(Rat(2, 3), 1), std::invalid_argument);
  EXPECT_THROW(PrecisionSpec::make(1, 2, Rat(1, 2)), std::invalid_argument);
  EXPECT_THROW(PrecisionSpec::make(0, 1), std::invalid_argument);
}

TEST(Precision, ParseRoundTrip) {
  auto spec = PrecisionSpec::parse("delta=1/16 M=8 A=8");
  EXPECT_EQ(spec, PrecisionSpec::dyadic());
  EXPECT_EQ(PrecisionSpec::parse(spec.to_string()), spec);
  EXPECT_EQ(PrecisionSpec::parse("delta=0.5 M=1").mag_quanta(), 2);
  EXPECT_EQ(PrecisionSpec::parse("int8"), PrecisionSpec::int8());
  EXPECT_THROW(PrecisionSpec::parse("delta=1"), std::invalid_argument);
}

TEST(Norm, CountAndPower) {
  auto tern = PrecisionSpec::ternary();
  auto theta = ParamVector::from_values(tern, {1, -1, 0, 1});
  EXPECT_EQ(l0_norm(theta), 3u);
  EXPECT_EQ(lp_norm_pow(theta, 2), Rat(3));  // ||.||_2^2 = 3
  EXPECT_DOUBLE_EQ(lp_norm(theta, 0.0), 3.0);
  EXPECT_NEAR(lp_norm(theta, 2.0), std::sqrt(3.0), 1e-12);
}

TEST(Norm, ZeroVector) {
  auto theta = ParamVector::from_values(PrecisionSpec::ternary(), {0, 0, 0});
  EXPECT_EQ(l0_norm(theta), 0u);
  for (unsigned p = 1; p <= 4; ++p) EXPECT_EQ(lp_norm_pow(theta, p), Rat(0));
}

TEST(Norm, MixedValues) {
  auto spec = PrecisionSpec::make(Rat(1, 2), 2);
  auto theta = ParamVector::from_values(spec, {Rat(1, 2), -2, 0});
  EXPECT_EQ(lp_norm_pow(theta, 1), Rat(5, 2));
}

TEST(Norm, RejectsQuasiNorms) {
  auto theta = ParamVector::from_values(PrecisionSpec::ternary(), {1});
  EXPECT_THROW(lp_norm(theta, 0.5), std::invalid_argument);
  EXPECT_THROW(lp_norm(theta, -1.0), std::invalid_argument);
}

TEST(Norm, NotRepresentable) {
  EXPECT_THROW(
      ParamVector::from_values(PrecisionSpec::ternary(), {2}),
      std::invalid_argument);
  EXPECT_THROW(
      ParamVector::from_values(PrecisionSpec::int8(), {Rat(1, 2)}),
      std::invalid_argument);
}

TEST(Collapse, Examples) {
  auto spec = PrecisionSpec::make(Rat(1, 2), 2);
  auto theta = ParamVector::from_values(spec, {Rat(1, 2), -2, 0});
  auto c = collapse_check(theta, 1);
  EXPECT_EQ(c.lower, Rat(1));
  EXPECT_EQ(c.value, Rat(5, 2));
  EXPECT_EQ(c.upper, Rat(4));
  EXPECT_TRUE(c.holds);

  auto tern = ParamVector::from_values(PrecisionSpec::ternary(), {1, 1, 1});
  auto ct = collapse_check(tern, 2);
  EXPECT_EQ(ct.lower, Rat(3));
  EXPECT_EQ(ct.value, Rat(3));
  EXPECT_EQ(ct.upper, Rat(3));
  EXPECT_TRUE(ct.holds);

  auto empty = ParamVector::from_values(PrecisionSpec::ternary(), {});
  auto ce = collapse_check(empty, 3);
  EXPECT_EQ(ce.lower, Rat(0));
  EXPECT_EQ(ce.value, Rat(0));
  EXPECT_EQ(ce.upper, Rat(0));
  EXPECT_TRUE(ce.holds);
}

TEST(Collapse, PropertyOverRandomVectors) {
  std::mt19937_64 rng(20240811);
  std::vector<PrecisionSpec> specs = {PrecisionSpec::ternary(),
                                      PrecisionSpec::int8(),
                                      PrecisionSpec::dyadic()};
  for (int trial = 0; trial < 400; ++trial) {
    const auto& spec = specs[trial % specs.size()];
    ParamVector theta{spec, {}};
    size_t n = rng() % 24;
    for (size_t i = 0; i < n; ++i) {
      int64_t mq = spec.mag_quanta();
      int64_t q = int64_t(rng() % uint64_t(2 * mq + 1)) - mq;
      theta.quanta.push_back(q);
    }
    for (unsigned p = 1; p <= 16; ++p) {
      auto c = collapse_check(theta, p);
      EXPECT_TRUE(c.holds) << "p=" << p;
      if (spec.mag_quanta() == 1 && spec.delta() == 1) {
        EXPECT_EQ(c.value, Rat(l0_norm(theta)));  // ternary equality
      }
    }
  }
}

TEST(Transfer, SubstitutionExample) {
  // upper form (c_d/delta^p) * n^p * log2(n^p/delta^p) + c_d at n=2, p=2
  auto spec = PrecisionSpec::ternary();
  auto k = lp_transfer_bounds(Rat(2), 2, spec, 0.0, 3.0);
  EXPECT_DOUBLE_EQ(k.k_upper, 27.0);
}

TEST(Transfer, ZeroNorm) {
  auto k = lp_transfer_bounds(Rat(0), 2, PrecisionSpec::int8(), 5.0, 3.0);
  EXPECT_DOUBLE_EQ(k.k_lower, 0.0);
}

TEST(Transfer, TernaryMatchesL0Form) {
  // With delta = M = 1 and p = 1 the interval is the p = 0 substitution.
  auto spec = PrecisionSpec::ternary();
  auto k1 = lp_transfer_bounds(Rat(5), 1, spec, 2.0, 3.0);
  EXPECT_DOUBLE_EQ(k1.k_lower, 3.0);  // 5 - c_u
  EXPECT_DOUBLE_EQ(k1.k_upper, 3.0 * 5 * std::log2(5.0) + 3.0);
}

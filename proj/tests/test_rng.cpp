#include <gtest/gtest.h>

#include <set>

#include "dosattack/rng.hpp"

using dosattack::Philox4x32;
using dosattack::StreamTag;

// Published Philox4x32-10 known-answer vectors.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                        {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPiDigits) {
  const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                        {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(Philox, SameIdentitySameSequence) {
  auto a = dosattack::make_stream(42, 7, StreamTag::Losses, 1);
  auto b = dosattack::make_stream(42, 7, StreamTag::Losses, 1);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Philox, DistinctStreamsDiffer) {
  std::set<std::uint32_t> firsts;
  for (std::uint64_t r = 0; r < 50; ++r) {
    for (auto tag : {StreamTag::ProcessNoise, StreamTag::InitialState, StreamTag::Losses}) {
      auto s = dosattack::make_stream(1, r, tag, 0);
      firsts.insert(s());
    }
  }
  EXPECT_EQ(firsts.size(), 150u);
}

TEST(Philox, UniformInUnitIntervalWithCorrectMean) {
  auto s = dosattack::make_stream(3, 0, StreamTag::Solver);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Standard error of the mean is sqrt(1/12/n) ~ 6.5e-4.
  EXPECT_NEAR(sum / n, 0.5, 5 * 6.5e-4);
}

TEST(Philox, CounterCarriesIntoSecondWord) {
  // Drawing past 2^32 blocks is impractical; check that increments are
  // consistent with direct block generation for the first few blocks.
  Philox4x32 s(99, 3, 4);
  for (std::uint32_t block = 0; block < 4; ++block) {
    const auto expect = Philox4x32::generate({block, 0, 4, 3}, {99, 0});
    for (int j = 0; j < 4; ++j) ASSERT_EQ(s(), expect[static_cast<std::size_t>(j)]);
  }
}

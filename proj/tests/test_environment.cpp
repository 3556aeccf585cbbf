#include <gtest/gtest.h>

#include "heroes/environment.hpp"
#include "heroes/errors.hpp"

using namespace heroes;

TEST(Participants, AllWhenKEqualsN) {
  EXPECT_EQ(sample_participants(4, 4, 1, 0), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(sample_participants(4, 5, 1, 0), DomainError);
  EXPECT_THROW(sample_participants(4, 0, 1, 0), DomainError);
}

TEST(Participants, DeterministicSortedDistinct) {
  const auto a = sample_participants(30, 7, 5, 12);
  EXPECT_EQ(a, sample_participants(30, 7, 5, 12));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::adjacent_find(a.begin(), a.end()), a.end());
  EXPECT_NE(a, sample_participants(30, 7, 5, 13));
}

TEST(Participants, UniformFrequency) {
  std::vector<std::size_t> hits(100, 0);
  for (std::uint64_t r = 0; r < 10000; ++r)
    for (auto id : sample_participants(100, 10, 2024, r)) ++hits[id];
  for (auto h : hits) {
    EXPECT_GE(h, 900u);
    EXPECT_LE(h, 1100u);
  }
}

TEST(Environment, ZeroStdIsExact) {
  ClientProfile p{3, 0.8, 0.0, 1e6, 5e6, 10e6, 20e6};
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto s = sample_environment(p, 1, r, 1e6);
    EXPECT_EQ(s.seconds_per_ref_iter, 0.8);
    EXPECT_DOUBLE_EQ(s.q, 1e6 / 0.8);
  }
}

TEST(Environment, DefaultProfileRangesAndMean) {
  const auto profiles = default_profiles(8, {0.5, 1, 2, 4}, 0.1, 1, 5, 10, 20);
  ASSERT_EQ(profiles.size(), 8u);
  EXPECT_EQ(profiles[5].compute_mean, 1.0);
  double sum = 0.0;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const auto s = sample_environment(profiles[2], 9, r, 1e6);
    EXPECT_GE(s.b_up, 1e6);
    EXPECT_LE(s.b_up, 5e6);
    EXPECT_GE(s.b_down, 10e6);
    EXPECT_LE(s.b_down, 20e6);
    EXPECT_GE(s.seconds_per_ref_iter, 0.1 * profiles[2].compute_mean);
    sum += s.seconds_per_ref_iter;
  }
  EXPECT_NEAR(sum / 10000.0, profiles[2].compute_mean, 0.02 * profiles[2].compute_mean);
}

TEST(Environment, DeterministicPerClientAndRound) {
  const auto p = default_profiles(3, {1.0}, 0.2, 1, 5, 10, 20);
  const auto a = sample_environment(p[1], 4, 7, 1e6), b = sample_environment(p[1], 4, 7, 1e6);
  EXPECT_EQ(a.q, b.q);
  EXPECT_EQ(a.b_up, b.b_up);
  EXPECT_NE(a.q, sample_environment(p[2], 4, 7, 1e6).q);
  EXPECT_NE(a.q, sample_environment(p[1], 4, 8, 1e6).q);
}

TEST(Environment, ProfileValidation) {
  ClientProfile bad{0, 1.0, 0.1, 1e6, 5e6, 4e6, 20e6};
  EXPECT_THROW(bad.validate(), DomainError);
  EXPECT_THROW(default_profiles(2, {}, 0.1, 1, 5, 10, 20), DomainError);
}

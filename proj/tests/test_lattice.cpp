#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bhchaos/lattice.hpp"

using namespace bhchaos;

TEST(Lattice, DefaultCouplingsBreakReflectionSymmetry) {
  const auto p = make_chain(3, {}, 2.48, 150);
  ASSERT_EQ(p.couplings.size(), 2u);
  EXPECT_EQ(p.couplings[0], 1.5);
  EXPECT_EQ(p.couplings[1], 1.0);
  EXPECT_DOUBLE_EQ(p.onsite_u(), 2.48 / 150);

  const auto long_chain = make_chain(7, {}, 1.52, 1);
  ASSERT_EQ(long_chain.couplings.size(), 6u);
  EXPECT_EQ(long_chain.couplings[0], 1.5);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_EQ(long_chain.couplings[k], 1.0);
}

TEST(Lattice, TwoSiteChainIsValid) {
  const auto p = make_chain(2, {1.0}, 5.0, 10);
  EXPECT_EQ(p.sites, 2);
  EXPECT_EQ(p.bosons, 10);
}

TEST(Lattice, RejectsBadParameters) {
  EXPECT_THROW(make_chain(3, {1.5}, 1.0, 10), std::invalid_argument);
  EXPECT_THROW(make_chain(1, {}, 1.0, 10), std::invalid_argument);
  EXPECT_THROW(make_chain(3, {}, -0.5, 10), std::invalid_argument);
  EXPECT_THROW(make_chain(3, {}, 1.0, 0), std::invalid_argument);
  EXPECT_THROW(make_chain(3, {1.0, NAN}, 1.0, 1), std::invalid_argument);
}

TEST(Lattice, RelativeEnergy) {
  EXPECT_EQ(relative_energy(-1.0, -1.0, 3.0), 0.0);
  EXPECT_EQ(relative_energy(3.0, -1.0, 3.0), 1.0);
  EXPECT_EQ(relative_energy(0.0, -1.0, 3.0), 0.25);
  EXPECT_THROW(relative_energy(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST(Lattice, WindowsPartitionTheRange) {
  const auto w = make_windows(0.0, 1.0, 100);
  ASSERT_EQ(w.size(), 100u);
  EXPECT_NEAR(w[39].lo, 0.39, 1e-15);
  EXPECT_NEAR(w[39].hi, 0.40, 1e-15);
  EXPECT_NEAR(w[39].rel_hi, 0.40, 1e-15);
  EXPECT_EQ(w.front().lo, 0.0);
  EXPECT_EQ(w.back().hi, 1.0);
  for (std::size_t i = 1; i < w.size(); ++i) {
    EXPECT_EQ(w[i].lo, w[i - 1].hi);
    EXPECT_NEAR(w[i].hi - w[i].lo, 0.01, 4e-16);
  }

  const auto four = make_windows(-2.0, 2.0, 4);
  const double edges[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(four[i].lo, edges[i]);
    EXPECT_EQ(four[i].hi, edges[i + 1]);
  }

  const auto one = make_windows(0.0, 1.0, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].lo, 0.0);
  EXPECT_EQ(one[0].hi, 1.0);
  EXPECT_THROW(make_windows(1.0, 1.0, 10), std::invalid_argument);
}

TEST(Lattice, EdgeConvention) {
  const auto w = make_windows(-2.0, 2.0, 4);
  EXPECT_TRUE(w[0].contains(-2.0));
  EXPECT_TRUE(w[0].contains(-1.0));
  EXPECT_FALSE(w[1].contains(-1.0));
  EXPECT_TRUE(w[3].contains(2.0));
  EXPECT_EQ(window_index_of(-2.0, -2.0, 2.0, 4), 0);
  EXPECT_EQ(window_index_of(-1.0, -2.0, 2.0, 4), 0);
  EXPECT_EQ(window_index_of(2.0, -2.0, 2.0, 4), 3);
  EXPECT_FALSE(window_index_of(2.5, -2.0, 2.0, 4).has_value());
}

TEST(Lattice, EveryEnergyHasExactlyOneWindow) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double lo = -5.0 * u(rng);
    const double hi = lo + 0.1 + 7.0 * u(rng);
    const auto windows = make_windows(lo, hi, 100);
    std::vector<double> probes;
    for (const auto& w : windows) {
      probes.push_back(w.lo);
      probes.push_back(w.hi);
      probes.push_back(std::nextafter(w.hi, lo));
      probes.push_back(lo + (hi - lo) * u(rng));
    }
    for (double e : probes) {
      int owners = 0, owner = -1;
      for (const auto& w : windows)
        if (w.contains(e)) ++owners, owner = w.index;
      ASSERT_EQ(owners, 1) << e;
      EXPECT_EQ(window_index_of(e, lo, hi, 100), owner);
    }
  }
}

TEST(Lattice, JsonRoundTripAndDefaults) {
  const auto p = make_chain(4, {0.5, 1.0, 2.0}, 3.0, 20);
  nlohmann::json j = p;
  const auto back = j.get<ChainParams>();
  EXPECT_EQ(back.sites, 4);
  EXPECT_EQ(back.couplings, p.couplings);
  EXPECT_EQ(back.lambda, 3.0);
  EXPECT_EQ(back.bosons, 20);

  const auto defaults = nlohmann::json::object().get<ChainParams>();
  EXPECT_EQ(defaults.sites, 3);
  EXPECT_EQ(defaults.couplings, (std::vector<double>{1.5, 1.0}));
  EXPECT_THROW((nlohmann::json{{"L", 3}, {"couplings", {1.0}}}.get<ChainParams>()),
               std::invalid_argument);
}

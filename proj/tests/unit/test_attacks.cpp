#include <gtest/gtest.h>

#include <cmath>

#include "../support/oracle.hpp"
#include "robustfl/attacks.hpp"
#include "robustfl/error.hpp"

using namespace robustfl;

namespace {

const MlpArchitecture kArch{2, {3}, 2};

}  // namespace

TEST(Targeted, HandArithmetic) {
  ModelParams local = ModelParams::zeros(kArch);
  ModelParams global = ModelParams::zeros(kArch);
  local.theta[0] = 2.0;
  global.theta[0] = 1.0;
  EXPECT_EQ(targeted_attack(local, global, 3.0).theta[0], 5.0);
}

TEST(Targeted, IdentityCases) {
  Rng rng(1);
  const ModelParams local = oracle::random_model(kArch, rng);
  const ModelParams global = oracle::random_model(kArch, rng);
  EXPECT_EQ(targeted_attack(local, global, 0.0).theta, local.theta);
  EXPECT_EQ(targeted_attack(global, global, 7.5).theta, global.theta);
}

TEST(Targeted, ComposesAffinely) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams local = oracle::random_model(kArch, rng);
    const ModelParams global = oracle::random_model(kArch, rng);
    const double l1 = rng.uniform(0.0, 5.0);
    const double l2 = rng.uniform(0.0, 5.0);
    const ModelParams twice = targeted_attack(targeted_attack(local, global, l1), global, l2);
    const ModelParams once = targeted_attack(local, global, l1 + l2 + l1 * l2);
    for (std::size_t k = 0; k < once.theta.size(); ++k) EXPECT_NEAR(twice.theta[k], once.theta[k], 1e-12);
  }
}

TEST(Targeted, ArchMismatch) {
  EXPECT_THROW(targeted_attack(ModelParams::zeros(kArch), ModelParams::zeros({2, {4}, 2}), 1.0), ConfigError);
}

TEST(Untargeted, ZeroEtaGivesZeroVector) {
  Rng rng(3);
  const ModelParams global = oracle::random_model(kArch, rng);
  for (double v : untargeted_attack(global, 0.0, rng).theta) EXPECT_EQ(v, 0.0);
}

TEST(Untargeted, DeterministicGivenSeed) {
  Rng init(4);
  const ModelParams global = oracle::random_model(kArch, init);
  Rng a(77);
  Rng b(77);
  EXPECT_EQ(untargeted_attack(global, 10.0, a).theta, untargeted_attack(global, 10.0, b).theta);
}

TEST(Untargeted, MeanMatchesNegativeScaledGlobal) {
  Rng init(5);
  const ModelParams global = oracle::random_model(kArch, init);
  const double eta = 10.0;
  const int draws = 10000;
  std::vector<double> mean(global.theta.size(), 0.0);
  Rng rng(6);
  for (int i = 0; i < draws; ++i) {
    const ModelParams fake = untargeted_attack(global, eta, rng);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += fake.theta[k] / draws;
  }
  const double tolerance = 4.0 * eta / std::sqrt(static_cast<double>(draws));
  for (std::size_t k = 0; k < mean.size(); ++k) EXPECT_NEAR(mean[k], -eta * global.theta[k], tolerance);
}

TEST(AttackConfig, ParsingAndValidation) {
  EXPECT_EQ(parse_attack_kind("Targeted"), AttackKind::Targeted);
  EXPECT_EQ(parse_attack_kind("none"), AttackKind::None);
  EXPECT_THROW(parse_attack_kind("backdoor"), ConfigError);
  EXPECT_THROW((AttackConfig{AttackKind::Targeted, -1.0, 1.0}.validate()), ConfigError);
  EXPECT_THROW((AttackConfig{AttackKind::Untargeted, 1.0, -1.0}.validate()), ConfigError);
  EXPECT_NO_THROW((AttackConfig{AttackKind::None, -1.0, -1.0}.validate()));
}

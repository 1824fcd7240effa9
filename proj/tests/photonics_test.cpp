#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qnet/photonics/model.hpp"
#include "qnet/photonics/montecarlo.hpp"
#include "qnet/photonics/raman.hpp"
#include "support/poisson_oracle.hpp"

using namespace qnet;
using namespace qnet::photonics;

namespace {

ChannelModel quiet_arm(double eta, double det = 0.3) {
  ChannelModel ch;
  ch.transmittance = eta;
  ch.detector_efficiency = det;
  ch.dark_rate_hz = 0;
  return ch;
}

// Simpson integral of the surviving classical power along the fiber.
double simpson_effective_length(double length_km, double att_db_per_km) {
  const int n = 2000;
  double h = length_km / n, acc = 0;
  for (int i = 0; i <= n; ++i) {
    double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::pow(10.0, -att_db_per_km * i * h / 10.0);
  }
  return acc * h / 3;
}

PairSetup random_setup(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PairSetup s;
  s.eps.pair_rate_hz = 1e5 + 1e7 * u(rng);
  s.eps.intrinsic_visibility = 0.8 + 0.2 * u(rng);
  s.arm1 = quiet_arm(0.05 + 0.9 * u(rng));
  s.arm1.dark_rate_hz = 1000 * u(rng);
  s.arm2 = quiet_arm(0.001 + 0.2 * u(rng));
  s.arm2.dark_rate_hz = 1000 * u(rng);
  s.arm2.fiber_length_km = 1 + 80 * u(rng);
  s.classical_arm1 = u(rng) < 0.5;
  s.arm1.fiber_length_km = s.classical_arm1 ? 1 + 80 * u(rng) : 0;
  return s;
}

}  // namespace

TEST(NoiseRate, ZeroPowerIsDarkFloor) {
  ChannelModel ch;
  ch.dark_rate_hz = 100;
  ch.raman_coeff = 5;
  ch.fiber_length_km = 45.6;
  EXPECT_DOUBLE_EQ(noise_rate(ch), 100.0);
}

TEST(NoiseRate, DoublingPowerDoublesRamanTerm) {
  ChannelModel ch;
  ch.dark_rate_hz = 100;
  ch.raman_coeff = 3.7;
  ch.fiber_length_km = 45.6;
  ch.classical_power_mw = 1.5;
  double r1 = noise_rate(ch) - ch.dark_rate_hz;
  ch.classical_power_mw = 3.0;
  double r2 = noise_rate(ch) - ch.dark_rate_hz;
  EXPECT_NEAR(r2, 2 * r1, 1e-9 * r2);
}

TEST(NoiseRate, EffectiveLengthMatchesNumericalIntegral) {
  for (double att : {0.2, 0.33, 0.43, 1.0})
    for (double len : {1.0, 22.8, 45.6, 100.0})
      EXPECT_NEAR(effective_length_km(len, att), simpson_effective_length(len, att), 1e-8 * len);
  EXPECT_DOUBLE_EQ(effective_length_km(12.5, 0.0), 12.5);
}

TEST(SinglesAndCoincidences, NoiselessExample) {
  EpsModel eps;
  eps.pair_rate_hz = 1e6;
  auto arm = quiet_arm(1.0 / 3.0, 0.3);  // eta*det = 0.1
  arm.coincidence_window_s = 0.5e-9;
  auto s = singles_and_coincidences(eps, arm, arm);
  EXPECT_NEAR(s.singles_1_hz, 1e5, 1e-6);
  EXPECT_NEAR(s.singles_2_hz, 1e5, 1e-6);
  EXPECT_NEAR(s.coincidences_hz, 1e4, 1e-6);
  EXPECT_NEAR(s.accidentals_hz, 5.0, 1e-9);
  EXPECT_NEAR(s.car, 2000.0, 1e-6);
}

TEST(SinglesAndCoincidences, AccidentalFormulaAgreesWithPointProcess) {
  // 10^6 windows at s2*tau = 0.005 give ~5000 accidentals (1.4% Poisson spread)
  EpsModel eps;
  eps.pair_rate_hz = 1e8;
  auto arm = quiet_arm(1.0 / 3.0, 0.3);
  auto s = singles_and_coincidences(eps, arm, arm);
  auto est = qnet::testing::simulate_accidentals(s.singles_1_hz, s.singles_2_hz, 0.5e-9, 1'000'000, 7);
  EXPECT_NEAR(est.rate_hz, s.accidentals_hz, 0.05 * s.accidentals_hz);
}

TEST(SinglesAndCoincidences, AbsorbingArmAndNoiseOnly) {
  EpsModel eps;
  auto lossy = quiet_arm(0.0);
  auto ok = quiet_arm(0.5);
  ok.dark_rate_hz = lossy.dark_rate_hz = 500;
  auto s = singles_and_coincidences(eps, lossy, ok);
  EXPECT_EQ(s.coincidences_hz, 0.0);
  EXPECT_EQ(s.car, 0.0);
  eps.pair_rate_hz = 0;
  s = singles_and_coincidences(eps, ok, ok);
  EXPECT_EQ(s.car, 0.0);
  EXPECT_GT(s.accidentals_hz, 0.0);
}

TEST(SinglesAndCoincidences, CarIsInfiniteWithoutAccidentals) {
  EXPECT_TRUE(std::isinf(car_of(10.0, 0.0)));
  EXPECT_EQ(car_of(0.0, 0.0), 0.0);
}

TEST(SinglesAndCoincidences, TauIsTheNarrowerWindow) {
  EpsModel eps;
  auto a = quiet_arm(0.5), b = quiet_arm(0.5);
  a.coincidence_window_s = 1e-9;
  b.coincidence_window_s = 0.25e-9;
  auto s = singles_and_coincidences(eps, a, b);
  EXPECT_NEAR(s.accidentals_hz, s.singles_1_hz * s.singles_2_hz * 0.25e-9, 1e-12);
}

TEST(Visibility, Examples) {
  EXPECT_DOUBLE_EQ(visibility(0.9, 100.0, 0.0), 0.9);
  EXPECT_NEAR(visibility(1.0, 7.0, 7.0), 1.0 / 3.0, 1e-15);
  // inverse of the model at V0 = 0.90, V = 0.77
  double ratio = (0.90 / 0.77 - 1) / 2;
  EXPECT_NEAR(ratio, 0.0844, 5e-5);
  EXPECT_NEAR(visibility(0.90, 1.0, ratio), 0.77, 1e-12);
}

TEST(Classifiers, NonClassicalBoundary) {
  EXPECT_EQ(classify_nonclassical(0.77), BellClass::NonClassical);
  EXPECT_EQ(classify_nonclassical(0.5), BellClass::Classical);
  EXPECT_EQ(classify_nonclassical(std::sqrt(0.5)), BellClass::Classical);
  EXPECT_EQ(classify_nonclassical(1.0 / std::sqrt(2.0)), BellClass::Classical);
  EXPECT_EQ(classify_nonclassical(0.70710678), BellClass::Classical);
  EXPECT_EQ(classify_nonclassical(std::nextafter(std::sqrt(0.5), 1.0)), BellClass::NonClassical);
  EXPECT_THROW(classify_nonclassical(-0.01), OutOfRange);
  EXPECT_THROW(classify_nonclassical(1.01), OutOfRange);
  EXPECT_THROW(classify_nonclassical(std::nan("")), OutOfRange);
}

TEST(Classifiers, TeleportationBoundary) {
  EXPECT_EQ(teleportation_bound_check(0.90), TeleportationClass::AboveClassical);
  EXPECT_EQ(teleportation_bound_check(2.0 / 3.0), TeleportationClass::NotAboveClassical);
  EXPECT_EQ(teleportation_bound_check(0.5), TeleportationClass::NotAboveClassical);
  EXPECT_EQ(teleportation_bound_check(std::nextafter(2.0 / 3.0, 1.0)), TeleportationClass::AboveClassical);
  EXPECT_THROW(teleportation_bound_check(1.5), OutOfRange);
}

TEST(HomDip, ShapeExamples) {
  HomDipModel m{1000.0, 0.9, 10.0};
  EXPECT_NEAR(hom_coincidence_rate(m, 0), 100.0, 1e-9);
  EXPECT_NEAR(hom_coincidence_rate(m, 100.0), 1000.0, 1e-6);
  for (double d : {1.0, 5.0, 13.0}) EXPECT_DOUBLE_EQ(hom_coincidence_rate(m, d), hom_coincidence_rate(m, -d));
  m.hom_visibility = 0;
  for (double d : {-50.0, 0.0, 3.0}) EXPECT_DOUBLE_EQ(hom_coincidence_rate(m, d), 1000.0);
}

TEST(PoissonMc, IdentityMetricHasSqrtNSpread) {
  auto r = poisson_mc_uncertainty({{"n", 10000}}, [](const CountMap& c) { return double(c.at("n")); }, 10000, 1);
  EXPECT_NEAR(r.std, 100.0, 10.0);
  EXPECT_NEAR(r.mean, 10000.0, 5.0);
}

TEST(PoissonMc, ConstantMetricHasZeroSpread) {
  auto r = poisson_mc_uncertainty({{"n", 50}}, [](const CountMap&) { return 3.0; }, 500, 2);
  EXPECT_EQ(r.std, 0.0);
  EXPECT_EQ(r.mean, 3.0);
}

TEST(PoissonMc, ResultIndependentOfThreadSplit) {
  CountMap counts{{"coincidences", 84000}, {"accidentals", 244}};
  auto one = poisson_mc_uncertainty(counts, car_from_counts, McOptions{5000, 11, 1});
  auto four = poisson_mc_uncertainty(counts, car_from_counts, McOptions{5000, 11, 4});
  EXPECT_EQ(one.mean, four.mean);
  EXPECT_EQ(one.std, four.std);
  auto again = poisson_mc_uncertainty(counts, car_from_counts, McOptions{5000, 11, 1});
  EXPECT_EQ(one.mean, again.mean);
}

TEST(PoissonMc, CarSpreadMatchesDeltaMethod) {
  // std(C/A) ~ (C/A) sqrt(1/C + 1/A) for large counts
  CountMap counts{{"coincidences", 344 * 250}, {"accidentals", 250}};
  auto r = poisson_mc_uncertainty(counts, car_from_counts, 20000, 3);
  double expect = 344.0 * std::sqrt(1.0 / (344 * 250) + 1.0 / 250);
  EXPECT_NEAR(r.std, expect, 0.05 * expect);
}

TEST(PoissonMc, MetricErrorsCarrySampleIndex) {
  int calls = 0;
  auto bad = [&](const CountMap&) -> double {
    if (++calls == 150) throw std::runtime_error("boom");
    return 1.0;
  };
  try {
    poisson_mc_uncertainty({{"n", 5}}, bad, 200, 0);
    FAIL() << "expected MetricEvaluationError";
  } catch (const MetricEvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 149"), std::string::npos) << e.what();
  }
  EXPECT_THROW(poisson_mc_uncertainty({{"n", 5}}, bad, 50, 0), PreconditionViolation);
  EXPECT_THROW(poisson_mc_uncertainty({{"n", -1}}, bad, 200, 0), PreconditionViolation);
}

TEST(CalibrateRaman, SingleCarObservationIsExact) {
  PairSetup s;
  s.eps.pair_rate_hz = 2e6;
  s.arm1 = quiet_arm(0.5);
  s.arm1.dark_rate_hz = 200;
  s.arm2 = quiet_arm(0.4);
  s.arm2.dark_rate_hz = 200;
  s.arm1.fiber_length_km = s.arm2.fiber_length_km = 10;
  s.classical_arm1 = s.classical_arm2 = true;
  s.eps.pair_rate_hz = solve_pair_rate_for_car(s, 344.0);
  EXPECT_NEAR(s.predict(0, 0).car, 344.0, 1e-6);
  auto fit = calibrate_raman({{2.0, ObservedMetric::Car, 246.0}}, s);
  EXPECT_NEAR(s.predict(fit.raman_coeff, 2.0).car, 246.0, 1e-8);
  EXPECT_LT(fit.rms_residual, 1e-10);
}

TEST(CalibrateRaman, ZeroPowerOnlyIsInfeasible) {
  PairSetup s;
  s.arm2.fiber_length_km = 10;
  EXPECT_THROW(calibrate_raman({{0.0, ObservedMetric::Car, 300.0}}, s), NoFeasibleFit);
  EXPECT_THROW(calibrate_raman({}, s), NoFeasibleFit);
}

TEST(CalibrateRaman, ObservationAboveZeroNoiseIsInfeasible) {
  PairSetup s;
  s.arm2.fiber_length_km = 10;
  double ceiling = s.predict(0, 1.0).car;
  EXPECT_THROW(calibrate_raman({{1.0, ObservedMetric::Car, ceiling * 1.1}}, s), NoFeasibleFit);
}

TEST(CalibrateRaman, RoundTripFromSyntheticObservations) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_setup(rng);
    double truth = std::uniform_real_distribution<double>(1.0, 500.0)(rng);
    std::vector<RamanObservation> obs{
        {0.7, ObservedMetric::Car, s.predict(truth, 0.7).car},
        {4.0, ObservedMetric::Visibility, s.predict(truth, 4.0).visibility},
    };
    auto fit = calibrate_raman(obs, s);
    EXPECT_NEAR(fit.raman_coeff, truth, 1e-6 * truth) << "trial " << trial;
  }
}

TEST(CalibrateRaman, InconsistentObservationsLandBetweenExactSolutions) {
  PairSetup s;
  s.arm1 = quiet_arm(0.5);
  s.arm2 = quiet_arm(0.01);
  s.arm2.fiber_length_km = 45.6;
  s.eps.pair_rate_hz = 1e7;
  double c1 = calibrate_raman({{1.0, ObservedMetric::Visibility, 0.8}}, s).raman_coeff;
  double c2 = calibrate_raman({{2.0, ObservedMetric::Visibility, 0.6}}, s).raman_coeff;
  auto both = calibrate_raman({{1.0, ObservedMetric::Visibility, 0.8}, {2.0, ObservedMetric::Visibility, 0.6}}, s);
  EXPECT_GE(both.raman_coeff, std::min(c1, c2));
  EXPECT_LE(both.raman_coeff, std::max(c1, c2));
  EXPECT_GT(both.rms_residual, 0.0);
}

TEST(PhotonicsProperties, CarAndVisibilityStrictlyDecreaseWithPower) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = random_setup(rng);
    double coeff = std::uniform_real_distribution<double>(0.1, 100.0)(rng);
    double prev_car = s.predict(coeff, 0).car, prev_v = s.predict(coeff, 0).visibility;
    for (double p = 0.25; p <= 20.0; p += 0.25) {
      auto st = s.predict(coeff, p);
      ASSERT_LT(st.car, prev_car);
      ASSERT_LT(st.visibility, prev_v);
      prev_car = st.car;
      prev_v = st.visibility;
    }
  }
}

TEST(PhotonicsProperties, NonClassicalClassTransitionsAtMostOnce) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = random_setup(rng);
    double coeff = std::uniform_real_distribution<double>(1.0, 2000.0)(rng);
    std::vector<double> dbm;
    for (double p = -20; p <= 20; p += 0.1) dbm.push_back(p);
    auto sweep = sweep_power_dbm(s, coeff, dbm);
    int transitions = 0;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
      if (sweep[i].bell != sweep[i - 1].bell) {
        ++transitions;
        ASSERT_EQ(sweep[i].bell, BellClass::Classical);
      }
    }
    ASSERT_LE(transitions, 1);
    double limit = nonclassical_limit_mw(s, coeff);
    for (const auto& p : sweep) {
      if (std::abs(p.power_mw - limit) < 1e-9 * limit) continue;
      ASSERT_EQ(p.bell == BellClass::NonClassical, p.power_mw < limit);
    }
  }
}

TEST(PhotonicsProperties, RateScalingWithWindowCompensationIsInvariant) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_setup(rng);
    double coeff = 40.0, power = 2.0, k = 3.5;
    auto base = s.predict(coeff, power);
    auto scaled = s;
    scaled.eps.pair_rate_hz *= k;
    for (auto* arm : {&scaled.arm1, &scaled.arm2}) {
      arm->dark_rate_hz *= k;
      arm->coincidence_window_s /= k;
    }
    auto out = scaled.predict(coeff * k, power);
    EXPECT_NEAR(out.visibility, base.visibility, 1e-12);
    EXPECT_NEAR(out.car, base.car, 1e-9 * base.car);
  }
}

TEST(PhotonicsProperties, RateScalingAloneDividesCarAndLowersVisibility) {
  // Accidentals grow as k^2 against k for true coincidences.
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_setup(rng);
    double coeff = 40.0, power = 2.0, k = 2.0;
    auto base = s.predict(coeff, power);
    auto scaled = s;
    scaled.eps.pair_rate_hz *= k;
    scaled.arm1.dark_rate_hz *= k;
    scaled.arm2.dark_rate_hz *= k;
    auto out = scaled.predict(coeff * k, power);
    EXPECT_NEAR(out.car, base.car / k, 1e-9 * base.car);
    EXPECT_LT(out.visibility, base.visibility);
  }
}

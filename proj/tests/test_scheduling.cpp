#include "satsync/scheduling.hpp"

#include <cmath>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "satsync/riccati.hpp"

namespace satsync {
namespace {

AgentModel scalar_integrator() {
  return AgentModel(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
}

const PCache& triple_cache() {
  static const PCache cache(AgentModel::triple_integrator());
  return cache;
}

Vector scalar(double v) { return Vector::Constant(1, v); }

double g_of(const AgentModel& model, double rho, const Vector& chi) {
  const Matrix p = solve_scheduled_are(model, rho).p;
  return chi.dot(p * chi) * (model.b().transpose() * p * model.b()).trace();
}

TEST(PCacheTest, GridIsDyadicAndDescending) {
  const PCache& cache = triple_cache();
  ASSERT_EQ(cache.grid().size(), static_cast<std::size_t>(kScheduleLevels + 1));
  EXPECT_EQ(cache.grid().front(), 1.0);
  EXPECT_EQ(cache.rho_min(), std::exp2(-20));
  for (std::size_t k = 1; k < cache.grid().size(); ++k)
    EXPECT_LT(cache.grid()[k], cache.grid()[k - 1]);
  for (const RiccatiSolution& sol : cache.solutions()) EXPECT_TRUE(sol.closed_loop_stable);
}

TEST(PCacheTest, FingerprintTracksModel) {
  const PCache cache(scalar_integrator());
  EXPECT_EQ(cache.fingerprint(), model_fingerprint(scalar_integrator()));
  EXPECT_NE(cache.fingerprint(), model_fingerprint(AgentModel::triple_integrator()));
}

TEST(PCacheTest, RejectsModelViolatingAssumption) {
  const AgentModel unstable(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  EXPECT_THROW(PCache{unstable}, ValidationError);
}

TEST(PCacheTest, BuildsForMixedJordanChain) {
  Matrix j = Matrix::Zero(4, 4);
  j(0, 1) = 1.0;
  j(2, 3) = 0.5;
  j(3, 2) = -0.5;
  Matrix t(4, 4);
  t << 1.0, 0.3, -0.2, 0.1,  //
      -0.1, 0.9, 0.4, 0.2,   //
      0.2, -0.3, 1.1, -0.1,  //
      0.3, 0.1, 0.2, 1.0;
  const Vector b = Vector::LinSpaced(4, -1.0, 0.5);
  Matrix c = Matrix::Zero(1, 4);
  c(0, 0) = 1.0;
  const AgentModel model(t * j * t.inverse(), b, c);
  const PCache cache(model, Execution::kSerial);
  const BracketTable& table = cache.bracket(kScheduleLevels - 1);
  for (std::size_t i = 0; i < table.p.size(); i += 256)
    EXPECT_LE(scheduled_are_residual(model, table.rho[i], table.p[i]), 1e-9);
}

TEST(ScheduleGain, ScalarExamples) {
  const PCache cache(scalar_integrator());
  // P_rho = rho, so g(rho, chi) = chi^2 rho^2.
  EXPECT_EQ(epsilon_of_state(scalar(0.5), cache), 1.0);
  EXPECT_NEAR(epsilon_of_state(scalar(2.0), cache), 0.5, 1e-12);
  EXPECT_EQ(epsilon_of_state(scalar(0.0), cache), 1.0);
  EXPECT_NEAR(epsilon_of_state(scalar(-3.0), cache), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(epsilon_of_state(scalar(1000.0), cache), 1e-3, 1e-12);
}

TEST(ScheduleGain, ZeroStateGivesOneForAnyModel) {
  EXPECT_EQ(epsilon_of_state(Vector::Zero(3), triple_cache()), 1.0);
}

TEST(ScheduleGain, FloorErrorReportsStateNorm) {
  const PCache cache(scalar_integrator());
  try {
    epsilon_of_state(scalar(std::exp2(21)), cache);
    FAIL() << "expected a floor error";
  } catch (const ScheduleFloorError& e) {
    EXPECT_EQ(e.state_norm(), std::exp2(21));
  }
}

TEST(ScheduleGain, MatchesIndependentCrossingWithinRelativeWidth) {
  const AgentModel model = AgentModel::triple_integrator();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 4; ++trial) {
    Vector chi(3);
    for (int k = 0; k < 3; ++k) chi[k] = normal(rng);
    chi *= std::pow(10.0, trial);
    const double eps = epsilon_of_state(chi, triple_cache());
    if (eps == 1.0) {
      EXPECT_LE(g_of(model, 1.0, chi), 1.0);
      continue;
    }
    // Bisection on independent solves for the exact crossing.
    double lo = triple_cache().rho_min();
    double hi = 1.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = std::sqrt(lo * hi);
      (g_of(model, mid, chi) <= 1.0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(eps, lo, 1e-3 * lo) << "trial " << trial;
  }
}

TEST(ScheduleGain, MonotoneAlongRays) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int ray = 0; ray < 5; ++ray) {
    Vector dir(3);
    for (int k = 0; k < 3; ++k) dir[k] = normal(rng);
    double previous = 1.0;
    for (double s = 0.01; s < 1e4; s *= 1.3) {
      const double eps = epsilon_of_state(s * dir, triple_cache());
      EXPECT_LE(eps, previous) << "ray " << ray << " scale " << s;
      previous = eps;
    }
  }
}

TEST(ScheduleGain, GridConstraintNondecreasingInRho) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  const PCache& cache = triple_cache();
  for (int trial = 0; trial < 20; ++trial) {
    Vector chi(3);
    for (int k = 0; k < 3; ++k) chi[k] = 100.0 * normal(rng);
    for (int k = 1; k <= kScheduleLevels; ++k)
      EXPECT_LE(cache.g_at_grid(k, chi), cache.g_at_grid(k - 1, chi) * (1.0 + 1e-12));
  }
}

TEST(ScheduleGain, FeedbackStaysInsideUnitBox) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    Vector chi(3);
    for (int k = 0; k < 3; ++k) chi[k] = normal(rng);
    chi *= std::pow(10.0, trial % 5);
    const ScheduledGain gain = schedule_gain(chi, triple_cache());
    EXPECT_LE(gain.g, 1.0);
    EXPECT_LE((gain.bt_p * chi).cwiseAbs().maxCoeff(), 1.0 + 1e-12);
    EXPECT_GE(gain.epsilon, triple_cache().rho_min());
  }
}

TEST(ScheduleGain, ContinuousAcrossSubIntervals) {
  // A fine sweep along a ray never jumps by more than the local slope allows.
  const Vector dir = (Vector(3) << 1.0, -0.5, 0.25).finished();
  double previous = epsilon_of_state(10.0 * dir, triple_cache());
  for (double s = 10.0; s < 11.0; s += 1e-4) {
    const double eps = epsilon_of_state(s * dir, triple_cache());
    EXPECT_LT(std::abs(eps - previous), 1e-4 * previous);
    previous = eps;
  }
}

TEST(BracketTableTest, ParallelMatchesSerialBitForBit) {
  const AgentModel model = AgentModel::triple_integrator();
  const PCache& cache = triple_cache();
  const int k = 6;
  const BracketTable serial = build_bracket(model, cache.solutions()[k + 1], cache.solutions()[k],
                                            Execution::kSerial);
  const BracketTable parallel = build_bracket(model, cache.solutions()[k + 1],
                                              cache.solutions()[k], Execution::kParallel);
  ASSERT_EQ(serial.p.size(), static_cast<std::size_t>(kBracketSubdivisions + 1));
  for (std::size_t j = 0; j < serial.p.size(); ++j) {
    EXPECT_EQ(serial.rho[j], parallel.rho[j]);
    EXPECT_TRUE(serial.p[j] == parallel.p[j]) << "entry " << j;
  }
  EXPECT_EQ(serial.rho.front(), cache.grid()[k + 1]);
  EXPECT_EQ(serial.rho.back(), cache.grid()[k]);
}

TEST(BracketTableTest, EntriesSolveTheirEquation) {
  const AgentModel model = AgentModel::triple_integrator();
  const BracketTable& table = triple_cache().bracket(10);
  for (std::size_t j = 0; j < table.p.size(); j += 97) {
    const double np = Eigen::JacobiSVD<Matrix>(table.p[j]).singularValues()(0);
    EXPECT_LE(scheduled_are_residual(model, table.rho[j], table.p[j]), 1e-9 * (1.0 + np * np));
    if (j > 0) EXPECT_GT(table.rho[j], table.rho[j - 1]);
  }
}

}  // namespace
}  // namespace satsync

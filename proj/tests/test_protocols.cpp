#include "satsync/protocols.hpp"

#include <algorithm>
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "satsync/riccati.hpp"
#include "satsync/sim.hpp"

namespace satsync {
namespace {

const std::shared_ptr<const PCache>& triple_cache() {
  static const auto cache = std::make_shared<const PCache>(AgentModel::triple_integrator());
  return cache;
}

ProtocolConfig config_for(ProtocolKind kind, const AgentModel& model, double eps = 0.01) {
  return make_protocol(kind, model, eps, is_global(kind) ? triple_cache() : nullptr);
}

Network two_agent_edge() {
  Matrix a = Matrix::Zero(2, 2);
  a(1, 0) = 1.0;
  return Network(a, {true, false});
}

Network three_cycle(std::vector<bool> roots = {true, false, false}) {
  Matrix a = Matrix::Zero(3, 3);
  a(1, 0) = 1.0;
  a(2, 1) = 1.0;
  a(0, 2) = 1.0;
  return Network(a, std::move(roots));
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = u(rng);
  return v;
}

constexpr ProtocolKind kAllKinds[] = {ProtocolKind::kGlobalFull, ProtocolKind::kGlobalPartial,
                                      ProtocolKind::kSemiglobalFull,
                                      ProtocolKind::kSemiglobalPartial};

TEST(ProtocolKindTest, NamesRoundTrip) {
  for (ProtocolKind kind : kAllKinds) EXPECT_EQ(parse_protocol_kind(to_string(kind)), kind);
  EXPECT_THROW(parse_protocol_kind("global"), ParameterError);
}

TEST(CouplingSignal, SynchronizedOutputsGiveZero) {
  const Network net = three_cycle();
  Matrix y(2, 3);
  y.colwise() = Vector::Constant(2, 0.7);
  EXPECT_EQ(coupling_signal(y, Vector::Constant(2, 0.7), net).cwiseAbs().maxCoeff(), 0.0);
}

TEST(CouplingSignal, TwoAgentHandEvaluation) {
  const Matrix y = (Matrix(1, 2) << 1.0, 0.0).finished();
  const Matrix zeta = coupling_signal(y, Vector::Zero(1), two_agent_edge());
  EXPECT_EQ(zeta(0, 0), 1.0);
  EXPECT_EQ(zeta(0, 1), -1.0);
}

TEST(CouplingSignal, NoRootsReducesToPlainLaplacian) {
  const Network net = three_cycle({false, false, false});
  std::mt19937_64 rng(1);
  Matrix y(2, 3);
  for (int i = 0; i < 3; ++i) y.col(i) = random_vector(rng, 2, 1.0);
  const Matrix expected = y * laplacian(net).transpose();
  EXPECT_LT((coupling_signal(y, random_vector(rng, 2, 1.0), net) - expected).norm(), 1e-15);
}

TEST(AdditionalExchange, EqualSignalsGiveZero) {
  Matrix xi(3, 3);
  xi.colwise() = Vector::Constant(3, -2.0);
  EXPECT_EQ(additional_exchange(xi, three_cycle()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AdditionalExchange, TwoAgentHandEvaluation) {
  const Vector v = (Vector(2) << 0.3, -1.2).finished();
  Matrix xi = Matrix::Zero(2, 2);
  xi.col(0) = v;
  const Matrix zeta = additional_exchange(xi, two_agent_edge());
  EXPECT_EQ(zeta.col(0), Vector::Zero(2));
  EXPECT_EQ(zeta.col(1), -v);
}

TEST(AdditionalExchange, CycleMatchesKroneckerOracle) {
  const Network net = three_cycle();
  const Matrix xi = Matrix::Identity(3, 3);  // xi_i = e_i
  const Vector stacked = Eigen::Map<const Vector>(xi.data(), 9);
  const Vector expected =
      testing::kron_product(laplacian(net), Matrix::Identity(3, 3)) * stacked;
  const Matrix zeta = additional_exchange(xi, net);
  EXPECT_LT((Eigen::Map<const Vector>(zeta.data(), 9) - expected).norm(), 1e-15);
}

TEST(ClosedLoopTest, LayoutDimensions) {
  const AgentModel model = AgentModel::triple_integrator();
  for (ProtocolKind kind : kAllKinds) {
    const ClosedLoop loop(model, three_cycle(), config_for(kind, model));
    const int expected = 9 + 3 + 9 + (is_partial(kind) ? 9 : 0);
    EXPECT_EQ(loop.layout().dim(), expected) << to_string(kind);
  }
}

TEST(ClosedLoopTest, MissingParametersAreRejected) {
  const AgentModel model = AgentModel::triple_integrator();
  ProtocolConfig global;
  global.kind = ProtocolKind::kGlobalFull;
  EXPECT_THROW(ClosedLoop(model, three_cycle(), global), ParameterError);

  ProtocolConfig semiglobal;
  semiglobal.kind = ProtocolKind::kSemiglobalFull;
  EXPECT_THROW(ClosedLoop(model, three_cycle(), semiglobal), ParameterError);
  semiglobal.epsilon = 1.5;
  EXPECT_THROW(ClosedLoop(model, three_cycle(), semiglobal), ParameterError);

  ProtocolConfig partial;
  partial.kind = ProtocolKind::kSemiglobalPartial;
  partial.epsilon = 0.1;
  EXPECT_THROW(ClosedLoop(model, three_cycle(), partial), ParameterError);
  partial.observer_gain = Matrix::Zero(3, 1);  // A - KC = A is not Hurwitz
  EXPECT_THROW(ClosedLoop(model, three_cycle(), partial), DesignError);
}

TEST(ClosedLoopTest, ScheduleFromAnotherModelIsRejected) {
  const AgentModel other(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  ProtocolConfig config;
  config.kind = ProtocolKind::kGlobalFull;
  config.cache = std::make_shared<const PCache>(other);
  EXPECT_THROW(ClosedLoop(AgentModel::triple_integrator(), three_cycle(), config), ParameterError);
}

TEST(ClosedLoopTest, SynchronizedStartStaysSynchronized) {
  const AgentModel model = AgentModel::triple_integrator();
  const Vector xr0 = (Vector(3) << 1.0, -0.5, 0.25).finished();
  for (ProtocolKind kind : kAllKinds) {
    const ClosedLoop loop(model, three_cycle(), config_for(kind, model));
    Matrix x0(3, 3);
    x0.colwise() = xr0;
    IntegratorOptions options;
    options.t_final = 5.0;
    const Trajectory traj = simulate(loop, loop.initial_state(x0, xr0), options);
    for (std::size_t s = 0; s < traj.states.size(); ++s) {
      EXPECT_EQ(traj.controls[s].cwiseAbs().maxCoeff(), 0.0) << to_string(kind);
      EXPECT_LE(sync_error(traj.states[s], loop.layout()), 1e-12) << to_string(kind);
    }
  }
}

TEST(ClosedLoopTest, SingleAgentSemiglobalFullMatchesHandAssembly) {
  const AgentModel model = AgentModel::triple_integrator();
  const double eps = 0.05;
  const Network net(Matrix::Zero(1, 1), {true});
  const ClosedLoop loop(model, net, config_for(ProtocolKind::kSemiglobalFull, model, eps));
  const Matrix p = solve_lowgain_are(model, eps).p;
  const Matrix& a = model.a();
  const Matrix& b = model.b();

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector z = random_vector(rng, loop.layout().dim(), 20.0);
    Vector dz;
    loop.derivative(z, dz);
    const Vector x = z.segment(0, 3);
    const Vector xr = z.segment(3, 3);
    const Vector chi = z.segment(6, 3);
    const Vector xt = x - xr;
    Vector u = -b.transpose() * p * chi;
    u = u.cwiseMax(-1.0).cwiseMin(1.0);
    const Vector dxt = a * xt + b * u;
    const Vector dchi = (a - b * b.transpose() * p) * chi + (xt - chi);
    EXPECT_LT((dz.segment(0, 3) - dz.segment(3, 3) - dxt).norm(), 1e-12);
    EXPECT_LT((dz.segment(6, 3) - dchi).norm(), 1e-12);
  }
}

TEST(ClosedLoopTest, GlobalPartialMatchesTermwiseAssembly) {
  const AgentModel model = AgentModel::triple_integrator();
  std::mt19937_64 rng(23);
  const Network net = random_rooted_network(5, rng);
  const ProtocolConfig config = config_for(ProtocolKind::kGlobalPartial, model);
  const ClosedLoop loop(model, net, config);
  const StackedLayout& l = loop.layout();
  const Matrix& a = model.a();
  const Matrix& b = model.b();
  const Matrix& c = model.c();
  const Matrix& k = config.observer_gain;
  const Matrix& adj = net.adjacency();

  for (int trial = 0; trial < 5; ++trial) {
    const Vector z = random_vector(rng, l.dim(), 5.0);
    Vector dz;
    loop.derivative(z, dz);
    auto x = [&](int i) { return Vector(z.segment(l.x(i), 3)); };
    auto chi = [&](int i) { return Vector(z.segment(l.chi(i), 3)); };
    auto xhat = [&](int i) { return Vector(z.segment(l.xhat(i), 3)); };
    const Vector xr = z.segment(l.xr(), 3);
    std::vector<Vector> u(5);
    for (int j = 0; j < 5; ++j)
      u[j] = -schedule_gain(chi(j), *config.cache).bt_p * chi(j);

    for (int i = 0; i < 5; ++i) {
      const double iota = net.is_root(i) ? 1.0 : 0.0;
      Vector zeta_bar = iota * (c * x(i) - c * xr);
      Vector zeta_hat1 = Vector::Zero(3);
      Vector zeta_hat2 = Vector::Zero(1);
      for (int j = 0; j < 5; ++j) {
        zeta_bar += adj(i, j) * (c * x(i) - c * x(j));
        zeta_hat1 += adj(i, j) * (chi(i) - chi(j));
        zeta_hat2 += adj(i, j) * (u[i] - u[j]);
      }
      const Vector dx = a * x(i) + b * u[i].cwiseMax(-1.0).cwiseMin(1.0);
      const Vector dchi = a * chi(i) + b * u[i] + xhat(i) - zeta_hat1 - iota * chi(i);
      const Vector dxhat =
          a * xhat(i) + b * zeta_hat2 + k * (zeta_bar - c * xhat(i)) + iota * b * u[i];
      EXPECT_LT((dz.segment(l.x(i), 3) - dx).norm(), 1e-11);
      EXPECT_LT((dz.segment(l.chi(i), 3) - dchi).norm(), 1e-11);
      EXPECT_LT((dz.segment(l.xhat(i), 3) - dxhat).norm(), 1e-11);
    }
    EXPECT_LT((dz.segment(l.xr(), 3) - a * xr).norm(), 1e-15);
  }
}

TEST(ClosedLoopTest, ControlsProbeReportsScheduleForGlobalKindsOnly) {
  const AgentModel model = AgentModel::triple_integrator();
  std::mt19937_64 rng(2);
  for (ProtocolKind kind : kAllKinds) {
    const ClosedLoop loop(model, three_cycle(), config_for(kind, model));
    const ControlSample sample = loop.controls(random_vector(rng, loop.layout().dim(), 3.0));
    EXPECT_EQ(sample.u.rows(), 1);
    EXPECT_EQ(sample.u.cols(), 3);
    EXPECT_EQ(sample.epsilon.size(), is_global(kind) ? 3 : 0);
  }
}

TEST(ClosedLoopTest, PermutationEquivariance) {
  const AgentModel model = AgentModel::triple_integrator();
  std::mt19937_64 rng(31);
  const Network net = random_rooted_network(4, rng);
  const std::vector<int> perm{2, 0, 3, 1};  // new agent k is old agent perm[k]
  const Network permuted = net.permuted(perm);
  for (ProtocolKind kind : {ProtocolKind::kGlobalFull, ProtocolKind::kSemiglobalPartial}) {
    const ProtocolConfig config = config_for(kind, model, 0.1);
    const ClosedLoop loop(model, net, config);
    const ClosedLoop loop_p(model, permuted, config);
    Matrix x0(3, 4);
    for (int i = 0; i < 4; ++i) x0.col(i) = random_vector(rng, 3, 2.0);
    Matrix x0_p(3, 4);
    for (int k = 0; k < 4; ++k) x0_p.col(k) = x0.col(perm[k]);
    const Vector xr0 = random_vector(rng, 3, 2.0);

    IntegratorOptions options;
    options.method = Method::kRk4;
    options.dt = 1e-2;
    options.t_final = 5.0;
    const Trajectory a = simulate(loop, loop.initial_state(x0, xr0), options);
    const Trajectory b = simulate(loop_p, loop_p.initial_state(x0_p, xr0), options);
    ASSERT_EQ(a.states.size(), b.states.size());
    const StackedLayout& l = loop.layout();
    double worst = 0.0;
    for (std::size_t s = 0; s < a.states.size(); ++s) {
      const double scale = 1.0 + a.states[s].cwiseAbs().maxCoeff();
      for (int k = 0; k < 4; ++k) {
        worst = std::max(worst, (b.states[s].segment(l.x(k), 3) -
                                 a.states[s].segment(l.x(perm[k]), 3)).cwiseAbs().maxCoeff() / scale);
        worst = std::max(worst, (b.states[s].segment(l.chi(k), 3) -
                                 a.states[s].segment(l.chi(perm[k]), 3)).cwiseAbs().maxCoeff() / scale);
      }
    }
    // Summation order over neighbours changes with the labels, so agreement
    // is to round-off rather than bitwise.
    EXPECT_LT(worst, 1e-12) << to_string(kind);
  }
}

TEST(ClosedLoopTest, FullStateErrorFollowsLaplacianDynamics) {
  const AgentModel model = AgentModel::triple_integrator();
  std::mt19937_64 rng(41);
  const Network net = random_rooted_network(3, rng);
  const ClosedLoop loop(model, net, config_for(ProtocolKind::kGlobalFull, model));
  const StackedLayout& l = loop.layout();
  Matrix x0(3, 3);
  for (int i = 0; i < 3; ++i) x0.col(i) = random_vector(rng, 3, 2.0);
  const Vector xr0 = random_vector(rng, 3, 2.0);
  IntegratorOptions options;
  options.t_final = 10.0;
  const Trajectory traj = simulate(loop, loop.initial_state(x0, xr0), options);

  const Matrix m = testing::kron_product(Matrix::Identity(3, 3), model.a()) -
                   testing::kron_product(testing::expanded_laplacian_by_definition(net),
                                         Matrix::Identity(3, 3));
  auto error_of = [&](const Vector& z) {
    Vector e(9);
    for (int i = 0; i < 3; ++i)
      e.segment(3 * i, 3) = z.segment(l.x(i), 3) - z.segment(l.xr(), 3) - z.segment(l.chi(i), 3);
    return e;
  };
  const Vector e0 = error_of(traj.states.front());
  double worst = 0.0;
  for (std::size_t s = 0; s < traj.states.size(); s += 7)
    worst = std::max(worst, (error_of(traj.states[s]) -
                             testing::linear_solution(m, e0, traj.times[s])).cwiseAbs().maxCoeff());
  EXPECT_LT(worst, 1e-6);
}

TEST(ClosedLoopTest, InitialStateValidatesShapes) {
  const AgentModel model = AgentModel::triple_integrator();
  const ClosedLoop loop(model, three_cycle(), config_for(ProtocolKind::kSemiglobalFull, model));
  EXPECT_THROW(loop.initial_state(Matrix::Zero(3, 2), Vector::Zero(3)), ValidationError);
  EXPECT_THROW(loop.initial_state(Matrix::Zero(3, 3), Vector::Zero(2)), ValidationError);
  EXPECT_THROW(loop.initial_state(Matrix::Zero(3, 3), Vector::Zero(3), Matrix(), Matrix::Zero(3, 3)),
               ValidationError);
  const Vector z = loop.initial_state(Matrix::Ones(3, 3), Vector::Zero(3), 2.0 * Matrix::Ones(3, 3));
  EXPECT_EQ(z.segment(loop.layout().chi(0), 9), Vector::Constant(9, 2.0));
}

}  // namespace
}  // namespace satsync

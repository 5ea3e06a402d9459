#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "airdfl/error.hpp"
#include "airdfl/harness.hpp"
#include "airdfl/kernels.hpp"
#include "airdfl/learners.hpp"

using namespace airdfl;

namespace {

using Rows = std::vector<std::vector<double>>;

struct Fixture {
  LogisticProblem problem;
  NetworkGraph graph;
  MixingMatrix mixing;
  Schedule schedule;

  Fixture(std::size_t n, std::size_t per_device, std::size_t d, std::uint64_t seed, NetworkGraph g)
      : problem(synthesize(n, per_device, d, seed)),
        graph(std::move(g)),
        mixing(laplacian_mixing(graph)),
        schedule(coloring_schedule(graph)) {}

  NetworkContext context(Variant v, ConsensusMode mode, double alpha, double sigma2 = 0.0,
                         double power = 100.0, std::uint64_t seed = 1, unsigned threads = 1) const {
    return NetworkContext{&problem, &graph, &mixing, &schedule,
                          AlgorithmConfig{v, alpha, 100, mode},
                          ChannelParams{sigma2, power, 0.5, problem.dimension()}, seed, threads};
  }
};

std::vector<double> mean_of(const std::vector<DeviceState>& s, std::vector<double> DeviceState::*f) {
  std::vector<double> m((s.front().*f).size(), 0.0);
  for (const auto& st : s)
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += (st.*f)[k] / static_cast<double>(s.size());
  return m;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

double consensus_distance(const Rows& x) {
  std::vector<double> bar(x.front().size(), 0.0);
  for (const auto& r : x)
    for (std::size_t k = 0; k < bar.size(); ++k) bar[k] += r[k] / static_cast<double>(x.size());
  double s = 0.0;
  for (const auto& r : x)
    for (std::size_t k = 0; k < bar.size(); ++k) s += (r[k] - bar[k]) * (r[k] - bar[k]);
  return std::sqrt(s);
}

}  // namespace

TEST(Names, ParseRoundTrip) {
  for (Variant v : {Variant::dsgd, Variant::dsgt, Variant::dsgt_vr}) EXPECT_EQ(parse_variant(variant_name(v)), v);
  for (ConsensusMode m : {ConsensusMode::error_free, ConsensusMode::aircomp})
    EXPECT_EQ(parse_consensus(consensus_name(m)), m);
  EXPECT_THROW(parse_variant("sgd"), InvalidInput);
  EXPECT_THROW(parse_consensus("wired"), InvalidInput);
  EXPECT_THROW((AlgorithmConfig{Variant::dsgd, 0.0, 1, ConsensusMode::error_free}.validate()), InvalidInput);
  EXPECT_THROW((AlgorithmConfig{Variant::dsgd, 0.1, 0, ConsensusMode::error_free}.validate()), InvalidInput);
}

TEST(DeviceInit, MatchesAlgorithmInput) {
  const LogisticProblem p = synthesize(2, 6, 4, 3);
  const std::vector<double> theta0{0.1, -0.2, 0.3, 0.0};
  const DeviceState s = init_device_state(p, 1, theta0, Variant::dsgt_vr);
  EXPECT_EQ(s.theta, theta0);
  const auto full = full_local_grad(p, 1, theta0);
  EXPECT_EQ(s.tracker, full);
  EXPECT_EQ(s.last_vr_grad, full);
  ASSERT_EQ(s.table_rows, 6u);
  for (std::size_t j = 0; j < 6; ++j) {
    const auto e = s.table_entry(j);
    EXPECT_EQ(std::vector<double>(e.begin(), e.end()), sample_loss_grad(p, 1, j, theta0).grad);
  }
  EXPECT_LT(max_abs_diff(s.table_avg, full), 1e-15);
  EXPECT_EQ(init_device_state(p, 0, theta0, Variant::dsgd).table_rows, 0u);
}

TEST(VrGradient, NoMovementGivesTableAverage) {
  const LogisticProblem p = synthesize(1, 9, 5, 4);
  const std::vector<double> theta0(5, 0.2);
  DeviceState s = init_device_state(p, 0, theta0, Variant::dsgt_vr);
  const auto avg = s.table_avg;
  const auto g = vr_gradient(s, 4, p, 0);
  EXPECT_EQ(g, avg);
  EXPECT_LT(max_abs_diff(g, full_local_grad(p, 0, theta0)), 1e-15);
}

TEST(VrGradient, SingleSampleCollapses) {
  const LogisticProblem p = synthesize(1, 1, 3, 5);
  DeviceState s = init_device_state(p, 0, std::vector<double>(3, 0.0), Variant::dsgt_vr);
  for (int t = 0; t < 20; ++t) {
    for (auto& v : s.theta) v += 0.37 * (t % 3) - 0.2;
    const auto g = vr_gradient(s, 0, p, 0);
    EXPECT_EQ(g, sample_loss_grad(p, 0, 0, s.theta).grad);
  }
}

TEST(VrGradient, UnbiasedByEnumeration) {
  for (const auto& [devices, per, d] : {std::tuple{2u, 2u, 3u}, std::tuple{3u, 17u, 8u}}) {
    const LogisticProblem p = synthesize(devices, per, d, 11);
    for (std::size_t i = 0; i < devices; ++i) {
      DeviceState s = init_device_state(p, i, std::vector<double>(d, 0.0), Variant::dsgt_vr);
      // Scramble the table with a few updates at moving models.
      for (std::size_t t = 0; t < 3 * per; ++t) {
        for (std::size_t k = 0; k < d; ++k) s.theta[k] = std::sin(1.0 + t + 3.0 * k);
        vr_gradient(s, (t * 7) % per, p, i);
      }
      for (std::size_t k = 0; k < d; ++k) s.theta[k] = std::cos(2.0 + k);
      std::vector<double> avg(d, 0.0);
      for (std::size_t xi = 0; xi < per; ++xi) {
        DeviceState copy = s;
        const auto g = vr_gradient(copy, xi, p, i);
        for (std::size_t k = 0; k < d; ++k) avg[k] += g[k] / static_cast<double>(per);
      }
      EXPECT_LT(max_abs_diff(avg, full_local_grad(p, i, s.theta)), 1e-10);
    }
  }
}

TEST(VrGradient, TableAverageStaysExact) {
  const LogisticProblem p = synthesize(1, 25, 6, 2);
  DeviceState s = init_device_state(p, 0, std::vector<double>(6, 0.0), Variant::dsgt_vr);
  for (std::size_t t = 0; t < 2000; ++t) {
    for (std::size_t k = 0; k < 6; ++k) s.theta[k] = 3.0 * std::sin(0.01 * t + k);
    vr_gradient(s, (t * 13) % 25, p, 0);
  }
  std::vector<double> mean(6, 0.0);
  for (std::size_t j = 0; j < 25; ++j)
    for (std::size_t k = 0; k < 6; ++k) mean[k] += s.table_entry(j)[k] / 25.0;
  for (std::size_t k = 0; k < 6; ++k)
    EXPECT_NEAR(s.table_avg[k], mean[k], 1e-10 * std::max(1.0, std::abs(mean[k])));
  EXPECT_THROW(vr_gradient(s, 25, p, 0), InvalidInput);
}

TEST(LocalStep, ZeroStepAndGeometricQuadratic) {
  DeviceState s;
  s.theta = {1.5, -2.0};
  s.tracker = {0.3, 0.4};
  EXPECT_EQ(local_step(s, 0.0), s.theta);

  // f(theta) = theta^2 / 2: the tracker is theta itself.
  DeviceState q;
  q.theta = {1.0};
  for (int t = 1; t <= 50; ++t) {
    q.tracker = q.theta;
    q.theta = local_step(q, 0.1);
    EXPECT_NEAR(q.theta[0], std::pow(0.9, t), 1e-15);
  }
}

TEST(LocalStep, OptimumIsFixedPoint) {
  const LogisticProblem p = synthesize(1, 30, 4, 8);
  const auto sol = solve_centralized(p);
  const DeviceState s = init_device_state(p, 0, sol.theta, Variant::dsgt_vr);
  EXPECT_LT(max_abs_diff(local_step(s, 0.5), sol.theta), 1e-13);
}

TEST(Tracker, SingleDeviceTelescopes) {
  const NetworkGraph g(1);
  const MixingMatrix w = laplacian_mixing(g);
  std::vector<double> d{0.5, 0.5}, g_old{0.5, 0.5};
  for (int t = 0; t < 10; ++t) {
    const std::vector<double> g_new{std::sin(t), std::cos(t)};
    d = mix(g, w, {tracker_half_update(d, g_new, g_old)})[0];
    g_old = g_new;
    EXPECT_LT(max_abs_diff(d, g_new), 1e-14);
  }
  EXPECT_THROW(tracker_half_update(std::vector<double>(2), std::vector<double>(3), std::vector<double>(2)),
               InvalidInput);
}

TEST(Tracker, TwoDevicesUniformMixing) {
  const NetworkGraph g = complete_graph(2);
  const MixingMatrix w = laplacian_mixing(g);
  ASSERT_DOUBLE_EQ(w.weight(0, 1), 0.5);
  const Rows grads{{1.0, 2.0}, {3.0, -4.0}};
  // Start from the local gradients; constant gradients leave the half step unchanged.
  Rows half{tracker_half_update(grads[0], grads[0], grads[0]), tracker_half_update(grads[1], grads[1], grads[1])};
  const Rows d = mix(g, w, half);
  for (const auto& row : d) {
    EXPECT_DOUBLE_EQ(row[0], 2.0);
    EXPECT_DOUBLE_EQ(row[1], -1.0);
  }
}

TEST(Tracker, ConservationEveryIteration) {
  for (Variant v : {Variant::dsgt, Variant::dsgt_vr}) {
    for (ConsensusMode mode : {ConsensusMode::error_free, ConsensusMode::aircomp}) {
      Fixture f(8, 12, 5, 21, erdos_renyi_graph(8, 0.5, 2));
      ASSERT_TRUE(f.graph.is_connected());
      Simulation sim(f.context(v, mode, 0.2, 1.0, 1e6), std::vector<double>(5, 0.0));
      for (int t = 0; t < 150; ++t) {
        sim.step();
        const auto dbar = mean_of(sim.states(), &DeviceState::tracker);
        const auto gbar = mean_of(sim.states(), &DeviceState::last_vr_grad);
        EXPECT_LT(max_abs_diff(dbar, gbar), 1e-9);
      }
    }
  }
}

TEST(Consensus, NoiselessContractionByBeta) {
  const NetworkGraph g = ring_graph(9);
  const MixingMatrix w = laplacian_mixing(g);
  Rows x(9, std::vector<double>(4));
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t k = 0; k < 4; ++k) x[i][k] = std::sin(3.0 * i + k);
  Rows same(9, std::vector<double>{1.0, -2.0, 3.0, 0.5});
  EXPECT_LT(consensus_distance(mix(g, w, same)), 1e-14);
  for (int step = 0; step < 10; ++step) {
    const Rows y = mix(g, w, x);
    EXPECT_LE(consensus_distance(y), w.beta() * consensus_distance(x) * (1 + 1e-12) + 1e-15);
    x = y;
  }
}

TEST(RunIteration, NoiselessAircompEqualsErrorFree) {
  Fixture f(10, 8, 7, 5, erdos_renyi_graph(10, 0.4, 9));
  ASSERT_TRUE(f.graph.is_connected());
  Simulation exact(f.context(Variant::dsgt_vr, ConsensusMode::error_free, 0.3), std::vector<double>(7, 0.0));
  Simulation air(f.context(Variant::dsgt_vr, ConsensusMode::aircomp, 0.3, 0.0), std::vector<double>(7, 0.0));
  exact.step();
  air.step();
  exact.step();
  air.step();
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_LT(max_abs_diff(exact.states()[i].theta, air.states()[i].theta), 1e-10);
    EXPECT_LT(max_abs_diff(exact.states()[i].tracker, air.states()[i].tracker), 1e-10);
  }
}

TEST(RunIteration, PeakPowerNeverExceeded) {
  Fixture f(12, 5, 6, 6, erdos_renyi_graph(12, 0.4, 3));
  ASSERT_TRUE(f.graph.is_connected());
  for (double P : {0.01, 1.0, 1e4}) {
    Simulation sim(f.context(Variant::dsgd, ConsensusMode::aircomp, 0.1, 1.0, P), std::vector<double>(6, 0.3));
    for (int t = 0; t < 40; ++t) {
      const IterationStats s = sim.step();
      EXPECT_LE(s.max_transmit_energy, P);
      EXPECT_GT(s.mean_scaling, 0.0);
    }
  }
}

TEST(RunIteration, ScheduleDoesNotChangeResults) {
  Fixture f(9, 6, 4, 7, erdos_renyi_graph(9, 0.3, 5));
  ASSERT_TRUE(f.graph.is_connected());
  const Schedule naive = naive_schedule(f.graph);
  auto ctx_a = f.context(Variant::dsgt_vr, ConsensusMode::aircomp, 0.2, 1.0, 50.0);
  auto ctx_b = ctx_a;
  ctx_b.schedule = &naive;
  ASSERT_NE(f.schedule.n_blocks(), naive.n_blocks());
  Simulation a(ctx_a, std::vector<double>(4, 0.0)), b(ctx_b, std::vector<double>(4, 0.0));
  for (int t = 0; t < 25; ++t) {
    EXPECT_EQ(a.step().blocks, f.schedule.n_blocks());
    EXPECT_EQ(b.step().blocks, naive.n_blocks());
  }
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(a.states()[i].theta, b.states()[i].theta);
}

TEST(RunIteration, ThreadCountDoesNotChangeResults) {
  Fixture f(11, 6, 5, 8, erdos_renyi_graph(11, 0.4, 8));
  ASSERT_TRUE(f.graph.is_connected());
  for (Variant v : {Variant::dsgd, Variant::dsgt, Variant::dsgt_vr}) {
    Simulation one(f.context(v, ConsensusMode::aircomp, 0.2, 1.0, 50.0, 3, 1), std::vector<double>(5, 0.0));
    Simulation four(f.context(v, ConsensusMode::aircomp, 0.2, 1.0, 50.0, 3, 4), std::vector<double>(5, 0.0));
    for (int t = 0; t < 30; ++t) {
      one.step();
      four.step();
    }
    for (std::size_t i = 0; i < 11; ++i) {
      EXPECT_EQ(one.states()[i].theta, four.states()[i].theta);
      EXPECT_EQ(one.states()[i].tracker, four.states()[i].tracker);
    }
  }
}

TEST(RunIteration, IdentityMixingIsIndependentGradientDescent) {
  const std::size_t n = 4, d = 3;
  const LogisticProblem p = synthesize(n, 1, d, 13);
  const NetworkGraph g(n);
  const MixingMatrix w(g, DenseMatrix::identity(n));
  const Schedule s = naive_schedule(g);
  for (ConsensusMode mode : {ConsensusMode::error_free, ConsensusMode::aircomp}) {
    NetworkContext ctx{&p, &g, &w, &s, AlgorithmConfig{Variant::dsgt_vr, 0.5, 10, mode},
                       ChannelParams{0.0, 1.0, 0.5, d}, 1, 1};
    Simulation sim(ctx, std::vector<double>(d, 0.0));
    Rows ref(n, std::vector<double>(d, 0.0));
    for (int t = 0; t < 30; ++t) {
      sim.step();
      for (std::size_t i = 0; i < n; ++i) {
        const auto grad = full_local_grad(p, i, ref[i]);
        for (std::size_t k = 0; k < d; ++k) ref[i][k] -= 0.5 * grad[k];
        EXPECT_LT(max_abs_diff(sim.states()[i].theta, ref[i]), 1e-13);
      }
    }
  }
}

TEST(RunIteration, TwoDeviceQuadraticsContractGeometrically) {
  // f_i(theta) = (theta - c_i)^2 / 2 on two devices, DSGT with exact gradients,
  // built from the learner primitives. The minimizer of the sum is mean(c).
  const NetworkGraph g = complete_graph(2);
  const DenseMatrix wm = [] {
    DenseMatrix m(2, 2, 0.25);
    m(0, 0) = m(1, 1) = 0.75;
    return m;
  }();
  const MixingMatrix w(g, wm);
  const double c[2] = {1.0, -3.0};
  const double mu = 1.0, L = 1.0, kappa = 1.0;
  const double alpha = std::min(1.0 / mu, (1 - w.beta()) * (1 - w.beta()) / (L * kappa * kappa));
  std::vector<DeviceState> s(2);
  for (int i = 0; i < 2; ++i) {
    s[i].theta = {0.0};
    s[i].tracker = s[i].last_vr_grad = {0.0 - c[i]};
  }
  std::vector<std::uint64_t> it;
  std::vector<double> gaps;
  for (int t = 0; t < 200; ++t) {
    Rows half{local_step(s[0], alpha), local_step(s[1], alpha)};
    const Rows theta = mix(g, w, half);
    Rows dh(2);
    for (int i = 0; i < 2; ++i) {
      s[i].theta = theta[i];
      const std::vector<double> gn{theta[i][0] - c[i]};
      dh[i] = tracker_half_update(s[i].tracker, gn, s[i].last_vr_grad);
      s[i].last_vr_grad = gn;
    }
    const Rows d = mix(g, w, dh);
    double gap = 0.0;
    for (int i = 0; i < 2; ++i) {
      s[i].tracker = d[i];
      // F(theta_i) - F* with F = mean of f_i.
      gap += 0.5 * std::pow(s[i].theta[0] + 1.0, 2) / 2.0;
    }
    it.push_back(t + 1);
    gaps.push_back(gap);
  }
  const RhoFit fit = fit_rho(it, gaps, 1e-28);
  EXPECT_LT(fit.rho, 1.0);
  EXPECT_GT(fit.r_squared, 0.95);
  EXPECT_LT(gaps.back(), 1e-20);
}

TEST(RunIteration, ErrorFreeVrConvergesLinearlyWhileDsgdStalls) {
  Fixture f(6, 20, 5, 31, ring_graph(6));
  const auto opt = solve_centralized(f.problem);
  auto final_gap = [&](Variant v) {
    Simulation sim(f.context(v, ConsensusMode::error_free, 0.5), std::vector<double>(5, 0.0));
    for (int t = 0; t < 1500; ++t) sim.step();
    double gap = 0.0;
    for (const auto& s : sim.states()) gap += global_loss(f.problem, s.theta) - opt.loss;
    return gap / 6.0;
  };
  const double vr = final_gap(Variant::dsgt_vr);
  const double sgd = final_gap(Variant::dsgd);
  EXPECT_LT(vr, 1e-9);
  EXPECT_GT(sgd, 1e-9);
}

TEST(RunIteration, Validation) {
  Fixture f(3, 2, 2, 1, complete_graph(3));
  auto ctx = f.context(Variant::dsgt_vr, ConsensusMode::aircomp, 0.1);
  ctx.channel.dimension = 5;
  EXPECT_THROW(Simulation(ctx, std::vector<double>(2, 0.0)), InvalidInput);
  auto ok = f.context(Variant::dsgt_vr, ConsensusMode::aircomp, 0.1);
  std::vector<DeviceState> states(3);
  for (std::size_t i = 0; i < 3; ++i) states[i] = init_device_state(f.problem, i, std::vector<double>(2, 0.0), Variant::dsgt_vr);
  EXPECT_THROW(run_iteration(states, ok, 0, nullptr), InvalidInput);
}

TEST(StepSize, TheoremOrder) {
  const LogisticProblem p = synthesize(4, 10, 3, 1);
  const double beta = 0.5;
  const double mu = p.lambda(), L = 0.25 + mu, kappa = L / mu;
  const double expect = std::min(1.0 / (mu * 10), 10 * 0.25 / (10 * L * kappa * kappa));
  EXPECT_DOUBLE_EQ(theorem_order_step_size(p, beta), expect);
}

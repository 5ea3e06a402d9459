#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "airdfl/channel.hpp"
#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"
#include "airdfl/learners.hpp"

using namespace airdfl;
using cd = std::complex<double>;

namespace {

ChannelParams params(double sigma2, double power, double gamma, std::size_t d) {
  return ChannelParams{sigma2, power, gamma, d};
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Channel, DbmConversion) {
  EXPECT_DOUBLE_EQ(dbm_to_linear(0.0), 1.0);
  EXPECT_DOUBLE_EQ(dbm_to_linear(10.0), 10.0);
  EXPECT_NEAR(dbm_to_linear(-30.0), 1e-3, 1e-18);
}

TEST(Channel, ParamsValidation) {
  EXPECT_THROW(params(-1, 1, 0.5, 1).validate(), InvalidInput);
  EXPECT_THROW(params(1, 0, 0.5, 1).validate(), InvalidInput);
  EXPECT_THROW(params(1, 1, -0.1, 1).validate(), InvalidInput);
  EXPECT_THROW(params(1, 1, 0.5, 0).validate(), InvalidInput);
  EXPECT_NO_THROW(params(0, 1, 0.5, 3).validate());
}

TEST(Scaling, TwoNeighborsTakeTheMinimum) {
  const std::vector<double> a{2.0, 0.0}, b{0.0, 1.0};
  const Transmission tx[] = {{0, cd(1.0, 0.0), 0.5, a}, {1, cd(0.0, 0.5), 0.5, b}};
  EXPECT_DOUBLE_EQ(compute_scaling(tx, params(1, 4, 0.5, 2)).value, 1.0);
}

TEST(Scaling, WorstCaseNeighbor) {
  const double gamma = 0.5, P = 9.0, B = 3.0;
  const std::vector<double> theta{B, 0.0, 0.0};
  const Transmission tx[] = {{0, cd(0.0, gamma), 1.0, theta}};
  EXPECT_DOUBLE_EQ(compute_scaling(tx, params(1, P, gamma, 3)).value, gamma * std::sqrt(P) / B);
}

TEST(Scaling, AllZeroModelsUseDefault) {
  const std::vector<double> z(4, 0.0);
  const Transmission tx[] = {{0, cd(0.8, 0.1), 0.5, z}, {1, cd(2.0, 0.0), 0.5, z}};
  EXPECT_DOUBLE_EQ(compute_scaling(tx, params(1, 4, 0.5, 4)).value, 2.0 / 0.5);
}

TEST(Scaling, ZeroNormSenderSkipped) {
  const std::vector<double> z(2, 0.0), a{3.0, 4.0};
  const Transmission tx[] = {{0, cd(0.6, 0.0), 0.5, z}, {1, cd(1.0, 0.0), 0.5, a}};
  EXPECT_DOUBLE_EQ(compute_scaling(tx, params(1, 25, 0.5, 2)).value, 1.0);
}

TEST(Scaling, EmptyNeighborhoodRejected) {
  EXPECT_THROW(compute_scaling({}, params(1, 1, 0.5, 1)), InvalidInput);
}

TEST(Precode, UnitChannel) {
  const std::vector<double> theta{3.0, 0.0};
  const ComplexSignal x = precode(theta, 1.0 / 3.0, cd(1.0, 0.0), {1.0}, params(1, 10, 0.5, 2));
  EXPECT_NEAR(x.re[0], 1.0, 1e-15);
  EXPECT_EQ(x.re[1], 0.0);
  EXPECT_EQ(x.im[0], 0.0);
  EXPECT_EQ(x.im[1], 0.0);
}

TEST(Precode, QuadratureChannelInverts) {
  const std::vector<double> theta{1.0, 0.0};
  const cd h(0.0, 1.0);
  const ComplexSignal x = precode(theta, 1.0, h, {1.0}, params(1, 10, 0.5, 2));
  EXPECT_EQ(cd(x.re[0], x.im[0]), cd(0.0, -1.0));
  const cd received = h * cd(x.re[0], x.im[0]);
  EXPECT_EQ(received, cd(1.0, 0.0));
}

TEST(Precode, PowerNeverExceeded) {
  std::mt19937_64 g(17);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t d = 1 + trial % 40;
    const std::size_t k = 1 + trial % 6;
    const double gamma = 0.1 + ud(g);
    const double P = std::pow(10.0, 4.0 * ud(g) - 2.0);
    const ChannelParams cp = params(1.0, P, gamma, d);
    RandomStream rng(trial);
    std::vector<std::vector<double>> models(k, std::vector<double>(d));
    std::vector<Transmission> tx;
    for (std::size_t j = 0; j < k; ++j) {
      for (auto& v : models[j]) v = nd(g) * std::pow(10.0, 3.0 * ud(g) - 1.0);
      tx.push_back({j, draw_conditioned_coefficient(rng, gamma), (j == 0 && trial % 3 == 0) ? 1.0 : ud(g), models[j]});
    }
    const ScalingFactor s = compute_scaling(tx, cp);
    for (const auto& t : tx) {
      const ComplexSignal x = precode(t.model, t.weight, t.coeff, s, cp);
      // Algebraic value p w^2 ||theta||^2 / |h|^2 <= P (up to rounding).
      const double n2 = norm2(models[t.sender]);
      const double algebraic = s.value * s.value * t.weight * t.weight * n2 * n2 / std::norm(t.coeff);
      EXPECT_LE(algebraic, P * (1.0 + 1e-12));
      EXPECT_LE(x.energy(), P) << "trial " << trial;
    }
  }
}

TEST(Fading, ConditionedDrawsClearThreshold) {
  RandomStream rng(5);
  const double gamma = 0.5;
  double mean_power = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const cd h = draw_conditioned_coefficient(rng, gamma);
    ASSERT_GT(std::abs(h), gamma);
    mean_power += std::norm(h);
  }
  mean_power /= n;
  // |h|^2 ~ Exp(1); conditioned on |h|^2 > g^2 it is g^2 + Exp(1).
  EXPECT_NEAR(mean_power, 1.0 + gamma * gamma, 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Fading, RealizationIsKeyedAndAligned) {
  const NetworkGraph g = complete_graph(5);
  const auto a = ChannelBlockRealization::draw(g, 0.5, 9, 3);
  const auto b = ChannelBlockRealization::draw(g, 0.5, 9, 3);
  const auto c = ChannelBlockRealization::draw(g, 0.5, 9, 4);
  for (DeviceId i = 0; i < 5; ++i) {
    const auto ca = a.receiver_coefficients(i);
    ASSERT_EQ(ca.size(), 4u);
    for (std::size_t q = 0; q < ca.size(); ++q) {
      EXPECT_EQ(ca[q], b.receiver_coefficients(i)[q]);
      EXPECT_NE(ca[q], c.receiver_coefficients(i)[q]);
      EXPECT_EQ(a.coefficient(i, g.neighbors(i)[q]), ca[q]);
      EXPECT_GT(std::abs(ca[q]), 0.5);
    }
  }
  // No reciprocity.
  EXPECT_NE(a.coefficient(0, 1), a.coefficient(1, 0));
  const auto p = ChannelBlockRealization::draw(path_graph(3), 0.5, 9, 0);
  EXPECT_THROW(p.coefficient(0, 2), InvalidInput);
  EXPECT_THROW(ChannelBlockRealization::draw(g, 6.0, 1, 0), InvalidInput);
}

TEST(Decode, NoiselessMiddleOfPathIsExactAverage) {
  const NetworkGraph g = path_graph(3);
  const MixingMatrix w = laplacian_mixing(g);
  const std::vector<std::vector<double>> models{{1.0, -2.0, 0.5}, {4.0, 0.0, 1.5}, {-3.0, 7.0, 2.0}};
  const auto fading = ChannelBlockRealization::draw(g, 0.5, 1, 0);
  std::vector<Transmission> tx;
  for (std::size_t q = 0; q < 2; ++q) {
    const DeviceId j = g.neighbors(1)[q];
    tx.push_back({j, fading.receiver_coefficients(1)[q], w.weight(1, j), models[j]});
  }
  RandomStream rng(1);
  const auto r = aircomp_receive(tx, models[1], w.weight(1, 1), params(0.0, 1.0, 0.5, 3), rng);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.decoded.model[k], (models[0][k] + models[1][k] + models[2][k]) / 3.0, 1e-12);
  }
  EXPECT_EQ(r.decoded.noise_energy, 0.0);
  EXPECT_LE(r.max_transmit_energy, 1.0);
}

TEST(Decode, NoiselessPipelineEqualsMatrixConsensus) {
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd;
  for (std::size_t n = 2; n <= 16; ++n) {
    for (std::size_t d : {1u, 7u, 50u}) {
      NetworkGraph graph = erdos_renyi_graph(n, 0.4, n * 100 + d);
      if (!graph.is_connected()) graph = ring_graph(n);
      const MixingMatrix w = laplacian_mixing(graph);
      std::vector<std::vector<double>> models(n, std::vector<double>(d));
      for (auto& m : models)
        for (auto& v : m) v = 10.0 * nd(g);
      const auto exact = mix(graph, w, models);
      const auto fading = ChannelBlockRealization::draw(graph, 0.5, n, d);
      for (DeviceId i = 0; i < n; ++i) {
        std::vector<Transmission> tx;
        for (std::size_t q = 0; q < graph.neighbors(i).size(); ++q) {
          const DeviceId j = graph.neighbors(i)[q];
          tx.push_back({j, fading.receiver_coefficients(i)[q], w.weight(i, j), models[j]});
        }
        RandomStream rng(i);
        const auto r = aircomp_receive(tx, models[i], w.weight(i, i), params(0.0, 2.0, 0.5, d), rng);
        for (std::size_t k = 0; k < d; ++k) {
          EXPECT_NEAR(r.decoded.model[k], exact[i][k], 1e-10 * std::max(1.0, std::abs(exact[i][k])));
        }
      }
    }
  }
}

TEST(Decode, MonteCarloNoiseEnergy) {
  const std::size_t d = 10;
  const ChannelParams cp = params(1.0, 1.0, 0.5, d);
  const ScalingFactor s{2.0};  // p = 4
  const std::vector<double> own(d, 0.0);
  RandomStream rng(2024);
  double mean = 0.0;
  const int draws = 100000;
  for (int k = 0; k < draws; ++k) {
    mean += superpose_and_decode({}, own, 1.0, s, cp, rng).noise_energy;
  }
  mean /= draws;
  EXPECT_NEAR(mean, 2.5, 0.02 * 2.5);
}

TEST(Decode, DecodedNoiseIsTheRealizedPerturbation) {
  const std::size_t d = 5;
  const std::vector<double> a{1, 2, 3, 4, 5};
  const Transmission tx[] = {{0, cd(0.3, -0.9), 0.5, a}};
  const ChannelParams cp = params(0.7, 3.0, 0.5, d);
  RandomStream rng(8);
  const std::vector<double> own(d, 1.0);
  const auto r = aircomp_receive(tx, own, 0.5, cp, rng);
  double e = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double dev = r.decoded.model[k] - (0.5 * a[k] + 0.5);
    e += dev * dev;
  }
  EXPECT_NEAR(r.decoded.noise_energy, e, 1e-9 * e);
}

TEST(Decode, WorstCaseBoundHolds) {
  const double B = 2.0;
  const std::size_t d = 8;
  const ChannelParams cp = params(1.0, 10.0, 0.5, d);
  const double bound = noise_energy_bound(cp, B);
  EXPECT_DOUBLE_EQ(bound, d * 1.0 * B * B / (0.25 * 10.0));
  std::mt19937_64 g(99);
  std::normal_distribution<double> nd;
  RandomStream fade(7), noise(8);
  double mean = 0.0;
  const int blocks = 5000;
  for (int b = 0; b < blocks; ++b) {
    std::vector<std::vector<double>> models(3, std::vector<double>(d));
    std::vector<Transmission> tx;
    for (std::size_t j = 0; j < 3; ++j) {
      for (auto& v : models[j]) v = nd(g);
      const double n = norm2(models[j]);
      for (auto& v : models[j]) v *= B / n * std::uniform_real_distribution<double>(0.1, 1.0)(g);
      tx.push_back({j, draw_conditioned_coefficient(fade, cp.gain_threshold), 0.25, models[j]});
    }
    const auto r = aircomp_receive(tx, models[0], 0.25, cp, noise);
    EXPECT_LE(d * cp.noise_power / (r.scaling.value * r.scaling.value), bound * (1 + 1e-12));
    mean += r.decoded.noise_energy;
  }
  EXPECT_LE(mean / blocks, bound);
}

#include "airdfl/learners.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"
#include "airdfl/parallel.hpp"
#include "airdfl/rng.hpp"

namespace airdfl {

Variant parse_variant(std::string_view s) {
  if (s == "dsgd") return Variant::dsgd;
  if (s == "dsgt") return Variant::dsgt;
  if (s == "dsgt-vr" || s == "dsgt_vr") return Variant::dsgt_vr;
  throw InvalidInput("unknown variant '" + std::string(s) + "' (expected dsgd|dsgt|dsgt-vr)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::dsgd: return "dsgd";
    case Variant::dsgt: return "dsgt";
    case Variant::dsgt_vr: return "dsgt-vr";
  }
  return "unknown";
}

ConsensusMode parse_consensus(std::string_view s) {
  if (s == "error-free" || s == "error_free") return ConsensusMode::error_free;
  if (s == "aircomp") return ConsensusMode::aircomp;
  throw InvalidInput("unknown consensus mode '" + std::string(s) + "' (expected error-free|aircomp)");
}

std::string_view consensus_name(ConsensusMode m) {
  return m == ConsensusMode::aircomp ? "aircomp" : "error-free";
}

void AlgorithmConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw InvalidInput("step size must be > 0");
  if (max_iterations < 1) throw InvalidInput("max_iterations must be >= 1");
}

DeviceState init_device_state(const LogisticProblem& problem, std::size_t device,
                              std::span<const double> theta0, Variant variant) {
  if (theta0.size() != problem.dimension()) throw InvalidInput("initial model dimension mismatch");
  DeviceState s;
  s.theta.assign(theta0.begin(), theta0.end());
  s.tracker = full_local_grad(problem, device, theta0);
  s.last_vr_grad = s.tracker;
  if (variant == Variant::dsgt_vr) {
    const std::size_t m = problem.device(device).size();
    const std::size_t d = theta0.size();
    s.table_rows = m;
    s.grad_table.assign(m * d, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      sample_grad_into(problem, device, j, theta0, {s.grad_table.data() + j * d, d});
    }
    s.table_avg.assign(d, 0.0);
    for (std::size_t j = 0; j < m; ++j) vec::axpy(1.0, s.table_entry(j), s.table_avg);
    vec::scale_into(1.0 / static_cast<double>(m), s.table_avg, s.table_avg);
  }
  return s;
}

std::vector<double> vr_gradient(DeviceState& state, std::size_t sample,
                                const LogisticProblem& problem, std::size_t device) {
  if (state.table_rows == 0) throw InvalidInput("device state has no gradient table");
  if (sample >= state.table_rows) throw InvalidInput("sample index out of range");
  const std::size_t d = state.theta.size();
  std::vector<double> fresh(d);
  sample_grad_into(problem, device, sample, state.theta, fresh);

  std::span<double> entry{state.grad_table.data() + sample * d, d};
  if (state.table_rows == 1) {
    // The table is the sample itself; skip the cancelling arithmetic.
    std::copy(fresh.begin(), fresh.end(), entry.begin());
    state.table_avg = fresh;
    return fresh;
  }
  std::vector<double> g(d);
  vec::axpby_into(1.0, fresh, -1.0, entry, g);
  vec::axpy(1.0, state.table_avg, g);

  // table_avg += (fresh - old) / m, then overwrite the entry.
  const double inv_m = 1.0 / static_cast<double>(state.table_rows);
  vec::axpy(inv_m, fresh, state.table_avg);
  vec::axpy(-inv_m, entry, state.table_avg);
  std::copy(fresh.begin(), fresh.end(), entry.begin());
  return g;
}

std::vector<double> local_step(const DeviceState& state, double step_size) {
  std::vector<double> out(state.theta.size());
  vec::axpby_into(1.0, state.theta, -step_size, state.tracker, out);
  return out;
}

std::vector<double> tracker_half_update(std::span<const double> tracker,
                                        std::span<const double> new_grad,
                                        std::span<const double> old_grad) {
  if (tracker.size() != new_grad.size() || tracker.size() != old_grad.size()) {
    throw InvalidInput("tracker update dimension mismatch");
  }
  std::vector<double> out(tracker.size());
  vec::axpby_into(1.0, new_grad, -1.0, old_grad, out);
  vec::axpy(1.0, tracker, out);
  return out;
}

namespace {

void mix_row(const NetworkGraph& graph, const MixingMatrix& mixing,
             const std::vector<std::vector<double>>& rows, DeviceId i, std::span<double> out) {
  vec::scale_into(mixing.weight(i, i), rows[i], out);
  for (DeviceId j : graph.neighbors(i)) vec::axpy(mixing.weight(i, j), rows[j], out);
}

}  // namespace

std::vector<std::vector<double>> mix(const NetworkGraph& graph, const MixingMatrix& mixing,
                                     const std::vector<std::vector<double>>& rows) {
  if (rows.size() != graph.n_devices() || mixing.size() != graph.n_devices()) {
    throw InvalidInput("mixing input does not match the network size");
  }
  std::vector<std::vector<double>> out(rows.size());
  for (DeviceId i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw InvalidInput("mixing rows differ in length");
    out[i].resize(rows[i].size());
    mix_row(graph, mixing, rows, i, out[i]);
  }
  return out;
}

IterationStats run_iteration(std::vector<DeviceState>& states, const NetworkContext& ctx,
                             std::uint64_t t, const ChannelBlockRealization* fading) {
  const LogisticProblem& problem = *ctx.problem;
  const NetworkGraph& graph = *ctx.graph;
  const MixingMatrix& mixing = *ctx.mixing;
  const std::size_t n = graph.n_devices();
  const std::size_t d = problem.dimension();
  const bool aircomp = ctx.algorithm.consensus == ConsensusMode::aircomp;
  if (states.size() != n || problem.n_devices() != n) throw InvalidInput("state count mismatch");
  if (aircomp && fading == nullptr) throw InvalidInput("aircomp consensus needs a fading realization");

  // Local step.
  std::vector<std::vector<double>> half(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    half[i] = local_step(states[i], ctx.algorithm.step_size);
  });

  // Model consensus, one block per color class. Receivers in a block only
  // read the half-step models, so blocks and receivers are independent.
  std::vector<double> noise_energy(n, 0.0);
  std::vector<double> scaling(n, 0.0);
  std::vector<double> max_energy(n, 0.0);
  for (const auto& block : ctx.schedule->blocks()) {
    parallel_for(block.size(), ctx.threads, [&](std::size_t k) {
      const DeviceId i = block[k];
      auto& theta = states[i].theta;
      const auto& nbrs = graph.neighbors(i);
      if (!aircomp || nbrs.empty()) {
        mix_row(graph, mixing, half, i, theta);
        return;
      }
      const auto coeffs = fading->receiver_coefficients(i);
      std::vector<Transmission> senders;
      senders.reserve(nbrs.size());
      for (std::size_t q = 0; q < nbrs.size(); ++q) {
        senders.push_back({nbrs[q], coeffs[q], mixing.weight(i, nbrs[q]), half[nbrs[q]]});
      }
      RandomStream noise_rng(ctx.seed, StreamDomain::noise, {t, i});
      ReceiverBlockResult r =
          aircomp_receive(senders, half[i], mixing.weight(i, i), ctx.channel, noise_rng);
      theta = std::move(r.decoded.model);
      noise_energy[i] = r.decoded.noise_energy;
      scaling[i] = r.scaling.value;
      max_energy[i] = r.max_transmit_energy;
    });
  }

  // Local gradients at the new models.
  std::vector<std::vector<double>> tracker_half(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    DeviceState& s = states[i];
    RandomStream sampler(ctx.seed, StreamDomain::sampling, {t, i});
    const std::size_t xi = sampler.uniform_index(problem.device(i).size());
    switch (ctx.algorithm.variant) {
      case Variant::dsgd:
        sample_grad_into(problem, i, xi, s.theta, s.tracker);
        break;
      case Variant::dsgt: {
        std::vector<double> g(d);
        sample_grad_into(problem, i, xi, s.theta, g);
        tracker_half[i] = tracker_half_update(s.tracker, g, s.last_vr_grad);
        s.last_vr_grad = std::move(g);
        break;
      }
      case Variant::dsgt_vr: {
        std::vector<double> g = vr_gradient(s, xi, problem, i);
        tracker_half[i] = tracker_half_update(s.tracker, g, s.last_vr_grad);
        s.last_vr_grad = std::move(g);
        break;
      }
    }
  });

  // Tracker mixing over error-free links.
  if (ctx.algorithm.variant != Variant::dsgd) {
    parallel_for(n, ctx.threads, [&](std::size_t i) {
      mix_row(graph, mixing, tracker_half, i, states[i].tracker);
    });
  }

  IterationStats stats;
  stats.blocks = ctx.schedule->n_blocks();
  if (aircomp) {
    std::size_t receivers = 0;
    for (DeviceId i = 0; i < n; ++i) {
      if (graph.neighbors(i).empty()) continue;
      ++receivers;
      stats.mean_noise_energy += noise_energy[i];
      stats.mean_scaling += scaling[i];
      stats.max_transmit_energy = std::max(stats.max_transmit_energy, max_energy[i]);
    }
    if (receivers > 0) {
      stats.mean_noise_energy /= static_cast<double>(receivers);
      stats.mean_scaling /= static_cast<double>(receivers);
    }
  }
  return stats;
}

Simulation::Simulation(NetworkContext ctx, std::span<const double> theta0) : ctx_(ctx) {
  ctx_.algorithm.validate();
  ctx_.channel.validate();
  if (ctx_.problem == nullptr || ctx_.graph == nullptr || ctx_.mixing == nullptr ||
      ctx_.schedule == nullptr) {
    throw InvalidInput("simulation context is incomplete");
  }
  if (ctx_.channel.dimension != ctx_.problem->dimension()) {
    throw InvalidInput("channel block length must equal the model dimension");
  }
  states_.resize(ctx_.graph->n_devices());
  parallel_for(states_.size(), ctx_.threads, [&](std::size_t i) {
    states_[i] = init_device_state(*ctx_.problem, i, theta0, ctx_.algorithm.variant);
  });
}

IterationStats Simulation::step() {
  IterationStats stats;
  if (ctx_.algorithm.consensus == ConsensusMode::aircomp) {
    const auto fading = ChannelBlockRealization::draw(*ctx_.graph, ctx_.channel.gain_threshold,
                                                      ctx_.seed, t_);
    stats = run_iteration(states_, ctx_, t_, &fading);
  } else {
    stats = run_iteration(states_, ctx_, t_, nullptr);
  }
  ++t_;
  return stats;
}

double theorem_order_step_size(const LogisticProblem& problem, double beta) {
  const double mu = problem.strong_convexity();
  const double L = problem.smoothness();
  const double kappa = L / mu;
  const double big_m = static_cast<double>(problem.max_local_samples());
  const double small_m = static_cast<double>(problem.min_local_samples());
  const double first = 1.0 / (mu * big_m);
  const double second = small_m * (1.0 - beta) * (1.0 - beta) / (big_m * L * kappa * kappa);
  return std::min(first, second);
}

}  // namespace airdfl

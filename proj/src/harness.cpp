#include "airdfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"
#include "airdfl/parallel.hpp"
#include "airdfl/rng.hpp"

namespace airdfl {
namespace {

constexpr std::size_t kMaxTopologyDraws = 10000;
constexpr int kMaxBackoffs = 40;

template <class Draw>
NetworkGraph first_connected(const ExperimentConfig& config, Draw draw) {
  for (std::size_t k = 0; k < kMaxTopologyDraws; ++k) {
    NetworkGraph g = draw(derive_seed(config.seed, StreamDomain::topology, {k}));
    if (g.is_connected()) return g;
  }
  throw InvalidInput("no connected topology found; raise the edge probability or lower gamma");
}

std::vector<double> mean_model(const std::vector<DeviceState>& states) {
  std::vector<double> bar(states.front().theta.size(), 0.0);
  for (const auto& s : states) vec::axpy(1.0, s.theta, bar);
  vec::scale_into(1.0 / static_cast<double>(states.size()), bar, bar);
  return bar;
}

}  // namespace

NetworkGraph build_topology(const ExperimentConfig& config) {
  const std::size_t n = config.n_devices;
  switch (config.topology) {
    case TopologyKind::complete: return complete_graph(n);
    case TopologyKind::ring: return ring_graph(n);
    case TopologyKind::path: return path_graph(n);
    case TopologyKind::erdos_renyi:
      return first_connected(config, [&](std::uint64_t s) {
        return erdos_renyi_graph(n, config.edge_probability, s);
      });
    case TopologyKind::rayleigh:
      // One symmetric large-scale draw; links whose gain clears gamma exist.
      return first_connected(config, [&](std::uint64_t s) {
        return build_graph_from_gains(rayleigh_gains(n, s), config.gamma);
      });
    case TopologyKind::file: {
      std::ifstream in(config.topology_file);
      if (!in) throw InvalidInput("cannot open topology file " + config.topology_file.string());
      auto snap = read_edge_list(in);
      if (snap.graph.n_devices() != n) throw InvalidInput("topology file device count differs from config");
      return snap.graph;
    }
  }
  throw InvalidInput("unknown topology kind");
}

ProblemInstance build_instance(const ExperimentConfig& config) {
  config.validate();
  Dataset train, test;
  if (config.source == DataSource::synthetic) {
    const Dataset all = synthesize_dataset(config.train_samples + config.test_samples,
                                           config.dimension,
                                           derive_seed(config.seed, StreamDomain::data),
                                           {config.flip_probability});
    train = all.slice(0, config.train_samples);
    test = all.slice(config.train_samples, config.test_samples);
  } else {
    auto split = load_idx_binary_pair(config.idx_images, config.idx_labels, config.class_a,
                                      config.class_b, config.idx_train, config.idx_test);
    train = std::move(split.train);
    test = std::move(split.test);
  }
  LogisticProblem problem(partition(train, config.n_devices, config.per_device), config.lambda);

  NetworkGraph graph = build_topology(config);
  std::optional<MixingMatrix> mixing;
  if (config.topology == TopologyKind::file) {
    std::ifstream in(config.topology_file);
    auto snap = read_edge_list(in);
    if (snap.weights) mixing.emplace(graph, *snap.weights);
  }
  if (!mixing) mixing.emplace(laplacian_mixing(graph));
  Schedule schedule = make_schedule(graph, config.schedule);
  CentralizedSolution optimum = solve_centralized(problem);
  return ProblemInstance{std::move(problem), std::move(test), std::move(graph), std::move(*mixing),
                         std::move(schedule), std::move(optimum)};
}

std::vector<MetricsRecord> run_single(const ExperimentConfig& config,
                                      const ProblemInstance& instance, double alpha,
                                      std::uint64_t run_seed) {
  const LogisticProblem& problem = instance.problem;
  const std::size_t n = problem.n_devices();
  NetworkContext ctx{&problem,
                     &instance.graph,
                     &instance.mixing,
                     &instance.schedule,
                     AlgorithmConfig{config.variant, alpha, std::max<std::size_t>(config.iterations, 1),
                                     config.consensus},
                     ChannelParams{config.noise_power, config.peak_power, config.gamma,
                                   problem.dimension()},
                     run_seed,
                     config.threads};
  const std::vector<double> theta0(problem.dimension(), 0.0);
  Simulation sim(ctx, theta0);

  std::vector<MetricsRecord> records;
  double running_max = 0.0;
  std::size_t growth = 0;
  double previous_gap = std::numeric_limits<double>::infinity();
  const bool backoff = !config.alpha.has_value();

  auto record = [&](std::uint64_t t, const IterationStats& stats) {
    const auto& states = sim.states();
    MetricsRecord r;
    r.iteration = t;
    r.device_gaps.resize(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
      r.device_gaps[i] = global_loss(problem, states[i].theta) - instance.optimum.loss;
    });
    for (double g : r.device_gaps) r.optimality_gap += g;
    r.optimality_gap /= static_cast<double>(n);
    const auto bar = mean_model(states);
    for (const auto& s : states) r.consensus_error += vec::squared_distance(s.theta, bar);
    r.consensus_error /= static_cast<double>(n);
    r.test_accuracy = instance.test.empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : accuracy(instance.test, bar);
    r.max_model_norm = running_max;
    r.block_noise_energy = stats.mean_noise_energy;
    r.scaling_factor = stats.mean_scaling;
    r.blocks = static_cast<double>(instance.schedule.n_blocks());

    if (!std::isfinite(r.optimality_gap) || r.optimality_gap > config.divergence_threshold) {
      throw DivergenceError("optimality gap " + std::to_string(r.optimality_gap) + " at iteration " +
                                std::to_string(t) + "; try a smaller alpha",
                            records, alpha);
    }
    if (backoff) {
      growth = r.optimality_gap > previous_gap ? growth + 1 : 0;
      previous_gap = r.optimality_gap;
      if (growth >= config.backoff_window) {
        throw DivergenceError("optimality gap grew for " + std::to_string(growth) +
                                  " consecutive records",
                              records, alpha);
      }
    }
    records.push_back(std::move(r));
  };

  auto update_norm = [&] {
    for (const auto& s : sim.states()) {
      running_max = std::max(running_max, std::sqrt(vec::squared_norm(s.theta)));
    }
  };

  update_norm();
  record(0, IterationStats{});
  for (std::uint64_t t = 1; t <= config.iterations; ++t) {
    const IterationStats stats = sim.step();
    update_norm();
    if (t % config.record_every == 0 || t == config.iterations) record(t, stats);
  }
  return records;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, build_instance(config));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ProblemInstance& instance) {
  config.validate();
  double alpha = config.alpha ? *config.alpha
                              : theorem_order_step_size(instance.problem, instance.mixing.beta());
  const std::size_t reps = config.repetitions;
  // Repetitions take the threads when there are several; otherwise the run does.
  ExperimentConfig inner = config;
  const unsigned outer_threads = reps > 1 ? config.threads : 1u;
  if (reps > 1) inner.threads = 1;

  ExperimentResult result;
  for (int attempt = 0;; ++attempt) {
    result.per_repetition.assign(reps, {});
    try {
      parallel_for(reps, outer_threads, [&](std::size_t r) {
        result.per_repetition[r] =
            run_single(inner, instance, alpha, derive_seed(config.seed, StreamDomain::repetition, {r}));
      });
      break;
    } catch (const DivergenceError&) {
      if (config.alpha || attempt + 1 >= kMaxBackoffs) throw;
      alpha *= 0.5;
    }
  }

  result.records = average_records(result.per_repetition);
  RunSummary& s = result.summary;
  s.alpha = alpha;
  s.initial_gap = result.records.front().optimality_gap;
  s.final_gap = result.records.back().optimality_gap;
  const std::size_t tail = std::max<std::size_t>(1, result.records.size() / 10);
  for (std::size_t k = result.records.size() - tail; k < result.records.size(); ++k) {
    s.plateau_gap += result.records[k].optimality_gap;
  }
  s.plateau_gap /= static_cast<double>(tail);
  s.final_accuracy = result.records.back().test_accuracy;
  for (const auto& r : result.records) s.max_model_norm = std::max(s.max_model_norm, r.max_model_norm);
  s.optimal_loss = instance.optimum.loss;
  s.beta = instance.mixing.beta();
  s.blocks = instance.schedule.n_blocks();
  return result;
}

void write_summary(std::ostream& out, const ExperimentConfig& config, const RunSummary& s) {
  out.precision(17);
  out << "seed=" << config.seed << '\n'
      << "variant=" << variant_name(config.variant) << '\n'
      << "consensus=" << consensus_name(config.consensus) << '\n'
      << "devices=" << config.n_devices << '\n'
      << "iterations=" << config.iterations << '\n'
      << "repetitions=" << config.repetitions << '\n'
      << "alpha=" << s.alpha << '\n'
      << "beta=" << s.beta << '\n'
      << "blocks=" << s.blocks << '\n'
      << "optimal_loss=" << s.optimal_loss << '\n'
      << "initial_gap=" << s.initial_gap << '\n'
      << "final_gap=" << s.final_gap << '\n'
      << "plateau_gap=" << s.plateau_gap << '\n'
      << "final_accuracy=" << s.final_accuracy << '\n'
      << "max_model_norm=" << s.max_model_norm << '\n';
}

double initial_distance_constant(const std::vector<std::vector<double>>& models,
                                 std::span<const double> optimum) {
  const std::size_t n = models.size();
  if (n < 2) throw InvalidInput("the bound needs at least two devices");
  std::vector<double> bar(optimum.size(), 0.0);
  for (const auto& m : models) {
    if (m.size() != optimum.size()) throw InvalidInput("model dimension mismatch");
    vec::axpy(1.0, m, bar);
  }
  vec::scale_into(1.0 / static_cast<double>(n), bar, bar);
  double spread = 0.0;
  for (const auto& m : models) spread = std::max(spread, vec::squared_distance(m, bar));
  const double nd = static_cast<double>(n);
  return nd / (nd - 1.0) * spread + nd * vec::squared_distance(bar, optimum);
}

namespace {

void check_bound(const TheoremBound& b) {
  if (!(b.rho > 0.0 && b.rho < 1.0)) throw InvalidInput("rho must lie in (0, 1)");
  if (b.n_devices < 2) throw InvalidInput("the bound needs at least two devices");
  if (!(b.gamma > 0.0) || !(b.peak_power > 0.0)) throw InvalidInput("gamma and P must be > 0");
  if (!(b.noise_power >= 0.0) || !(b.c >= 0.0) || !(b.model_bound >= 0.0)) {
    throw InvalidInput("c, sigma^2 and B must be >= 0");
  }
}

double noise_prefactor(const TheoremBound& b, double L) {
  const double n = static_cast<double>(b.n_devices);
  const double energy = static_cast<double>(b.dimension) * b.noise_power * b.model_bound *
                        b.model_bound / (b.gamma * b.gamma * b.peak_power);
  return L * n / (2.0 * (n - 1.0)) * energy;
}

}  // namespace

double evaluate_bound(const TheoremBound& b, double L, std::uint64_t t) {
  check_bound(b);
  const double rt = std::pow(b.rho, static_cast<double>(t));
  // sum_{tau=1..t} rho^{t-tau} = (1 - rho^t) / (1 - rho)
  return b.c * L / 2.0 * rt + noise_prefactor(b, L) * (1.0 - rt) / (1.0 - b.rho);
}

double bound_noise_floor(const TheoremBound& b, double L) {
  check_bound(b);
  return noise_prefactor(b, L) / (1.0 - b.rho);
}

RhoFit fit_rho(std::span<const std::uint64_t> iterations, std::span<const double> gaps,
               double floor, std::size_t first) {
  if (iterations.size() != gaps.size()) throw InvalidInput("iteration and gap traces differ in length");
  std::size_t last = first;
  while (last < gaps.size() && gaps[last] > floor && gaps[last] > 0.0) ++last;
  if (last < first + 2) throw InvalidInput("fewer than two positive points in the fitting window");
  const std::size_t m = last - first;
  double mt = 0.0, my = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    mt += static_cast<double>(iterations[k]);
    my += std::log(gaps[k]);
  }
  mt /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t k = first; k < last; ++k) {
    const double dt = static_cast<double>(iterations[k]) - mt;
    const double dy = std::log(gaps[k]) - my;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  if (!(stt > 0.0)) throw InvalidInput("fitting window has a single iteration");
  const double slope = sty / stt;
  if (!(slope < 0.0)) throw InvalidInput("gap trace is not decreasing; not in the linear regime");
  const double rho = std::clamp(std::exp(slope), std::numeric_limits<double>::min(),
                                std::nextafter(1.0, 0.0));
  const double r2 = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
  return RhoFit{rho, r2, first, last - 1};
}

RhoFit fit_rho(const std::vector<MetricsRecord>& records, double floor, std::size_t first) {
  std::vector<std::uint64_t> it(records.size());
  std::vector<double> gaps(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    it[k] = records[k].iteration;
    gaps[k] = records[k].optimality_gap;
  }
  return fit_rho(it, gaps, floor, first);
}

}  // namespace airdfl

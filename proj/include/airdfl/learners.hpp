#pragma once
// Decentralized learners: DSGD, DSGD with gradient tracking (DSGT), and DSGT
// with SAGA-style variance reduction (DSGT-VR), with either exact mixing or
// over-the-air consensus of the models.
//
// One iteration, for every device i:
//   theta_i^{t+1/2} = theta_i^t - alpha d_i^t                      (local step)
//   theta_i^{t+1}   = sum_j w_ij theta_j^{t+1/2} + w_ii theta_i^{t+1/2} (+ noise)
//   g_i^{t+1}       = stochastic or variance-reduced gradient at theta_i^{t+1}
//   d_i^{t+1/2}     = d_i^t + g_i^{t+1} - g_i^t
//   d_i^{t+1}       = sum_j w_ij d_j^{t+1/2} + w_ii d_i^{t+1/2}      (error-free)
// DSGD skips tracking: d_i^{t+1} = grad f_{i,xi}(theta_i^{t+1}).

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "airdfl/channel.hpp"
#include "airdfl/problems.hpp"
#include "airdfl/scheduler.hpp"
#include "airdfl/topology.hpp"

namespace airdfl {

enum class Variant { dsgd, dsgt, dsgt_vr };
enum class ConsensusMode { error_free, aircomp };

Variant parse_variant(std::string_view s);
std::string_view variant_name(Variant v);
ConsensusMode parse_consensus(std::string_view s);
std::string_view consensus_name(ConsensusMode m);

struct AlgorithmConfig {
  Variant variant = Variant::dsgt_vr;
  double step_size = 0.1;
  std::size_t max_iterations = 1000;
  ConsensusMode consensus = ConsensusMode::error_free;

  void validate() const;
};

struct DeviceState {
  std::vector<double> theta;
  std::vector<double> tracker;       // d_i
  std::vector<double> last_vr_grad;  // g_i
  // SAGA table, |D_i| rows of dimension d, row-major. Empty unless DSGT-VR.
  std::vector<double> grad_table;
  std::vector<double> table_avg;
  std::size_t table_rows = 0;

  std::span<const double> table_entry(std::size_t j) const {
    return {grad_table.data() + j * theta.size(), theta.size()};
  }
};

// theta = theta0, d = g = grad f_i(theta0); for DSGT-VR every table row is the
// per-sample gradient at theta0 and table_avg their mean.
DeviceState init_device_state(const LogisticProblem& problem, std::size_t device,
                              std::span<const double> theta0, Variant variant);

// g = grad f_{i,xi}(theta) - table[xi] + table_avg, then table[xi] <- grad
// f_{i,xi}(theta) with an incremental table_avg update.
std::vector<double> vr_gradient(DeviceState& state, std::size_t sample,
                                const LogisticProblem& problem, std::size_t device);

// theta - alpha d.
std::vector<double> local_step(const DeviceState& state, double step_size);

// d + g_new - g_old.
std::vector<double> tracker_half_update(std::span<const double> tracker,
                                        std::span<const double> new_grad,
                                        std::span<const double> old_grad);

// out_i = w_ii x_i + sum_{j in N_i} w_ij x_j for every device (exact mixing).
std::vector<std::vector<double>> mix(const NetworkGraph& graph, const MixingMatrix& mixing,
                                     const std::vector<std::vector<double>>& rows);

// Everything one iteration needs besides the states.
struct NetworkContext {
  const LogisticProblem* problem;
  const NetworkGraph* graph;
  const MixingMatrix* mixing;
  const Schedule* schedule;
  AlgorithmConfig algorithm;
  ChannelParams channel;
  std::uint64_t seed;
  unsigned threads = 1;
};

struct IterationStats {
  std::size_t blocks = 0;
  double mean_noise_energy = 0.0;   // over receivers, ||z~||^2
  double mean_scaling = 0.0;        // over receivers, sqrt(p); 0 when error-free
  double max_transmit_energy = 0.0; // over all precoded signals
};

// Advances every state from iteration t to t+1. For aircomp, `fading` must be
// the realization for iteration t. Noise and sample indices come from
// substreams keyed by (t, device), so neither the schedule nor the thread
// count changes the result.
IterationStats run_iteration(std::vector<DeviceState>& states, const NetworkContext& ctx,
                             std::uint64_t t, const ChannelBlockRealization* fading);

// Owns the states and draws the per-iteration fading.
class Simulation {
 public:
  Simulation(NetworkContext ctx, std::span<const double> theta0);

  IterationStats step();
  std::uint64_t iteration() const { return t_; }
  const std::vector<DeviceState>& states() const { return states_; }
  const NetworkContext& context() const { return ctx_; }

 private:
  NetworkContext ctx_;
  std::vector<DeviceState> states_;
  std::uint64_t t_ = 0;
};

// Step size of the order min{1/(mu M), m (1-beta)^2 / (M L kappa^2)} with unit
// constants, mu = lambda, L = 1/4 + lambda.
double theorem_order_step_size(const LogisticProblem& problem, double beta);

}  // namespace airdfl

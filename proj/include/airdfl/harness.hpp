#pragma once
// Experiment configuration, orchestration, metrics and the convergence
// envelope.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "airdfl/channel.hpp"
#include "airdfl/learners.hpp"
#include "airdfl/problems.hpp"
#include "airdfl/scheduler.hpp"
#include "airdfl/topology.hpp"

namespace airdfl {

enum class DataSource { synthetic, idx };
enum class TopologyKind { rayleigh, ring, complete, path, erdos_renyi, file };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  Variant variant = Variant::dsgt_vr;
  ConsensusMode consensus = ConsensusMode::aircomp;
  std::size_t n_devices = 20;
  std::optional<double> alpha;  // nullopt: theorem-order start with backoff
  std::size_t iterations = 1000;
  double noise_power = 1.0;     // linear sigma^2 (0 dBm)
  double peak_power = 1.0;
  double gamma = 0.5;

  DataSource source = DataSource::synthetic;
  // synthetic
  std::size_t dimension = 20;
  std::size_t train_samples = 1000;
  std::size_t test_samples = 0;
  double flip_probability = 0.1;
  // idx
  std::filesystem::path idx_images;
  std::filesystem::path idx_labels;
  int class_a = 3;
  int class_b = 5;
  std::size_t idx_train = 1000;
  std::size_t idx_test = 1968;

  std::optional<std::size_t> per_device;
  std::optional<double> lambda;
  TopologyKind topology = TopologyKind::rayleigh;
  double edge_probability = 0.3;
  std::filesystem::path topology_file;
  SchedulePolicy schedule = SchedulePolicy::coloring;

  std::filesystem::path out;
  std::size_t repetitions = 10;
  std::size_t record_every = 1;
  unsigned threads = 1;
  double divergence_threshold = 1e12;
  std::size_t backoff_window = 50;

  void validate() const;
};

// One "key = value" setting (keys as in the config file; dashes and
// underscores are interchangeable). Throws InvalidInput on unknown keys or bad
// values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

TopologyKind parse_topology(const std::string& s);
SchedulePolicy parse_schedule(const std::string& s);

// Data, graph, weights, schedule and optimum shared by every run of a config.
struct ProblemInstance {
  LogisticProblem problem;
  Dataset test;
  NetworkGraph graph;
  MixingMatrix mixing;
  Schedule schedule;
  CentralizedSolution optimum;
};

ProblemInstance build_instance(const ExperimentConfig& config);
NetworkGraph build_topology(const ExperimentConfig& config);

struct MetricsRecord {
  std::uint64_t iteration = 0;
  double optimality_gap = 0.0;      // device mean of F(theta_i) - F*
  double consensus_error = 0.0;     // (1/N) sum ||theta_i - theta_bar||^2
  double test_accuracy = 0.0;       // of theta_bar; NaN without a test set
  double max_model_norm = 0.0;      // running max ||theta_i|| (empirical B)
  double block_noise_energy = 0.0;  // receiver mean ||z~||^2 this iteration
  double scaling_factor = 0.0;      // receiver mean sqrt(p) this iteration
  double blocks = 0.0;              // transmission blocks used (M)
  std::vector<double> device_gaps;

  bool operator==(const MetricsRecord&) const = default;
};

// Header row then one row per record; doubles in shortest round-trip form.
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> read_metrics_csv(std::istream& in);

// Field-wise mean over runs with identical iteration grids.
std::vector<MetricsRecord> average_records(const std::vector<std::vector<MetricsRecord>>& runs);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::vector<MetricsRecord> last_good, double alpha)
      : std::runtime_error(what), last_good_(std::move(last_good)), alpha_(alpha) {}
  const std::vector<MetricsRecord>& last_good() const { return last_good_; }
  double alpha() const { return alpha_; }

 private:
  std::vector<MetricsRecord> last_good_;
  double alpha_;
};

struct RunSummary {
  double alpha = 0.0;
  double initial_gap = 0.0;
  double final_gap = 0.0;
  double plateau_gap = 0.0;  // mean gap over the last 10% of records
  double final_accuracy = 0.0;
  double max_model_norm = 0.0;
  double optimal_loss = 0.0;
  double beta = 0.0;
  std::size_t blocks = 0;
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;  // repetition-averaged
  std::vector<std::vector<MetricsRecord>> per_repetition;
  RunSummary summary;
};

// Runs the configured number of repetitions and averages them. Throws
// DivergenceError if the gap exceeds the divergence threshold.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const ProblemInstance& instance);

// One repetition with a fixed step size.
std::vector<MetricsRecord> run_single(const ExperimentConfig& config,
                                      const ProblemInstance& instance, double alpha,
                                      std::uint64_t run_seed);

void write_summary(std::ostream& out, const ExperimentConfig& config, const RunSummary& summary);

// Envelope (cL/2) rho^t + (L N / (2 (N-1))) (d sigma^2 B^2 / (gamma^2 P)) sum_{tau=1..t} rho^{t-tau}.
struct TheoremBound {
  double rho;
  double c;
  std::size_t n_devices;
  std::size_t dimension;
  double noise_power;
  double model_bound;  // B
  double gamma;
  double peak_power;
};

// c = N/(N-1) max_i ||theta_i^0 - theta_bar^0||^2 + N ||theta_bar^0 - theta*||^2.
double initial_distance_constant(const std::vector<std::vector<double>>& initial_models,
                                 std::span<const double> optimum);

// Throws InvalidInput unless 0 < rho < 1 and N >= 2.
double evaluate_bound(const TheoremBound& bound, double smoothness, std::uint64_t t);
// t -> infinity limit of the noise term.
double bound_noise_floor(const TheoremBound& bound, double smoothness);

struct RhoFit {
  double rho;
  double r_squared;
  std::size_t first;  // window, record indices [first, last]
  std::size_t last;
};

// Least-squares fit of log(gap) = a + t log(rho) over records from `first` up
// to the last record before the gap drops to `floor` or below. Throws
// InvalidInput if fewer than two points qualify or the fitted slope is >= 0.
RhoFit fit_rho(std::span<const std::uint64_t> iterations, std::span<const double> gaps,
               double floor = 0.0, std::size_t first = 0);
RhoFit fit_rho(const std::vector<MetricsRecord>& records, double floor = 0.0, std::size_t first = 0);

}  // namespace airdfl

#pragma once
// Regularized logistic regression over per-device datasets.
//
//   f_{i,j}(theta) = log(1 + exp(-b_ij a_ij^T theta)) + (lambda/2) ||theta||^2
//   f_i = mean_j f_{i,j},   F = mean_i f_i
//
// Features are unit-norm and labels are +-1, so every f_{i,j} is lambda-strongly
// convex and (1/4 + lambda)-smooth.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace airdfl {

// Row-major feature matrix with one +-1 label per row.
class Dataset {
 public:
  explicit Dataset(std::size_t dimension = 0) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const double> feature(std::size_t j) const {
    return {features_.data() + j * dimension_, dimension_};
  }
  double label(std::size_t j) const { return labels_.at(j); }
  const std::vector<double>& labels() const { return labels_; }

  void add(std::span<const double> feature, double label);
  // Copy of rows [first, first + count).
  Dataset slice(std::size_t first, std::size_t count) const;

  // Throws InvalidInput unless every feature has unit norm (1e-12) and every
  // label is exactly +1 or -1.
  void validate_normalized() const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dimension_;
  std::vector<double> features_;
  std::vector<double> labels_;
};

class LogisticProblem {
 public:
  // lambda defaults to 1 / (total sample count). Validates every device.
  LogisticProblem(std::vector<Dataset> devices, std::optional<double> lambda = std::nullopt);

  std::size_t n_devices() const { return devices_.size(); }
  std::size_t dimension() const { return dimension_; }
  double lambda() const { return lambda_; }
  const Dataset& device(std::size_t i) const { return devices_.at(i); }
  std::size_t total_samples() const;
  std::size_t max_local_samples() const;  // M-bar
  std::size_t min_local_samples() const;  // m

  // Analytic constants for unit-norm features.
  double smoothness() const { return 0.25 + lambda_; }
  double strong_convexity() const { return lambda_; }

 private:
  std::vector<Dataset> devices_;
  std::size_t dimension_;
  double lambda_;
};

struct LossGrad {
  double loss;
  std::vector<double> grad;
};

// log(1 + exp(-z)) without overflow.
double log1p_exp_neg(double z);
// 1 / (1 + exp(z)) without overflow.
double logistic_neg(double z);

LossGrad sample_loss_grad(const LogisticProblem& problem, std::size_t device, std::size_t sample,
                          std::span<const double> theta);
// Gradient only, written into out (size d).
void sample_grad_into(const LogisticProblem& problem, std::size_t device, std::size_t sample,
                      std::span<const double> theta, std::span<double> out);

std::vector<double> full_local_grad(const LogisticProblem& problem, std::size_t device,
                                    std::span<const double> theta);
double local_loss(const LogisticProblem& problem, std::size_t device, std::span<const double> theta);

double global_loss(const LogisticProblem& problem, std::span<const double> theta);
std::vector<double> global_grad(const LogisticProblem& problem, std::span<const double> theta);

struct CentralizedSolution {
  std::vector<double> theta;
  double loss;
  double grad_norm;
  std::size_t iterations;
};

// Full-batch gradient descent with Barzilai-Borwein trial steps and
// backtracking on the directional derivative, until ||grad F|| < tolerance.
// Throws ConvergenceError after max_iterations.
CentralizedSolution solve_centralized(const LogisticProblem& problem, double tolerance = 1e-13,
                                      std::optional<std::vector<double>> start = std::nullopt,
                                      std::size_t max_iterations = 200000);

// Fraction of samples with sign(a^T theta) == b (a zero logit counts as +1).
double accuracy(const Dataset& data, std::span<const double> theta);

struct SynthesisOptions {
  double flip_probability = 0.1;
};

// Ground truth theta* ~ N(0, I), features ~ N(0, I) normalized, labels
// sign(a^T theta*) flipped with the given probability; contiguous even split.
LogisticProblem synthesize(std::size_t n_devices, std::size_t samples_per_device,
                           std::size_t dimension, std::uint64_t seed,
                           SynthesisOptions options = {});
// Same generator, returned unsplit (first total samples).
Dataset synthesize_dataset(std::size_t total, std::size_t dimension, std::uint64_t seed,
                           SynthesisOptions options = {});

// Contiguous split. With per_device set, uses the first n * per_device samples
// in equal parts; otherwise splits everything, sizes differing by at most one.
std::vector<Dataset> partition(const Dataset& data, std::size_t n_devices,
                               std::optional<std::size_t> per_device = std::nullopt);

// Text matrix export: header "samples=S dimension=D devices=N lambda=L", then
// one "device label f_1 ... f_D" row per sample (17 significant digits).
void write_text_matrix(std::ostream& out, const LogisticProblem& problem);
LogisticProblem read_text_matrix(std::istream& in);

// IDX (MNIST) ingestion.
struct IdxImages {
  std::size_t count;
  std::size_t rows;
  std::size_t cols;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
};
IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Keeps classes a (+1) and b (-1) in file order, scales pixels by 1/255 and
// normalizes each image to unit norm; the first train_count matches form the
// training set and the next test_count the test set.
TrainTestSplit load_idx_binary_pair(const std::filesystem::path& images,
                                    const std::filesystem::path& labels, int class_a, int class_b,
                                    std::size_t train_count, std::size_t test_count);

}  // namespace airdfl

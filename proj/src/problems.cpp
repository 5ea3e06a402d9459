#include "airdfl/problems.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"
#include "airdfl/rng.hpp"

namespace airdfl {

void Dataset::add(std::span<const double> feature, double label) {
  if (feature.size() != dimension_) throw InvalidInput("feature dimension mismatch");
  features_.insert(features_.end(), feature.begin(), feature.end());
  labels_.push_back(label);
}

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) throw InvalidInput("dataset slice out of range");
  Dataset out(dimension_);
  out.features_.assign(features_.begin() + static_cast<std::ptrdiff_t>(first * dimension_),
                       features_.begin() + static_cast<std::ptrdiff_t>((first + count) * dimension_));
  out.labels_.assign(labels_.begin() + static_cast<std::ptrdiff_t>(first),
                     labels_.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

void Dataset::validate_normalized() const {
  for (std::size_t j = 0; j < size(); ++j) {
    const double b = labels_[j];
    if (b != 1.0 && b != -1.0) throw InvalidInput("labels must be +1 or -1");
    const double n2 = vec::squared_norm(feature(j));
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-12) throw InvalidInput("features must have unit l2 norm");
  }
}

LogisticProblem::LogisticProblem(std::vector<Dataset> devices, std::optional<double> lambda)
    : devices_(std::move(devices)), dimension_(0), lambda_(0.0) {
  if (devices_.empty()) throw InvalidInput("problem needs at least one device");
  dimension_ = devices_.front().dimension();
  if (dimension_ == 0) throw InvalidInput("model dimension must be positive");
  for (const auto& d : devices_) {
    if (d.dimension() != dimension_) throw InvalidInput("devices disagree on feature dimension");
    if (d.empty()) throw InvalidInput("every device needs at least one sample");
    d.validate_normalized();
  }
  lambda_ = lambda.value_or(1.0 / static_cast<double>(total_samples()));
  if (!(lambda_ > 0.0)) throw InvalidInput("regularizer lambda must be > 0");
}

std::size_t LogisticProblem::total_samples() const {
  std::size_t s = 0;
  for (const auto& d : devices_) s += d.size();
  return s;
}

std::size_t LogisticProblem::max_local_samples() const {
  std::size_t m = 0;
  for (const auto& d : devices_) m = std::max(m, d.size());
  return m;
}

std::size_t LogisticProblem::min_local_samples() const {
  std::size_t m = devices_.front().size();
  for (const auto& d : devices_) m = std::min(m, d.size());
  return m;
}

double log1p_exp_neg(double z) {
  if (z > 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double logistic_neg(double z) {
  if (z > 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

namespace {

void check_sample(const LogisticProblem& p, std::size_t device, std::size_t sample,
                  std::span<const double> theta) {
  if (device >= p.n_devices()) throw InvalidInput("device index out of range");
  if (sample >= p.device(device).size()) throw InvalidInput("sample index out of range");
  if (theta.size() != p.dimension()) throw InvalidInput("model dimension mismatch");
}

// Loss and gradient coefficient c with grad = c * a + lambda * theta, summed
// over a dataset into grad_acc (scaled by weight), loss returned.
double accumulate_dataset(const Dataset& data, std::span<const double> theta, double weight,
                          std::span<double> grad_acc) {
  const auto& k = active_kernels();
  const std::size_t d = theta.size();
  double loss = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto a = data.feature(j);
    const double b = data.label(j);
    const double z = b * k.dot(a.data(), theta.data(), d);
    loss += log1p_exp_neg(z);
    if (!grad_acc.empty()) k.axpy(-weight * b * logistic_neg(z), a.data(), grad_acc.data(), d);
  }
  return loss;
}

}  // namespace

void sample_grad_into(const LogisticProblem& problem, std::size_t device, std::size_t sample,
                      std::span<const double> theta, std::span<double> out) {
  check_sample(problem, device, sample, theta);
  if (out.size() != theta.size()) throw InvalidInput("output dimension mismatch");
  const auto& data = problem.device(device);
  const auto a = data.feature(sample);
  const double b = data.label(sample);
  const double z = b * vec::dot(a, theta);
  vec::axpby_into(-b * logistic_neg(z), a, problem.lambda(), theta, out);
}

LossGrad sample_loss_grad(const LogisticProblem& problem, std::size_t device, std::size_t sample,
                          std::span<const double> theta) {
  check_sample(problem, device, sample, theta);
  const auto& data = problem.device(device);
  const double z = data.label(sample) * vec::dot(data.feature(sample), theta);
  LossGrad out{log1p_exp_neg(z) + 0.5 * problem.lambda() * vec::squared_norm(theta),
               std::vector<double>(theta.size())};
  sample_grad_into(problem, device, sample, theta, out.grad);
  return out;
}

std::vector<double> full_local_grad(const LogisticProblem& problem, std::size_t device,
                                    std::span<const double> theta) {
  if (device >= problem.n_devices()) throw InvalidInput("device index out of range");
  if (theta.size() != problem.dimension()) throw InvalidInput("model dimension mismatch");
  const auto& data = problem.device(device);
  if (data.empty()) throw InvalidInput("empty local dataset");
  std::vector<double> g(theta.size(), 0.0);
  accumulate_dataset(data, theta, 1.0, g);
  const double inv_m = 1.0 / static_cast<double>(data.size());
  vec::axpby_into(inv_m, g, problem.lambda(), theta, g);
  return g;
}

double local_loss(const LogisticProblem& problem, std::size_t device, std::span<const double> theta) {
  if (theta.size() != problem.dimension()) throw InvalidInput("model dimension mismatch");
  const auto& data = problem.device(device);
  const double l = accumulate_dataset(data, theta, 0.0, {});
  return l / static_cast<double>(data.size()) + 0.5 * problem.lambda() * vec::squared_norm(theta);
}

double global_loss(const LogisticProblem& problem, std::span<const double> theta) {
  if (theta.size() != problem.dimension()) throw InvalidInput("model dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < problem.n_devices(); ++i) {
    const auto& data = problem.device(i);
    s += accumulate_dataset(data, theta, 0.0, {}) / static_cast<double>(data.size());
  }
  return s / static_cast<double>(problem.n_devices()) +
         0.5 * problem.lambda() * vec::squared_norm(theta);
}

std::vector<double> global_grad(const LogisticProblem& problem, std::span<const double> theta) {
  if (theta.size() != problem.dimension()) throw InvalidInput("model dimension mismatch");
  std::vector<double> g(theta.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(problem.n_devices());
  for (std::size_t i = 0; i < problem.n_devices(); ++i) {
    const auto& data = problem.device(i);
    accumulate_dataset(data, theta, inv_n / static_cast<double>(data.size()), g);
  }
  vec::axpy(problem.lambda(), theta, g);
  return g;
}

CentralizedSolution solve_centralized(const LogisticProblem& problem, double tolerance,
                                      std::optional<std::vector<double>> start,
                                      std::size_t max_iterations) {
  if (!(tolerance > 0.0)) throw InvalidInput("tolerance must be positive");
  const std::size_t d = problem.dimension();
  std::vector<double> theta = start.value_or(std::vector<double>(d, 0.0));
  if (theta.size() != d) throw InvalidInput("start point dimension mismatch");

  const double safe_step = 1.0 / problem.smoothness();
  std::vector<double> g = global_grad(problem, theta);
  double gnorm = std::sqrt(vec::squared_norm(g));
  double step = safe_step;
  std::vector<double> trial(d);
  std::vector<double> s(d);
  std::vector<double> y(d);

  std::size_t it = 0;
  for (; it < max_iterations && gnorm >= tolerance; ++it) {
    // Backtrack until the directional derivative along -g is still
    // nonpositive at the trial point. For a convex F that means F decreased;
    // any step <= 1/L passes.
    double t = std::max(step, safe_step);
    std::vector<double> g_trial;
    for (;;) {
      vec::axpby_into(1.0, theta, -t, g, trial);
      g_trial = global_grad(problem, trial);
      if (t <= safe_step || vec::dot(g_trial, g) >= 0.0) break;
      t = std::max(0.5 * t, safe_step);
    }
    vec::axpby_into(1.0, trial, -1.0, theta, s);
    vec::axpby_into(1.0, g_trial, -1.0, g, y);
    const double sy = vec::dot(s, y);
    step = sy > 0.0 ? vec::squared_norm(s) / sy : safe_step;
    theta.swap(trial);
    g.swap(g_trial);
    gnorm = std::sqrt(vec::squared_norm(g));
  }
  if (gnorm >= tolerance) {
    std::ostringstream msg;
    msg << "centralized solver did not reach ||grad|| < " << tolerance << " within "
        << max_iterations << " iterations (last ||grad|| = " << gnorm << ")";
    throw ConvergenceError(msg.str());
  }
  return {theta, global_loss(problem, theta), gnorm, it};
}

double accuracy(const Dataset& data, std::span<const double> theta) {
  if (data.empty()) return 0.0;
  if (theta.size() != data.dimension()) throw InvalidInput("model dimension mismatch");
  std::size_t correct = 0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const double pred = vec::dot(data.feature(j), theta) >= 0.0 ? 1.0 : -1.0;
    if (pred == data.label(j)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Dataset synthesize_dataset(std::size_t total, std::size_t dimension, std::uint64_t seed,
                           SynthesisOptions options) {
  if (dimension == 0) throw InvalidInput("dimension must be positive");
  RandomStream rng(seed, StreamDomain::data, {dimension});
  std::vector<double> truth(dimension);
  for (auto& x : truth) x = rng.normal();
  Dataset out(dimension);
  std::vector<double> a(dimension);
  for (std::size_t j = 0; j < total; ++j) {
    double n2 = 0.0;
    do {
      for (auto& x : a) x = rng.normal();
      n2 = vec::squared_norm(a);
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& x : a) x *= inv;
    double b = vec::dot(a, truth) >= 0.0 ? 1.0 : -1.0;
    if (rng.uniform01() < options.flip_probability) b = -b;
    out.add(a, b);
  }
  return out;
}

LogisticProblem synthesize(std::size_t n_devices, std::size_t samples_per_device,
                           std::size_t dimension, std::uint64_t seed, SynthesisOptions options) {
  if (n_devices == 0 || samples_per_device == 0) throw InvalidInput("need devices and samples");
  const Dataset all = synthesize_dataset(n_devices * samples_per_device, dimension, seed, options);
  return LogisticProblem(partition(all, n_devices));
}

std::vector<Dataset> partition(const Dataset& data, std::size_t n_devices,
                               std::optional<std::size_t> per_device) {
  if (n_devices == 0) throw InvalidInput("need at least one device");
  std::vector<Dataset> out;
  out.reserve(n_devices);
  if (per_device) {
    if (*per_device == 0 || n_devices * *per_device > data.size()) {
      throw InvalidInput("not enough samples for the requested per-device count");
    }
    for (std::size_t i = 0; i < n_devices; ++i) out.push_back(data.slice(i * *per_device, *per_device));
    return out;
  }
  if (data.size() < n_devices) throw InvalidInput("fewer samples than devices");
  const std::size_t base = data.size() / n_devices;
  const std::size_t extra = data.size() % n_devices;
  std::size_t first = 0;
  for (std::size_t i = 0; i < n_devices; ++i) {
    const std::size_t count = base + (i < extra ? 1 : 0);
    out.push_back(data.slice(first, count));
    first += count;
  }
  return out;
}

void write_text_matrix(std::ostream& out, const LogisticProblem& problem) {
  out.precision(17);
  out << "samples=" << problem.total_samples() << " dimension=" << problem.dimension()
      << " devices=" << problem.n_devices() << " lambda=" << problem.lambda() << '\n';
  for (std::size_t i = 0; i < problem.n_devices(); ++i) {
    const auto& data = problem.device(i);
    for (std::size_t j = 0; j < data.size(); ++j) {
      out << i << ' ' << data.label(j);
      for (double x : data.feature(j)) out << ' ' << x;
      out << '\n';
    }
  }
}

LogisticProblem read_text_matrix(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("empty text matrix");
  std::size_t samples = 0;
  std::size_t dimension = 0;
  std::size_t devices = 0;
  double lambda = 0.0;
  {
    std::istringstream h(header);
    std::string tok;
    while (h >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw FormatError("bad text matrix header: " + header);
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      try {
        if (key == "samples") samples = std::stoul(val);
        else if (key == "dimension") dimension = std::stoul(val);
        else if (key == "devices") devices = std::stoul(val);
        else if (key == "lambda") lambda = std::stod(val);
      } catch (const std::exception&) {
        throw FormatError("bad value in text matrix header: " + tok);
      }
    }
  }
  if (dimension == 0 || devices == 0) throw FormatError("text matrix header missing dimension/devices");
  std::vector<Dataset> parts(devices, Dataset(dimension));
  std::vector<double> a(dimension);
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t dev = 0;
    double b = 0.0;
    if (!(in >> dev >> b) || dev >= devices) throw FormatError("truncated or bad text matrix row");
    for (auto& x : a)
      if (!(in >> x)) throw FormatError("truncated text matrix row");
    parts[dev].add(a, b);
  }
  return LogisticProblem(std::move(parts), lambda > 0.0 ? std::optional<double>(lambda) : std::nullopt);
}

}  // namespace airdfl

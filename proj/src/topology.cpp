#include "airdfl/topology.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>

#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"
#include "airdfl/rng.hpp"

namespace airdfl {

NetworkGraph::NetworkGraph(std::size_t n_devices) : neighbors_(n_devices) {
  if (n_devices == 0) throw InvalidInput("graph needs at least one device");
}

void NetworkGraph::add_edge(DeviceId i, DeviceId j) {
  if (i >= n_devices() || j >= n_devices()) throw InvalidInput("edge endpoint out of range");
  if (i == j) throw InvalidInput("self-loop edges are not stored");
  auto insert_sorted = [](std::vector<DeviceId>& v, DeviceId x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  };
  insert_sorted(neighbors_[i], j);
  insert_sorted(neighbors_[j], i);
}

bool NetworkGraph::has_edge(DeviceId i, DeviceId j) const {
  const auto& n = neighbors_.at(i);
  return std::binary_search(n.begin(), n.end(), j);
}

std::size_t NetworkGraph::max_degree() const {
  std::size_t d = 0;
  for (const auto& n : neighbors_) d = std::max(d, n.size());
  return d;
}

std::size_t NetworkGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& n : neighbors_) twice += n.size();
  return twice / 2;
}

std::vector<std::pair<DeviceId, DeviceId>> NetworkGraph::edges() const {
  std::vector<std::pair<DeviceId, DeviceId>> out;
  for (DeviceId i = 0; i < n_devices(); ++i) {
    for (DeviceId j : neighbors_[i]) {
      if (i < j) out.emplace_back(i, j);
    }
  }
  return out;
}

bool NetworkGraph::is_connected() const {
  std::vector<bool> seen(n_devices(), false);
  std::queue<DeviceId> frontier;
  frontier.push(0);
  seen[0] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const DeviceId u = frontier.front();
    frontier.pop();
    for (DeviceId v : neighbors_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == n_devices();
}

MixingMatrix::MixingMatrix(const NetworkGraph& graph, DenseMatrix weights)
    : weights_(std::move(weights)), beta_(0.0) {
  const std::size_t n = graph.n_devices();
  if (weights_.rows() != n || weights_.cols() != n) {
    throw InvalidInput("mixing matrix shape does not match the graph");
  }
  constexpr double kStochasticTol = 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    double col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = weights_(i, j);
      if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("mixing weight outside [0,1]");
      if (weights_(j, i) != w) throw InvalidInput("mixing matrix is not symmetric");
      if (w > 0.0 && i != j && !graph.has_edge(i, j)) {
        throw InvalidInput("positive mixing weight on a non-edge");
      }
      row += w;
      col += weights_(j, i);
    }
    if (std::abs(row - 1.0) > kStochasticTol || std::abs(col - 1.0) > kStochasticTol) {
      throw InvalidInput("mixing matrix is not doubly stochastic");
    }
  }
  beta_ = spectral_gap(weights_);
}

NetworkGraph build_graph_from_gains(const DenseMatrix& gains, double threshold) {
  const std::size_t n = gains.rows();
  if (n == 0 || gains.cols() != n) throw InvalidInput("gain matrix must be square and non-empty");
  if (!(threshold >= 0.0)) throw InvalidInput("gain threshold must be >= 0");
  NetworkGraph g(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (gains(i, i) != 0.0) throw InvalidInput("gain matrix must have a zero diagonal");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (gains(i, j) != gains(j, i)) throw InvalidInput("gain matrix is not symmetric");
      if (gains(i, j) < 0.0) throw InvalidInput("gains must be nonnegative");
      if (gains(i, j) > threshold) g.add_edge(i, j);
    }
  }
  return g;
}

MixingMatrix laplacian_mixing(const NetworkGraph& graph) {
  if (!graph.is_connected()) {
    throw InvalidInput("graph is disconnected; no mixing matrix with beta < 1 exists");
  }
  const std::size_t n = graph.n_devices();
  const double eps = 1.0 / static_cast<double>(graph.max_degree() + 1);
  DenseMatrix w(n, n);
  for (DeviceId i = 0; i < n; ++i) {
    for (DeviceId j : graph.neighbors(i)) w(i, j) = eps;
    w(i, i) = 1.0 - eps * static_cast<double>(graph.degree(i));
  }
  return MixingMatrix(graph, std::move(w));
}

double spectral_gap(const DenseMatrix& weights) {
  const std::size_t n = weights.rows();
  if (n == 0 || weights.cols() != n) throw InvalidInput("weights must be square and non-empty");
  const double avg = 1.0 / static_cast<double>(n);
  DenseMatrix a(n, n);
  DenseMatrix at(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) = weights(i, j) - avg;
      at(j, i) = a(i, j);
    }
  }
  if (n == 1) return std::abs(a(0, 0));

  const auto& k = active_kernels();
  std::vector<double> v(n);
  std::vector<double> av(n);
  std::vector<double> atav(n);
  RandomStream start(0x5eed5eedULL);
  for (auto& x : v) x = start.normal();
  double norm = std::sqrt(k.squared_norm(v.data(), n));
  for (auto& x : v) x /= norm;

  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 1'000'000;
  double sigma2 = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    for (std::size_t i = 0; i < n; ++i) av[i] = k.dot(a.row(i).data(), v.data(), n);
    sigma2 = k.squared_norm(av.data(), n);
    if (sigma2 <= 1e-300) return 0.0;
    for (std::size_t i = 0; i < n; ++i) atav[i] = k.dot(at.row(i).data(), av.data(), n);
    // Residual of the eigenpair (sigma^2, v) of A^T A.
    double res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = atav[i] - sigma2 * v[i];
      res2 += r * r;
    }
    norm = std::sqrt(k.squared_norm(atav.data(), n));
    for (std::size_t i = 0; i < n; ++i) v[i] = atav[i] / norm;
    if (std::sqrt(res2) <= kTol * sigma2) break;
  }
  for (std::size_t i = 0; i < n; ++i) av[i] = k.dot(a.row(i).data(), v.data(), n);
  return std::sqrt(std::max(sigma2, k.squared_norm(av.data(), n)));
}

NetworkGraph complete_graph(std::size_t n) {
  NetworkGraph g(n);
  for (DeviceId i = 0; i < n; ++i)
    for (DeviceId j = i + 1; j < n; ++j) g.add_edge(i, j);
  return g;
}

NetworkGraph ring_graph(std::size_t n) {
  NetworkGraph g(n);
  if (n == 2) g.add_edge(0, 1);
  if (n >= 3) {
    for (DeviceId i = 0; i < n; ++i) g.add_edge(i, (i + 1) % n);
  }
  return g;
}

NetworkGraph path_graph(std::size_t n) {
  NetworkGraph g(n);
  for (DeviceId i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
  return g;
}

NetworkGraph erdos_renyi_graph(std::size_t n, double edge_probability, std::uint64_t seed) {
  if (!(edge_probability >= 0.0 && edge_probability <= 1.0)) {
    throw InvalidInput("edge probability must be in [0,1]");
  }
  RandomStream rng(seed, StreamDomain::topology, {n});
  NetworkGraph g(n);
  for (DeviceId i = 0; i < n; ++i)
    for (DeviceId j = i + 1; j < n; ++j)
      if (rng.uniform01() < edge_probability) g.add_edge(i, j);
  return g;
}

DenseMatrix rayleigh_gains(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed, StreamDomain::topology, {n, 0x7261796cULL});
  DenseMatrix gains(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double mag = std::abs(rng.complex_normal(1.0));
      gains(i, j) = mag;
      gains(j, i) = mag;
    }
  }
  return gains;
}

void write_edge_list(std::ostream& out, const NetworkGraph& graph, const MixingMatrix* mixing) {
  const std::size_t n = graph.n_devices();
  out << "n_devices=" << n << '\n';
  auto fmt = [](double w) {
    std::ostringstream s;
    s.precision(17);
    s << w;
    return s.str();
  };
  for (DeviceId i = 0; i < n; ++i) {
    if (mixing != nullptr) out << i << ' ' << i << ' ' << fmt(mixing->weight(i, i)) << '\n';
    for (DeviceId j : graph.neighbors(i)) {
      if (j <= i) continue;
      out << i << ' ' << j << ' ' << (mixing ? fmt(mixing->weight(i, j)) : std::string("1"))
          << '\n';
    }
  }
}

EdgeListSnapshot read_edge_list(std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("n_devices=", 0) != 0) throw FormatError("edge list must start with n_devices=N");
    try {
      n = std::stoul(line.substr(10));
    } catch (const std::exception&) {
      throw FormatError("bad n_devices header: " + line);
    }
    break;
  }
  if (n == 0) throw FormatError("edge list has no or zero n_devices header");

  NetworkGraph graph(n);
  DenseMatrix weights(n, n);
  bool has_diagonal = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    long long i = -1;
    long long j = -1;
    double w = 0.0;
    if (!(row >> i >> j >> w) || i < 0 || j < 0 || static_cast<std::size_t>(i) >= n ||
        static_cast<std::size_t>(j) >= n) {
      throw FormatError("bad edge line: " + line);
    }
    const auto a = static_cast<DeviceId>(i);
    const auto b = static_cast<DeviceId>(j);
    if (a == b) {
      has_diagonal = true;
      weights(a, a) = w;
    } else {
      graph.add_edge(a, b);
      weights(a, b) = w;
      weights(b, a) = w;
    }
  }
  EdgeListSnapshot snap{std::move(graph), std::nullopt};
  if (has_diagonal) snap.weights = std::move(weights);
  return snap;
}

}  // namespace airdfl

#pragma once
// Communication graphs and mixing matrices.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "airdfl/matrix.hpp"

namespace airdfl {

using DeviceId = std::size_t;

// Undirected simple graph over devices 0..N-1. Neighbor lists never contain
// the device itself; consensus code adds the self-weight term explicitly.
class NetworkGraph {
 public:
  explicit NetworkGraph(std::size_t n_devices);

  std::size_t n_devices() const { return neighbors_.size(); }

  // Idempotent. Throws InvalidInput on self-loops or out-of-range ids.
  void add_edge(DeviceId i, DeviceId j);
  bool has_edge(DeviceId i, DeviceId j) const;

  // Sorted ascending.
  const std::vector<DeviceId>& neighbors(DeviceId i) const { return neighbors_.at(i); }
  std::size_t degree(DeviceId i) const { return neighbors_.at(i).size(); }
  std::size_t max_degree() const;
  std::size_t edge_count() const;

  // Unordered pairs with first < second, lexicographic.
  std::vector<std::pair<DeviceId, DeviceId>> edges() const;

  bool is_connected() const;

  bool operator==(const NetworkGraph&) const = default;

 private:
  std::vector<std::vector<DeviceId>> neighbors_;
};

// Symmetric doubly stochastic weights supported on graph edges plus the
// diagonal, with beta = ||W - (1/N) 1 1^T||_2 cached at construction.
class MixingMatrix {
 public:
  // Validates every invariant (symmetry, stochasticity to 1e-12, entries in
  // [0,1], support on edges). Throws InvalidInput otherwise.
  MixingMatrix(const NetworkGraph& graph, DenseMatrix weights);

  std::size_t size() const { return weights_.rows(); }
  double weight(DeviceId i, DeviceId j) const { return weights_(i, j); }
  const DenseMatrix& weights() const { return weights_; }
  double beta() const { return beta_; }

 private:
  DenseMatrix weights_;
  double beta_;
};

// Edge (i,j) iff gains[i][j] > threshold. gains must be square, symmetric and
// zero on the diagonal; threshold >= 0.
NetworkGraph build_graph_from_gains(const DenseMatrix& gains, double threshold);

// W = I - L / (d_max + 1). Throws InvalidInput if the graph is disconnected.
MixingMatrix laplacian_mixing(const NetworkGraph& graph);

// Largest singular value of W - (1/N) 1 1^T (equivalently the second largest
// singular value of a doubly stochastic W), by power iteration on
// (W - J)^T (W - J) to relative tolerance 1e-10.
double spectral_gap(const DenseMatrix& weights);
inline double spectral_gap(const MixingMatrix& w) { return w.beta(); }

// Generators.
NetworkGraph complete_graph(std::size_t n);
NetworkGraph ring_graph(std::size_t n);
NetworkGraph path_graph(std::size_t n);
NetworkGraph erdos_renyi_graph(std::size_t n, double edge_probability, std::uint64_t seed);
// One draw of symmetric Rayleigh gains |h| with h ~ CN(0,1), thresholded.
DenseMatrix rayleigh_gains(std::size_t n, std::uint64_t seed);

// Plain-text snapshot: header "n_devices=N", then "i j weight" lines for
// i <= j with nonzero weight (diagonal lines carry self-weights).
void write_edge_list(std::ostream& out, const NetworkGraph& graph, const MixingMatrix* mixing);

struct EdgeListSnapshot {
  NetworkGraph graph;
  // Present when the file carried diagonal (self-weight) lines.
  std::optional<DenseMatrix> weights;
};
EdgeListSnapshot read_edge_list(std::istream& in);

}  // namespace airdfl

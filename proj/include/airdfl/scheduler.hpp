#pragma once
// Interference-free receive scheduling. Each device acts as the active
// receiver in exactly one block per consensus iteration; two receivers may
// share a block only if they are at distance > 2 in the communication graph
// (not adjacent and no common neighbor).

#include <iosfwd>
#include <vector>

#include "airdfl/topology.hpp"

namespace airdfl {

class Schedule {
 public:
  // Throws InvalidInput if a block index is >= n_blocks or a block is empty.
  Schedule(std::size_t n_blocks, std::vector<std::size_t> assignment);

  std::size_t n_blocks() const { return n_blocks_; }
  std::size_t n_devices() const { return assignment_.size(); }
  std::size_t block_of(DeviceId i) const { return assignment_.at(i); }
  const std::vector<std::size_t>& assignment() const { return assignment_; }
  // Receivers of each block, ascending.
  std::vector<std::vector<DeviceId>> blocks() const;

 private:
  std::size_t n_blocks_;
  std::vector<std::size_t> assignment_;
};

enum class SchedulePolicy { naive, coloring };

// Conflict predicate: distinct and at distance <= 2.
bool receivers_conflict(const NetworkGraph& graph, DeviceId u, DeviceId v);

// Pairwise check of the validity invariant against the graph.
bool is_valid_schedule(const NetworkGraph& graph, const Schedule& schedule);

Schedule naive_schedule(const NetworkGraph& graph);

// Welsh-Powell greedy coloring of the square of the graph.
Schedule coloring_schedule(const NetworkGraph& graph);

Schedule make_schedule(const NetworkGraph& graph, SchedulePolicy policy);

// "device block" lines.
void write_schedule(std::ostream& out, const Schedule& schedule);

}  // namespace airdfl

#pragma once
// Block flat-fading D2D channel with over-the-air (AirComp) consensus.
//
// A receiver i collects the superposition of its neighbors' precoded models in
// one block. Each sender inverts its own channel and applies a receiver-wide
// scaling factor sqrt(p) so the receiver sees sum_j sqrt(p) w_ij theta_j plus
// noise, divides by sqrt(p), and adds its own w_ii theta_i.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "airdfl/rng.hpp"
#include "airdfl/topology.hpp"

namespace airdfl {

struct ChannelParams {
  double noise_power = 1.0;     // sigma^2, linear
  double peak_power = 1.0;      // P
  double gain_threshold = 0.5;  // gamma
  std::size_t dimension = 1;    // d, time slots per block

  void validate() const;
};

// Linear noise power from dBm (0 dBm -> 1.0).
double dbm_to_linear(double dbm);

// Fading coefficients h_ij for every ordered edge (receiver i, sender j) of one
// consensus iteration. Draws are CN(0,1) conditioned on |h| > gamma by
// rejection, one substream per (iteration, i). No reciprocity: h_ij and h_ji are
// independent.
class ChannelBlockRealization {
 public:
  static ChannelBlockRealization draw(const NetworkGraph& graph, double gain_threshold,
                                      std::uint64_t master_seed, std::uint64_t iteration);

  // Aligned with graph.neighbors(receiver).
  std::span<const std::complex<double>> receiver_coefficients(DeviceId receiver) const {
    return coefficients_.at(receiver);
  }
  std::complex<double> coefficient(DeviceId receiver, DeviceId sender) const;

 private:
  ChannelBlockRealization() = default;
  std::vector<std::vector<DeviceId>> senders_;
  std::vector<std::vector<std::complex<double>>> coefficients_;
};

// One fading coefficient with |h| > gamma (gamma >= 0).
std::complex<double> draw_conditioned_coefficient(RandomStream& rng, double gain_threshold);

struct ScalingFactor {
  double value;  // sqrt(p) > 0
};

// A neighbor's contribution to a receiver's block.
struct Transmission {
  DeviceId sender;
  std::complex<double> coeff;    // h_ij
  double weight;                 // w_ij
  std::span<const double> model; // theta_j
};

// Complex baseband signal over d slots, stored as separate real/imag planes.
struct ComplexSignal {
  std::vector<double> re;
  std::vector<double> im;

  std::size_t size() const { return re.size(); }
  double energy() const;
};

// sqrt(p) = min_j |h_ij| sqrt(P) / ||theta_j||, skipping zero-norm senders;
// sqrt(P)/gamma when every sender is zero. Throws on an empty neighbor set.
ScalingFactor compute_scaling(std::span<const Transmission> senders, const ChannelParams& params);

// x = sqrt(p) w (h^*/|h|^2) theta. Guarantees ||x||^2 <= P in floating point:
// a rounding overshoot is removed by shrinking the signal by a few ulps.
ComplexSignal precode(std::span<const double> model, double weight, std::complex<double> coeff,
                      ScalingFactor scaling, const ChannelParams& params);

struct ChannelInput {
  std::complex<double> coeff;
  const ComplexSignal* signal;
};

struct DecodedBlock {
  std::vector<double> model;  // sum_j w_ij theta_j + w_ii theta_i + noise
  double noise_energy;        // ||z~||^2 actually realized
};

// y = sum_j h_ij x_j + z with z ~ N(0, sigma^2) per slot on the in-phase
// component; decode Re(y)/sqrt(p) + w_ii theta_i. With sigma^2 = 0 no noise is
// drawn and the result is the exact weighted average up to roundoff.
DecodedBlock superpose_and_decode(std::span<const ChannelInput> inputs,
                                  std::span<const double> own_model, double self_weight,
                                  ScalingFactor scaling, const ChannelParams& params,
                                  RandomStream& rng);

// Worst-case decoded noise energy d sigma^2 B^2 / (gamma^2 P).
double noise_energy_bound(const ChannelParams& params, double model_bound);

// Full receive path for one receiver: scaling, precoding (with the power
// check), superposition and decoding.
struct ReceiverBlockResult {
  DecodedBlock decoded;
  ScalingFactor scaling;
  double max_transmit_energy;
};
ReceiverBlockResult aircomp_receive(std::span<const Transmission> senders,
                                    std::span<const double> own_model, double self_weight,
                                    const ChannelParams& params, RandomStream& noise_rng);

}  // namespace airdfl

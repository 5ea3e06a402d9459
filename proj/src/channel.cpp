#include "airdfl/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "airdfl/error.hpp"
#include "airdfl/kernels.hpp"

namespace airdfl {

void ChannelParams::validate() const {
  if (!(peak_power > 0.0) || !std::isfinite(peak_power)) throw InvalidInput("peak power P must be > 0");
  if (!(noise_power >= 0.0) || !std::isfinite(noise_power)) throw InvalidInput("noise power must be >= 0");
  if (!(gain_threshold >= 0.0)) throw InvalidInput("gain threshold must be >= 0");
  if (dimension == 0) throw InvalidInput("dimension must be positive");
}

double dbm_to_linear(double dbm) { return std::pow(10.0, dbm / 10.0); }

std::complex<double> draw_conditioned_coefficient(RandomStream& rng, double gain_threshold) {
  // P(|h| > gamma) = exp(-gamma^2) for CN(0,1); fine for the thresholds in use.
  for (;;) {
    const std::complex<double> h = rng.complex_normal(1.0);
    if (std::abs(h) > gain_threshold) return h;
  }
}

ChannelBlockRealization ChannelBlockRealization::draw(const NetworkGraph& graph,
                                                      double gain_threshold,
                                                      std::uint64_t master_seed,
                                                      std::uint64_t iteration) {
  if (!(gain_threshold >= 0.0)) throw InvalidInput("gain threshold must be >= 0");
  if (gain_threshold > 5.0) throw InvalidInput("gain threshold too large for rejection sampling");
  ChannelBlockRealization r;
  const std::size_t n = graph.n_devices();
  r.senders_.resize(n);
  r.coefficients_.resize(n);
  for (DeviceId i = 0; i < n; ++i) {
    r.senders_[i] = graph.neighbors(i);
    r.coefficients_[i].reserve(r.senders_[i].size());
    // One substream per receiver; senders draw in ascending id order.
    RandomStream rng(master_seed, StreamDomain::fading, {iteration, i});
    for (std::size_t q = 0; q < r.senders_[i].size(); ++q) {
      r.coefficients_[i].push_back(draw_conditioned_coefficient(rng, gain_threshold));
    }
  }
  return r;
}

std::complex<double> ChannelBlockRealization::coefficient(DeviceId receiver, DeviceId sender) const {
  const auto& s = senders_.at(receiver);
  const auto it = std::lower_bound(s.begin(), s.end(), sender);
  if (it == s.end() || *it != sender) throw InvalidInput("no channel between these devices");
  return coefficients_[receiver][static_cast<std::size_t>(it - s.begin())];
}

double ComplexSignal::energy() const {
  const auto& k = active_kernels();
  return k.squared_norm(re.data(), re.size()) + k.squared_norm(im.data(), im.size());
}

ScalingFactor compute_scaling(std::span<const Transmission> senders, const ChannelParams& params) {
  if (senders.empty()) throw InvalidInput("receiver has no transmitting neighbors");
  const double sqrt_p_max = std::sqrt(params.peak_power);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : senders) {
    const double norm = std::sqrt(vec::squared_norm(s.model));
    if (norm == 0.0) continue;
    const double mag = std::abs(s.coeff);
    if (mag == 0.0) throw InvalidInput("zero channel coefficient on a transmitting link");
    best = std::min(best, mag * sqrt_p_max / norm);
  }
  if (!std::isfinite(best)) {
    if (params.gain_threshold > 0.0) return {sqrt_p_max / params.gain_threshold};
    return {sqrt_p_max};
  }
  return {best};
}

ComplexSignal precode(std::span<const double> model, double weight, std::complex<double> coeff,
                      ScalingFactor scaling, const ChannelParams& params) {
  const double mag2 = std::norm(coeff);
  if (mag2 == 0.0) throw InvalidInput("cannot invert a zero channel coefficient");
  std::complex<double> c = scaling.value * weight * std::conj(coeff) / mag2;
  ComplexSignal x{std::vector<double>(model.size()), std::vector<double>(model.size())};
  const auto& k = active_kernels();
  for (;;) {
    k.scale_into(c.real(), model.data(), x.re.data(), model.size());
    k.scale_into(c.imag(), model.data(), x.im.data(), model.size());
    const double e = x.energy();
    if (e <= params.peak_power) break;
    c *= std::sqrt(params.peak_power / e) * (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
  }
  return x;
}

DecodedBlock superpose_and_decode(std::span<const ChannelInput> inputs,
                                  std::span<const double> own_model, double self_weight,
                                  ScalingFactor scaling, const ChannelParams& params,
                                  RandomStream& rng) {
  const std::size_t d = own_model.size();
  if (!(scaling.value > 0.0)) throw InvalidInput("scaling factor must be positive");
  const auto& k = active_kernels();
  // Only the in-phase component of y reaches the decoder, so the quadrature
  // plane is not accumulated.
  std::vector<double> y_re(d, 0.0);
  for (const auto& in : inputs) {
    if (in.signal == nullptr || in.signal->re.size() != d || in.signal->im.size() != d) {
      throw InvalidInput("transmitted signal dimension does not match the model");
    }
    // Re(h x) = Re(h) Re(x) - Im(h) Im(x)
    k.axpy(in.coeff.real(), in.signal->re.data(), y_re.data(), d);
    k.axpy(-in.coeff.imag(), in.signal->im.data(), y_re.data(), d);
  }

  DecodedBlock out{std::vector<double>(d), 0.0};
  const double inv = 1.0 / scaling.value;
  if (params.noise_power > 0.0) {
    const double sigma = std::sqrt(params.noise_power);
    std::vector<double> noise(d);
    for (auto& z : noise) z = rng.normal(0.0, sigma);
    k.axpy(1.0, noise.data(), y_re.data(), d);
    out.noise_energy = k.squared_norm(noise.data(), d) * inv * inv;
  }
  k.axpby_into(inv, y_re.data(), self_weight, own_model.data(), out.model.data(), d);
  return out;
}

double noise_energy_bound(const ChannelParams& params, double model_bound) {
  if (!(params.gain_threshold > 0.0)) throw InvalidInput("bound requires gamma > 0");
  return static_cast<double>(params.dimension) * params.noise_power * model_bound * model_bound /
         (params.gain_threshold * params.gain_threshold * params.peak_power);
}

ReceiverBlockResult aircomp_receive(std::span<const Transmission> senders,
                                    std::span<const double> own_model, double self_weight,
                                    const ChannelParams& params, RandomStream& noise_rng) {
  const ScalingFactor scaling = compute_scaling(senders, params);
  std::vector<ComplexSignal> signals;
  signals.reserve(senders.size());
  std::vector<ChannelInput> inputs;
  inputs.reserve(senders.size());
  double max_energy = 0.0;
  for (const auto& s : senders) {
    if (s.model.size() != own_model.size()) {
      throw InvalidInput("sender model dimension does not match the receiver");
    }
    signals.push_back(precode(s.model, s.weight, s.coeff, scaling, params));
    const double e = signals.back().energy();
    if (e > params.peak_power) throw std::logic_error("peak power constraint violated");
    max_energy = std::max(max_energy, e);
  }
  for (std::size_t i = 0; i < senders.size(); ++i) {
    inputs.push_back({senders[i].coeff, &signals[i]});
  }
  return {superpose_and_decode(inputs, own_model, self_weight, scaling, params, noise_rng), scaling,
          max_energy};
}

}  // namespace airdfl

#pragma once
// Block-fading uplink model: free-space-style path loss with a configurable
// exponent, complex channel vectors fixed for a whole run, SINR under
// successive interference cancellation, and the per-device effective noise
// that perturbs decoded gradients.

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim::wireless {

inline constexpr double kSpeedOfLight = 2.998e8;  // m/s

struct Geometry {
  std::array<double, 3> bs_position{};
  std::vector<std::array<double, 3>> device_positions;
  double bs_gain_dbi = 5.0;
  double device_gain_dbi = 0.0;
  double carrier_hz = 915e6;
  double path_exponent = 3.76;

  std::size_t device_count() const { return device_positions.size(); }
  double distance(std::size_t k) const;
};

struct ChannelRealization {
  std::size_t antennas = 0;
  double sigma_n0 = 0.0;  // environmental noise std (sqrt of noise power)
  double sinr_cap = 1e12;
  // Column-major: h[k * antennas + a] is antenna a of device k.
  std::vector<std::complex<double>> h;
  std::vector<double> column_norms;  // ||h_k||

  std::size_t device_count() const { return column_norms.size(); }
  std::span<const std::complex<double>> column(std::size_t k) const {
    return {h.data() + k * antennas, antennas};
  }
  double norm(std::size_t k) const { return column_norms[k]; }
};

struct PowerAllocation {
  std::vector<double> amplitudes;  // p_k > 0
  double p_min_total = 0.0;        // bound on sum of p_k^2
  double p_max_total = 0.0;

  double total_power() const;  // sum of p_k^2
};

// G_BS * G_D * (c / (4 pi f_c d))^P with dBi gains converted to linear.
// Throws std::domain_error when the device sits on top of the BS.
double path_loss(const Geometry& geometry, std::size_t k);

// h_k = sqrt(path_loss(k)) * u_k with u_k i.i.d. unit-variance
// circularly-symmetric complex Gaussian entries.
ChannelRealization sample_channel(const Geometry& geometry,
                                  std::size_t antennas, double sigma_n0,
                                  std::uint64_t seed, double sinr_cap = 1e12);

// SIC decode order: strongest column norm first.
std::vector<std::size_t> decode_order(const ChannelRealization& channel);

// Eq.-style SINR with matched-filter receiver r_k = h_k^H; devices decoded
// after k in `order` interfere. An exact-zero denominator reports sinr_cap.
double sinr(std::size_t k, const PowerAllocation& power,
            const ChannelRealization& channel,
            std::span<const std::size_t> order);

std::vector<double> all_sinrs(const PowerAllocation& power,
                              const ChannelRealization& channel);

// sigma_n0 / (p_k ||h_k||); throws std::domain_error for p_k <= 0.
double effective_noise_std(std::size_t k, const PowerAllocation& power,
                           const ChannelRealization& channel);

// Decoded gradient: input plus i.i.d. Gaussian entries with the device's
// effective noise std.
std::vector<double> transmit(std::span<const double> gradient, std::size_t k,
                             const PowerAllocation& power,
                             const ChannelRealization& channel, Rng& rng);

// Clamp entries positive (floor 1e-6) and rescale uniformly so the total
// power lands inside [p_min_total, p_max_total].
PowerAllocation project_power(std::vector<double> raw, double p_min_total,
                              double p_max_total);

}  // namespace fedsim::wireless

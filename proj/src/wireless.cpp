#include "fedsim/wireless.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fedsim/kernels.hpp"

namespace fedsim::wireless {

namespace {
double dbi_to_linear(double dbi) { return std::pow(10.0, dbi / 10.0); }
}  // namespace

double Geometry::distance(std::size_t k) const {
  const auto& p = device_positions.at(k);
  double acc = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double d = p[i] - bs_position[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double PowerAllocation::total_power() const {
  double acc = 0.0;
  for (double p : amplitudes) acc += p * p;
  return acc;
}

double path_loss(const Geometry& geometry, std::size_t k) {
  const double d = geometry.distance(k);
  if (d <= 0.0) throw std::domain_error("path_loss: zero device-BS distance");
  const double free_space =
      kSpeedOfLight / (4.0 * std::numbers::pi * geometry.carrier_hz * d);
  return dbi_to_linear(geometry.bs_gain_dbi) *
         dbi_to_linear(geometry.device_gain_dbi) *
         std::pow(free_space, geometry.path_exponent);
}

ChannelRealization sample_channel(const Geometry& geometry,
                                  std::size_t antennas, double sigma_n0,
                                  std::uint64_t seed, double sinr_cap) {
  if (antennas < 1) throw std::invalid_argument("antennas must be >= 1");
  if (sigma_n0 < 0) throw std::invalid_argument("sigma_n0 must be >= 0");
  const std::size_t K = geometry.device_count();
  ChannelRealization ch;
  ch.antennas = antennas;
  ch.sigma_n0 = sigma_n0;
  ch.sinr_cap = sinr_cap;
  ch.h.resize(K * antennas);
  ch.column_norms.resize(K);
  // Unit-variance circularly-symmetric entries: re/im ~ N(0, 1/2).
  const double comp_std = std::sqrt(0.5);
  for (std::size_t k = 0; k < K; ++k) {
    Rng rng(Rng::derive(seed, "wireless.channel", k));
    const double amp = std::sqrt(path_loss(geometry, k));
    double norm_sq = 0.0;
    for (std::size_t a = 0; a < antennas; ++a) {
      const std::complex<double> u(comp_std * rng.gaussian(),
                                   comp_std * rng.gaussian());
      ch.h[k * antennas + a] = amp * u;
      norm_sq += std::norm(ch.h[k * antennas + a]);
    }
    ch.column_norms[k] = std::sqrt(norm_sq);
    if (ch.column_norms[k] <= 0.0)
      throw std::domain_error("sampled a zero channel column");
  }
  return ch;
}

std::vector<std::size_t> decode_order(const ChannelRealization& channel) {
  std::vector<std::size_t> order(channel.device_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return channel.norm(a) > channel.norm(b);
  });
  return order;
}

double sinr(std::size_t k, const PowerAllocation& power,
            const ChannelRealization& channel,
            std::span<const std::size_t> order) {
  const std::size_t K = channel.device_count();
  if (k >= K) throw std::invalid_argument("sinr: device index out of range");
  std::size_t pos = order.size();
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == k) {
      pos = i;
      break;
    }
  }
  if (pos == order.size())
    throw std::invalid_argument("sinr: decode order does not contain device");

  const auto hk = channel.column(k);
  const double norm_k_sq = channel.norm(k) * channel.norm(k);
  const double pk = power.amplitudes.at(k);
  const double signal = pk * pk * norm_k_sq * norm_k_sq;  // |h_k^H h_k|^2

  double interference = 0.0;
  for (std::size_t i = pos + 1; i < order.size(); ++i) {
    const std::size_t dev = order[i];
    const auto hi = channel.column(dev);
    std::complex<double> cross(0.0, 0.0);
    for (std::size_t a = 0; a < channel.antennas; ++a)
      cross += std::conj(hk[a]) * hi[a];
    const double pi2 = power.amplitudes.at(dev) * power.amplitudes.at(dev);
    interference += pi2 * std::norm(cross);
  }
  const double denom =
      interference + norm_k_sq * channel.sigma_n0 * channel.sigma_n0;
  if (denom <= 0.0) return channel.sinr_cap;
  return std::min(signal / denom, channel.sinr_cap);
}

std::vector<double> all_sinrs(const PowerAllocation& power,
                              const ChannelRealization& channel) {
  const auto order = decode_order(channel);
  std::vector<double> out(channel.device_count());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = sinr(k, power, channel, order);
  return out;
}

double effective_noise_std(std::size_t k, const PowerAllocation& power,
                           const ChannelRealization& channel) {
  const double pk = power.amplitudes.at(k);
  if (pk <= 0.0) throw std::domain_error("effective_noise_std: p_k <= 0");
  const double hn = channel.norm(k);
  if (hn <= 0.0) throw std::domain_error("effective_noise_std: ||h_k|| = 0");
  return channel.sigma_n0 / (pk * hn);
}

std::vector<double> transmit(std::span<const double> gradient, std::size_t k,
                             const PowerAllocation& power,
                             const ChannelRealization& channel, Rng& rng) {
  const double std_dev = effective_noise_std(k, power, channel);
  std::vector<double> out(gradient.begin(), gradient.end());
  if (std_dev == 0.0) return out;
  for (double& v : out) v += rng.gaussian(std_dev);
  return out;
}

PowerAllocation project_power(std::vector<double> raw, double p_min_total,
                              double p_max_total) {
  if (p_min_total < 0 || p_max_total < p_min_total)
    throw std::invalid_argument("invalid power box [P_min, P_max]");
  constexpr double kAmplitudeFloor = 1e-6;
  for (double& p : raw) p = std::max(p, kAmplitudeFloor);
  double total = 0.0;
  for (double p : raw) total += p * p;
  double scale = 1.0;
  if (total > p_max_total) {
    scale = std::sqrt(p_max_total / total);
  } else if (total < p_min_total) {
    scale = std::sqrt(p_min_total / total);
  }
  if (scale != 1.0) kernels::scale(raw, scale);
  PowerAllocation out;
  out.amplitudes = std::move(raw);
  out.p_min_total = p_min_total;
  out.p_max_total = p_max_total;
  return out;
}

}  // namespace fedsim::wireless

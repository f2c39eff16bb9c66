#include "fedsim/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace fedsim::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Lane pick_lane() {
  if (const char* env = std::getenv("FEDSIM_LANE")) {
    if (std::strcmp(env, "scalar") == 0) return Lane::kScalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Lane::kAvx2;
    // Unknown or unavailable request falls through to auto selection.
  }
  return cpu_has_avx2() ? Lane::kAvx2 : Lane::kScalar;
}

std::atomic<Lane> g_lane{pick_lane()};

}  // namespace

bool lane_available(Lane lane) {
  switch (lane) {
    case Lane::kScalar:
      return true;
    case Lane::kAvx2:
      return cpu_has_avx2();
  }
  return false;
}

const Ops& lane_ops(Lane lane) {
#if defined(__x86_64__) || defined(_M_X64)
  if (lane == Lane::kAvx2) return detail::kAvx2Ops;
#endif
  return detail::kScalarOps;
}

const Ops& ops() { return lane_ops(g_lane.load(std::memory_order_relaxed)); }

Lane active_lane() { return g_lane.load(std::memory_order_relaxed); }

const char* lane_name(Lane lane) {
  switch (lane) {
    case Lane::kScalar:
      return "scalar";
    case Lane::kAvx2:
      return "avx2";
  }
  return "unknown";
}

void force_lane(Lane lane) {
  if (!lane_available(lane)) {
    throw std::invalid_argument(std::string("kernel lane not available: ") +
                                lane_name(lane));
  }
  g_lane.store(lane, std::memory_order_relaxed);
}

void reset_lane() { g_lane.store(pick_lane(), std::memory_order_relaxed); }

double norm(std::span<const double> a) { return std::sqrt(norm_sq(a)); }

}  // namespace fedsim::kernels

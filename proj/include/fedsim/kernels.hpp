#pragma once
// Vector/matrix primitives used by the hot loops (gradient math, MLP
// forward/backward). A scalar reference lane always exists; an AVX2+FMA
// lane is selected at runtime on x86-64 CPUs that support it. Lanes are
// equivalence-tested against each other; results may differ in the last
// few ulps because SIMD accumulation reorders sums.

#include <cstddef>
#include <span>

namespace fedsim::kernels {

enum class Lane {
  kScalar,
  kAvx2,
};

struct Ops {
  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // sum_i a[i]^2
  double (*norm_sq)(const double* a, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x[i] *= alpha
  void (*scale)(double* x, double alpha, std::size_t n);
  // out[r] = bias[r] + sum_c w[r*cols+c] * x[c]   (bias may be null)
  void (*matvec)(const double* w, const double* x, const double* bias,
                 double* out, std::size_t rows, std::size_t cols);
  // out[c] += sum_r w[r*cols+c] * v[r]   (caller zeros out)
  void (*matvec_t)(const double* w, const double* v, double* out,
                   std::size_t rows, std::size_t cols);
  // w[r*cols+c] += alpha * u[r] * v[c]
  void (*rank1_update)(double* w, double alpha, const double* u,
                       const double* v, std::size_t rows, std::size_t cols);
};

// Active dispatch table. Picked once per process: FEDSIM_LANE=scalar|avx2
// overrides, otherwise the best lane the CPU supports.
const Ops& ops();
Lane active_lane();
const char* lane_name(Lane lane);
bool lane_available(Lane lane);
const Ops& lane_ops(Lane lane);

// Test hooks. force_lane throws std::invalid_argument if the lane is not
// available on this CPU; reset_lane returns to automatic selection.
void force_lane(Lane lane);
void reset_lane();

// Convenience wrappers over the active table.
inline double dot(std::span<const double> a, std::span<const double> b) {
  return ops().dot(a.data(), b.data(), a.size());
}
inline double norm_sq(std::span<const double> a) {
  return ops().norm_sq(a.data(), a.size());
}
double norm(std::span<const double> a);
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  ops().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(std::span<double> x, double alpha) {
  ops().scale(x.data(), alpha, x.size());
}
inline void matvec(std::span<const double> w, std::span<const double> x,
                   std::span<const double> bias, std::span<double> out) {
  ops().matvec(w.data(), x.data(), bias.empty() ? nullptr : bias.data(),
               out.data(), out.size(), x.size());
}
inline void matvec_t(std::span<const double> w, std::span<const double> v,
                     std::span<double> out) {
  ops().matvec_t(w.data(), v.data(), out.data(), v.size(), out.size());
}
inline void rank1_update(std::span<double> w, double alpha,
                         std::span<const double> u, std::span<const double> v) {
  ops().rank1_update(w.data(), alpha, u.data(), v.data(), u.size(), v.size());
}

namespace detail {
extern const Ops kScalarOps;
#if defined(__x86_64__) || defined(_M_X64)
extern const Ops kAvx2Ops;
#endif
}  // namespace detail

}  // namespace fedsim::kernels

// Scalar reference lane. Kept deliberately simple: this is the semantics
// the SIMD lanes are tested against.

#include "fedsim/kernels.hpp"

namespace fedsim::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double norm_sq_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* x, double alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void matvec_scalar(const double* w, const double* x, const double* bias,
                   double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias ? bias[r] : 0.0;
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

void matvec_t_scalar(const double* w, const double* v, double* out,
                     std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w + r * cols;
    const double vr = v[r];
    for (std::size_t c = 0; c < cols; ++c) out[c] += vr * row[c];
  }
}

void rank1_update_scalar(double* w, double alpha, const double* u,
                         const double* v, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = w + r * cols;
    const double au = alpha * u[r];
    for (std::size_t c = 0; c < cols; ++c) row[c] += au * v[c];
  }
}

}  // namespace

const Ops kScalarOps = {
    dot_scalar,    norm_sq_scalar,  axpy_scalar,        scale_scalar,
    matvec_scalar, matvec_t_scalar, rank1_update_scalar};

}  // namespace fedsim::kernels::detail

#pragma once
// Small dense helpers for the low-dimensional quadratic machinery:
// eigenvalues of symmetric matrices (cyclic Jacobi) and linear solves
// (Gaussian elimination with partial pivoting). Dimensions here are tiny
// (task dimension, typically <= 16), so simplicity beats asymptotics.

#include <cstddef>
#include <vector>

namespace fedsim::linalg {

// Eigenvalues of a symmetric n x n matrix (row-major), ascending.
std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n);

// Solves A x = b for square A (row-major). Throws std::domain_error on a
// numerically singular pivot.
std::vector<double> solve(std::vector<double> a, std::vector<double> b,
                          std::size_t n);

}  // namespace fedsim::linalg

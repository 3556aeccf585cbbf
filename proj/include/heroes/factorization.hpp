#pragma once

#include <cstddef>
#include <cstdint>

#include "heroes/tensor.hpp"

namespace heroes {

struct OrthogonalIterationOptions {
  std::size_t max_iterations = 50;
  // Stop once the leading subspace moves less than this (sum of squared
  // principal-angle sines between consecutive iterates).
  double tolerance = 1e-10;
  // Extra search directions carried alongside the requested rank. A larger
  // block improves the convergence ratio to lambda_{r+s+1} / lambda_r.
  std::size_t oversample = 8;
  std::uint64_t seed = 0x5EEDF00DULL;
};

struct SubspaceResult {
  Tensor basis;  // rows x r, orthonormal columns
  std::size_t iterations = 0;
  bool converged = false;
};

// Orthonormal basis of the dominant r-dimensional left singular subspace of
// `m`, by orthogonal iteration (with a Rayleigh-Ritz step) on the smaller of
// the two Gram matrices m m^T and m^T m.
SubspaceResult dominant_left_subspace(const Tensor& m, std::size_t r,
                                      const OrthogonalIterationOptions& opts = {});

// Top-r eigenvectors of a symmetric positive semi-definite matrix, columns
// ordered by decreasing eigenvalue.
SubspaceResult top_eigenvectors(const Tensor& sym, std::size_t r, const OrthogonalIterationOptions& opts = {});

// Full eigen-decomposition of a small symmetric matrix by cyclic Jacobi
// rotations. Eigenvalues descending; eigenvectors are the columns.
struct SymmetricEigen {
  std::vector<double> values;
  Tensor vectors;
};
SymmetricEigen jacobi_eigen(const Tensor& sym);

// Replaces the columns of `a` with an orthonormal set spanning the same space
// (modified Gram-Schmidt, run twice). Columns that collapse to zero are
// replaced by unit vectors orthogonal to the ones kept so far.
Tensor orthonormalize_columns(const Tensor& a);

// Solves (s) x = b for symmetric positive definite s by Cholesky. Returns
// false if s is not numerically positive definite.
bool cholesky_solve(const Tensor& s, const Tensor& b, Tensor& x);

}  // namespace heroes

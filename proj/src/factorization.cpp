#include "heroes/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "heroes/errors.hpp"
#include "heroes/rng.hpp"

namespace heroes {

namespace {

double column_dot(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, i) * b(r, j);
  return s;
}

// Keeps the first `r` columns.
Tensor leading_columns(const Tensor& a, std::size_t r) {
  if (r == a.cols()) return a;
  return column_slice(a, 0, r);
}

// sum of squared sines of the principal angles between two orthonormal bases.
double subspace_change(const Tensor& prev, const Tensor& next) {
  const Tensor c = matmul_tn(prev, next);
  return std::max(0.0, static_cast<double>(prev.cols()) - squared_norm(c.values()));
}

}  // namespace

Tensor orthonormalize_columns(const Tensor& a) {
  const std::size_t n = a.rows(), k = a.cols();
  if (k > n) throw ShapeError("cannot orthonormalize more columns than rows");
  Tensor q = a;
  double scale = 0.0;
  for (double x : a.values()) scale = std::max(scale, std::abs(x));
  const double floor = std::max(scale, 1.0) * 1e-13;
  std::size_t next_unit = 0;
  for (std::size_t j = 0; j < k; ++j) {
    for (int attempt = 0;; ++attempt) {
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < j; ++i) {
          const double d = column_dot(q, i, q, j);
          for (std::size_t r = 0; r < n; ++r) q(r, j) -= d * q(r, i);
        }
      double nrm = 0.0;
      for (std::size_t r = 0; r < n; ++r) nrm += q(r, j) * q(r, j);
      nrm = std::sqrt(nrm);
      if (nrm > floor || attempt > static_cast<int>(n)) {
        if (nrm == 0.0) throw NumericError("orthonormalize: could not complete basis");
        for (std::size_t r = 0; r < n; ++r) q(r, j) /= nrm;
        break;
      }
      // Column lies in the span of the previous ones; try the next unit vector.
      for (std::size_t r = 0; r < n; ++r) q(r, j) = (r == next_unit % n) ? 1.0 : 0.0;
      ++next_unit;
    }
  }
  return q;
}

SymmetricEigen jacobi_eigen(const Tensor& sym) {
  const std::size_t n = sym.rows();
  if (sym.cols() != n) throw ShapeError("jacobi_eigen: matrix must be square");
  Tensor a = sym;
  Tensor v = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;
  const double total = std::max(frobenius_norm(a), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-15 * total) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors = Tensor::matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

SubspaceResult top_eigenvectors(const Tensor& sym, std::size_t r, const OrthogonalIterationOptions& opts) {
  const std::size_t d = sym.rows();
  if (sym.cols() != d) throw ShapeError("top_eigenvectors: matrix must be square");
  if (r == 0 || r > d) throw DomainError("top_eigenvectors: rank must be in [1, dim]");
  require_finite(sym, "top_eigenvectors");
  const std::size_t block = std::min(d, r + opts.oversample);

  Rng rng(opts.seed);
  Tensor x = Tensor::matrix(d, block);
  for (double& e : x.storage()) e = rng.normal();
  x = orthonormalize_columns(x);

  SubspaceResult out;
  Tensor lead = leading_columns(x, r);
  for (std::size_t it = 1; it <= std::max<std::size_t>(opts.max_iterations, 1); ++it) {
    Tensor y = orthonormalize_columns(matmul(sym, x));
    // Rayleigh-Ritz: rotate the block onto the eigenvectors of its projection.
    const Tensor proj = matmul_tn(y, matmul(sym, y));
    const SymmetricEigen ritz = jacobi_eigen(proj);
    x = matmul(y, ritz.vectors);
    Tensor next = leading_columns(x, r);
    const double change = subspace_change(lead, next);
    lead = std::move(next);
    out.iterations = it;
    // With a full-dimension block, one Ritz step is already exact.
    if (change < opts.tolerance || block == d) {
      out.converged = true;
      break;
    }
  }
  out.basis = std::move(lead);
  return out;
}

SubspaceResult dominant_left_subspace(const Tensor& m, std::size_t r, const OrthogonalIterationOptions& opts) {
  require_finite(m, "dominant_left_subspace");
  const std::size_t rows = m.rows(), cols = m.cols();
  if (r == 0) throw DomainError("rank must be at least 1");
  if (r > rows) throw DomainError("rank exceeds the number of rows");
  if (rows <= cols) return top_eigenvectors(matmul_nt(m, m), r, opts);

  // Tall matrix: iterate on m^T m, then map the right subspace back.
  const std::size_t rr = std::min(r, cols);
  SubspaceResult right = top_eigenvectors(matmul_tn(m, m), rr, opts);
  Tensor left = Tensor::matrix(rows, r);
  const Tensor mv = matmul(m, right.basis);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < rr; ++j) left(i, j) = mv(i, j);
  // Columns beyond the column rank are filled with an orthonormal complement.
  right.basis = orthonormalize_columns(left);
  return right;
}

bool cholesky_solve(const Tensor& s, const Tensor& b, Tensor& x) {
  const std::size_t n = s.rows();
  if (s.cols() != n || b.rows() != n) throw ShapeError("cholesky_solve: dimension mismatch");
  Tensor l = Tensor::matrix(n, n);
  double diag_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_max = std::max(diag_max, s(i, i));
  for (std::size_t j = 0; j < n; ++j) {
    double d = s(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 1e-12 * diag_max)) return false;
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = x(i, c);
      for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * x(k, c);
      x(i, c) = v / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double v = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) v -= l(k, i) * x(k, c);
      x(i, c) = v / l(i, i);
    }
  }
  return true;
}

}  // namespace heroes

#include "heroes/composition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "heroes/errors.hpp"
#include "heroes/rng.hpp"

namespace heroes {

namespace {

void check_width(const LayerShape& shape, std::size_t width) {
  if (width < 1 || width > shape.max_width)
    throw DomainError("width " + std::to_string(width) + " outside [1, " + std::to_string(shape.max_width) + "]");
}

// Pads (or keeps) a factor pair to exactly `rank` inner dimension.
Factors pad_rank(Tensor basis, Tensor coeff, std::size_t rank) {
  if (basis.cols() == rank) return {std::move(basis), std::move(coeff)};
  Tensor b = Tensor::matrix(basis.rows(), rank);
  Tensor c = Tensor::matrix(rank, coeff.cols());
  for (std::size_t i = 0; i < basis.rows(); ++i)
    for (std::size_t j = 0; j < basis.cols(); ++j) b(i, j) = basis(i, j);
  for (std::size_t i = 0; i < coeff.rows(); ++i)
    for (std::size_t j = 0; j < coeff.cols(); ++j) c(i, j) = coeff(i, j);
  return {std::move(b), std::move(c)};
}

}  // namespace

void FactorizedLayer::validate() const {
  const LayerShape& s = shape;
  if (s.kernel < 1 || s.in_channels < 1 || s.out_channels < 1 || s.rank < 1 || s.max_width < 1)
    throw ShapeError("layer dimensions must be positive");
  if (basis.rank() != 2 || basis.rows() != s.basis_rows() || basis.cols() != s.rank)
    throw ShapeError("basis shape " + basis.shape_string() + " does not match layer");
  if (coefficient.rank() != 2 || coefficient.rows() != s.rank ||
      coefficient.cols() != s.block_count() * s.out_channels)
    throw ShapeError("coefficient shape " + coefficient.shape_string() + " does not match layer");
}

Tensor FactorizedLayer::block(std::size_t i) const {
  if (i >= shape.block_count()) throw DomainError("block index out of range");
  return column_slice(coefficient, i * shape.out_channels, shape.out_channels);
}

void FactorizedLayer::set_block(std::size_t i, const Tensor& value) {
  if (i >= shape.block_count()) throw DomainError("block index out of range");
  if (value.rank() != 2 || value.rows() != shape.rank || value.cols() != shape.out_channels)
    throw ShapeError("block shape " + value.shape_string() + " does not match R x O");
  const std::size_t o = shape.out_channels;
  for (std::size_t r = 0; r < shape.rank; ++r)
    for (std::size_t c = 0; c < o; ++c) coefficient(r, i * o + c) = value(r, c);
}

FactorizedLayer make_factorized_layer(const LayerShape& shape, std::uint64_t seed, double init_scale) {
  if (!(init_scale > 0.0)) throw DomainError("init scale must be positive");
  FactorizedLayer layer;
  layer.shape = shape;
  Rng rng(seed);
  const std::size_t m = shape.basis_rows();
  Tensor basis = Tensor::matrix(m, shape.rank);
  for (double& x : basis.storage()) x = rng.normal();
  if (shape.rank <= m) {
    basis = orthonormalize_columns(basis);
  } else {
    for (double& x : basis.storage()) x /= std::sqrt(static_cast<double>(m));
  }
  layer.basis = std::move(basis);
  // Entries of v have variance ~1/(k^2 I), so v u has variance
  // R s^2 / (k^2 I). Target 2 / (P k^2 I), i.e. He init at full width.
  const double s = init_scale * std::sqrt(2.0 / static_cast<double>(shape.max_width * shape.rank));
  layer.coefficient = Tensor::matrix(shape.rank, shape.block_count() * shape.out_channels);
  for (double& x : layer.coefficient.storage()) x = s * rng.normal();
  layer.validate();
  return layer;
}

BlockSelection select_blocks(const BlockLedger& ledger, std::size_t width) {
  const std::size_t blocks = ledger.counts.size();
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(blocks))));
  if (side * side != blocks || blocks == 0) throw DomainError("ledger size must be a positive square");
  if (width < 1 || width > side)
    throw DomainError("width " + std::to_string(width) + " outside [1, " + std::to_string(side) + "]");
  std::vector<std::size_t> order(blocks);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t need = width * width;
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(need), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (ledger.counts[a] != ledger.counts[b]) return ledger.counts[a] < ledger.counts[b];
                      return a < b;
                    });
  BlockSelection sel;
  sel.width = width;
  sel.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(need));
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

Tensor reduce_coefficient(const FactorizedLayer& layer, const BlockSelection& sel) {
  layer.validate();
  check_width(layer.shape, sel.width);
  if (sel.indices.size() != sel.width * sel.width) throw DomainError("selection size must be width^2");
  const std::size_t o = layer.shape.out_channels;
  Tensor out = Tensor::matrix(layer.shape.rank, sel.indices.size() * o);
  for (std::size_t j = 0; j < sel.indices.size(); ++j) {
    const std::size_t b = sel.indices[j];
    if (b >= layer.shape.block_count()) throw DomainError("block index " + std::to_string(b) + " out of range");
    if (j > 0 && sel.indices[j - 1] >= b) throw DomainError("selection must be strictly ascending");
    for (std::size_t r = 0; r < layer.shape.rank; ++r)
      for (std::size_t c = 0; c < o; ++c) out(r, j * o + c) = layer.coefficient(r, b * o + c);
  }
  return out;
}

Tensor compose(const FactorizedLayer& layer, const Tensor& reduced, std::size_t width) {
  const LayerShape& s = layer.shape;
  check_width(s, width);
  if (reduced.rank() != 2 || reduced.rows() != s.rank || reduced.cols() != width * width * s.out_channels)
    throw ShapeError("reduced coefficient " + reduced.shape_string() + " is not R x p^2 O");
  if (layer.basis.rank() != 2 || layer.basis.rows() != s.basis_rows() || layer.basis.cols() != s.rank)
    throw ShapeError("basis shape " + layer.basis.shape_string() + " does not match layer");
  const Tensor m = matmul(layer.basis, reduced);
  const std::size_t kk2 = s.kernel * s.kernel, in = s.in_channels, o = s.out_channels;
  const std::size_t rows = width * in, cols = width * o;
  std::vector<double> data(kk2 * rows * cols);
  for (std::size_t kk = 0; kk < kk2; ++kk)
    for (std::size_t j = 0; j < width * width; ++j) {
      const std::size_t a = j / width, b = j % width;
      for (std::size_t i = 0; i < in; ++i)
        for (std::size_t c = 0; c < o; ++c)
          data[(kk * rows + a * in + i) * cols + b * o + c] = m(kk * in + i, j * o + c);
    }
  if (s.kernel == 1) return Tensor({rows, cols}, std::move(data));
  return Tensor({kk2, rows, cols}, std::move(data));
}

Tensor unfold_weight(const Tensor& weight, const LayerShape& s, std::size_t width) {
  check_width(s, width);
  const std::size_t kk2 = s.kernel * s.kernel, in = s.in_channels, o = s.out_channels;
  const std::size_t rows = width * in, cols = width * o;
  const bool matrix_ok = s.kernel == 1 && weight.shape() == std::vector<std::size_t>{rows, cols};
  const bool cube_ok = weight.shape() == std::vector<std::size_t>{kk2, rows, cols};
  if (!matrix_ok && !cube_ok) throw ShapeError("weight " + weight.shape_string() + " does not match layer width");
  Tensor m = Tensor::matrix(kk2 * in, width * width * o);
  const auto& data = weight.storage();
  for (std::size_t kk = 0; kk < kk2; ++kk)
    for (std::size_t j = 0; j < width * width; ++j) {
      const std::size_t a = j / width, b = j % width;
      for (std::size_t i = 0; i < in; ++i)
        for (std::size_t c = 0; c < o; ++c) m(kk * in + i, j * o + c) = data[(kk * rows + a * in + i) * cols + b * o + c];
    }
  return m;
}

Factors decompose(const Tensor& weight, const LayerShape& shape, std::size_t width, std::size_t rank,
                  const OrthogonalIterationOptions& opts) {
  if (rank < 1) throw DomainError("rank must be at least 1");
  require_finite(weight, "decompose");
  const Tensor m = unfold_weight(weight, shape, width);
  const std::size_t r = std::min(rank, m.rows());
  Tensor q = dominant_left_subspace(m, r, opts).basis;
  Tensor coeff = matmul_tn(q, m);
  return pad_rank(std::move(q), std::move(coeff), rank);
}

Factors decompose_aligned(const Tensor& weight, const LayerShape& shape, std::size_t width, std::size_t rank,
                          const Tensor& reference, const OrthogonalIterationOptions& opts) {
  if (rank < 1) throw DomainError("rank must be at least 1");
  require_finite(weight, "decompose");
  if (reference.rank() != 2 || reference.rows() != shape.basis_rows())
    throw ShapeError("reference basis " + reference.shape_string() + " does not match layer");
  const Tensor m = unfold_weight(weight, shape, width);
  const std::size_t r = std::min(rank, m.rows());
  const Tensor q = dominant_left_subspace(m, r, opts).basis;
  const Tensor proj = matmul_tn(q, m);  // r x p^2 O
  const std::size_t out_rank = reference.cols();

  // Gauge change: basis = q a, coefficient = a^T (a a^T)^{-1} proj, with
  // a = q^T reference. The product stays q proj.
  const Tensor a = matmul_tn(q, reference);  // r x R
  Tensor x;
  if (r <= out_rank && cholesky_solve(matmul_nt(a, a), proj, x)) {
    Tensor basis = matmul(q, a);
    Tensor coeff = matmul_tn(a, x);
    return {std::move(basis), std::move(coeff)};
  }
  return pad_rank(q, proj, std::max(out_rank, r));
}

double compose_decompose_roundtrip(const FactorizedLayer& layer, const BlockSelection& sel, std::size_t rank) {
  const Tensor reduced = reduce_coefficient(layer, sel);
  const Tensor w = compose(layer, reduced, sel.width);
  const Factors f = decompose_aligned(w, layer.shape, sel.width, rank, layer.basis);
  return frobenius_norm(reduced - f.coefficient);
}

Tensor aggregate_basis(std::span<const Tensor> bases) {
  if (bases.empty()) throw DomainError("aggregate_basis: no bases");
  Tensor out = bases.front();
  for (std::size_t k = 1; k < bases.size(); ++k) {
    require_same_shape(out, bases[k], "aggregate_basis");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bases[k][i];
  }
  const double inv = 1.0 / static_cast<double>(bases.size());
  for (double& x : out.storage()) x *= inv;
  return out;
}

std::map<std::size_t, Tensor> aggregate_blocks(const std::map<std::size_t, std::vector<Tensor>>& contributions) {
  std::map<std::size_t, Tensor> out;
  for (const auto& [index, blocks] : contributions) {
    if (blocks.empty()) continue;
    try {
      out.emplace(index, aggregate_basis(blocks));
    } catch (const ShapeError&) {
      throw ShapeError("aggregate_blocks: contributions to block " + std::to_string(index) + " differ in shape");
    }
  }
  return out;
}

void apply_blocks(FactorizedLayer& layer, const std::map<std::size_t, Tensor>& blocks) {
  for (const auto& [index, value] : blocks) layer.set_block(index, value);
}

std::vector<std::pair<std::size_t, Tensor>> split_reduced(const Tensor& reduced, const BlockSelection& sel,
                                                           std::size_t out_channels) {
  if (reduced.cols() != sel.indices.size() * out_channels)
    throw ShapeError("reduced coefficient does not match selection");
  std::vector<std::pair<std::size_t, Tensor>> out;
  out.reserve(sel.indices.size());
  for (std::size_t j = 0; j < sel.indices.size(); ++j)
    out.emplace_back(sel.indices[j], column_slice(reduced, j * out_channels, out_channels));
  return out;
}

void ledger_update(BlockLedger& ledger, const BlockSelection& sel, std::int64_t tau) {
  if (tau < 1) throw DomainError("tau must be at least 1");
  for (std::size_t i : sel.indices) {
    if (i >= ledger.counts.size()) throw DomainError("block index out of range");
    ledger.counts[i] += tau;
  }
}

}  // namespace heroes

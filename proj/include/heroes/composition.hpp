#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "heroes/factorization.hpp"
#include "heroes/tensor.hpp"

namespace heroes {

// Static dimensions of one factorized layer.
struct LayerShape {
  std::size_t kernel = 1;  // k; 1 for fully-connected layers
  std::size_t in_channels = 1;   // I
  std::size_t out_channels = 1;  // O
  std::size_t rank = 1;          // R
  std::size_t max_width = 1;     // P

  std::size_t basis_rows() const { return kernel * kernel * in_channels; }
  std::size_t block_count() const { return max_width * max_width; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

// A layer stored as neural basis (k^2 I x R) times complete coefficient
// (R x P^2 O). Block i of the coefficient is columns [i O, (i+1) O).
struct FactorizedLayer {
  LayerShape shape;
  Tensor basis;
  Tensor coefficient;

  void validate() const;
  Tensor block(std::size_t i) const;
  void set_block(std::size_t i, const Tensor& value);
};

// Seeded initialisation: orthonormal basis columns, Gaussian coefficient
// scaled so a full-width composed weight has He-like variance times init_scale.
FactorizedLayer make_factorized_layer(const LayerShape& shape, std::uint64_t seed, double init_scale = 1.0);

// Per-block count of local iterations received so far (one ledger per layer).
struct BlockLedger {
  std::vector<std::int64_t> counts;

  BlockLedger() = default;
  explicit BlockLedger(std::size_t blocks) : counts(blocks, 0) {}
  friend bool operator==(const BlockLedger&, const BlockLedger&) = default;
};

// Sorted, distinct block indices; exactly width^2 of them.
struct BlockSelection {
  std::size_t width = 0;
  std::vector<std::size_t> indices;
  friend bool operator==(const BlockSelection&, const BlockSelection&) = default;
};

// The width^2 least-trained blocks, ties broken by the smaller index.
BlockSelection select_blocks(const BlockLedger& ledger, std::size_t width);

// Gathers the selected blocks into an R x p^2 O reduced coefficient, in
// ascending block-index order.
Tensor reduce_coefficient(const FactorizedLayer& layer, const BlockSelection& sel);

// Multiplies basis by a reduced coefficient and regroups the k^2 I x p^2 O
// product into a k^2 x pI x pO weight (a pI x pO matrix when k = 1).
//
// Column block j of the product lands on channel tile (j / p, j % p):
//   W[kk][a I + i][b O + o] = (v u)[kk I + i][(a p + b) O + o],  j = a p + b.
Tensor compose(const FactorizedLayer& layer, const Tensor& reduced, std::size_t width);

// Inverse of the regrouping in compose(): back to k^2 I x p^2 O.
Tensor unfold_weight(const Tensor& weight, const LayerShape& shape, std::size_t width);

struct Factors {
  Tensor basis;        // k^2 I x R
  Tensor coefficient;  // R x p^2 O
};

// Best rank-`rank` factorization of the unfolded weight. The basis has
// orthonormal columns; the reconstruction basis * coefficient is the
// truncated-SVD optimum up to the iteration tolerance.
Factors decompose(const Tensor& weight, const LayerShape& shape, std::size_t width, std::size_t rank,
                  const OrthogonalIterationOptions& opts = {});

// Same reconstruction as decompose(), but the factor pair is re-expressed so
// the basis is the projection of `reference` (k^2 I x R) onto the new
// subspace. When the weight is exactly reference * u for some u, this
// returns (reference, u) unchanged. Falls back to the orthonormal gauge when
// the reference is (numerically) orthogonal to the new subspace.
Factors decompose_aligned(const Tensor& weight, const LayerShape& shape, std::size_t width, std::size_t rank,
                          const Tensor& reference, const OrthogonalIterationOptions& opts = {});

// Frobenius distance between the reduced coefficient and the one recovered
// by compose -> decompose_aligned at `rank` (which may be below R to model a
// rank-deficient refactorization).
double compose_decompose_roundtrip(const FactorizedLayer& layer, const BlockSelection& sel, std::size_t rank);

// Element-wise mean of equally shaped bases.
Tensor aggregate_basis(std::span<const Tensor> bases);

// Per-block mean over contributors; blocks absent from the map are not
// returned (and so stay unchanged when applied).
std::map<std::size_t, Tensor> aggregate_blocks(const std::map<std::size_t, std::vector<Tensor>>& contributions);

void apply_blocks(FactorizedLayer& layer, const std::map<std::size_t, Tensor>& blocks);

// Splits a client's reduced coefficient back into (block index, R x O block).
std::vector<std::pair<std::size_t, Tensor>> split_reduced(const Tensor& reduced, const BlockSelection& sel,
                                                           std::size_t out_channels);

// Adds tau to every selected block's count.
void ledger_update(BlockLedger& ledger, const BlockSelection& sel, std::int64_t tau);

}  // namespace heroes

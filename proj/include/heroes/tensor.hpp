#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace heroes {

// Dense row-major array of doubles. Rank is arbitrary, but almost every
// operation in this library works on rank-2 views (rows x cols).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors. rows()/cols() require rank() == 2.
  std::size_t rows() const;
  std::size_t cols() const;
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  // Same data, new shape; element count must match.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// a (m x k) * b (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// a^T (k x m)^T * b (k x n) -> m x n, without materialising the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// a (m x k) * b^T (n x k)^T -> m x n
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Columns [first, first + count) of a rank-2 tensor.
Tensor column_slice(const Tensor& a, std::size_t first, std::size_t count);

double frobenius_norm(const Tensor& a);
double squared_norm(std::span<const double> v);

// Element-wise helpers; shapes must match exactly.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_finite(const Tensor& a, const char* what);

}  // namespace heroes

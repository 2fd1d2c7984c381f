#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vsgmn {

// Dense row-major tensor of doubles. The pipeline only ever needs rank 1 and
// rank 2, but shape is kept as a vector so reshapes stay cheap and explicit.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);  // shape {1}
  static Tensor identity(std::size_t n);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;  // extent of dim 0; requires rank >= 1
  std::size_t cols() const;  // extent of dim 1; requires rank == 2

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c);
  double operator()(std::size_t r, std::size_t c) const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Value of a single-element tensor; throws ContractError otherwise.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;  // "[3 x 4]", for error messages

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Plain (untaped) helpers used by preprocessing, evaluation and test oracles.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor l2_normalize_rows(const Tensor& a);  // rows with norm < 1e-12 pass through
Tensor gather_rows(const Tensor& a, std::span<const int> row_indices);
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// Throws DimensionError naming both shapes unless they match.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace vsgmn

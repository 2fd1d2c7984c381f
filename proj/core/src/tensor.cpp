#include "vsgmn/tensor.hpp"

#include <cassert>
#include <cmath>
#include <numeric>

#include "vsgmn/errors.hpp"

namespace vsgmn {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw DimensionError("tensor: " + std::to_string(data_.size()) +
                         " values do not fill shape " + shape_str());
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  return Tensor(std::move(shape));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = value;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor({0, 0});
  const std::size_t n = rows.size();
  const std::size_t m = rows.front().size();
  Tensor t({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != m) {
      throw DimensionError("from_rows: row " + std::to_string(i) + " has " +
                           std::to_string(rows[i].size()) +
                           " entries, expected " + std::to_string(m));
    }
    for (std::size_t j = 0; j < m; ++j) t(i, j) = rows[i][j];
  }
  return t;
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) throw ContractError("rows(): tensor has rank 0");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) {
    throw ContractError("cols(): tensor has rank " +
                        std::to_string(shape_.size()) + ", expected 2");
  }
  return shape_[1];
}

double& Tensor::operator()(std::size_t r, std::size_t c) {
  assert(shape_.size() == 2 && r < shape_[0] && c < shape_[1]);
  return data_[r * shape_[1] + c];
}

double Tensor::operator()(std::size_t r, std::size_t c) const {
  assert(shape_.size() == 2 && r < shape_[0] && c < shape_[1]);
  return data_[r * shape_[1] + c];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractError("item(): tensor " + shape_str() +
                        " is not a single element");
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += " x ";
    s += std::to_string(shape_[i]);
  }
  s += "]";
  return s;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + a.shape_str() +
                         " and " + b.shape_str() + " differ");
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: operands must be rank 2, got " +
                         a.shape_str() + " and " + b.shape_str());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions of " + a.shape_str() +
                         " and " + b.shape_str() + " disagree");
  }
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c(i, j) += aip * b(p, j);
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("transpose: operand must be rank 2, got " +
                         a.shape_str());
  }
  Tensor t({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Tensor l2_normalize_rows(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("l2_normalize_rows: operand must be rank 2, got " +
                         a.shape_str());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) sq += a(i, j) * a(i, j);
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) continue;  // zero rows pass through unscaled
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) / norm;
  }
  return out;
}

Tensor gather_rows(const Tensor& a, std::span<const int> row_indices) {
  if (a.rank() != 2) {
    throw DimensionError("gather_rows: operand must be rank 2, got " +
                         a.shape_str());
  }
  Tensor out({row_indices.size(), a.cols()});
  for (std::size_t i = 0; i < row_indices.size(); ++i) {
    const int r = row_indices[i];
    if (r < 0 || static_cast<std::size_t>(r) >= a.rows()) {
      throw ContractError("gather_rows: index " + std::to_string(r) +
                          " out of range for " + a.shape_str());
    }
    for (std::size_t j = 0; j < a.cols(); ++j)
      out(i, j) = a(static_cast<std::size_t>(r), j);
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace vsgmn

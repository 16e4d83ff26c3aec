#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcsim/error.hpp"

namespace dcsim {

/// Dense row-major table of finite reals with optional column labels.
///
/// Every data block in the collaboration protocol (raw partitions, anchors,
/// intermediate and collaboration representations) is a DataMatrix.
class DataMatrix {
 public:
  DataMatrix() = default;

  DataMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {
    if (!std::isfinite(fill)) throw ParameterError("DataMatrix: non-finite fill value");
  }

  DataMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
             std::vector<std::string> col_names = {})
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) {
      throw ShapeError("DataMatrix: expected " + std::to_string(rows * cols) + " values, got " +
                       std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw ParameterError("DataMatrix: non-finite entry");
    }
    set_col_names(std::move(col_names));
  }

  static DataMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> values;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& row : rows) {
      if (row.size() != cols) throw ShapeError("DataMatrix::from_rows: ragged rows");
      values.insert(values.end(), row.begin(), row.end());
    }
    return DataMatrix(rows.size(), cols, std::move(values));
  }

  static DataMatrix identity(std::size_t n) {
    DataMatrix eye(n, n);
    for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
    return eye;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  const std::vector<double>& values() const noexcept { return values_; }

  const std::vector<std::string>& col_names() const noexcept { return col_names_; }
  bool has_col_names() const noexcept { return !col_names_.empty(); }

  void set_col_names(std::vector<std::string> names) {
    if (!names.empty() && names.size() != cols_) {
      throw ShapeError("DataMatrix: " + std::to_string(names.size()) + " column names for " +
                       std::to_string(cols_) + " columns");
    }
    col_names_ = std::move(names);
  }

  DataMatrix select_rows(std::span<const std::size_t> indices) const {
    DataMatrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= rows_) throw ShapeError("select_rows: row index out of range");
      std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                  out.values_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    out.col_names_ = col_names_;
    return out;
  }

  DataMatrix select_cols(std::span<const std::size_t> indices) const {
    DataMatrix out(rows_, indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (indices[j] >= cols_) throw ShapeError("select_cols: column index out of range");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t j = 0; j < indices.size(); ++j) out(r, j) = (*this)(r, indices[j]);
    }
    if (has_col_names()) {
      std::vector<std::string> names;
      for (auto idx : indices) names.push_back(col_names_[idx]);
      out.col_names_ = std::move(names);
    }
    return out;
  }

  DataMatrix transpose() const {
    DataMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
  }

  friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_ &&
           a.col_names_ == b.col_names_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<std::string> col_names_;
};

inline DataMatrix matmul(const DataMatrix& a, const DataMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  DataMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

// aᵀ·b without materializing the transpose.
inline DataMatrix matmul_tn(const DataMatrix& a, const DataMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  DataMatrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto a_row = a.row(r);
    auto b_row = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ai = a_row[i];
      if (ai == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += ai * b_row[j];
    }
  }
  return out;
}

inline DataMatrix subtract(const DataMatrix& a, const DataMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("subtract: shape mismatch");
  std::vector<double> v(a.values());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= b.values()[i];
  return DataMatrix(a.rows(), a.cols(), std::move(v));
}

inline double frobenius_norm(const DataMatrix& a) {
  double sum = 0.0;
  for (double v : a.values()) sum += v * v;
  return std::sqrt(sum);
}

// [a, b] side by side.
inline DataMatrix hconcat(const std::vector<DataMatrix>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw ShapeError("hconcat: row counts differ");
    cols += b.cols();
  }
  DataMatrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (const auto& b : blocks) {
      std::copy(b.row(r).begin(), b.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
      offset += b.cols();
    }
  }
  return out;
}

// [a; b] stacked vertically.
inline DataMatrix vconcat(const std::vector<DataMatrix>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t cols = blocks.front().cols();
  std::vector<double> values;
  std::size_t rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw ShapeError("vconcat: column counts differ");
    values.insert(values.end(), b.values().begin(), b.values().end());
    rows += b.rows();
  }
  return DataMatrix(rows, cols, std::move(values));
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

inline std::vector<double> column_means(const DataMatrix& a) {
  std::vector<double> mean(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) mean[c] += a(r, c);
  for (auto& m : mean) m /= static_cast<double>(std::max<std::size_t>(a.rows(), 1));
  return mean;
}

// Sample variance (n - 1 denominator) per column.
inline std::vector<double> column_variances(const DataMatrix& a) {
  const auto mean = column_means(a);
  std::vector<double> var(a.cols(), 0.0);
  if (a.rows() < 2) return var;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const double d = a(r, c) - mean[c];
      var[c] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(a.rows() - 1);
  return var;
}

}  // namespace dcsim

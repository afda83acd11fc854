#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dynvine {

/// Dense row-major matrix of doubles; rows are time points, columns variables.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {v_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const {
    if (c >= cols_) throw std::out_of_range("DataMatrix::column");
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = v_[r * cols_ + c];
    return out;
  }
  /// Rows [first, first + count).
  DataMatrix slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > rows_) throw std::out_of_range("DataMatrix::slice_rows");
    DataMatrix m(count, cols_);
    std::copy(v_.begin() + first * cols_, v_.begin() + (first + count) * cols_, m.v_.begin());
    return m;
  }
  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

  friend bool operator==(const DataMatrix&, const DataMatrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

}  // namespace dynvine

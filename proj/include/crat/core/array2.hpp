#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace crat {

/// Dense row-major 2-D array of doubles. Vectors are stored as 1×n rows.
struct Array2 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Array2() = default;
  Array2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Array2(std::size_t r, std::size_t c, std::vector<double> values);

  static Array2 from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Array2& other) const { return rows == other.rows && cols == other.cols; }
  std::string shape_str() const;

  friend bool operator==(const Array2&, const Array2&) = default;
};

bool all_finite(const Array2& a);
double max_abs_diff(const Array2& a, const Array2& b);

}  // namespace crat

#include "crat/core/array2.hpp"

#include <algorithm>
#include <cmath>

#include "crat/core/errors.hpp"

namespace crat {

Array2::Array2(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("Array2: " + std::to_string(data.size()) + " values for shape " +
                     std::to_string(r) + "x" + std::to_string(c));
  }
}

Array2 Array2::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Array2 out;
  out.rows = rows.size();
  out.cols = rows.size() == 0 ? 0 : rows.begin()->size();
  out.data.reserve(out.rows * out.cols);
  for (const auto& r : rows) {
    if (r.size() != out.cols) throw ShapeError("Array2::from_rows: ragged rows");
    out.data.insert(out.data.end(), r.begin(), r.end());
  }
  return out;
}

std::string Array2::shape_str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

bool all_finite(const Array2& a) {
  return std::all_of(a.data.begin(), a.data.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Array2& a, const Array2& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: " + a.shape_str() + " vs " + b.shape_str());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

}  // namespace crat

#include "scenediff/grad/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace scenediff::grad {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

DenseArray::DenseArray(Shape shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

DenseArray::DenseArray(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != element_count(shape_)) {
    throw ShapeError("DenseArray: " + std::to_string(values_.size()) +
                     " values do not fill shape " + to_string(shape_));
  }
}

DenseArray DenseArray::scalar(double value) { return DenseArray(Shape{}, std::vector<double>{value}); }

DenseArray DenseArray::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("DenseArray::from_rows: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return DenseArray({rows.size(), cols}, std::move(values));
}

double DenseArray::item() const {
  if (values_.size() != 1) {
    throw ShapeError("DenseArray::item on array of shape " + to_string(shape_));
  }
  return values_[0];
}

bool DenseArray::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void DenseArray::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

void DenseArray::reshape(Shape shape) {
  if (element_count(shape) != values_.size()) {
    throw ShapeError("DenseArray::reshape " + to_string(shape_) + " -> " + to_string(shape));
  }
  shape_ = std::move(shape);
}

}  // namespace scenediff::grad

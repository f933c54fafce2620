#include "isfno/tensor.hpp"

#include "isfno/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isfno {

std::size_t shape_size(const Shape &shape) {
  std::size_t n = 1;
  for (auto e : shape)
    n *= e;
  return n;
}

std::string shape_string(const Shape &shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size())
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size())
    throw ShapeError("index rank " + std::to_string(idx.size()) + " != tensor rank " +
                     std::to_string(shape_.size()));
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : idx)
    off = off * shape_[axis++] + i;
  return off;
}

double &Tensor::at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
double Tensor::at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double max_abs(const Tensor &t) {
  double m = 0.0;
  for (double v : t.values())
    m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor &a, const Tensor &b) {
  if (a.size() != b.size())
    throw ShapeError("max_abs_diff: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l2_norm(const Tensor &t) { return std::sqrt(dot(t, t)); }

double dot(const Tensor &a, const Tensor &b) {
  if (a.size() != b.size())
    throw ShapeError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

} // namespace isfno

#include "cosearch/autodiff/tensor.hpp"

#include "cosearch/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cosearch::ad {

std::string Dims4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

Tensor4::Tensor4(Dims4 dims, std::vector<double> values) : dims_(dims), values_(std::move(values)) {
  if (values_.size() != dims_.size())
    throw ShapeError("Tensor4: " + std::to_string(values_.size()) + " values for dims " +
                     dims_.str());
}

void Tensor4::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor4& Tensor4::operator+=(const Tensor4& o) {
  if (!(o.dims_ == dims_)) throw ShapeError("Tensor4 +=: " + dims_.str() + " vs " + o.dims_.str());
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

bool Tensor4::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double uniform_open(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor4 random_normal(Dims4 dims, double sd, std::mt19937_64& rng) {
  Tensor4 t(dims);
  for (auto& v : t.values()) v = sd * standard_normal(rng);
  return t;
}

}  // namespace cosearch::ad

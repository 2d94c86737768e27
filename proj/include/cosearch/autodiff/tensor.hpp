#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cosearch::ad {

struct Dims4 {
  int n = 0, c = 0, h = 0, w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool operator==(const Dims4&) const = default;
  std::string str() const;
};

// Dense NCHW tensor of doubles. Convolution kernels use (M, C, R, S).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Dims4 dims, double fill = 0.0) : dims_(dims), values_(dims.size(), fill) {}
  Tensor4(Dims4 dims, std::vector<double> values);

  const Dims4& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * dims_.c + c) * dims_.h + h) * dims_.w + w;
  }
  double& at(int n, int c, int h, int w) { return values_[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return values_[index(n, c, h, w)]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  void fill(double v);
  Tensor4& operator+=(const Tensor4& o);
  bool all_finite() const;

 private:
  Dims4 dims_;
  std::vector<double> values_;
};

// Uniform draw in (0, 1) from raw engine bits, identical on every platform.
double uniform_open(std::mt19937_64& rng);
// Standard normal via Box-Muller on uniform_open draws.
double standard_normal(std::mt19937_64& rng);
Tensor4 random_normal(Dims4 dims, double sd, std::mt19937_64& rng);

}  // namespace cosearch::ad

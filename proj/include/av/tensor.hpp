#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace av {

// Dense row-major array of doubles. Storage is double throughout; values that
// cross a file boundary are quantized to float32 first (see checkpoint.hpp) so
// in-memory and on-disk pipelines agree bit for bit.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape, double fill = 0.0);
  static Tensor scalar(double v);
  static Tensor from(std::vector<size_t> shape, std::vector<double> values);

  size_t size() const { return v_.size(); }
  size_t ndim() const { return shape_.size(); }
  const std::vector<size_t>& shape() const { return shape_; }
  size_t dim(size_t i) const { return shape_[i]; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](size_t i) { return v_[i]; }
  double operator[](size_t i) const { return v_[i]; }

  void fill(double x);
  double min() const;
  double max() const;
  double max_abs() const;
  double sum() const;
  bool all_finite() const;

  // Rounds every value through float32; keeps storage double.
  void quantize_f32();

  std::vector<float> to_f32() const;
  static Tensor from_f32(std::vector<size_t> shape, const std::vector<float>& values);

private:
  std::vector<size_t> shape_;
  std::vector<double> v_;
};

size_t shape_numel(const std::vector<size_t>& shape);

// Clamp every element into [lo, hi].
void clamp_inplace(Tensor& t, double lo, double hi);

// Pearson correlation of two equal-length series.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace av

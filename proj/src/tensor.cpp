#include "av/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "av/common.hpp"

namespace av {

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<size_t> shape, double fill)
    : shape_(std::move(shape)), v_(shape_numel(shape_), fill) {}

Tensor Tensor::scalar(double v) {
  Tensor t(std::vector<size_t>{});
  t.v_.assign(1, v);
  return t;
}

Tensor Tensor::from(std::vector<size_t> shape, std::vector<double> values) {
  check(shape_numel(shape) == values.size(),
        "tensor: value count " + std::to_string(values.size()) +
            " does not match shape size " + std::to_string(shape_numel(shape)));
  Tensor t;
  t.shape_ = std::move(shape);
  t.v_ = std::move(values);
  return t;
}

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  s += ")";
  return s;
}

void Tensor::fill(double x) { std::fill(v_.begin(), v_.end(), x); }

double Tensor::min() const {
  double m = v_.empty() ? 0.0 : v_[0];
  for (double x : v_) m = std::min(m, x);
  return m;
}

double Tensor::max() const {
  double m = v_.empty() ? 0.0 : v_[0];
  for (double x : v_) m = std::max(m, x);
  return m;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::fabs(x));
  return m;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double x : v_) s += x;
  return s;
}

bool Tensor::all_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

void Tensor::quantize_f32() {
  for (double& x : v_) x = static_cast<double>(static_cast<float>(x));
}

std::vector<float> Tensor::to_f32() const {
  std::vector<float> out(v_.size());
  for (size_t i = 0; i < v_.size(); ++i) out[i] = static_cast<float>(v_[i]);
  return out;
}

Tensor Tensor::from_f32(std::vector<size_t> shape, const std::vector<float>& values) {
  check(shape_numel(shape) == values.size(), "tensor: float payload does not match shape");
  Tensor t;
  t.shape_ = std::move(shape);
  t.v_.resize(values.size());
  for (size_t i = 0; i < values.size(); ++i) t.v_[i] = static_cast<double>(values[i]);
  return t;
}

void clamp_inplace(Tensor& t, double lo, double hi) {
  double* p = t.data();
  for (size_t i = 0; i < t.size(); ++i) p[i] = std::clamp(p[i], lo, hi);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  check(a.size() == b.size() && !a.empty(), "pearson: series length mismatch");
  double n = static_cast<double>(a.size());
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
  check(k <= n, "sample_without_replacement: k > n");
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace av

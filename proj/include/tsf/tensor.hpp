#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsf {

// Dense row-major double tensor, rank 0..4. Rank-4 layout is NCHW.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    v_.assign(static_cast<size_t>(numel_of(shape_)), 0.0);
  }
  Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    v_.assign(static_cast<size_t>(numel_of(shape_)), fill);
  }

  static Tensor scalar(double v) {
    Tensor t(std::vector<int>{});
    t.v_.assign(1, v);
    return t;
  }

  static long numel_of(const std::vector<int>& shape) {
    long n = 1;
    for (int d : shape) {
      if (d < 0) throw std::invalid_argument("negative tensor dim");
      n *= d;
    }
    return n;
  }

  bool defined() const { return !v_.empty() || !shape_.empty(); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  long numel() const { return static_cast<long>(v_.size()); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  double& operator[](long i) { return v_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return v_[static_cast<size_t>(i)]; }

  // NCHW accessors (rank 4 only).
  double& at(int n, int c, int h, int w) {
    return v_[static_cast<size_t>(((static_cast<long>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  double at(int n, int c, int h, int w) const {
    return v_[static_cast<size_t>(((static_cast<long>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  double item() const {
    if (v_.size() != 1) throw std::logic_error("item() on non-scalar tensor");
    return v_[0];
  }

  void fill(double v) { v_.assign(v_.size(), v); }
  void zero() { fill(0.0); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

inline void check_shape(const Tensor& t, const std::vector<int>& want, const char* who) {
  if (t.shape() != want) {
    Tensor w(want);
    throw std::invalid_argument(std::string(who) + ": shape mismatch, got " + t.shape_str() +
                                " want " + w.shape_str());
  }
}

}  // namespace tsf

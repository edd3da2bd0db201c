#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pugnn/rng.hpp"

namespace pugnn {

// Dense row-major matrix of doubles. Vectors are 1xN or Nx1 matrices.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  double* row_ptr(int i) { return a.data() + static_cast<size_t>(i) * cols; }
  const double* row_ptr(int i) const { return a.data() + static_cast<size_t>(i) * cols; }

  size_t size() const { return a.size(); }
  bool empty() const { return a.empty(); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }

  bool all_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static Mat uniform(int r, int c, double bound, Rng& rng) {
    Mat m(r, c);
    for (double& v : m.a) v = rng.uniform(-bound, bound);
    return m;
  }

  // Fan-in scaled init: U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
  static Mat fan_in_init(int r, int c, int fan_in, Rng& rng) {
    return uniform(r, c, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  }
};

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

// C = A * B
inline Mat matmul(const Mat& A, const Mat& B) {
  check_shape(A.cols == B.rows, "matmul " + std::to_string(A.cols) + " vs " + std::to_string(B.rows));
  Mat C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    const double* ar = A.row_ptr(i);
    double* cr = C.row_ptr(i);
    for (int k = 0; k < A.cols; ++k) {
      double aik = ar[k];
      if (aik == 0.0) continue;
      const double* br = B.row_ptr(k);
      for (int j = 0; j < B.cols; ++j) cr[j] += aik * br[j];
    }
  }
  return C;
}

// C = A^T * B
inline Mat matmul_tn(const Mat& A, const Mat& B) {
  check_shape(A.rows == B.rows, "matmul_tn");
  Mat C(A.cols, B.cols);
  for (int k = 0; k < A.rows; ++k) {
    const double* ar = A.row_ptr(k);
    const double* br = B.row_ptr(k);
    for (int i = 0; i < A.cols; ++i) {
      double aki = ar[i];
      if (aki == 0.0) continue;
      double* cr = C.row_ptr(i);
      for (int j = 0; j < B.cols; ++j) cr[j] += aki * br[j];
    }
  }
  return C;
}

// C = A * B^T
inline Mat matmul_nt(const Mat& A, const Mat& B) {
  check_shape(A.cols == B.cols, "matmul_nt");
  Mat C(A.rows, B.rows);
  for (int i = 0; i < A.rows; ++i) {
    const double* ar = A.row_ptr(i);
    double* cr = C.row_ptr(i);
    for (int j = 0; j < B.rows; ++j) {
      const double* br = B.row_ptr(j);
      double s = 0.0;
      for (int k = 0; k < A.cols; ++k) s += ar[k] * br[k];
      cr[j] = s;
    }
  }
  return C;
}

inline void add_inplace(Mat& dst, const Mat& src) {
  check_shape(dst.same_shape(src), "add_inplace");
  for (size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += src.a[i];
}

inline void axpy_inplace(Mat& dst, double alpha, const Mat& src) {
  check_shape(dst.same_shape(src), "axpy_inplace");
  for (size_t i = 0; i < dst.a.size(); ++i) dst.a[i] += alpha * src.a[i];
}

inline double dot(const double* x, const double* y, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

// Numerically stable logistic function.
inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace pugnn

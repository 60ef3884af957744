#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rana {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of 64-bit floats. Immutable by convention after
/// construction; all entries are checked finite when built through make().
class DenseMatrix {
 public:
  DenseMatrix() : rows_(0), cols_(0) {}
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) throw ShapeError("DenseMatrix: zero dimension");
  }

  static DenseMatrix make(std::size_t rows, std::size_t cols,
                          std::vector<double> data) {
    if (data.size() != rows * cols)
      throw ShapeError("DenseMatrix: data length " +
                       std::to_string(data.size()) + " != " +
                       std::to_string(rows) + "x" + std::to_string(cols));
    DenseMatrix m(rows, cols);
    m.data_ = std::move(data);
    m.check_finite();
    return m;
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& mutable_data() { return data_; }
  const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

  void check_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) throw NumericError("DenseMatrix: non-finite entry");
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  double frobenius_sq() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

using DenseVector = std::vector<double>;

/// Deterministic RNG. Box-Muller on top of mt19937_64 so streams are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Integer in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

 private:
  std::mersenne_twister_engine<std::uint64_t, 64, 312, 156, 31,
                               0xb5026f5aa96619e9ULL, 29, 0x5555555555555555ULL,
                               17, 0x71d67fffeda60000ULL, 37,
                               0xfff7eee000000000ULL, 43, 6364136223846793005ULL>
      gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

struct SvdResult {
  DenseMatrix U;    // o x p, orthonormal columns
  DenseVector S;    // p singular values, descending
  DenseMatrix Vt;   // p x k, orthonormal rows
};

/// Deterministic row-major product; accumulation over the inner index per
/// output element.
DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B);

DenseVector matvec(const DenseMatrix& A, const DenseVector& x);

/// Thin SVD with sign convention: first nonzero component of each U column
/// is nonnegative.
SvdResult thin_svd(const DenseMatrix& M);

/// Lower order-statistic quantile: smallest element v such that the fraction
/// of elements <= v is >= q. No interpolation.
double quantile(std::vector<double> values, double q);

double dot(const DenseVector& a, const DenseVector& b);
double norm_sq(const DenseVector& v);

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng);
DenseVector random_vector(std::size_t dim, Rng& rng);

}  // namespace rana

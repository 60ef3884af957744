#include "rana/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>

namespace rana {

DenseMatrix matmul(const DenseMatrix& A, const DenseMatrix& B) {
  if (A.cols() != B.rows())
    throw ShapeError("matmul: " + std::to_string(A.rows()) + "x" +
                     std::to_string(A.cols()) + " * " +
                     std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  DenseMatrix C(A.rows(), B.cols());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < B.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < A.cols(); ++k) acc += A(r, k) * B(k, c);
      C(r, c) = acc;
    }
  return C;
}

DenseVector matvec(const DenseMatrix& A, const DenseVector& x) {
  if (A.cols() != x.size())
    throw ShapeError("matvec: " + std::to_string(A.rows()) + "x" +
                     std::to_string(A.cols()) + " * vec " +
                     std::to_string(x.size()));
  DenseVector y(A.rows(), 0.0);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double acc = 0.0;
    const double* row = A.row_ptr(r);
    for (std::size_t k = 0; k < A.cols(); ++k) acc += row[k] * x[k];
    y[r] = acc;
  }
  return y;
}

SvdResult thin_svd(const DenseMatrix& M) {
  M.check_finite();
  using EMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const EMat> em(M.data().data(), static_cast<Eigen::Index>(M.rows()),
                            static_cast<Eigen::Index>(M.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(em,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& eu = svd.matrixU();
  const auto& ev = svd.matrixV();
  const auto& es = svd.singularValues();
  std::size_t p = static_cast<std::size_t>(es.size());

  DenseMatrix U(M.rows(), p);
  DenseMatrix Vt(p, M.cols());
  DenseVector S(p);
  for (std::size_t j = 0; j < p; ++j) S[j] = std::max(0.0, es(j));

  // Sign convention: first nonzero component of each U column nonnegative.
  for (std::size_t j = 0; j < p; ++j) {
    double sign = 1.0;
    for (Eigen::Index r = 0; r < eu.rows(); ++r) {
      if (eu(r, static_cast<Eigen::Index>(j)) != 0.0) {
        sign = eu(r, static_cast<Eigen::Index>(j)) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::size_t r = 0; r < M.rows(); ++r)
      U(r, j) = sign * eu(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
    for (std::size_t c = 0; c < M.cols(); ++c)
      Vt(j, c) = sign * ev(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
  }
  return SvdResult{std::move(U), std::move(S), std::move(Vt)};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw NumericError("quantile: empty input");
  if (q < 0.0 || q > 1.0) throw NumericError("quantile: q out of [0,1]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::size_t idx = 0;
  if (q > 0.0) {
    double raw = std::ceil(q * n) - 1.0;
    idx = raw < 0.0 ? 0 : static_cast<std::size_t>(raw);
    if (idx >= values.size()) idx = values.size() - 1;
  }
  return values[idx];
}

double dot(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const DenseVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

DenseVector random_vector(std::size_t dim, Rng& rng) {
  DenseVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace rana

#include <cmath>

#include "doctest.h"
#include "rana/decomposition.hpp"

using namespace rana;

namespace {

double residual_fro_sq(const DenseMatrix& W, const DenseMatrix& X,
                       const DenseMatrix& A, const DenseMatrix& B) {
  DenseMatrix WX = matmul(W, X);
  DenseMatrix ABX = matmul(A, matmul(B, X));
  double s = 0.0;
  for (std::size_t i = 0; i < WX.data().size(); ++i) {
    const double d = WX.data()[i] - ABX.data()[i];
    s += d * d;
  }
  return s;
}

// Random orthonormal columns via Gram-Schmidt.
DenseMatrix random_orthonormal(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix Q = random_matrix(rows, cols, rng);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double d = 0.0;
      for (std::size_t r = 0; r < rows; ++r) d += Q(r, c) * Q(r, p);
      for (std::size_t r = 0; r < rows; ++r) Q(r, c) -= d * Q(r, p);
    }
    double n = 0.0;
    for (std::size_t r = 0; r < rows; ++r) n += Q(r, c) * Q(r, c);
    n = std::sqrt(n);
    for (std::size_t r = 0; r < rows; ++r) Q(r, c) /= n;
  }
  return Q;
}

}  // namespace

TEST_CASE("decompose identity gives identity factors") {
  CalibrationSet calib{DenseMatrix::identity(2)};
  RankDecomposition d = decompose(DenseMatrix::identity(2), calib, 2);
  CHECK(d.ranks() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(d.A(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
      CHECK(d.B(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }
}

TEST_CASE("decompose diagonal rank-1 truncation") {
  DenseMatrix W = DenseMatrix::make(2, 2, {3, 0, 0, 1});
  CalibrationSet calib{DenseMatrix::identity(2)};
  RankDecomposition d = decompose(W, calib, 1);
  CHECK(d.ranks() == 1);
  CHECK(std::abs(d.A(0, 0)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(d.A(1, 0)) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(std::abs(d.B(0, 0)) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(std::abs(d.B(0, 1)) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(residual_fro_sq(W, calib.X, d.A, d.B) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("decompose random instance: truncation residual identity and brute force") {
  Rng rng(17);
  DenseMatrix W = random_matrix(16, 12, rng);
  CalibrationSet calib{random_matrix(12, 64, rng)};
  RankDecomposition d4 = decompose(W, calib, 4);

  SvdResult svd = thin_svd(matmul(W, calib.X));
  double tail = 0.0;
  for (std::size_t j = 4; j < svd.S.size(); ++j) tail += svd.S[j] * svd.S[j];
  const double got = residual_fro_sq(W, calib.X, d4.A, d4.B);
  CHECK(got == doctest::Approx(tail).epsilon(1e-8));

  // no random rank-4 factorization (orthonormal A, B = A^T W) does better
  for (int trial = 0; trial < 1000; ++trial) {
    DenseMatrix A = random_orthonormal(16, 4, rng);
    DenseMatrix B = matmul(A.transposed(), W);
    CHECK(got <= residual_fro_sq(W, calib.X, A, B) + 1e-9);
  }
}

TEST_CASE("decompose residual monotone nonincreasing in rank") {
  Rng rng(23);
  DenseMatrix W = random_matrix(10, 8, rng);
  CalibrationSet calib{random_matrix(8, 32, rng)};
  double prev = 1e300;
  for (std::size_t r = 1; r <= 8; ++r) {
    RankDecomposition d = decompose(W, calib, r);
    double e = residual_fro_sq(W, calib.X, d.A, d.B);
    CHECK(e <= prev + 1e-9);
    prev = e;
  }
}

TEST_CASE("decompose beats plain-SVD-of-W candidates") {
  Rng rng(31);
  DenseMatrix W = random_matrix(12, 9, rng);
  // anisotropic calibration so WX and W have different leading subspaces
  DenseMatrix X = random_matrix(9, 40, rng);
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t s = 0; s < 40; ++s) X(r, s) *= std::pow(0.5, double(r));
  CalibrationSet calib{X};
  for (std::size_t r = 1; r <= 4; ++r) {
    RankDecomposition d = decompose(W, calib, r);
    const double ours = residual_fro_sq(W, calib.X, d.A, d.B);

    SvdResult ws = thin_svd(W);
    DenseMatrix Aw(12, r);
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < r; ++j) Aw(i, j) = ws.U(i, j);
    DenseMatrix Bw = matmul(Aw.transposed(), W);
    CHECK(ours <= residual_fro_sq(W, calib.X, Aw, Bw) + 1e-9);
  }
}

TEST_CASE("decompose error cases") {
  DenseMatrix W(4, 3);
  for (auto& v : W.mutable_data()) v = 1.0;
  CHECK_THROWS_AS(decompose(W, CalibrationSet{DenseMatrix(4, 5)}), ShapeError);
  // all-zero calibration has no signal
  CHECK_THROWS_WITH_AS(decompose(W, CalibrationSet{DenseMatrix(3, 5)}),
                       "decompose: calibration has no signal", NumericError);
}

TEST_CASE("truncated factors equal re-decomposition") {
  Rng rng(5);
  DenseMatrix W = random_matrix(9, 7, rng);
  CalibrationSet calib{random_matrix(7, 30, rng)};
  RankDecomposition full = decompose(W, calib);
  RankDecomposition direct = decompose(W, calib, 3);
  RankDecomposition trunc = full.truncated(3);
  REQUIRE(trunc.ranks() == direct.ranks());
  for (std::size_t i = 0; i < trunc.A.data().size(); ++i)
    CHECK(trunc.A.data()[i] == doctest::Approx(direct.A.data()[i]).epsilon(1e-9));
  for (std::size_t i = 0; i < trunc.B.data().size(); ++i)
    CHECK(trunc.B.data()[i] == doctest::Approx(direct.B.data()[i]).epsilon(1e-9));
  CHECK_THROWS_AS(full.truncated(0), ShapeError);
  CHECK_THROWS_AS(full.truncated(full.ranks() + 1), ShapeError);
}

TEST_CASE("rank_contributions direct squares and energy identity") {
  // B = I2, x = (3,4) -> contributions (9,16)
  RankDecomposition dec{DenseMatrix::identity(2), DenseMatrix::identity(2),
                        DenseVector{1.0, 1.0}, 2, 2, 0.0};
  DenseMatrix X(2, 2);
  X(0, 0) = 3;
  X(1, 0) = 4;  // second column all zero
  ContributionStats stats = rank_contributions(dec, CalibrationSet{X});
  CHECK(stats.contributions(0, 0) == 9.0);
  CHECK(stats.contributions(1, 0) == 16.0);
  CHECK(stats.contributions(0, 1) == 0.0);
  CHECK(stats.contributions(1, 1) == 0.0);
  CHECK(stats.mean_energy[0] == doctest::Approx(4.5));
}

TEST_CASE("rank_contributions column sums equal ||ABx||^2") {
  Rng rng(41);
  DenseMatrix W = random_matrix(8, 6, rng);
  CalibrationSet calib{random_matrix(6, 20, rng)};
  RankDecomposition dec = decompose(W, calib, 4);
  ContributionStats stats = rank_contributions(dec, calib);
  DenseMatrix ABX = matmul(dec.A, matmul(dec.B, calib.X));
  for (std::size_t s = 0; s < 20; ++s) {
    double col_sum = 0.0, nrm = 0.0;
    for (std::size_t j = 0; j < stats.ranks(); ++j)
      col_sum += stats.contributions(j, s);
    for (std::size_t r = 0; r < 8; ++r) nrm += ABX(r, s) * ABX(r, s);
    CHECK(col_sum == doctest::Approx(nrm).epsilon(1e-9));
  }
}

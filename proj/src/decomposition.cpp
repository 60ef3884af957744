#include "rana/decomposition.hpp"

#include <algorithm>

namespace rana {

RankDecomposition RankDecomposition::truncated(std::size_t r) const {
  if (r == 0 || r > ranks())
    throw ShapeError("truncated: rank " + std::to_string(r) + " out of 1.." +
                     std::to_string(ranks()));
  if (r == ranks()) return *this;
  DenseMatrix At(out_dim, r), Bt(r, in_dim);
  for (std::size_t i = 0; i < out_dim; ++i)
    for (std::size_t j = 0; j < r; ++j) At(i, j) = A(i, j);
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t c = 0; c < in_dim; ++c) Bt(j, c) = B(j, c);
  DenseVector St(singular_values.begin(), singular_values.begin() + r);
  double extra = discarded_energy;
  for (std::size_t j = r; j < ranks(); ++j)
    extra += singular_values[j] * singular_values[j];
  return RankDecomposition{std::move(At), std::move(Bt), std::move(St),
                           out_dim, in_dim, extra};
}

RankDecomposition decompose(const DenseMatrix& W, const CalibrationSet& calib,
                            std::size_t keep_ranks) {
  if (W.cols() != calib.X.rows())
    throw ShapeError("decompose: W cols " + std::to_string(W.cols()) +
                     " != calibration input dim " +
                     std::to_string(calib.X.rows()));
  DenseMatrix WX = matmul(W, calib.X);
  SvdResult svd = thin_svd(WX);
  const double sigma_max = svd.S.empty() ? 0.0 : svd.S[0];
  if (sigma_max <= 0.0) throw NumericError("decompose: calibration has no signal");

  std::size_t rank = 0;
  for (double s : svd.S)
    if (s > 1e-12 * sigma_max) ++rank;
  std::size_t limit = std::min(W.rows(), W.cols());
  std::size_t D = std::min(rank, limit);
  if (keep_ranks != 0) {
    if (keep_ranks > limit)
      throw ShapeError("decompose: keep_ranks exceeds min(o,i)");
    D = std::min(D, keep_ranks);
  }

  DenseMatrix A(W.rows(), D);
  for (std::size_t r = 0; r < W.rows(); ++r)
    for (std::size_t j = 0; j < D; ++j) A(r, j) = svd.U(r, j);
  DenseMatrix B = matmul(A.transposed(), W);
  DenseVector S(svd.S.begin(), svd.S.begin() + D);
  double discarded = 0.0;
  for (std::size_t j = D; j < svd.S.size(); ++j)
    discarded += svd.S[j] * svd.S[j];
  return RankDecomposition{std::move(A), std::move(B), std::move(S),
                           W.rows(), W.cols(), discarded};
}

ContributionStats rank_contributions(const RankDecomposition& dec,
                                     const CalibrationSet& calib) {
  DenseMatrix BX = matmul(dec.B, calib.X);
  const std::size_t D = dec.ranks(), k = calib.samples();
  DenseMatrix contrib(D, k);
  DenseVector mean(D, 0.0);
  for (std::size_t j = 0; j < D; ++j) {
    double acc = 0.0;
    for (std::size_t s = 0; s < k; ++s) {
      double c = BX(j, s) * BX(j, s);
      contrib(j, s) = c;
      acc += c;
    }
    mean[j] = acc / static_cast<double>(k);
  }
  return ContributionStats{std::move(contrib), std::move(mean)};
}

}  // namespace rana

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rana/maskers.hpp"
#include "rana/tensor.hpp"

namespace rana {

/// Column-major copy of a matrix so active columns are gathered contiguously
/// by the masked GEMV.
class MaskedGemvPlan {
 public:
  explicit MaskedGemvPlan(const DenseMatrix& m);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  /// y = sum over active j of v[j] * column j. Skipped columns are never
  /// read; reads counter tracks touched columns when provided.
  DenseVector apply(const Mask& mask, const DenseVector& v,
                    double* column_reads = nullptr) const;

 private:
  std::size_t rows_, cols_;
  std::vector<double> col_major_;
};

DenseVector masked_gemv(const DenseMatrix& M, const Mask& mask,
                        const DenseVector& v);

struct BenchRow {
  std::size_t size;
  double density;
  double median_ns;
  double p10_ns;
  double p90_ns;
  double speedup;  // vs density 1.0 at the same size
};

std::vector<BenchRow> bench_masked_gemv(const std::vector<std::size_t>& sizes,
                                        const std::vector<double>& densities,
                                        std::size_t repetitions,
                                        std::uint64_t seed = 0);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace rana

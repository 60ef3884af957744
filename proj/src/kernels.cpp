#include "rana/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

namespace rana {

MaskedGemvPlan::MaskedGemvPlan(const DenseMatrix& m)
    : rows_(m.rows()), cols_(m.cols()), col_major_(m.rows() * m.cols()) {
  for (std::size_t c = 0; c < cols_; ++c)
    for (std::size_t r = 0; r < rows_; ++r)
      col_major_[c * rows_ + r] = m(r, c);
}

DenseVector MaskedGemvPlan::apply(const Mask& mask, const DenseVector& v,
                                  double* column_reads) const {
  if (mask.size() != cols_ || v.size() != cols_)
    throw ShapeError("masked_gemv: mask/vector length != cols");
  DenseVector y(rows_, 0.0);
  for (std::size_t c = 0; c < cols_; ++c) {
    if (!mask[c]) continue;
    const double s = v[c];
    const double* col = col_major_.data() + c * rows_;
    for (std::size_t r = 0; r < rows_; ++r) y[r] += s * col[r];
    if (column_reads) *column_reads += 1.0;
  }
  return y;
}

DenseVector masked_gemv(const DenseMatrix& M, const Mask& mask,
                        const DenseVector& v) {
  return MaskedGemvPlan(M).apply(mask, v);
}

namespace {

double percentile_ns(std::vector<double>& samples, double p) {
  std::sort(samples.begin(), samples.end());
  const std::size_t idx = static_cast<std::size_t>(
      p * static_cast<double>(samples.size() - 1) + 0.5);
  return samples[std::min(idx, samples.size() - 1)];
}

}  // namespace

std::vector<BenchRow> bench_masked_gemv(const std::vector<std::size_t>& sizes,
                                        const std::vector<double>& densities,
                                        std::size_t repetitions,
                                        std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const std::size_t warmup = 10;
  std::vector<BenchRow> rows;
  Rng rng(seed);
  volatile double sink = 0.0;  // defeats dead-code elimination of timed work

  for (std::size_t n : sizes) {
    DenseMatrix M = random_matrix(n, n, rng);
    MaskedGemvPlan plan(M);
    DenseVector v = random_vector(n, rng);

    double dense_median = 0.0;
    for (double density : densities) {
      Mask mask(n, 0);
      const std::size_t active =
          std::max<std::size_t>(1, static_cast<std::size_t>(density * n + 0.5));
      // evenly spread active columns for a stable access pattern
      for (std::size_t j = 0; j < active; ++j)
        mask[(j * n) / active] = 1;

      for (std::size_t w = 0; w < warmup; ++w) {
        DenseVector y = plan.apply(mask, v);
        sink = sink + y[0];
      }
      std::vector<double> samples;
      samples.reserve(repetitions);
      for (std::size_t rep = 0; rep < repetitions; ++rep) {
        auto t0 = clock::now();
        DenseVector y = plan.apply(mask, v);
        auto t1 = clock::now();
        sink = sink + y[0];
        samples.push_back(static_cast<double>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0)
                .count()));
      }
      BenchRow row;
      row.size = n;
      row.density = density;
      std::vector<double> tmp = samples;
      row.median_ns = percentile_ns(tmp, 0.5);
      tmp = samples;
      row.p10_ns = percentile_ns(tmp, 0.10);
      tmp = samples;
      row.p90_ns = percentile_ns(tmp, 0.90);
      if (density == 1.0) dense_median = row.median_ns;
      row.speedup = dense_median > 0.0 ? dense_median / row.median_ns : 0.0;
      rows.push_back(row);
    }
    // backfill speedups when density 1.0 was not listed first
    if (dense_median > 0.0)
      for (auto& r : rows)
        if (r.size == n) r.speedup = dense_median / r.median_ns;
  }
  (void)sink;
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "size,density,median_ns,p10_ns,p90_ns,speedup\n";
  for (const auto& r : rows)
    os << r.size << "," << r.density << "," << r.median_ns << "," << r.p10_ns
       << "," << r.p90_ns << "," << r.speedup << "\n";
  return os.str();
}

}  // namespace rana

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rana/allocation.hpp"

namespace rana {

struct ErrorReport {
  std::string adapter;
  double mean_normalized_error = 0.0;
  double median_normalized_error = 0.0;
  double max_normalized_error = 0.0;
  std::size_t skipped_zero_outputs = 0;
  double flop_compression = 0.0;
  bool infeasible = false;
};

using Forward = std::function<DenseVector(const DenseVector&)>;

/// Normalized error ||y - y'||^2 / ||y||^2 averaged over the inputs; inputs
/// with zero reference output are skipped and counted.
ErrorReport measure_layer_error(const Forward& original, const Forward& adapted,
                                const DenseMatrix& eval_inputs,
                                const std::string& name = "");

struct SparsityHistogram {
  std::vector<double> bin_edges;  // ascending, bins+1 entries
  std::vector<std::size_t> counts;
  double top_half_mass = 0.0;  // mean fraction of per-sample mass in top 50% ranks
};

/// Histogram of per-sample-normalized rank contributions (each column
/// normalized by its sum). Default 128 log-spaced bins.
SparsityHistogram build_sparsity_histogram(const ContributionStats& stats,
                                           std::size_t bins = 128);

std::string histogram_csv(const SparsityHistogram& h);

/// Split activation columns 80/20 into calibration and held-out parts with a
/// seeded shuffle.
std::pair<DenseMatrix, DenseMatrix> split_calibration(const DenseMatrix& X,
                                                      std::uint64_t seed,
                                                      double calib_fraction = 0.8);

/// Matched-FLOP adapter comparison on one MLP. budget_fraction is a fraction
/// of the dense MLP FLOPs; rows for kinds whose minimum cost exceeds the
/// budget are marked infeasible.
std::vector<ErrorReport> compare_adapters(const MlpWeights& w,
                                          double budget_fraction,
                                          const std::vector<BaselineKind>& kinds,
                                          const CalibrationSet& calib,
                                          const DenseMatrix& eval_inputs,
                                          std::uint64_t seed);

std::string error_table_csv(const std::vector<ErrorReport>& rows);

/// Anisotropic Gaussian inputs: x = L z with geometrically decaying column
/// scales, so activations have uneven rank spectra.
DenseMatrix anisotropic_inputs(std::size_t dim, std::size_t samples,
                               Rng& rng, double decay = 0.75);

/// SwiGLU MLP fitted by SGD to a random teacher so its weights and
/// activations carry realistic structure.
MlpWeights train_toy_swiglu(std::size_t in_dim, std::size_t hidden_dim,
                            std::uint64_t seed, std::size_t steps = 300);

struct ToyTransformerConfig {
  std::size_t width = 32;
  std::size_t blocks = 2;
  std::size_t seq_len = 8;
  std::uint64_t seed = 0;
};

struct DivergenceReport {
  double compression = 0.0;
  double mean_logit_deviation = 0.0;         // relative, over eval sequences
  std::vector<double> per_block_error;       // hidden-state error after each block
};

/// Applies rank adapters to all QKV and MLP linears of a deterministic toy
/// transformer at the requested FLOP compression and measures logit drift.
DivergenceReport toy_model_divergence(const ToyTransformerConfig& cfg,
                                      double compression,
                                      std::size_t eval_sequences = 8);

}  // namespace rana

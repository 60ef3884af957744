#pragma once

#include <cstdint>
#include <vector>

#include "rana/decomposition.hpp"
#include "rana/tensor.hpp"

namespace rana {

using Mask = std::vector<std::uint8_t>;

/// Rank masker: keep rank j when (Bx)_j^2 >= threshold. The threshold is a
/// pooled quantile over calibration contributions so that the mean active
/// count matches the target in expectation.
struct BMasker {
  double threshold = 0.0;
  double target_expected_active = 0.0;
  double calibrated_mean_active = 0.0;
  std::size_t ranks = 0;
};

/// Neuron masker on a Down-Projection input: keep neuron i when
/// |x_i| * ||column i of W_down|| >= threshold.
struct NeuronThresholdMasker {
  double threshold = 0.0;
  DenseVector per_neuron_norms;  // Frobenius norm of weights attached to neuron i
  double target_expected_active = 0.0;
  double calibrated_mean_active = 0.0;
};

/// Learned masker sigma(C*D*x) thresholded at decision_cutoff.
struct SigmoidMlpMasker {
  DenseMatrix C;   // out x r'
  DenseMatrix D;   // r' x in
  std::size_t inner_dim = 0;
  double decision_cutoff = 0.5;
};

struct OracleTopKMasker {
  std::size_t k = 0;
};

/// Threshold t over pooled per-sample statistics such that the mean count of
/// entries >= t per sample matches expected_keep. Equivalent to the pooled
/// quantile at level 1 - expected_keep/D, with the order statistic chosen so
/// "keep on equality" lands exactly on the target count.
double threshold_for_expected_keep(std::vector<double> pooled,
                                   double expected_keep, std::size_t samples);

BMasker calibrate_b_masker(const ContributionStats& stats, double target_r);

Mask apply_b_masker(const BMasker& m, const DenseVector& Bx);

/// calib_hidden columns are Down-Projection inputs (hidden width h rows).
NeuronThresholdMasker calibrate_neuron_masker(const DenseMatrix& W_down,
                                              const DenseMatrix& calib_hidden,
                                              double target_active);

Mask apply_neuron_masker(const NeuronThresholdMasker& m, const DenseVector& x);

Mask apply_sigmoid_masker(const SigmoidMlpMasker& m, const DenseVector& x);

/// Keeps the k entries with largest (Bx_i)^2; ties broken by lower index.
Mask oracle_topk(const DenseVector& Bx, std::size_t k);

struct SigmoidTrainOptions {
  std::size_t inner_dim = 8;
  std::size_t epochs = 50;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct SigmoidTrainResult {
  SigmoidMlpMasker masker;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Fits sigma(C*D*x) to arbitrary binary labels (out x n) on inputs (in x n).
SigmoidTrainResult train_sigmoid_on_labels(const DenseMatrix& inputs,
                                           const DenseMatrix& labels,
                                           const SigmoidTrainOptions& opt);

/// Trains sigma(C*D*x) by binary cross-entropy against the B-masker's labels
/// 1{(Bx)^2 >= t} on the calibration set. Plain SGD with momentum, analytic
/// gradients, deterministic for a fixed seed.
SigmoidTrainResult train_sigmoid_masker(const BMasker& teacher,
                                        const RankDecomposition& dec,
                                        const CalibrationSet& calib,
                                        const SigmoidTrainOptions& opt);

/// Mean BCE over all (sample, output) pairs plus gradients; exposed so the
/// analytic gradient can be finite-difference checked.
double sigmoid_bce_loss_and_grads(const DenseMatrix& C, const DenseMatrix& D,
                                  const DenseMatrix& inputs,   // in x n
                                  const DenseMatrix& labels,   // out x n
                                  DenseMatrix* grad_C, DenseMatrix* grad_D);

double mask_popcount(const Mask& m);

}  // namespace rana

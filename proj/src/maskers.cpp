#include "rana/maskers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rana {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double threshold_for_expected_keep(std::vector<double> pooled,
                                   double expected_keep, std::size_t samples) {
  if (pooled.empty())
    throw NumericError("threshold_for_expected_keep: empty statistics");
  const std::size_t n = pooled.size();
  auto keep = static_cast<std::size_t>(
      std::llround(expected_keep * static_cast<double>(samples)));
  keep = std::min(std::max<std::size_t>(keep, 1), n);
  std::sort(pooled.begin(), pooled.end());
  return pooled[n - keep];
}

double mask_popcount(const Mask& m) {
  double c = 0.0;
  for (auto b : m) c += b ? 1.0 : 0.0;
  return c;
}

BMasker calibrate_b_masker(const ContributionStats& stats, double target_r) {
  const std::size_t D = stats.ranks(), k = stats.samples();
  if (target_r <= 0.0 || target_r > static_cast<double>(D))
    throw NumericError("calibrate_b_masker: target out of (0, D]");
  std::vector<double> pooled(stats.contributions.data());
  const double t = threshold_for_expected_keep(std::move(pooled), target_r, k);

  double active = 0.0;
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t j = 0; j < D; ++j)
      if (stats.contributions(j, s) >= t) active += 1.0;
  return BMasker{t, target_r, active / static_cast<double>(k), D};
}

Mask apply_b_masker(const BMasker& m, const DenseVector& Bx) {
  if (Bx.size() != m.ranks) throw ShapeError("apply_b_masker: length mismatch");
  Mask out(Bx.size());
  for (std::size_t j = 0; j < Bx.size(); ++j)
    out[j] = (Bx[j] * Bx[j] >= m.threshold) ? 1 : 0;
  return out;
}

NeuronThresholdMasker calibrate_neuron_masker(const DenseMatrix& W_down,
                                              const DenseMatrix& calib_hidden,
                                              double target_active) {
  const std::size_t h = W_down.cols();
  if (calib_hidden.rows() != h)
    throw ShapeError("calibrate_neuron_masker: hidden width mismatch");
  if (target_active <= 0.0 || target_active > static_cast<double>(h))
    throw NumericError("calibrate_neuron_masker: target out of (0, h]");

  DenseVector norms(h, 0.0);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    double s = 0.0;
    for (std::size_t r = 0; r < W_down.rows(); ++r)
      s += W_down(r, i) * W_down(r, i);
    norms[i] = std::sqrt(s);
    max_norm = std::max(max_norm, norms[i]);
  }
  if (max_norm == 0.0)
    throw NumericError("calibrate_neuron_masker: all row norms zero");

  const std::size_t k = calib_hidden.cols();
  std::vector<double> pooled;
  pooled.reserve(h * k);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t i = 0; i < h; ++i)
      pooled.push_back(std::abs(calib_hidden(i, s)) * norms[i]);
  const double t = threshold_for_expected_keep(pooled, target_active, k);

  double active = 0.0;
  for (double v : pooled)
    if (v >= t) active += 1.0;
  return NeuronThresholdMasker{t, std::move(norms), target_active,
                               active / static_cast<double>(k)};
}

Mask apply_neuron_masker(const NeuronThresholdMasker& m, const DenseVector& x) {
  if (x.size() != m.per_neuron_norms.size())
    throw ShapeError("apply_neuron_masker: length mismatch");
  Mask out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = (std::abs(x[i]) * m.per_neuron_norms[i] >= m.threshold) ? 1 : 0;
  return out;
}

Mask apply_sigmoid_masker(const SigmoidMlpMasker& m, const DenseVector& x) {
  DenseVector u = matvec(m.D, x);
  DenseVector z = matvec(m.C, u);
  Mask out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = (sigmoid(z[i]) >= m.decision_cutoff) ? 1 : 0;
  return out;
}

Mask oracle_topk(const DenseVector& Bx, std::size_t k) {
  if (k > Bx.size()) throw ShapeError("oracle_topk: k > length");
  std::vector<std::size_t> idx(Bx.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return Bx[a] * Bx[a] > Bx[b] * Bx[b];
  });
  Mask out(Bx.size(), 0);
  for (std::size_t j = 0; j < k; ++j) out[idx[j]] = 1;
  return out;
}

double sigmoid_bce_loss_and_grads(const DenseMatrix& C, const DenseMatrix& D,
                                  const DenseMatrix& inputs,
                                  const DenseMatrix& labels,
                                  DenseMatrix* grad_C, DenseMatrix* grad_D) {
  const std::size_t out = C.rows(), rp = C.cols(), in = D.cols();
  const std::size_t n = inputs.cols();
  if (D.rows() != rp || inputs.rows() != in || labels.rows() != out ||
      labels.cols() != n)
    throw ShapeError("sigmoid_bce_loss_and_grads: inconsistent shapes");

  if (grad_C) *grad_C = DenseMatrix(out, rp);
  if (grad_D) *grad_D = DenseMatrix(rp, in);
  const double scale = 1.0 / static_cast<double>(n * out);
  double loss = 0.0;

  DenseVector x(in), u(rp), z(out), delta(out), du(rp);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < in; ++i) x[i] = inputs(i, s);
    for (std::size_t r = 0; r < rp; ++r) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += D(r, i) * x[i];
      u[r] = acc;
    }
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t r = 0; r < rp; ++r) acc += C(o, r) * u[r];
      z[o] = acc;
      const double y = labels(o, s);
      // numerically stable BCE on logits
      const double zz = z[o];
      loss += scale * (std::max(zz, 0.0) - zz * y + std::log1p(std::exp(-std::abs(zz))));
      delta[o] = scale * (sigmoid(zz) - y);
    }
    if (grad_C)
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t r = 0; r < rp; ++r) (*grad_C)(o, r) += delta[o] * u[r];
    if (grad_D) {
      for (std::size_t r = 0; r < rp; ++r) {
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) acc += C(o, r) * delta[o];
        du[r] = acc;
      }
      for (std::size_t r = 0; r < rp; ++r)
        for (std::size_t i = 0; i < in; ++i) (*grad_D)(r, i) += du[r] * x[i];
    }
  }
  return loss;
}

SigmoidTrainResult train_sigmoid_on_labels(const DenseMatrix& inputs,
                                           const DenseMatrix& labels,
                                           const SigmoidTrainOptions& opt) {
  const std::size_t in = inputs.rows(), k = inputs.cols();
  const std::size_t D_out = labels.rows();
  if (labels.cols() != k)
    throw ShapeError("train_sigmoid_on_labels: sample count mismatch");
  if (opt.inner_dim < 1)
    throw NumericError("train_sigmoid_on_labels: inner_dim < 1");

  Rng rng(opt.seed);
  const double c_scale = 1.0 / std::sqrt(static_cast<double>(opt.inner_dim));
  const double d_scale = 1.0 / std::sqrt(static_cast<double>(in));
  DenseMatrix C(D_out, opt.inner_dim), Dm(opt.inner_dim, in);
  for (auto& v : C.mutable_data()) v = c_scale * rng.normal();
  for (auto& v : Dm.mutable_data()) v = d_scale * rng.normal();

  const double initial =
      sigmoid_bce_loss_and_grads(C, Dm, inputs, labels, nullptr, nullptr);

  DenseMatrix velC(D_out, opt.inner_dim), velD(opt.inner_dim, in);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    // Fisher-Yates with the shared deterministic stream
    for (std::size_t i = k; i > 1; --i)
      std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < k; start += opt.batch_size) {
      const std::size_t bs = std::min(opt.batch_size, k - start);
      DenseMatrix bx(in, bs), by(D_out, bs);
      for (std::size_t b = 0; b < bs; ++b) {
        const std::size_t s = order[start + b];
        for (std::size_t i = 0; i < in; ++i) bx(i, b) = inputs(i, s);
        for (std::size_t j = 0; j < D_out; ++j) by(j, b) = labels(j, s);
      }
      DenseMatrix gC, gD;
      const double l = sigmoid_bce_loss_and_grads(C, Dm, bx, by, &gC, &gD);
      if (!std::isfinite(l))
        throw NumericError("train_sigmoid_masker: loss diverged at epoch " +
                           std::to_string(epoch));
      for (std::size_t i = 0; i < velC.data().size(); ++i) {
        velC.mutable_data()[i] =
            opt.momentum * velC.data()[i] - opt.lr * gC.data()[i];
        C.mutable_data()[i] += velC.data()[i];
      }
      for (std::size_t i = 0; i < velD.data().size(); ++i) {
        velD.mutable_data()[i] =
            opt.momentum * velD.data()[i] - opt.lr * gD.data()[i];
        Dm.mutable_data()[i] += velD.data()[i];
      }
    }
  }

  const double final_loss =
      sigmoid_bce_loss_and_grads(C, Dm, inputs, labels, nullptr, nullptr);
  SigmoidMlpMasker m{std::move(C), std::move(Dm), opt.inner_dim, 0.5};
  return SigmoidTrainResult{std::move(m), initial, final_loss};
}

SigmoidTrainResult train_sigmoid_masker(const BMasker& teacher,
                                        const RankDecomposition& dec,
                                        const CalibrationSet& calib,
                                        const SigmoidTrainOptions& opt) {
  const std::size_t D_out = dec.ranks(), k = calib.samples();
  if (teacher.ranks != D_out)
    throw ShapeError("train_sigmoid_masker: teacher rank mismatch");
  DenseMatrix BX = matmul(dec.B, calib.X);
  DenseMatrix labels(D_out, k);
  for (std::size_t j = 0; j < D_out; ++j)
    for (std::size_t s = 0; s < k; ++s)
      labels(j, s) = (BX(j, s) * BX(j, s) >= teacher.threshold) ? 1.0 : 0.0;
  return train_sigmoid_on_labels(calib.X, labels, opt);
}

}  // namespace rana

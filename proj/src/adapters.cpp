#include "rana/adapters.hpp"

#include <cmath>

namespace rana {

double silu(double z) { return z / (1.0 + std::exp(-z)); }

double gelu_tanh(double z) {
  // 0.5 z (1 + tanh(sqrt(2/pi) (z + 0.044715 z^3)))
  const double kSqrt2OverPi = 0.7978845608028654;
  const double kCubic = 0.044715;
  return 0.5 * z * (1.0 + std::tanh(kSqrt2OverPi * (z + kCubic * z * z * z)));
}

double apply_activation(Activation act, double z) {
  switch (act) {
    case Activation::SiLU: return silu(z);
    case Activation::GeLU: return gelu_tanh(z);
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
  }
  return z;
}

DenseVector forward_rank_adapted(const RankAdaptedLinear& layer,
                                 const DenseVector& x, FlopCounter* counter) {
  const auto& dec = layer.dec;
  if (x.size() != dec.in_dim)
    throw ShapeError("forward_rank_adapted: input length mismatch");
  const std::size_t D = dec.ranks(), o = dec.out_dim, i = dec.in_dim;

  Mask mask;
  DenseVector bx;
  if (layer.sigmoid_masker) {
    mask = apply_sigmoid_masker(*layer.sigmoid_masker, x);
    if (mask.size() != D)
      throw ShapeError("forward_rank_adapted: masker width != ranks");
    if (counter) {
      const double rp = static_cast<double>(layer.sigmoid_masker->inner_dim);
      counter->count(2.0 * rp * i + 2.0 * D * rp + D);
    }
    bx.assign(D, 0.0);
    double active = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      if (!mask[j]) continue;
      double acc = 0.0;
      const double* row = dec.B.row_ptr(j);
      for (std::size_t c = 0; c < i; ++c) acc += row[c] * x[c];
      bx[j] = acc;
      active += 1.0;
    }
    if (counter) counter->count(2.0 * active * i);
  } else {
    bx = matvec(dec.B, x);
    if (counter) counter->count(2.0 * D * i);
    if (layer.b_masker) {
      mask = apply_b_masker(*layer.b_masker, bx);
      if (counter) counter->count(2.0 * D);
    } else {
      mask.assign(D, 1);
    }
  }

  DenseVector y(o, 0.0);
  double active = 0.0;
  for (std::size_t j = 0; j < D; ++j) {
    if (!mask[j]) continue;
    const double s = bx[j];
    for (std::size_t r = 0; r < o; ++r) y[r] += s * dec.A(r, j);
    active += 1.0;
  }
  if (counter) counter->count(2.0 * static_cast<double>(o) * active);
  return y;
}

DenseVector forward_dense_mlp(const MlpWeights& w, const DenseVector& x) {
  DenseVector u = matvec(w.up, x);
  DenseVector h(u.size());
  if (w.gate) {
    DenseVector g = matvec(*w.gate, x);
    for (std::size_t i = 0; i < h.size(); ++i)
      h[i] = apply_activation(w.activation, g[i]) * u[i];
  } else {
    for (std::size_t i = 0; i < h.size(); ++i)
      h[i] = apply_activation(w.activation, u[i]);
  }
  return matvec(w.down, h);
}

DenseVector forward_rana_mlp(const RanaMlp& mlp, const DenseVector& x,
                             FlopCounter* counter) {
  DenseVector u = forward_rank_adapted(mlp.up, x, counter);
  DenseVector h(u.size());
  if (mlp.gate) {
    DenseVector g = forward_rank_adapted(*mlp.gate, x, counter);
    if (g.size() != u.size()) throw ShapeError("forward_rana_mlp: width mismatch");
    for (std::size_t i = 0; i < h.size(); ++i)
      h[i] = apply_activation(mlp.activation, g[i]) * u[i];
    if (counter) counter->count(2.0 * static_cast<double>(h.size()));
  } else {
    for (std::size_t i = 0; i < h.size(); ++i)
      h[i] = apply_activation(mlp.activation, u[i]);
    if (counter) counter->count(static_cast<double>(h.size()));
  }

  Mask mask;
  if (mlp.down_masker) {
    mask = apply_neuron_masker(*mlp.down_masker, h);
    if (counter) counter->count(3.0 * static_cast<double>(h.size()));
  } else {
    mask.assign(h.size(), 1);
  }

  const std::size_t d = mlp.down_weights.rows();
  DenseVector y(d, 0.0);
  double active = 0.0;
  for (std::size_t c = 0; c < h.size(); ++c) {
    if (!mask[c]) continue;
    const double s = h[c];
    for (std::size_t r = 0; r < d; ++r) y[r] += s * mlp.down_weights(r, c);
    active += 1.0;
  }
  if (counter) counter->count(2.0 * static_cast<double>(d) * active);
  return y;
}

Prop1Construction build_prop1_equivalent(const DenseMatrix& W_up,
                                         const DenseMatrix& W_down) {
  if (W_down.cols() != W_up.rows())
    throw ShapeError("build_prop1_equivalent: hidden width mismatch");
  const std::size_t h = W_up.rows();
  return Prop1Construction{DenseMatrix::identity(h), W_up, W_down,
                           DenseMatrix::identity(h)};
}

DenseVector forward_prop1(const Prop1Construction& c, const Mask& neuron_mask,
                          const DenseVector& x) {
  DenseVector inner = matvec(c.b_up, x);  // r_up ≡ 1
  DenseVector pre = matvec(c.a_up, inner);
  for (auto& v : pre) v = v > 0.0 ? v : 0.0;  // ReLU
  DenseVector bd = matvec(c.b_down, pre);
  if (neuron_mask.size() != bd.size())
    throw ShapeError("forward_prop1: mask length mismatch");
  for (std::size_t i = 0; i < bd.size(); ++i)
    if (!neuron_mask[i]) bd[i] = 0.0;
  return matvec(c.a_down, bd);
}

DenseVector neuron_adapted_relu_forward(const DenseMatrix& W_up,
                                        const DenseMatrix& W_down,
                                        const Mask& neuron_mask,
                                        const DenseVector& x) {
  DenseVector h = matvec(W_up, x);
  for (auto& v : h) v = v > 0.0 ? v : 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (!neuron_mask[i]) h[i] = 0.0;
  return matvec(W_down, h);
}

CatsAdapter calibrate_cats(const MlpWeights& w, const CalibrationSet& calib,
                           double target_active) {
  if (!w.gate) throw ShapeError("calibrate_cats: requires a gated MLP");
  const std::size_t h = w.gate->rows(), k = calib.samples();
  if (target_active <= 0.0 || target_active > static_cast<double>(h))
    throw NumericError("calibrate_cats: target out of (0, h]");
  DenseMatrix G = matmul(*w.gate, calib.X);
  std::vector<double> pooled;
  pooled.reserve(h * k);
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t i = 0; i < h; ++i)
      pooled.push_back(std::abs(apply_activation(w.activation, G(i, s))));
  const double t = threshold_for_expected_keep(pooled, target_active, k);
  double active = 0.0;
  for (double v : pooled)
    if (v >= t) active += 1.0;
  return CatsAdapter{w, t, target_active, active / static_cast<double>(k)};
}

DenseVector forward_cats(const CatsAdapter& a, const DenseVector& x,
                         FlopCounter* counter) {
  const auto& w = a.weights;
  const std::size_t h = w.gate->rows(), i = w.up.cols(),
                    d = w.down.rows();
  DenseVector g = matvec(*w.gate, x);
  if (counter) counter->count(2.0 * static_cast<double>(h) * i);
  DenseVector act(h);
  for (std::size_t n = 0; n < h; ++n)
    act[n] = apply_activation(w.activation, g[n]);
  if (counter) counter->count(static_cast<double>(h));

  DenseVector y(d, 0.0);
  double active = 0.0;
  for (std::size_t n = 0; n < h; ++n) {
    if (std::abs(act[n]) < a.threshold) continue;  // keep on equality
    double u = 0.0;
    const double* row = w.up.row_ptr(n);
    for (std::size_t c = 0; c < i; ++c) u += row[c] * x[c];
    const double hn = act[n] * u;
    for (std::size_t r = 0; r < d; ++r) y[r] += hn * w.down(r, n);
    active += 1.0;
  }
  // compare (h) + per-active: up row (2i), product (1), down column (2d)
  if (counter)
    counter->count(static_cast<double>(h) +
                   active * (2.0 * i + 1.0 + 2.0 * static_cast<double>(d)));
  return y;
}

DenseVector forward_neuron_adapter(const NeuronAdapterMlp& a,
                                   const DenseVector& x, FlopCounter* counter) {
  const auto& w = a.weights;
  const std::size_t h = w.up.rows(), i = w.up.cols(), d = w.down.rows();
  Mask mask = apply_sigmoid_masker(a.masker, x);
  if (mask.size() != h)
    throw ShapeError("forward_neuron_adapter: masker width mismatch");
  if (counter) {
    const double rp = static_cast<double>(a.masker.inner_dim);
    counter->count(2.0 * rp * i + 2.0 * h * rp + h);
  }
  DenseVector y(d, 0.0);
  double active = 0.0;
  for (std::size_t n = 0; n < h; ++n) {
    if (!mask[n]) continue;
    double u = 0.0;
    const double* urow = w.up.row_ptr(n);
    for (std::size_t c = 0; c < i; ++c) u += urow[c] * x[c];
    double hn;
    if (w.gate) {
      double g = 0.0;
      const double* grow = w.gate->row_ptr(n);
      for (std::size_t c = 0; c < i; ++c) g += grow[c] * x[c];
      hn = apply_activation(w.activation, g) * u;
      if (counter) counter->count(4.0 * i + 2.0);
    } else {
      hn = apply_activation(w.activation, u);
      if (counter) counter->count(2.0 * i + 1.0);
    }
    for (std::size_t r = 0; r < d; ++r) y[r] += hn * w.down(r, n);
    if (counter) counter->count(2.0 * static_cast<double>(d));
    active += 1.0;
  }
  (void)active;
  return y;
}

RankAdaptedLinear make_fixed_svd(const RankDecomposition& dec, std::size_t r) {
  return RankAdaptedLinear{dec.truncated(r), std::nullopt, std::nullopt};
}

}  // namespace rana

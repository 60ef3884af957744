#include "rana/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rana {

ErrorReport measure_layer_error(const Forward& original, const Forward& adapted,
                                const DenseMatrix& eval_inputs,
                                const std::string& name) {
  ErrorReport rep;
  rep.adapter = name;
  std::vector<double> errors;
  DenseVector x(eval_inputs.rows());
  for (std::size_t s = 0; s < eval_inputs.cols(); ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = eval_inputs(i, s);
    DenseVector y = original(x);
    const double denom = norm_sq(y);
    if (denom == 0.0) {
      ++rep.skipped_zero_outputs;
      continue;
    }
    DenseVector yp = adapted(x);
    double num = 0.0;
    for (std::size_t r = 0; r < y.size(); ++r) {
      const double d = y[r] - yp[r];
      num += d * d;
    }
    errors.push_back(num / denom);
  }
  if (errors.empty()) return rep;
  double sum = 0.0;
  for (double e : errors) sum += e;
  rep.mean_normalized_error = sum / static_cast<double>(errors.size());
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  rep.median_normalized_error = sorted[sorted.size() / 2];
  rep.max_normalized_error = sorted.back();
  return rep;
}

SparsityHistogram build_sparsity_histogram(const ContributionStats& stats,
                                           std::size_t bins) {
  if (bins < 2) throw NumericError("build_sparsity_histogram: bins < 2");
  const std::size_t D = stats.ranks(), k = stats.samples();

  std::vector<double> normalized;
  normalized.reserve(D * k);
  double top_half = 0.0;
  std::size_t scored_cols = 0;
  std::vector<double> col(D);
  for (std::size_t s = 0; s < k; ++s) {
    double sum = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      col[j] = stats.contributions(j, s);
      sum += col[j];
    }
    if (sum <= 0.0) {
      for (std::size_t j = 0; j < D; ++j) normalized.push_back(0.0);
      continue;
    }
    for (std::size_t j = 0; j < D; ++j) normalized.push_back(col[j] / sum);
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double kept = 0.0;
    const std::size_t half = (D + 1) / 2;
    for (std::size_t j = 0; j < half; ++j) kept += sorted[j];
    top_half += kept / sum;
    ++scored_cols;
  }

  // log-spaced edges over (floor, 1]; a first edge at 0 catches the mass
  // concentrated near zero
  const double floor_val = 1e-12;
  SparsityHistogram h;
  h.bin_edges.resize(bins + 1);
  h.bin_edges[0] = 0.0;
  const double lmin = std::log10(floor_val), lmax = 0.0;
  for (std::size_t b = 1; b <= bins; ++b)
    h.bin_edges[b] = std::pow(
        10.0, lmin + (lmax - lmin) * static_cast<double>(b - 1) /
                         static_cast<double>(bins - 1));
  h.counts.assign(bins, 0);
  for (double v : normalized) {
    auto it = std::upper_bound(h.bin_edges.begin() + 1, h.bin_edges.end(), v);
    std::size_t idx = static_cast<std::size_t>(it - h.bin_edges.begin());
    if (idx == 0) idx = 1;
    if (idx > bins) idx = bins;
    ++h.counts[idx - 1];
  }
  h.top_half_mass = scored_cols ? top_half / static_cast<double>(scored_cols) : 0.0;
  return h;
}

std::string histogram_csv(const SparsityHistogram& h) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b + 1 < h.bin_edges.size(); ++b)
    os << h.bin_edges[b] << "," << h.bin_edges[b + 1] << "," << h.counts[b]
       << "\n";
  return os.str();
}

std::pair<DenseMatrix, DenseMatrix> split_calibration(const DenseMatrix& X,
                                                      std::uint64_t seed,
                                                      double calib_fraction) {
  const std::size_t k = X.cols();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = k; i > 1; --i)
    std::swap(order[i - 1], order[rng.index(i)]);
  const std::size_t nc = std::max<std::size_t>(
      1, static_cast<std::size_t>(calib_fraction * static_cast<double>(k)));
  const std::size_t ne = k - nc;
  if (ne == 0) throw NumericError("split_calibration: no held-out samples");
  DenseMatrix C(X.rows(), nc), E(X.rows(), ne);
  for (std::size_t s = 0; s < nc; ++s)
    for (std::size_t r = 0; r < X.rows(); ++r) C(r, s) = X(r, order[s]);
  for (std::size_t s = 0; s < ne; ++s)
    for (std::size_t r = 0; r < X.rows(); ++r) E(r, s) = X(r, order[nc + s]);
  return {std::move(C), std::move(E)};
}

DenseMatrix anisotropic_inputs(std::size_t dim, std::size_t samples, Rng& rng,
                               double decay) {
  DenseMatrix L = random_matrix(dim, dim, rng);
  double scale = 1.0;
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t r = 0; r < dim; ++r) L(r, c) *= scale;
    scale *= decay;
  }
  DenseMatrix Z = random_matrix(dim, samples, rng);
  return matmul(L, Z);
}

std::vector<ErrorReport> compare_adapters(const MlpWeights& w,
                                          double budget_fraction,
                                          const std::vector<BaselineKind>& kinds,
                                          const CalibrationSet& calib,
                                          const DenseMatrix& eval_inputs,
                                          std::uint64_t seed) {
  const MlpShape shape = w.shape();
  const FlopCount dense = dense_mlp_flops(shape);
  const double budget = budget_fraction * dense.total;
  const std::size_t i = shape.in_dim, h = shape.hidden_dim,
                    d = w.down.rows();

  Forward dense_fwd = [&](const DenseVector& x) {
    return forward_dense_mlp(w, x);
  };

  std::vector<ErrorReport> rows;

  // RaNA row first: the comparison anchor.
  MlpDecompositions pre = prepare_mlp(w, calib);
  {
    ErrorReport rep;
    rep.adapter = "rana";
    try {
      MlpAllocation alloc = grid_search_mlp(w, pre, calib, budget);
      RanaMlp mlp = build_rana_mlp(w, pre, alloc);
      rep = measure_layer_error(
          dense_fwd,
          [&](const DenseVector& x) { return forward_rana_mlp(mlp, x); },
          eval_inputs, "rana");
      rep.flop_compression = compression_rate(alloc.achieved_flops, dense);
    } catch (const InfeasibleBudget&) {
      rep.infeasible = true;
    }
    rows.push_back(rep);
  }

  for (BaselineKind kind : kinds) {
    ErrorReport rep;
    switch (kind) {
      case BaselineKind::CatsLike: {
        rep.adapter = "cats";
        if (!w.gate) {
          rep.infeasible = true;
          break;
        }
        const double gate_cost = 2.0 * static_cast<double>(h) * i +
                                 2.0 * static_cast<double>(h);
        const double per_active = 2.0 * static_cast<double>(i) + 1.0 +
                                  2.0 * static_cast<double>(d);
        double target = (budget - gate_cost) / per_active;
        if (target <= 0.0) {
          rep.infeasible = true;
          break;
        }
        target = std::min(target, static_cast<double>(h));
        CatsAdapter cats = calibrate_cats(w, calib, target);
        rep = measure_layer_error(
            dense_fwd,
            [&](const DenseVector& x) { return forward_cats(cats, x); },
            eval_inputs, "cats");
        FlopCount f;
        f.add("gate", gate_cost);
        f.add("active", target * per_active);
        rep.flop_compression = compression_rate(f, dense);
        break;
      }
      case BaselineKind::NeuronAdapter: {
        rep.adapter = "neuron";
        // masker sized to ~6% of dense MLP FLOPs, both masker matmuls counted
        const double masker_budget = 0.06 * dense.total;
        std::size_t rp = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   (masker_budget - static_cast<double>(h)) /
                   (2.0 * static_cast<double>(i + h))));
        const double masker_cost = 2.0 * static_cast<double>(rp) * i +
                                   2.0 * static_cast<double>(h) * rp +
                                   static_cast<double>(h);
        const double per_active =
            w.gate ? 4.0 * static_cast<double>(i) + 2.0 +
                         2.0 * static_cast<double>(d)
                   : 2.0 * static_cast<double>(i) + 1.0 +
                         2.0 * static_cast<double>(d);
        double target = (budget - masker_cost) / per_active;
        if (target <= 0.0) {
          rep.infeasible = true;
          break;
        }
        target = std::min(target, static_cast<double>(h));
        NeuronThresholdMasker teacher =
            calibrate_neuron_masker(w.down, [&] {
              // dense Down inputs as teacher statistics
              return pre.hidden;
            }(), target);
        DenseMatrix labels(h, calib.samples());
        for (std::size_t n = 0; n < h; ++n)
          for (std::size_t s = 0; s < calib.samples(); ++s)
            labels(n, s) = (std::abs(pre.hidden(n, s)) *
                                teacher.per_neuron_norms[n] >=
                            teacher.threshold)
                               ? 1.0
                               : 0.0;
        SigmoidTrainOptions opt;
        opt.inner_dim = rp;
        opt.epochs = 30;
        opt.seed = seed;
        SigmoidTrainResult trained =
            train_sigmoid_on_labels(calib.X, labels, opt);
        NeuronAdapterMlp adapter{w, std::move(trained.masker)};
        rep = measure_layer_error(
            dense_fwd,
            [&](const DenseVector& x) {
              return forward_neuron_adapter(adapter, x);
            },
            eval_inputs, "neuron");
        FlopCount f;
        f.add("masker", masker_cost);
        f.add("active", target * per_active);
        rep.flop_compression = compression_rate(f, dense);
        break;
      }
      case BaselineKind::FixedSvd: {
        rep.adapter = "fixed_svd";
        // dense Down product reserved, remaining budget split into static
        // ranks across Up/Gate
        const std::size_t parts = w.gate ? 2 : 1;
        const double per_rank =
            2.0 * (static_cast<double>(h) + static_cast<double>(i));
        std::size_t r = static_cast<std::size_t>(
            (budget - 2.0 * static_cast<double>(i) * h) /
            (static_cast<double>(parts) * per_rank));
        if (r < 1) {
          rep.infeasible = true;
          break;
        }
        r = std::min(r, pre.up.ranks());
        RankAdaptedLinear up = make_fixed_svd(pre.up, r);
        std::optional<RankAdaptedLinear> gate;
        if (w.gate)
          gate = make_fixed_svd(*pre.gate, std::min(r, pre.gate->ranks()));
        RanaMlp mlp{std::move(up), std::move(gate), w.down, std::nullopt,
                    w.activation};
        rep = measure_layer_error(
            dense_fwd,
            [&](const DenseVector& x) { return forward_rana_mlp(mlp, x); },
            eval_inputs, "fixed_svd");
        FlopCount f;
        f.add("ranks", static_cast<double>(parts) * per_rank *
                           static_cast<double>(r));
        f.add("down", 2.0 * static_cast<double>(i) * h);
        rep.flop_compression = compression_rate(f, dense);
        break;
      }
    }
    rows.push_back(rep);
  }
  return rows;
}

std::string error_table_csv(const std::vector<ErrorReport>& rows) {
  std::ostringstream os;
  os << "adapter,mean_error,median_error,max_error,skipped,flop_compression,"
        "infeasible\n";
  for (const auto& r : rows)
    os << r.adapter << "," << r.mean_normalized_error << ","
       << r.median_normalized_error << "," << r.max_normalized_error << ","
       << r.skipped_zero_outputs << "," << r.flop_compression << ","
       << (r.infeasible ? 1 : 0) << "\n";
  return os.str();
}

MlpWeights train_toy_swiglu(std::size_t in_dim, std::size_t hidden_dim,
                            std::uint64_t seed, std::size_t steps) {
  Rng rng(seed);
  const double wscale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  const double dscale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));

  // frozen teacher providing structured targets
  MlpWeights teacher{random_matrix(hidden_dim, in_dim, rng),
                     random_matrix(hidden_dim, in_dim, rng),
                     random_matrix(in_dim, hidden_dim, rng), Activation::SiLU};
  for (auto& v : teacher.up.mutable_data()) v *= wscale;
  for (auto& v : teacher.gate->mutable_data()) v *= wscale;
  for (auto& v : teacher.down.mutable_data()) v *= dscale;

  MlpWeights student{random_matrix(hidden_dim, in_dim, rng),
                     random_matrix(hidden_dim, in_dim, rng),
                     random_matrix(in_dim, hidden_dim, rng), Activation::SiLU};
  for (auto& v : student.up.mutable_data()) v *= wscale;
  for (auto& v : student.gate->mutable_data()) v *= wscale;
  for (auto& v : student.down.mutable_data()) v *= dscale;

  const std::size_t batch = 16;
  const double lr = 0.05;
  DenseVector x(in_dim);
  for (std::size_t step = 0; step < steps; ++step) {
    DenseMatrix gu(hidden_dim, in_dim), gg(hidden_dim, in_dim),
        gd(in_dim, hidden_dim);
    DenseMatrix bx = anisotropic_inputs(in_dim, batch, rng);
    for (std::size_t s = 0; s < batch; ++s) {
      for (std::size_t i = 0; i < in_dim; ++i) x[i] = bx(i, s);
      DenseVector target = forward_dense_mlp(teacher, x);
      DenseVector u = matvec(student.up, x);
      DenseVector g = matvec(*student.gate, x);
      DenseVector h(hidden_dim), sg(hidden_dim);
      for (std::size_t n = 0; n < hidden_dim; ++n) {
        sg[n] = silu(g[n]);
        h[n] = sg[n] * u[n];
      }
      DenseVector y = matvec(student.down, h);
      DenseVector dy(in_dim);
      const double scale = 2.0 / static_cast<double>(batch * in_dim);
      for (std::size_t r = 0; r < in_dim; ++r)
        dy[r] = scale * (y[r] - target[r]);
      // backprop through Down, the gate product and SiLU
      DenseVector dh(hidden_dim, 0.0);
      for (std::size_t r = 0; r < in_dim; ++r)
        for (std::size_t n = 0; n < hidden_dim; ++n) {
          gd(r, n) += dy[r] * h[n];
          dh[n] += student.down(r, n) * dy[r];
        }
      for (std::size_t n = 0; n < hidden_dim; ++n) {
        const double du = dh[n] * sg[n];
        const double sig = 1.0 / (1.0 + std::exp(-g[n]));
        const double dsilu = sig * (1.0 + g[n] * (1.0 - sig));
        const double dg = dh[n] * u[n] * dsilu;
        for (std::size_t i = 0; i < in_dim; ++i) {
          gu(n, i) += du * x[i];
          gg(n, i) += dg * x[i];
        }
      }
    }
    // clip the global gradient norm; a handful of seeds diverge without it
    double gnorm_sq = 0.0;
    for (double v : gu.data()) gnorm_sq += v * v;
    for (double v : gg.data()) gnorm_sq += v * v;
    for (double v : gd.data()) gnorm_sq += v * v;
    const double clip = 1.0;
    const double gscale =
        gnorm_sq > clip * clip ? clip / std::sqrt(gnorm_sq) : 1.0;
    for (std::size_t idx = 0; idx < gu.data().size(); ++idx)
      student.up.mutable_data()[idx] -= lr * gscale * gu.data()[idx];
    for (std::size_t idx = 0; idx < gg.data().size(); ++idx)
      student.gate->mutable_data()[idx] -= lr * gscale * gg.data()[idx];
    for (std::size_t idx = 0; idx < gd.data().size(); ++idx)
      student.down.mutable_data()[idx] -= lr * gscale * gd.data()[idx];
  }
  return student;
}

namespace {

struct ToyBlock {
  DenseMatrix qkv;  // 3w x w
  DenseMatrix out;  // w x w
  MlpWeights mlp;
};

struct ToyTransformer {
  std::vector<ToyBlock> blocks;
  DenseMatrix head;  // w x w
  std::size_t width;
};

ToyTransformer make_toy_transformer(const ToyTransformerConfig& cfg) {
  Rng rng(cfg.seed);
  const std::size_t w = cfg.width;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(w));
  ToyTransformer model;
  model.width = w;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    ToyBlock blk{random_matrix(3 * w, w, rng), random_matrix(w, w, rng),
                 MlpWeights{random_matrix(2 * w, w, rng),
                            random_matrix(2 * w, w, rng),
                            random_matrix(w, 2 * w, rng), Activation::SiLU}};
    for (auto& v : blk.qkv.mutable_data()) v *= s1;
    for (auto& v : blk.out.mutable_data()) v *= s1;
    for (auto& v : blk.mlp.up.mutable_data()) v *= s1;
    for (auto& v : blk.mlp.gate->mutable_data()) v *= s1;
    for (auto& v : blk.mlp.down.mutable_data())
      v *= 1.0 / std::sqrt(2.0 * static_cast<double>(w));
    model.blocks.push_back(std::move(blk));
  }
  model.head = random_matrix(w, w, rng);
  for (auto& v : model.head.mutable_data()) v *= s1;
  return model;
}

// Single-head causal attention over the sequence; only the QKV projection is
// replaceable, the score computation always runs dense.
std::vector<DenseVector> attention(const std::vector<DenseVector>& qkv_cols,
                                   std::size_t w) {
  const std::size_t T = qkv_cols.size();
  std::vector<DenseVector> out(T, DenseVector(w, 0.0));
  const double scale = 1.0 / std::sqrt(static_cast<double>(w));
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> scores(t + 1);
    double max_s = -1e300;
    for (std::size_t s = 0; s <= t; ++s) {
      double dot_qk = 0.0;
      for (std::size_t i = 0; i < w; ++i)
        dot_qk += qkv_cols[t][i] * qkv_cols[s][w + i];
      scores[s] = dot_qk * scale;
      max_s = std::max(max_s, scores[s]);
    }
    double z = 0.0;
    for (std::size_t s = 0; s <= t; ++s) {
      scores[s] = std::exp(scores[s] - max_s);
      z += scores[s];
    }
    for (std::size_t s = 0; s <= t; ++s) {
      const double a = scores[s] / z;
      for (std::size_t i = 0; i < w; ++i)
        out[t][i] += a * qkv_cols[s][2 * w + i];
    }
  }
  return out;
}

using LinearFn = std::function<DenseVector(std::size_t block, const DenseVector&)>;
using MlpFn = std::function<DenseVector(std::size_t block, const DenseVector&)>;

// Runs the model over one sequence; optionally records the per-block inputs
// seen by the QKV and MLP linears.
DenseVector run_toy(const ToyTransformer& model,
                    const std::vector<DenseVector>& inputs,
                    const LinearFn& qkv_fn, const MlpFn& mlp_fn,
                    std::vector<std::vector<DenseVector>>* qkv_inputs,
                    std::vector<std::vector<DenseVector>>* mlp_inputs,
                    std::vector<std::vector<DenseVector>>* block_outputs) {
  const std::size_t w = model.width, T = inputs.size();
  std::vector<DenseVector> x = inputs;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    std::vector<DenseVector> qkv_cols(T);
    for (std::size_t t = 0; t < T; ++t) {
      if (qkv_inputs) (*qkv_inputs)[b].push_back(x[t]);
      qkv_cols[t] = qkv_fn(b, x[t]);
    }
    std::vector<DenseVector> att = attention(qkv_cols, w);
    for (std::size_t t = 0; t < T; ++t) {
      DenseVector o = matvec(model.blocks[b].out, att[t]);
      for (std::size_t i = 0; i < w; ++i) x[t][i] += o[i];
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (mlp_inputs) (*mlp_inputs)[b].push_back(x[t]);
      DenseVector m = mlp_fn(b, x[t]);
      for (std::size_t i = 0; i < w; ++i) x[t][i] += m[i];
      if (block_outputs) (*block_outputs)[b].push_back(x[t]);
    }
  }
  return matvec(model.head, x[T - 1]);
}

DenseMatrix columns_to_matrix(const std::vector<DenseVector>& cols) {
  DenseMatrix m(cols[0].size(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = cols[c][r];
  return m;
}

}  // namespace

DivergenceReport toy_model_divergence(const ToyTransformerConfig& cfg,
                                      double compression,
                                      std::size_t eval_sequences) {
  if (cfg.blocks > 4 || cfg.width > 128)
    throw NumericError("toy_model_divergence: model exceeds desk scale");
  ToyTransformer model = make_toy_transformer(cfg);
  const std::size_t w = cfg.width, T = cfg.seq_len;
  Rng rng(cfg.seed + 1);

  auto dense_qkv = [&](std::size_t b, const DenseVector& x) {
    return matvec(model.blocks[b].qkv, x);
  };
  auto dense_mlp = [&](std::size_t b, const DenseVector& x) {
    return forward_dense_mlp(model.blocks[b].mlp, x);
  };

  const std::size_t calib_sequences = 16;
  std::vector<std::vector<DenseVector>> qkv_in(cfg.blocks), mlp_in(cfg.blocks);
  for (std::size_t s = 0; s < calib_sequences; ++s) {
    std::vector<DenseVector> seq(T);
    for (auto& v : seq) v = random_vector(w, rng);
    run_toy(model, seq, dense_qkv, dense_mlp, &qkv_in, &mlp_in, nullptr);
  }

  DivergenceReport rep;
  rep.compression = compression;
  const double budget_fraction = 1.0 - compression;

  std::vector<RankAdaptedLinear> qkv_adapters;
  std::vector<RanaMlp> mlp_adapters;
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    CalibrationSet qkv_calib{columns_to_matrix(qkv_in[b])};
    RankDecomposition dec = decompose(model.blocks[b].qkv, qkv_calib);
    ContributionStats stats = rank_contributions(dec, qkv_calib);
    if (compression <= 0.0) {
      qkv_adapters.push_back(
          RankAdaptedLinear{std::move(dec), std::nullopt, std::nullopt});
    } else {
      const double budget =
          budget_fraction * dense_linear_flops(3 * w, w).total;
      LayerAllocation alloc =
          line_search_layer(model.blocks[b].qkv, dec, stats, qkv_calib, budget);
      qkv_adapters.push_back(build_rank_adapted(dec, stats, alloc));
    }

    CalibrationSet mlp_calib{columns_to_matrix(mlp_in[b])};
    MlpDecompositions pre = prepare_mlp(model.blocks[b].mlp, mlp_calib);
    if (compression <= 0.0) {
      mlp_adapters.push_back(RanaMlp{
          RankAdaptedLinear{pre.up, std::nullopt, std::nullopt},
          RankAdaptedLinear{*pre.gate, std::nullopt, std::nullopt},
          model.blocks[b].mlp.down, std::nullopt, Activation::SiLU});
    } else {
      const double budget =
          budget_fraction * dense_mlp_flops(model.blocks[b].mlp.shape()).total;
      MlpAllocation alloc =
          grid_search_mlp(model.blocks[b].mlp, pre, mlp_calib, budget);
      mlp_adapters.push_back(build_rana_mlp(model.blocks[b].mlp, pre, alloc));
    }
  }

  auto adapted_qkv = [&](std::size_t b, const DenseVector& x) {
    return forward_rank_adapted(qkv_adapters[b], x);
  };
  auto adapted_mlp = [&](std::size_t b, const DenseVector& x) {
    return forward_rana_mlp(mlp_adapters[b], x);
  };

  rep.per_block_error.assign(cfg.blocks, 0.0);
  double dev_sum = 0.0;
  Rng eval_rng(cfg.seed + 2);
  for (std::size_t s = 0; s < eval_sequences; ++s) {
    std::vector<DenseVector> seq(T);
    for (auto& v : seq) v = random_vector(w, eval_rng);
    std::vector<std::vector<DenseVector>> dense_blocks(cfg.blocks),
        adapted_blocks(cfg.blocks);
    DenseVector logits =
        run_toy(model, seq, dense_qkv, dense_mlp, nullptr, nullptr, &dense_blocks);
    DenseVector logits_a = run_toy(model, seq, adapted_qkv, adapted_mlp,
                                   nullptr, nullptr, &adapted_blocks);
    double num = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
      const double d = logits[i] - logits_a[i];
      num += d * d;
    }
    dev_sum += std::sqrt(num / std::max(norm_sq(logits), 1e-300));
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
      double be = 0.0, bn = 0.0;
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t i = 0; i < w; ++i) {
          const double d = dense_blocks[b][t][i] - adapted_blocks[b][t][i];
          be += d * d;
          bn += dense_blocks[b][t][i] * dense_blocks[b][t][i];
        }
      }
      rep.per_block_error[b] +=
          std::sqrt(be / std::max(bn, 1e-300)) / static_cast<double>(eval_sequences);
    }
  }
  rep.mean_logit_deviation = dev_sum / static_cast<double>(eval_sequences);
  return rep;
}

}  // namespace rana

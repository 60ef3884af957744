#include "rana/allocation.hpp"

#include <algorithm>
#include <cmath>

namespace rana {

namespace {

ContributionStats truncate_stats(const ContributionStats& stats, std::size_t D) {
  const std::size_t k = stats.samples();
  DenseMatrix c(D, k);
  DenseVector mean(D);
  for (std::size_t j = 0; j < D; ++j) {
    for (std::size_t s = 0; s < k; ++s) c(j, s) = stats.contributions(j, s);
    mean[j] = stats.mean_energy[j];
  }
  return ContributionStats{std::move(c), std::move(mean)};
}

std::vector<std::size_t> rank_schedule(std::size_t d_max) {
  std::vector<std::size_t> sched;
  if (d_max <= 256) {
    for (std::size_t d = 1; d <= d_max; ++d) sched.push_back(d);
    return sched;
  }
  const std::size_t points = 64;
  double ratio = std::pow(static_cast<double>(d_max), 1.0 / (points - 1));
  double v = 1.0;
  for (std::size_t p = 0; p < points; ++p) {
    auto d = static_cast<std::size_t>(std::lround(v));
    d = std::min(std::max<std::size_t>(d, 1), d_max);
    if (sched.empty() || sched.back() != d) sched.push_back(d);
    v *= ratio;
  }
  if (sched.back() != d_max) sched.push_back(d_max);
  return sched;
}

BMasker saturated_b_masker(std::size_t D) {
  return BMasker{0.0, static_cast<double>(D), static_cast<double>(D), D};
}

}  // namespace

LayerAllocation line_search_layer(const DenseMatrix& W,
                                  const RankDecomposition& dec,
                                  const ContributionStats& stats,
                                  const CalibrationSet& calib, double budget) {
  const std::size_t o = dec.out_dim, i = dec.in_dim, d_max = dec.ranks();
  const std::size_t k = stats.samples();
  const double min_feasible = 2.0 * static_cast<double>(i) + 2.0;
  if (budget < min_feasible)
    throw InfeasibleBudget("line_search_layer: budget " + std::to_string(budget) +
                               " below minimum feasible " +
                               std::to_string(min_feasible),
                           min_feasible);

  // ||Wx - A_D (m ⊙ Bx)||^2 = base + dropped-rank energy + masked-out energy,
  // where base = ||WX||_F^2 - sum of all materialized contributions.
  double total_contrib = 0.0;
  for (double v : stats.contributions.data()) total_contrib += v;
  const double base = std::max(0.0, matmul(W, calib.X).frobenius_sq() - total_contrib);

  // tail[D] = contribution energy of ranks >= D
  std::vector<double> row_sum(d_max, 0.0);
  for (std::size_t j = 0; j < d_max; ++j)
    for (std::size_t s = 0; s < k; ++s) row_sum[j] += stats.contributions(j, s);
  std::vector<double> tail(d_max + 1, 0.0);
  for (std::size_t j = d_max; j > 0; --j) tail[j - 1] = tail[j] + row_sum[j - 1];

  LayerAllocation best;
  bool have_best = false;
  std::vector<LayerCandidate> log;

  for (std::size_t D : rank_schedule(d_max)) {
    const double dd = static_cast<double>(D);
    const double masker_cost = 2.0 * dd * static_cast<double>(i) + 2.0 * dd;
    double e_raw = (budget - masker_cost) / (2.0 * static_cast<double>(o));
    if (e_raw <= 0.0) continue;  // this D cannot fit the budget

    LayerCandidate cand;
    cand.kept_ranks = D;
    double masked_out = 0.0;
    double threshold = 0.0;
    if (e_raw >= dd) {
      cand.expected_active = dd;
      cand.saturated = true;
    } else {
      cand.expected_active = e_raw;
      std::vector<double> pooled;
      pooled.reserve(D * k);
      for (std::size_t j = 0; j < D; ++j)
        for (std::size_t s = 0; s < k; ++s)
          pooled.push_back(stats.contributions(j, s));
      threshold = threshold_for_expected_keep(pooled, e_raw, k);
      for (double v : pooled)
        if (v < threshold) masked_out += v;
    }
    cand.flops = rank_adapted_flops(D, o, i, cand.expected_active,
                                    MaskerKind::BMasker)
                     .total;
    cand.error = (base + tail[D] + masked_out) / static_cast<double>(k);
    log.push_back(cand);

    if (!have_best || cand.error < best.calib_error) {
      have_best = true;
      best.kept_ranks = D;
      best.target_expected_active = cand.expected_active;
      best.masker_kind = MaskerKind::BMasker;
      best.achieved_flops =
          rank_adapted_flops(D, o, i, cand.expected_active, MaskerKind::BMasker);
      best.calib_error = cand.error;
      best.threshold = threshold;
    }
  }
  if (!have_best)
    throw InfeasibleBudget("line_search_layer: no feasible rank for budget " +
                               std::to_string(budget),
                           min_feasible);
  best.log = std::move(log);
  return best;
}

RankAdaptedLinear build_rank_adapted(const RankDecomposition& dec,
                                     const ContributionStats& stats,
                                     const LayerAllocation& alloc) {
  RankDecomposition trunc = dec.truncated(alloc.kept_ranks);
  BMasker masker;
  if (alloc.target_expected_active >=
      static_cast<double>(alloc.kept_ranks)) {
    masker = saturated_b_masker(alloc.kept_ranks);
  } else {
    ContributionStats ts = truncate_stats(stats, alloc.kept_ranks);
    masker = calibrate_b_masker(ts, alloc.target_expected_active);
  }
  return RankAdaptedLinear{std::move(trunc), masker, std::nullopt};
}

MlpDecompositions prepare_mlp(const MlpWeights& w, const CalibrationSet& calib) {
  MlpDecompositions pre{decompose(w.up, calib),
                        ContributionStats{},
                        std::nullopt,
                        std::nullopt,
                        DenseMatrix(1, 1),
                        DenseMatrix(1, 1)};
  pre.up_stats = rank_contributions(pre.up, calib);
  if (w.gate) {
    pre.gate = decompose(*w.gate, calib);
    pre.gate_stats = rank_contributions(*pre.gate, calib);
  }
  const std::size_t h = w.up.rows(), k = calib.samples();
  DenseMatrix U = matmul(w.up, calib.X);
  DenseMatrix H(h, k);
  if (w.gate) {
    DenseMatrix G = matmul(*w.gate, calib.X);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t s = 0; s < k; ++s)
        H(r, s) = apply_activation(w.activation, G(r, s)) * U(r, s);
  } else {
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t s = 0; s < k; ++s)
        H(r, s) = apply_activation(w.activation, U(r, s));
  }
  pre.outputs = matmul(w.down, H);
  pre.hidden = std::move(H);
  return pre;
}

MlpAllocation allocate_mlp_fractions(const MlpWeights& w,
                                     const MlpDecompositions& pre,
                                     const CalibrationSet& calib, double budget,
                                     double f_up, double f_gate,
                                     double f_down) {
  const bool gated = w.gate.has_value();
  const std::size_t h = w.up.rows(), d = w.down.rows(), k = calib.samples();
  const double act_cost = gated ? 2.0 * static_cast<double>(h)
                                : static_cast<double>(h);
  const double comp_budget = budget - act_cost;
  if (comp_budget <= 0.0)
    throw InfeasibleBudget("allocate_mlp_fractions: budget below activation cost",
                           act_cost);

  MlpAllocation alloc;
  alloc.up = line_search_layer(w.up, pre.up, pre.up_stats, calib,
                               f_up * comp_budget);
  if (gated)
    alloc.gate = line_search_layer(*w.gate, *pre.gate, *pre.gate_stats, calib,
                                   f_gate * comp_budget);
  double e_down = (f_down * comp_budget - 3.0 * static_cast<double>(h)) /
                  (2.0 * static_cast<double>(d));
  if (e_down <= 0.0)
    throw InfeasibleBudget("allocate_mlp_fractions: down budget below masker cost",
                           3.0 * static_cast<double>(h));
  double thr = 0.0;
  if (e_down >= static_cast<double>(h)) {
    e_down = static_cast<double>(h);
  } else {
    thr = calibrate_neuron_masker(w.down, pre.hidden, e_down).threshold;
  }
  alloc.down.target_expected_active = e_down;
  alloc.down.threshold = thr;
  alloc.down.achieved_flops = down_thresholded_flops(d, h, e_down);

  alloc.f_up = f_up;
  alloc.f_gate = f_gate;
  alloc.f_down = f_down;
  alloc.achieved_flops.merge(alloc.up.achieved_flops, "up.");
  if (gated) alloc.achieved_flops.merge(alloc.gate->achieved_flops, "gate.");
  alloc.achieved_flops.add("activation", act_cost);
  alloc.achieved_flops.merge(alloc.down.achieved_flops, "down.");

  RanaMlp mlp = build_rana_mlp(w, pre, alloc);
  double err = 0.0;
  DenseVector x(w.up.cols());
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = calib.X(i, s);
    DenseVector y = forward_rana_mlp(mlp, x);
    double e = 0.0;
    for (std::size_t r = 0; r < y.size(); ++r) {
      const double diff = y[r] - pre.outputs(r, s);
      e += diff * diff;
    }
    err += e;
  }
  alloc.calib_error = err / static_cast<double>(k);
  return alloc;
}

MlpAllocation grid_search_mlp(const MlpWeights& w, const MlpDecompositions& pre,
                              const CalibrationSet& calib, double budget,
                              double grid_step) {
  const bool gated = w.gate.has_value();
  const double act_cost = gated ? 2.0 * static_cast<double>(w.up.rows())
                                : static_cast<double>(w.up.rows());
  if (budget - act_cost <= 0.0)
    throw InfeasibleBudget("grid_search_mlp: budget below activation cost",
                           act_cost);
  const auto steps = static_cast<std::size_t>(std::lround(1.0 / grid_step));
  if (std::abs(grid_step * static_cast<double>(steps) - 1.0) > 1e-9)
    throw NumericError("grid_search_mlp: grid_step must divide 1 evenly");

  MlpAllocation best;
  best.grid_step = grid_step;
  bool have_best = false;
  std::vector<MlpCandidate> log;

  auto eval_point = [&](double f_up, double f_gate, double f_down) {
    MlpCandidate cand;
    cand.f_up = f_up;
    cand.f_gate = f_gate;
    cand.f_down = f_down;
    MlpAllocation alloc;
    try {
      alloc = allocate_mlp_fractions(w, pre, calib, budget, f_up, f_gate,
                                     f_down);
    } catch (const NumericError&) {
      cand.feasible = false;
      log.push_back(cand);
      return;
    }
    cand.feasible = true;
    alloc.grid_step = grid_step;
    cand.flops = alloc.achieved_flops.total;
    cand.error = alloc.calib_error;
    log.push_back(cand);

    if (!have_best || alloc.calib_error < best.calib_error) {
      have_best = true;
      best = std::move(alloc);
    }
  };

  if (gated) {
    for (std::size_t a = 0; a <= steps; ++a)
      for (std::size_t b = 0; a + b <= steps; ++b) {
        const std::size_t c = steps - a - b;
        eval_point(grid_step * static_cast<double>(a),
                   grid_step * static_cast<double>(b),
                   grid_step * static_cast<double>(c));
      }
    // the exact even split is off-grid for most step sizes; include it so the
    // search never loses to the natural default
    eval_point(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
  } else {
    for (std::size_t a = 0; a <= steps; ++a)
      eval_point(grid_step * static_cast<double>(a), 0.0,
                 grid_step * static_cast<double>(steps - a));
    eval_point(0.5, 0.0, 0.5);
  }

  if (!have_best)
    throw InfeasibleBudget("grid_search_mlp: no feasible grid point", budget);
  best.log = std::move(log);
  return best;
}

RanaMlp build_rana_mlp(const MlpWeights& w, const MlpDecompositions& pre,
                       const MlpAllocation& alloc) {
  RanaMlp mlp{build_rank_adapted(pre.up, pre.up_stats, alloc.up),
              std::nullopt,
              w.down,
              std::nullopt,
              w.activation};
  if (w.gate)
    mlp.gate = build_rank_adapted(*pre.gate, *pre.gate_stats, *alloc.gate);
  if (alloc.down.target_expected_active >= static_cast<double>(w.up.rows())) {
    // fully open down path
    mlp.down_masker = std::nullopt;
  } else {
    mlp.down_masker = calibrate_neuron_masker(
        w.down, pre.hidden, alloc.down.target_expected_active);
  }
  return mlp;
}

}  // namespace rana

#include <cmath>

#include "doctest.h"
#include "rana/allocation.hpp"
#include "rana/evaluation.hpp"

using namespace rana;

namespace {

struct LayerFixture {
  DenseMatrix W;
  CalibrationSet calib;
  RankDecomposition dec;
  ContributionStats stats;

  LayerFixture(std::size_t o, std::size_t i, std::size_t k, std::uint64_t seed)
      : W(1, 1), calib{DenseMatrix(1, 1)}, dec{}, stats{} {
    Rng rng(seed);
    W = random_matrix(o, i, rng);
    calib.X = anisotropic_inputs(i, k, rng);
    dec = decompose(W, calib);
    stats = rank_contributions(dec, calib);
  }
};

}  // namespace

TEST_CASE("line search at a saturating budget has near-zero error") {
  LayerFixture f(16, 8, 200, 1);
  // enough for every rank active: the masker overhead means this costs more
  // than the dense layer
  const double open = rank_adapted_flops(f.dec.ranks(), 16, 8,
                                         static_cast<double>(f.dec.ranks()),
                                         MaskerKind::BMasker)
                          .total;
  LayerAllocation alloc = line_search_layer(f.W, f.dec, f.stats, f.calib, open);
  const double scale = matmul(f.W, f.calib.X).frobenius_sq() /
                       static_cast<double>(f.calib.samples());
  CHECK(alloc.calib_error <= 1e-8 * scale);
}

TEST_CASE("line search returns the minimum over the logged schedule") {
  LayerFixture f(16, 8, 200, 2);
  const double budget = 0.5 * dense_linear_flops(16, 8).total;
  LayerAllocation alloc = line_search_layer(f.W, f.dec, f.stats, f.calib, budget);
  REQUIRE(!alloc.log.empty());
  for (const auto& cand : alloc.log) CHECK(alloc.calib_error <= cand.error);
  // the winner appears in its own log
  bool found = false;
  for (const auto& cand : alloc.log)
    if (cand.kept_ranks == alloc.kept_ranks &&
        cand.error == alloc.calib_error)
      found = true;
  CHECK(found);
}

TEST_CASE("line search achieved FLOPs stay within one percent of budget") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    LayerFixture f(24, 10, 300, 10 + seed);
    const double dense = dense_linear_flops(24, 10).total;
    for (double frac : {0.3, 0.5, 0.7}) {
      const double budget = frac * dense;
      LayerAllocation alloc =
          line_search_layer(f.W, f.dec, f.stats, f.calib, budget);
      CHECK(alloc.achieved_flops.total <= 1.01 * budget);
      CHECK(alloc.achieved_flops.total >= 0.99 * budget);
    }
  }
}

TEST_CASE("line search infeasible budget names the minimum feasible") {
  LayerFixture f(8, 6, 50, 3);
  try {
    line_search_layer(f.W, f.dec, f.stats, f.calib, 1.0);
    FAIL("expected InfeasibleBudget");
  } catch (const InfeasibleBudget& e) {
    CHECK(e.minimum_feasible == 2.0 * 6 + 2.0);
  }
}

TEST_CASE("line search error is monotone nonincreasing in budget") {
  LayerFixture f(20, 10, 250, 4);
  const double dense = dense_linear_flops(20, 10).total;
  double prev = 1e300;
  for (double frac : {0.2, 0.35, 0.5, 0.65, 0.8, 1.0}) {
    LayerAllocation alloc =
        line_search_layer(f.W, f.dec, f.stats, f.calib, frac * dense);
    CHECK(alloc.calib_error <= prev + 1e-12);
    prev = alloc.calib_error;
  }
}

TEST_CASE("build_rank_adapted realizes the allocation") {
  LayerFixture f(16, 8, 200, 5);
  const double budget = 0.5 * dense_linear_flops(16, 8).total;
  LayerAllocation alloc = line_search_layer(f.W, f.dec, f.stats, f.calib, budget);
  RankAdaptedLinear layer = build_rank_adapted(f.dec, f.stats, alloc);
  CHECK(layer.dec.ranks() == alloc.kept_ranks);
  REQUIRE(layer.b_masker.has_value());
  // calibrated mean matches the allocation target within the 2% band
  CHECK(layer.b_masker->calibrated_mean_active >=
        0.98 * alloc.target_expected_active);
  CHECK(layer.b_masker->calibrated_mean_active <=
        1.02 * alloc.target_expected_active);

  // empirical mean squared error on the calibration set matches the score
  double err = 0.0;
  DenseVector x(8);
  DenseMatrix WX = matmul(f.W, f.calib.X);
  for (std::size_t s = 0; s < f.calib.samples(); ++s) {
    for (std::size_t i = 0; i < 8; ++i) x[i] = f.calib.X(i, s);
    DenseVector y = forward_rank_adapted(layer, x);
    for (std::size_t r = 0; r < 16; ++r) {
      const double d = WX(r, s) - y[r];
      err += d * d;
    }
  }
  err /= static_cast<double>(f.calib.samples());
  CHECK(err == doctest::Approx(alloc.calib_error)
                   .epsilon(0.02)
                   .scale(alloc.calib_error + 1e-12));
}

TEST_CASE("grid search at a saturating budget recovers a near-dense MLP") {
  Rng rng(6);
  MlpWeights w{random_matrix(16, 8, rng), random_matrix(16, 8, rng),
               random_matrix(8, 16, rng), Activation::SiLU};
  CalibrationSet calib{anisotropic_inputs(8, 150, rng)};
  MlpDecompositions pre = prepare_mlp(w, calib);
  // twice the dense cost absorbs the masker overhead of fully open adapters
  const double dense = 2.0 * dense_mlp_flops(w.shape()).total;
  MlpAllocation alloc = grid_search_mlp(w, pre, calib, dense);
  const double scale = pre.outputs.frobenius_sq() /
                       static_cast<double>(calib.samples());
  CHECK(alloc.calib_error <= 1e-6 * scale);
}

TEST_CASE("grid search beats every logged grid point including uniform") {
  Rng rng(7);
  MlpWeights w = train_toy_swiglu(16, 32, 7, 120);
  Rng data_rng(70);
  CalibrationSet calib{anisotropic_inputs(16, 200, data_rng)};
  MlpDecompositions pre = prepare_mlp(w, calib);
  const double budget = 0.5 * dense_mlp_flops(w.shape()).total;
  MlpAllocation alloc = grid_search_mlp(w, pre, calib, budget);

  for (const auto& cand : alloc.log)
    if (cand.feasible) CHECK(alloc.calib_error <= cand.error);

  // the uniform split is beaten (or matched) even though it is off-grid
  MlpAllocation uniform = allocate_mlp_fractions(w, pre, calib, budget,
                                                 1.0 / 3, 1.0 / 3, 1.0 / 3);
  CHECK(alloc.calib_error <= uniform.calib_error + 1e-12);
}

TEST_CASE("grid search achieved FLOPs near the budget") {
  Rng rng(8);
  MlpWeights w = train_toy_swiglu(16, 32, 8, 120);
  Rng data_rng(80);
  CalibrationSet calib{anisotropic_inputs(16, 200, data_rng)};
  MlpDecompositions pre = prepare_mlp(w, calib);
  const double budget = 0.5 * dense_mlp_flops(w.shape()).total;
  MlpAllocation alloc = grid_search_mlp(w, pre, calib, budget);
  CHECK(alloc.achieved_flops.total <= 1.01 * budget);
  CHECK(alloc.achieved_flops.total >= 0.99 * budget);
}

TEST_CASE("grid search infeasible budget throws") {
  Rng rng(9);
  MlpWeights w{random_matrix(16, 8, rng), random_matrix(16, 8, rng),
               random_matrix(8, 16, rng), Activation::SiLU};
  CalibrationSet calib{anisotropic_inputs(8, 60, rng)};
  MlpDecompositions pre = prepare_mlp(w, calib);
  CHECK_THROWS_AS(grid_search_mlp(w, pre, calib, 10.0), InfeasibleBudget);
}

TEST_CASE("non-gated grid search works end to end") {
  Rng rng(10);
  MlpWeights w{random_matrix(20, 10, rng), std::nullopt,
               random_matrix(10, 20, rng), Activation::GeLU};
  CalibrationSet calib{anisotropic_inputs(10, 150, rng)};
  MlpDecompositions pre = prepare_mlp(w, calib);
  const double budget = 0.6 * dense_mlp_flops(w.shape()).total;
  MlpAllocation alloc = grid_search_mlp(w, pre, calib, budget);
  CHECK(!alloc.gate.has_value());
  CHECK(alloc.achieved_flops.total <= 1.01 * budget);
  RanaMlp mlp = build_rana_mlp(w, pre, alloc);
  CHECK(!mlp.gate.has_value());
  DenseVector y = forward_rana_mlp(mlp, random_vector(10, rng));
  CHECK(y.size() == 10);
}

TEST_CASE("nested schedules keep budget monotonicity for the MLP search") {
  Rng rng(11);
  MlpWeights w = train_toy_swiglu(12, 24, 11, 100);
  Rng data_rng(110);
  CalibrationSet calib{anisotropic_inputs(12, 150, data_rng)};
  MlpDecompositions pre = prepare_mlp(w, calib);
  const double dense = dense_mlp_flops(w.shape()).total;
  double prev = 1e300;
  for (double frac : {0.4, 0.6, 0.8, 1.0}) {
    MlpAllocation alloc = grid_search_mlp(w, pre, calib, frac * dense);
    CHECK(alloc.calib_error <= prev * (1.0 + 1e-9) + 1e-12);
    prev = alloc.calib_error;
  }
}

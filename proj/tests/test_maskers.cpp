#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "rana/maskers.hpp"

using namespace rana;

namespace {

ContributionStats stats_from(const DenseMatrix& contributions) {
  DenseVector mean(contributions.rows(), 0.0);
  for (std::size_t j = 0; j < contributions.rows(); ++j) {
    for (std::size_t s = 0; s < contributions.cols(); ++s)
      mean[j] += contributions(j, s);
    mean[j] /= static_cast<double>(contributions.cols());
  }
  return ContributionStats{contributions, std::move(mean)};
}

double kept_energy(const DenseVector& Bx, const Mask& m) {
  double e = 0.0;
  for (std::size_t j = 0; j < Bx.size(); ++j)
    if (m[j]) e += Bx[j] * Bx[j];
  return e;
}

}  // namespace

TEST_CASE("calibrate_b_masker degenerate and single-sample cases") {
  // all contributions equal, target = D -> everything kept
  DenseMatrix eq(3, 4);
  for (auto& v : eq.mutable_data()) v = 2.5;
  BMasker all = calibrate_b_masker(stats_from(eq), 3.0);
  CHECK(all.threshold <= 2.5);
  CHECK(all.calibrated_mean_active == doctest::Approx(3.0));

  // single sample {4,3,2,1}, target 2 -> t = 3, keeps exactly the top two
  DenseMatrix one(4, 1);
  one(0, 0) = 4;
  one(1, 0) = 3;
  one(2, 0) = 2;
  one(3, 0) = 1;
  BMasker m = calibrate_b_masker(stats_from(one), 2.0);
  CHECK(m.threshold == 3.0);
  CHECK(m.calibrated_mean_active == doctest::Approx(2.0));

  CHECK_THROWS_AS(calibrate_b_masker(stats_from(one), 0.0), NumericError);
  CHECK_THROWS_AS(calibrate_b_masker(stats_from(one), 5.0), NumericError);
}

TEST_CASE("calibrate_b_masker hits targets within 2 percent") {
  Rng rng(9);
  const std::size_t D = 40, k = 2000;
  DenseMatrix c(D, k);
  for (auto& v : c.mutable_data()) {
    const double g = rng.normal();
    v = g * g;
  }
  ContributionStats stats = stats_from(c);
  for (double frac : {0.10, 0.25, 0.50, 0.75}) {
    const double target = frac * D;
    BMasker m = calibrate_b_masker(stats, target);
    CHECK(m.calibrated_mean_active >= 0.98 * target);
    CHECK(m.calibrated_mean_active <= 1.02 * target);
  }
}

TEST_CASE("apply_b_masker threshold semantics") {
  BMasker zero{0.0, 2.0, 2.0, 3};
  Mask m = apply_b_masker(zero, {0.0, -1.0, 5.0});
  CHECK(m == Mask{1, 1, 1});  // 0^2 >= 0 keeps zeros

  BMasker t2{2.0, 1.0, 1.0, 2};
  CHECK(apply_b_masker(t2, {2.0, -1.0}) == Mask{1, 0});

  Rng rng(2);
  BMasker t{0.7, 0.0, 0.0, 16};
  DenseVector bx = random_vector(16, rng);
  Mask got = apply_b_masker(t, bx);
  for (std::size_t j = 0; j < 16; ++j)
    CHECK(got[j] == (bx[j] * bx[j] >= 0.7 ? 1 : 0));

  CHECK_THROWS_AS(apply_b_masker(t2, {1.0, 2.0, 3.0}), ShapeError);
}

TEST_CASE("calibrate_neuron_masker examples") {
  // unit row norms, x = (5, 0.1), keep 1 of 2
  DenseMatrix W = DenseMatrix::identity(2);
  DenseMatrix hidden(2, 1);
  hidden(0, 0) = 5.0;
  hidden(1, 0) = 0.1;
  NeuronThresholdMasker m = calibrate_neuron_masker(W, hidden, 1.0);
  CHECK(m.threshold > 0.1);
  CHECK(m.threshold <= 5.0);
  CHECK(apply_neuron_masker(m, {5.0, 0.1}) == Mask{1, 0});

  // zero input -> all zeros (threshold positive)
  CHECK(apply_neuron_masker(m, {0.0, 0.0}) == Mask{0, 0});

  CHECK_THROWS_WITH_AS(calibrate_neuron_masker(DenseMatrix(2, 2), hidden, 1.0),
                       "calibrate_neuron_masker: all row norms zero",
                       NumericError);
}

TEST_CASE("neuron masker with uniform norms matches sort oracle") {
  Rng rng(7);
  const std::size_t h = 24, k = 500;
  DenseMatrix W(4, h);
  for (auto& v : W.mutable_data()) v = 0.5;  // uniform column norms
  DenseMatrix hidden = random_matrix(h, k, rng);
  const double target = 6.0;
  NeuronThresholdMasker m = calibrate_neuron_masker(W, hidden, target);
  CHECK(m.calibrated_mean_active >= 0.98 * target);
  CHECK(m.calibrated_mean_active <= 1.02 * target);

  // pooled |x| quantile reproduced independently
  std::vector<double> mags;
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t i = 0; i < h; ++i) mags.push_back(std::abs(hidden(i, s)));
  std::sort(mags.begin(), mags.end());
  // smallest magnitude whose ">= t" count matches the expected keep count
  const std::size_t keep = static_cast<std::size_t>(target * k);
  const std::size_t idx = mags.size() - keep;
  const double norm = std::sqrt(4 * 0.25);
  CHECK(m.threshold == doctest::Approx(mags[idx] * norm).epsilon(1e-12));
}

TEST_CASE("neuron masker calibration within 2 percent across targets") {
  Rng rng(13);
  const std::size_t h = 32, k = 1500;
  DenseMatrix W = random_matrix(8, h, rng);
  DenseMatrix hidden = random_matrix(h, k, rng);
  for (double frac : {0.10, 0.25, 0.50, 0.75}) {
    const double target = frac * h;
    NeuronThresholdMasker m = calibrate_neuron_masker(W, hidden, target);
    CHECK(m.calibrated_mean_active >= 0.98 * target);
    CHECK(m.calibrated_mean_active <= 1.02 * target);
  }
}

TEST_CASE("apply_sigmoid_masker cutoff semantics") {
  SigmoidMlpMasker z{DenseMatrix(3, 2), DenseMatrix(2, 4), 2, 0.5};
  // C = 0 -> sigma(0) = 0.5 -> kept at the 0.5 boundary
  CHECK(apply_sigmoid_masker(z, {1, 2, 3, 4}) == Mask{1, 1, 1});

  SigmoidMlpMasker neg{DenseMatrix(2, 1), DenseMatrix(1, 2), 1, 0.5};
  neg.C(0, 0) = -50.0;
  neg.C(1, 0) = -50.0;
  neg.D(0, 0) = 1.0;
  neg.D(0, 1) = 1.0;
  CHECK(apply_sigmoid_masker(neg, {1.0, 1.0}) == Mask{0, 0});

  Rng rng(3);
  SigmoidMlpMasker r{random_matrix(5, 3, rng), random_matrix(3, 6, rng), 3, 0.5};
  DenseVector x = random_vector(6, rng);
  Mask got = apply_sigmoid_masker(r, x);
  DenseVector logits = matvec(r.C, matvec(r.D, x));
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(got[i] == (1.0 / (1.0 + std::exp(-logits[i])) >= 0.5 ? 1 : 0));
}

TEST_CASE("oracle_topk ranking and exhaustive optimality") {
  CHECK(oracle_topk({1.0, 2.0, 3.0}, 3) == Mask{1, 1, 1});
  CHECK(oracle_topk({1.0, -3.0, 2.0}, 2) == Mask{0, 1, 1});
  CHECK(oracle_topk({2.0, -2.0, 1.0}, 1) == Mask{1, 0, 0});  // tie: lower index
  CHECK_THROWS_AS(oracle_topk({1.0}, 2), ShapeError);

  // exhaustive: no other size-k mask keeps more energy, D <= 12
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t D = 10;
    DenseVector bx = random_vector(D, rng);
    for (std::size_t k = 1; k <= D; ++k) {
      const double best = kept_energy(bx, oracle_topk(bx, k));
      for (std::uint32_t bits = 0; bits < (1u << D); ++bits) {
        if (static_cast<std::size_t>(__builtin_popcount(bits)) != k) continue;
        Mask m(D, 0);
        for (std::size_t j = 0; j < D; ++j) m[j] = (bits >> j) & 1;
        CHECK(best >= kept_energy(bx, m) - 1e-12);
      }
    }
  }
}

TEST_CASE("masks are binary and idempotent") {
  Rng rng(21);
  DenseVector bx = random_vector(12, rng);
  BMasker m{0.5, 0.0, 0.0, 12};
  Mask mask = apply_b_masker(m, bx);
  DenseVector masked = bx;
  for (std::size_t j = 0; j < 12; ++j) masked[j] *= mask[j];
  // applying the same mask to the already-masked vector changes nothing
  DenseVector twice = masked;
  for (std::size_t j = 0; j < 12; ++j) twice[j] *= mask[j];
  CHECK(twice == masked);
  for (auto b : mask) CHECK((b == 0 || b == 1));
}

TEST_CASE("sigmoid BCE analytic gradients match central finite differences") {
  Rng rng(33);
  DenseMatrix C = random_matrix(3, 2, rng), D = random_matrix(2, 2, rng);
  DenseMatrix inputs = random_matrix(2, 5, rng);
  DenseMatrix labels(3, 5);
  for (auto& v : labels.mutable_data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;

  DenseMatrix gC, gD;
  sigmoid_bce_loss_and_grads(C, D, inputs, labels, &gC, &gD);
  const double eps = 1e-5;
  auto fd_check = [&](DenseMatrix& M, const DenseMatrix& grad) {
    for (std::size_t i = 0; i < M.data().size(); ++i) {
      const double orig = M.data()[i];
      M.mutable_data()[i] = orig + eps;
      const double lp =
          sigmoid_bce_loss_and_grads(C, D, inputs, labels, nullptr, nullptr);
      M.mutable_data()[i] = orig - eps;
      const double lm =
          sigmoid_bce_loss_and_grads(C, D, inputs, labels, nullptr, nullptr);
      M.mutable_data()[i] = orig;
      const double fd = (lp - lm) / (2.0 * eps);
      CHECK(grad.data()[i] ==
            doctest::Approx(fd).epsilon(1e-4).scale(std::abs(fd) + 1e-6));
    }
  };
  fd_check(C, gC);
  fd_check(D, gD);
}

TEST_CASE("train_sigmoid_masker reduces loss against a B-masker teacher") {
  Rng rng(44);
  DenseMatrix W = random_matrix(6, 4, rng);
  CalibrationSet calib{random_matrix(4, 200, rng)};
  RankDecomposition dec = decompose(W, calib, 4);
  ContributionStats stats = rank_contributions(dec, calib);

  BMasker teacher = calibrate_b_masker(stats, 2.0);
  SigmoidTrainOptions opt;
  opt.epochs = 40;
  opt.seed = 1;
  SigmoidTrainResult res = train_sigmoid_masker(teacher, dec, calib, opt);
  CHECK(res.final_loss < res.initial_loss);
  CHECK(std::isfinite(res.final_loss));
  CHECK(res.masker.C.rows() == dec.ranks());
  CHECK(res.masker.D.cols() == 4);
}

TEST_CASE("sigmoid masker separates linear labels") {
  Rng rng(55);
  const std::size_t in = 6, n = 400;
  DenseMatrix inputs = random_matrix(in, n, rng);
  DenseVector w = random_vector(in, rng);
  DenseMatrix labels(1, n);
  for (std::size_t s = 0; s < n; ++s) {
    double d = 0.0;
    for (std::size_t i = 0; i < in; ++i) d += w[i] * inputs(i, s);
    labels(0, s) = d >= 0.0 ? 1.0 : 0.0;
  }
  SigmoidTrainOptions opt;
  opt.inner_dim = 4;
  opt.epochs = 60;
  opt.seed = 2;
  SigmoidTrainResult res = train_sigmoid_on_labels(inputs, labels, opt);
  std::size_t agree = 0;
  DenseVector x(in);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < in; ++i) x[i] = inputs(i, s);
    Mask m = apply_sigmoid_masker(res.masker, x);
    if (m[0] == (labels(0, s) > 0.5 ? 1 : 0)) ++agree;
  }
  CHECK(static_cast<double>(agree) / n >= 0.95);
}

TEST_CASE("training is deterministic for a fixed seed") {
  Rng rng(66);
  DenseMatrix inputs = random_matrix(3, 64, rng);
  DenseMatrix labels(2, 64);
  for (auto& v : labels.mutable_data()) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  SigmoidTrainOptions opt;
  opt.epochs = 10;
  opt.seed = 7;
  SigmoidTrainResult a = train_sigmoid_on_labels(inputs, labels, opt);
  SigmoidTrainResult b = train_sigmoid_on_labels(inputs, labels, opt);
  CHECK(a.final_loss == b.final_loss);
  CHECK(a.masker.C.data() == b.masker.C.data());
  CHECK(a.masker.D.data() == b.masker.D.data());
}

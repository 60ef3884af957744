#pragma once

#include <optional>

#include "rana/decomposition.hpp"
#include "rana/flop_model.hpp"
#include "rana/kernels.hpp"
#include "rana/maskers.hpp"

namespace rana {

double silu(double z);
double gelu_tanh(double z);  // tanh approximation
double apply_activation(Activation act, double z);

/// Linear'(x) = A (m(x) ⊙ B x). With a B-masker the mask is computed from Bx
/// itself; with a sigmoid masker the mask comes first and inactive rows of B
/// are skipped.
struct RankAdaptedLinear {
  RankDecomposition dec;
  std::optional<BMasker> b_masker;
  std::optional<SigmoidMlpMasker> sigmoid_masker;

  std::size_t out_dim() const { return dec.out_dim; }
  std::size_t in_dim() const { return dec.in_dim; }
};

DenseVector forward_rank_adapted(const RankAdaptedLinear& layer,
                                 const DenseVector& x,
                                 FlopCounter* counter = nullptr);

/// Dense weights of one MLP block in y = W * x convention
/// (W_up, W_gate: h x i; W_down: i x h).
struct MlpWeights {
  DenseMatrix up;
  std::optional<DenseMatrix> gate;
  DenseMatrix down;
  Activation activation = Activation::SiLU;

  MlpShape shape() const {
    return MlpShape{up.cols(), up.rows(), gate.has_value()};
  }
};

DenseVector forward_dense_mlp(const MlpWeights& w, const DenseVector& x);

/// MLP'(x) = Down'(act(Gate'(x)) ⊙ Up'(x)) with neuron-thresholded Down.
struct RanaMlp {
  RankAdaptedLinear up;
  std::optional<RankAdaptedLinear> gate;
  DenseMatrix down_weights;
  std::optional<NeuronThresholdMasker> down_masker;
  Activation activation = Activation::SiLU;
};

DenseVector forward_rana_mlp(const RanaMlp& mlp, const DenseVector& x,
                             FlopCounter* counter = nullptr);

/// Rank-adapted construction that reproduces the neuron-adapted ReLU MLP
/// exactly: A_down = W_down, B_down = I, A_up = I, B_up = W_up.
struct Prop1Construction {
  DenseMatrix a_up, b_up, a_down, b_down;
};

Prop1Construction build_prop1_equivalent(const DenseMatrix& W_up,
                                         const DenseMatrix& W_down);

/// Forward of the construction, evaluated literally as
/// A_down (m ⊙ B_down ReLU(A_up (1 ⊙ B_up x))).
DenseVector forward_prop1(const Prop1Construction& c, const Mask& neuron_mask,
                          const DenseVector& x);

/// Direct neuron-adapted evaluation W_down (m ⊙ ReLU(W_up x)).
DenseVector neuron_adapted_relu_forward(const DenseMatrix& W_up,
                                        const DenseMatrix& W_down,
                                        const Mask& neuron_mask,
                                        const DenseVector& x);

enum class BaselineKind { NeuronAdapter, CatsLike, FixedSvd };

/// CATS-style MLP: full gate activation, then threshold |SiLU(gate)|; Up and
/// Down touch only the kept neurons.
struct CatsAdapter {
  MlpWeights weights;
  double threshold = 0.0;
  double target_expected_active = 0.0;
  double calibrated_mean_active = 0.0;
};

CatsAdapter calibrate_cats(const MlpWeights& w, const CalibrationSet& calib,
                           double target_active);

DenseVector forward_cats(const CatsAdapter& a, const DenseVector& x,
                         FlopCounter* counter = nullptr);

/// Neuron adapter with a learned sigmoid masker over hidden neurons; only
/// active neurons of Up/Gate and the matching Down columns are computed.
struct NeuronAdapterMlp {
  MlpWeights weights;
  SigmoidMlpMasker masker;  // h x r' x i
};

DenseVector forward_neuron_adapter(const NeuronAdapterMlp& a,
                                   const DenseVector& x,
                                   FlopCounter* counter = nullptr);

/// Static rank-r truncation of the activation-aware decomposition.
RankAdaptedLinear make_fixed_svd(const RankDecomposition& dec, std::size_t r);

}  // namespace rana

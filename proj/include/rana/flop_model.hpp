#pragma once

#include <map>
#include <string>

#include "rana/tensor.hpp"

namespace rana {

enum class MaskerKind { None, BMasker, Sigmoid };
enum class Activation { SiLU, GeLU, ReLU };

/// FLOP tally with a named breakdown. Convention: one multiply-add counts as
/// 2 FLOPs; comparisons, absolute values and elementwise activations count 1.
struct FlopCount {
  double total = 0.0;
  std::map<std::string, double> breakdown;

  void add(const std::string& name, double flops) {
    breakdown[name] += flops;
    total += flops;
  }
  FlopCount& merge(const FlopCount& other, const std::string& prefix = "") {
    for (const auto& [k, v] : other.breakdown) add(prefix + k, v);
    return *this;
  }
};

/// Realized multiply-add counter threaded through forward passes so model
/// predictions can be checked against executed work.
struct FlopCounter {
  double flops = 0.0;
  double column_reads = 0.0;
  void count(double f) { flops += f; }
};

FlopCount dense_linear_flops(std::size_t o, std::size_t i);

/// Rank-adapted layer cost at expected active rank E.
/// B-masker: 2*D*i (Bx) + 2*D (square+compare) + 2*o*E (A on active ranks).
/// Sigmoid:  2*r'*i + 2*D*r' + D (masker) + 2*E*i (active B rows) + 2*o*E.
FlopCount rank_adapted_flops(std::size_t D, std::size_t o, std::size_t i,
                             double expected_active, MaskerKind kind,
                             std::size_t sigmoid_inner = 0);

/// Neuron-thresholded Down-Projection cost: 3 FLOPs per neuron for the
/// |x_i|*norm_i >= t statistic plus 2*d*E for the masked product.
FlopCount down_thresholded_flops(std::size_t d, std::size_t h,
                                 double expected_active);

struct MlpShape {
  std::size_t in_dim = 0;      // i (also output width of Down)
  std::size_t hidden_dim = 0;  // h
  bool gated = true;
};

struct MlpAdaptedConfig {
  std::size_t up_ranks = 0;
  double up_expected_active = 0.0;
  std::size_t gate_ranks = 0;
  double gate_expected_active = 0.0;
  double down_expected_active = 0.0;
  MaskerKind masker = MaskerKind::BMasker;
  std::size_t sigmoid_inner = 0;
};

FlopCount dense_mlp_flops(const MlpShape& shape);
FlopCount mlp_flops(const MlpShape& shape, const MlpAdaptedConfig& cfg);

/// 1 - adapted/dense.
double compression_rate(const FlopCount& adapted, const FlopCount& dense);

}  // namespace rana

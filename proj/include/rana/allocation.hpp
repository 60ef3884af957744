#pragma once

#include <optional>
#include <vector>

#include "rana/adapters.hpp"
#include "rana/decomposition.hpp"
#include "rana/flop_model.hpp"
#include "rana/maskers.hpp"

namespace rana {

struct LayerCandidate {
  std::size_t kept_ranks = 0;
  double expected_active = 0.0;
  double flops = 0.0;
  double error = 0.0;
  bool saturated = false;  // budget exceeded what rank D can spend
};

struct LayerAllocation {
  std::size_t kept_ranks = 0;
  double target_expected_active = 0.0;
  MaskerKind masker_kind = MaskerKind::BMasker;
  FlopCount achieved_flops;
  double calib_error = 0.0;  // mean squared reconstruction error
  double threshold = 0.0;
  std::vector<LayerCandidate> log;
};

struct InfeasibleBudget : NumericError {
  double minimum_feasible;
  InfeasibleBudget(const std::string& msg, double min_feasible)
      : NumericError(msg), minimum_feasible(min_feasible) {}
};

/// Line search over kept ranks D. For each D the expected active count E is
/// solved from the FLOP budget, a B-masker is calibrated to E and the
/// empirical reconstruction error on the calibration set is scored. Schedule
/// is exhaustive up to 256 ranks, else 64 geometrically spaced values
/// (independent of the budget, so schedules nest).
LayerAllocation line_search_layer(const DenseMatrix& W,
                                  const RankDecomposition& dec,
                                  const ContributionStats& stats,
                                  const CalibrationSet& calib, double budget);

struct DownAllocation {
  double target_expected_active = 0.0;
  FlopCount achieved_flops;
  double threshold = 0.0;
};

struct MlpCandidate {
  double f_up = 0.0, f_gate = 0.0, f_down = 0.0;
  double flops = 0.0;
  double error = 0.0;
  bool feasible = false;
};

struct MlpAllocation {
  LayerAllocation up;
  std::optional<LayerAllocation> gate;
  DownAllocation down;
  double grid_step = 0.1;
  FlopCount achieved_flops;
  double calib_error = 0.0;
  double f_up = 0.0, f_gate = 0.0, f_down = 0.0;
  std::vector<MlpCandidate> log;
};

struct MlpDecompositions {
  RankDecomposition up;
  ContributionStats up_stats;
  std::optional<RankDecomposition> gate;
  std::optional<ContributionStats> gate_stats;
  DenseMatrix hidden;   // dense Down inputs, h x k
  DenseMatrix outputs;  // dense MLP outputs, d x k
};

/// Decompose Up/Gate once at full rank and cache the dense reference
/// activations; grid points truncate these factors.
MlpDecompositions prepare_mlp(const MlpWeights& w, const CalibrationSet& calib);

/// Evaluate one fixed split of the budget across Up/Gate/Down: per-layer line
/// search for Up and Gate, neuron-threshold calibration for Down, scored by
/// end-to-end MLP output error on the calibration set. Throws InfeasibleBudget
/// when some component cannot fit its share.
MlpAllocation allocate_mlp_fractions(const MlpWeights& w,
                                     const MlpDecompositions& pre,
                                     const CalibrationSet& calib, double budget,
                                     double f_up, double f_gate, double f_down);

/// Simplex grid search over budget fractions (Up, Gate, Down); each grid
/// point runs the per-layer line search and a neuron-threshold calibration
/// for Down, scored by end-to-end MLP output error on the calibration set.
MlpAllocation grid_search_mlp(const MlpWeights& w, const MlpDecompositions& pre,
                              const CalibrationSet& calib, double budget,
                              double grid_step = 0.1);

/// Materialize the adapted MLP an allocation describes.
RanaMlp build_rana_mlp(const MlpWeights& w, const MlpDecompositions& pre,
                       const MlpAllocation& alloc);

RankAdaptedLinear build_rank_adapted(const RankDecomposition& dec,
                                     const ContributionStats& stats,
                                     const LayerAllocation& alloc);

}  // namespace rana

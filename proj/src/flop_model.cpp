#include "rana/flop_model.hpp"

namespace rana {

FlopCount dense_linear_flops(std::size_t o, std::size_t i) {
  FlopCount f;
  f.add("dense", 2.0 * static_cast<double>(o) * static_cast<double>(i));
  return f;
}

FlopCount rank_adapted_flops(std::size_t D, std::size_t o, std::size_t i,
                             double expected_active, MaskerKind kind,
                             std::size_t sigmoid_inner) {
  if (expected_active < 0.0 || expected_active > static_cast<double>(D))
    throw NumericError("rank_adapted_flops: expected active out of [0, D]");
  const double dd = static_cast<double>(D), oo = static_cast<double>(o),
               ii = static_cast<double>(i), E = expected_active;
  FlopCount f;
  switch (kind) {
    case MaskerKind::None:
      f.add("B-product", 2.0 * dd * ii);
      f.add("A-product", 2.0 * oo * dd);
      break;
    case MaskerKind::BMasker:
      f.add("B-product", 2.0 * dd * ii);
      f.add("masker", 2.0 * dd);
      f.add("A-product", 2.0 * oo * E);
      break;
    case MaskerKind::Sigmoid: {
      const double rp = static_cast<double>(sigmoid_inner);
      f.add("masker", 2.0 * rp * ii + 2.0 * dd * rp + dd);
      f.add("B-product", 2.0 * E * ii);
      f.add("A-product", 2.0 * oo * E);
      break;
    }
  }
  return f;
}

FlopCount down_thresholded_flops(std::size_t d, std::size_t h,
                                 double expected_active) {
  if (expected_active < 0.0 || expected_active > static_cast<double>(h))
    throw NumericError("down_thresholded_flops: expected active out of [0, h]");
  FlopCount f;
  f.add("masker", 3.0 * static_cast<double>(h));
  f.add("down", 2.0 * static_cast<double>(d) * expected_active);
  return f;
}

FlopCount dense_mlp_flops(const MlpShape& s) {
  const double i = static_cast<double>(s.in_dim),
               h = static_cast<double>(s.hidden_dim);
  FlopCount f;
  f.add("up", 2.0 * h * i);
  if (s.gated) {
    f.add("gate", 2.0 * h * i);
    f.add("activation", 2.0 * h);  // SiLU + elementwise product
  } else {
    f.add("activation", h);
  }
  f.add("down", 2.0 * i * h);
  return f;
}

FlopCount mlp_flops(const MlpShape& s, const MlpAdaptedConfig& cfg) {
  FlopCount f;
  f.merge(rank_adapted_flops(cfg.up_ranks, s.hidden_dim, s.in_dim,
                             cfg.up_expected_active, cfg.masker,
                             cfg.sigmoid_inner),
          "up.");
  if (s.gated) {
    f.merge(rank_adapted_flops(cfg.gate_ranks, s.hidden_dim, s.in_dim,
                               cfg.gate_expected_active, cfg.masker,
                               cfg.sigmoid_inner),
            "gate.");
    f.add("activation", 2.0 * static_cast<double>(s.hidden_dim));
  } else {
    f.add("activation", static_cast<double>(s.hidden_dim));
  }
  f.merge(down_thresholded_flops(s.in_dim, s.hidden_dim,
                                 cfg.down_expected_active),
          "down.");
  return f;
}

double compression_rate(const FlopCount& adapted, const FlopCount& dense) {
  return 1.0 - adapted.total / dense.total;
}

}  // namespace rana

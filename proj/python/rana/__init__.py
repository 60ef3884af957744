"""Python bindings for the rank-adaptive layer compression core."""

from _rana import (
    NumericError,
    ShapeError,
    calibrate_b_masker_threshold,
    decompose,
    dense_linear_flops,
    forward_rank_adapted,
    line_search_layer,
    masked_gemv,
    matmul,
    oracle_topk,
    quantile,
    rank_adapted_flops,
    rank_contributions,
    thin_svd,
)

__all__ = [
    "NumericError",
    "ShapeError",
    "calibrate_b_masker_threshold",
    "decompose",
    "dense_linear_flops",
    "forward_rank_adapted",
    "line_search_layer",
    "masked_gemv",
    "matmul",
    "oracle_topk",
    "quantile",
    "rank_adapted_flops",
    "rank_contributions",
    "thin_svd",
]

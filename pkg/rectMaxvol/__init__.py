"""
rectMaxvol - maximal-volume seed sets for cold-start collaborative filtering.

Pipeline:
  - PureSVD:    R ≈ PᵀQ with unknown ratings as zeros
  - Selection:  Square Maxvol (f seeds) or Rectangular Maxvol (L0 >= f seeds)
  - Prediction: a cold user's full row from their seed ratings, z = z′C
  - Evaluation: fold-based Precision@k / Recall@k, coverage, diversity, sweeps

Quick usage:
    from rectMaxvol import load_ratings, build_predictor

    R = load_ratings("ratings.csv")
    predictor = build_predictor(R, f=10, L0=20)
    print(predictor.indices)                  # seed item columns
    scores = predictor.predict(seed_ratings)  # length-m row of predictions
"""

from .config import EvalConfig, MaxvolConfig, RunConfig, SvdConfig
from .data import (
    FoldSplit, RatingMatrix, RatingsFormat, binarize_relevance, load_ratings,
    parse_ratings, split_folds, transpose, write_ratings,
)
from .elicitation import (
    Predictor, build_predictor, coefficients_via_factors, coefficients_via_ratings, predict_cold,
)
from .errors import RectMaxvolError
from .evaluation import EvalReport, coverage, diversity, evaluate_cold_start, sweep
from .factorization import Factorization, FactorCache, pure_svd
from .maxvol import (
    SeedSet, append_column, lu_pivot_init, rect_maxvol, rectangular_volume, square_maxvol,
)

__version__ = "1.0.0"
__all__ = [
    "EvalConfig",
    "MaxvolConfig",
    "RunConfig",
    "SvdConfig",
    "FoldSplit",
    "RatingMatrix",
    "RatingsFormat",
    "binarize_relevance",
    "load_ratings",
    "parse_ratings",
    "split_folds",
    "transpose",
    "write_ratings",
    "Predictor",
    "build_predictor",
    "coefficients_via_factors",
    "coefficients_via_ratings",
    "predict_cold",
    "RectMaxvolError",
    "EvalReport",
    "coverage",
    "diversity",
    "evaluate_cold_start",
    "sweep",
    "Factorization",
    "FactorCache",
    "pure_svd",
    "SeedSet",
    "append_column",
    "lu_pivot_init",
    "rect_maxvol",
    "rectangular_volume",
    "square_maxvol",
]

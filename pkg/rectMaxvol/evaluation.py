"""
rectMaxvol Evaluation
Fold-based cold-start simulation with ranking metrics.

For every fold: build the predictor on the warm entities only, ask each cold
entity for its seed ratings (0 where unknown), predict, rank the non-seed
items by score (ties by ascending index) and score the top-k against the
binarized relevance. Item cold start runs the same protocol on Rᵀ.

Coverage and diversity are toolkit definitions:
  coverage   fraction of cold entities with at least one rating on the seed
  diversity  1 − mean pairwise |cosine| of the seed latent vectors
"""

from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple
import csv
import io
import logging

import numpy as np

from .config import EvalConfig, MaxvolConfig, SvdConfig, MODES, SELECTORS, VARIANTS
from .data import FoldSplit, RatingMatrix, binarize_relevance, transpose
from .elicitation import build_predictor
from .errors import ArgumentError, check_indices, parse_choice
from .factorization import Factorization, FactorCache
from .ledger import RunLog

_log = logging.getLogger(__name__)

CSV_COLUMNS = ["selector", "f", "L0", "k", "metric", "mean", "sigma"]


# ===== Ranking metrics =====

def _hits(ranked: Sequence[int], relevant: Set[int], k: int) -> Tuple[int, int]:
    if k < 1:
        raise ArgumentError(f"k must be positive, got {k}")
    top = list(ranked[:k])
    return sum(1 for i in top if i in relevant), len(top)


def precision_at_k(ranked: Sequence[int], relevant: Set[int], k: int) -> float:
    """Fraction of relevant items among the top-k (k truncates to the list length)."""
    hits, size = _hits(ranked, relevant, k)
    return hits / size if size else 0.0


def recall_at_k(ranked: Sequence[int], relevant: Set[int], k: int) -> float:
    """Fraction of all relevant items that reach the top-k; 0 when nothing is relevant."""
    hits, _ = _hits(ranked, relevant, k)
    return hits / len(relevant) if relevant else 0.0


# ===== Seed set descriptors =====

def coverage(R: RatingMatrix, k: Sequence[int]) -> float:
    k = [int(i) for i in k]
    check_indices(k, R.m, "seed index")
    rated = np.diff(R.matrix[:, k].tocsr().indptr) > 0
    return float(rated.mean())


def diversity(F: Factorization, k: Sequence[int]) -> float:
    k = [int(i) for i in k]
    if len(k) < 2:
        raise ArgumentError(f"diversity needs at least 2 seed items, got {len(k)}")
    check_indices(k, F.m, "seed index")
    V = F.Q[:, k]
    norms = np.linalg.norm(V, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    cos = np.abs(V.T @ V) / np.outer(safe, safe)
    cos[np.outer(norms, norms) == 0] = 0.0
    upper = np.triu_indices(len(k), 1)
    return float(1.0 - cos[upper].mean())


# ===== Reports =====

@dataclass
class FoldMetrics:
    fold: int
    precision_at_k: Dict[int, float]
    recall_at_k: Dict[int, float]
    users: int
    seed: Tuple[int, ...]
    coverage: float
    diversity: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fold": self.fold,
            "precision_at_k": {str(k): v for k, v in self.precision_at_k.items()},
            "recall_at_k": {str(k): v for k, v in self.recall_at_k.items()},
            "users": self.users,
            "seed": list(self.seed),
            "coverage": self.coverage,
            "diversity": self.diversity,
        }


@dataclass
class EvalReport:
    per_fold: List[FoldMetrics]
    aggregate: Dict[str, Dict[str, float]]
    coverage: float
    diversity: Optional[float]
    config: Dict[str, Any]
    skipped: List[int] = field(default_factory=list)

    def mean(self, metric: str, k: int) -> float:
        return self.aggregate[f"{metric}@{k}"]["mean"]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_fold": [f.to_dict() for f in self.per_fold],
            "aggregate": self.aggregate,
            "coverage": self.coverage,
            "diversity": self.diversity,
            "skipped_folds": self.skipped,
            "definitions": {"coverage": "toolkit", "diversity": "toolkit"},
            "config": self.config,
        }

    def csv_rows(self) -> List[List[Any]]:
        c = self.config
        rows = []
        for key in sorted(self.aggregate, key=lambda s: (s.split("@")[0], int(s.split("@")[1]))):
            metric, k = key.split("@")
            agg = self.aggregate[key]
            rows.append([c["selector"], c["f"], c["L0"], int(k), metric, repr(agg["mean"]), repr(agg["sigma"])])
        return rows

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(self.csv_rows())
        return buf.getvalue()


def _aggregate(per_fold: List[FoldMetrics], k_list: Sequence[int]) -> Dict[str, Dict[str, float]]:
    out: Dict[str, Dict[str, float]] = {}
    for k in k_list:
        for metric, attr in (("precision", "precision_at_k"), ("recall", "recall_at_k")):
            values = np.array([getattr(f, attr)[k] for f in per_fold], dtype=float)
            if values.size:
                out[f"{metric}@{k}"] = {"mean": float(values.mean()), "sigma": float(values.std())}
            else:
                out[f"{metric}@{k}"] = {"mean": 0.0, "sigma": 0.0}
    return out


# ===== Protocol =====

def _fold_roles(folds: FoldSplit, t: int, role: str) -> Tuple[np.ndarray, np.ndarray]:
    """(cold entities, warm entities) for fold t; validation never sees fold t."""
    if role == "test":
        return folds.members(t), folds.complement(t)
    if folds.fold_count < 3:
        raise ArgumentError("validation needs at least 3 folds (test, validation, train)")
    v = (t + 1) % folds.fold_count
    return folds.members(v), folds.complement(t, v)


def _evaluate_fold(R: RatingMatrix, relevance, folds: FoldSplit, t: int, role: str,
                   selector: str, f: int, L0: Optional[int], variant: str, k_list: Sequence[int],
                   svd: Optional[SvdConfig], maxvol: Optional[MaxvolConfig],
                   cache: FactorCache, log: RunLog) -> Optional[FoldMetrics]:
    cold, warm = _fold_roles(folds, t, role)
    train = R.rows(warm)
    F = cache.factorize(train, f, svd)
    predictor = build_predictor(train, f, L0, variant, selector, svd=svd, maxvol=maxvol,
                                factorization=F, log=log)
    seed = np.array(predictor.indices)

    z_prime = R.matrix[cold][:, seed].toarray()
    scores = predictor.predict(z_prime)
    candidates = np.setdiff1d(np.arange(R.m), seed)
    seed_set = set(seed.tolist())
    depth = max(k_list)

    precision = {k: [] for k in k_list}
    recall = {k: [] for k in k_list}
    any_relevant = False
    rel = relevance[cold]
    for row in range(len(cold)):
        relevant = set(rel.indices[rel.indptr[row]:rel.indptr[row + 1]].tolist()) - seed_set
        any_relevant = any_relevant or bool(relevant)
        order = candidates[np.argsort(-scores[row, candidates], kind="stable")][:depth]
        for k in k_list:
            precision[k].append(precision_at_k(order, relevant, k))
            recall[k].append(recall_at_k(order, relevant, k))

    if not any_relevant:
        _log.warning("fold %d: no cold entity holds a relevant item; fold skipped", t)
        log.add("fold", True, "skipped: no relevant items", fold=t, role=role)
        return None

    metrics = FoldMetrics(
        fold=t,
        precision_at_k={k: float(np.mean(v)) for k, v in precision.items()},
        recall_at_k={k: float(np.mean(v)) for k, v in recall.items()},
        users=len(cold),
        seed=predictor.indices,
        coverage=coverage(R.rows(cold), predictor.indices),
        diversity=diversity(F, predictor.indices) if len(seed) > 1 else None,
    )
    log.add("fold", True, fold=t, users=len(cold), role=role)
    return metrics


def evaluate_cold_start(R: RatingMatrix, folds: FoldSplit, selector: str, f: int,
                        L0: Optional[int], variant: str = "ratings",
                        k_list: Sequence[int] = (5, 10, 20), mode: str = "user", *,
                        threshold: float = 4.0, role: str = "test", workers: int = 1,
                        svd: Optional[SvdConfig] = None, maxvol: Optional[MaxvolConfig] = None,
                        cache: Optional[FactorCache] = None,
                        log: Optional[RunLog] = None) -> EvalReport:
    """
    Run the cold-start protocol over every fold and aggregate mean and σ.

    `folds` partitions the cold axis: users in "user" mode, items in "item"
    mode. role="validation" scores fold (t+1) mod F while training without
    folds t and t+1, so rank selection never touches test fold t.
    """
    selector = parse_choice("selector", selector, SELECTORS)
    variant = parse_choice("variant", variant, VARIANTS)
    mode = parse_choice("mode", mode, MODES)
    if role not in ("test", "validation"):
        raise ArgumentError(f"role must be 'test' or 'validation', got '{role}'")
    k_list = sorted(set(int(k) for k in k_list))
    if not k_list or k_list[0] < 1:
        raise ArgumentError(f"k_list must hold positive integers, got {k_list}")

    data = transpose(R) if mode == "item" else R
    if len(folds.assignments) != data.n:
        raise ArgumentError(f"fold split covers {len(folds.assignments)} entities, cold axis has {data.n}")
    relevance = binarize_relevance(data, threshold)
    cache = cache if cache is not None else FactorCache(None)
    log = log if log is not None else RunLog()

    def job(t: int) -> Optional[FoldMetrics]:
        return _evaluate_fold(data, relevance, folds, t, role, selector, f, L0, variant,
                              k_list, svd, maxvol, cache, log)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(folds.fold_count)))
    else:
        results = [job(t) for t in range(folds.fold_count)]

    per_fold = [r for r in results if r is not None]
    skipped = [t for t, r in enumerate(results) if r is None]
    diversities = [r.diversity for r in per_fold if r.diversity is not None]
    return EvalReport(
        per_fold=per_fold,
        aggregate=_aggregate(per_fold, k_list),
        coverage=float(np.mean([r.coverage for r in per_fold])) if per_fold else 0.0,
        diversity=float(np.mean(diversities)) if diversities else None,
        config={
            "selector": selector, "f": f, "L0": "auto" if L0 is None else L0,
            "variant": variant, "mode": mode, "k_list": k_list, "threshold": threshold,
            "fold_count": folds.fold_count, "fold_seed": folds.seed, "role": role,
            "dataset_hash": R.digest(),
        },
        skipped=skipped,
    )


# ===== Rank / seed-size sweep =====

@dataclass
class SweepCell:
    selector: str
    f: int
    L0: int
    report: EvalReport
    validation_score: Optional[float] = None
    best: bool = False


@dataclass
class SweepTable:
    cells: List[SweepCell]
    metric: str = "precision"
    metric_k: int = 10

    def best_cells(self) -> List[SweepCell]:
        return [c for c in self.cells if c.best]

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS + ["best"])
        for cell in self.cells:
            for row in cell.report.csv_rows():
                writer.writerow(row + [int(cell.best)])
        return buf.getvalue()

    def optimal_rank_text(self) -> str:
        """Per seed size, the rank picked on the validation split."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["selector", "L0", "f", "validation_score"])
        for cell in self.best_cells():
            score = "" if cell.validation_score is None else repr(cell.validation_score)
            writer.writerow([cell.selector, cell.L0, cell.f, score])
        return buf.getvalue()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metric": f"{self.metric}@{self.metric_k}",
            "cells": [
                {"selector": c.selector, "f": c.f, "L0": c.L0, "best": c.best,
                 "validation_score": c.validation_score, "report": c.report.to_dict()}
                for c in self.cells
            ],
        }


def sweep(R: RatingMatrix, folds: FoldSplit, seed_sizes: Sequence[int], rank_grid: Sequence[int],
          selector: str = "rectangular", variant: str = "ratings", mode: str = "user", *,
          config: Optional[EvalConfig] = None, svd: Optional[SvdConfig] = None,
          maxvol: Optional[MaxvolConfig] = None, cache: Optional[FactorCache] = None,
          log: Optional[RunLog] = None) -> SweepTable:
    """
    Evaluate every valid (L0, f) cell. Square cells use f = L0 only;
    rectangular cells use every f in rank_grid with f <= L0 and mark, per
    L0, the rank with the best validation metric (ties to the smaller f).
    """
    config = (config or EvalConfig()).require()
    selector = parse_choice("selector", selector, SELECTORS)
    cache = cache if cache is not None else FactorCache(None)
    log = log if log is not None else RunLog()
    k_list = sorted(set(config.k_list) | {config.metric_k})

    cells: List[SweepCell] = []
    for L0 in sorted(set(int(s) for s in seed_sizes)):
        ranks = [L0] if selector == "square" else sorted(set(int(f) for f in rank_grid if int(f) <= L0))
        row: List[SweepCell] = []
        for f in ranks:
            common = dict(threshold=config.threshold, workers=config.workers, svd=svd,
                          maxvol=maxvol, cache=cache, log=log)
            report = evaluate_cold_start(R, folds, selector, f, L0, variant, k_list, mode, **common)
            cell = SweepCell(selector, f, L0, report)
            if len(ranks) > 1:
                held = evaluate_cold_start(R, folds, selector, f, L0, variant, k_list, mode,
                                           role="validation", **common)
                cell.validation_score = held.mean(config.metric, config.metric_k)
            row.append(cell)
            _log.info("sweep: %s L0=%d f=%d %s@%d=%.4f", selector, L0, f, config.metric,
                      config.metric_k, report.mean(config.metric, config.metric_k))
        if row:
            best = max(row, key=lambda c: (c.validation_score or 0.0, -c.f))
            best.best = True
        cells.extend(row)
    return SweepTable(cells, config.metric, config.metric_k)

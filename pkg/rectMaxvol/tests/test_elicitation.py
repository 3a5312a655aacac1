"""
Tests for coefficient matrices, cold-start prediction and the full pipeline
(factorize, select, fit coefficients).
"""

import numpy as np
import pytest
from scipy.linalg import null_space

from rectMaxvol.config import SvdConfig
from rectMaxvol.data import RatingMatrix
from rectMaxvol.elicitation import (
    Predictor, build_predictor, coefficients_via_factors, coefficients_via_ratings,
    gram_condition, predict_cold, representation_error, select_seed,
)
from rectMaxvol.errors import ArgumentError, IllConditionedError, RankDeficiencyError
from rectMaxvol.factorization import Factorization, pure_svd
from rectMaxvol.ledger import RunLog
from rectMaxvol.maxvol import lu_pivot_init
from rectMaxvol.oracle import pinv_oracle


def exact_rank(n: int, m: int, f: int, seed: int = 0) -> RatingMatrix:
    rng = np.random.default_rng(seed)
    return RatingMatrix.from_dense(rng.standard_normal((f, n)).T @ rng.standard_normal((f, m)))


def factors_only(Q) -> Factorization:
    Q = np.asarray(Q, dtype=float)
    return Factorization(P=np.zeros((Q.shape[0], 1)), Q=Q, singular_values=np.ones(Q.shape[0]))


# ===== Coefficients via ratings =====

class TestCoefficientsViaRatings:
    def test_all_columns_is_identity(self):
        rng = np.random.default_rng(0)
        R = RatingMatrix.from_dense(rng.integers(1, 6, size=(20, 6)))
        C = coefficients_via_ratings(R, range(6))
        assert np.allclose(C, np.eye(6), atol=1e-10)
        assert np.linalg.norm(representation_error(R, range(6), C)) <= 1e-9

    def test_rank_one_single_seed(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        b = np.array([2.0, 1.0, 3.0])
        R = RatingMatrix.from_dense(np.outer(a, b))
        C = coefficients_via_ratings(R, [1])
        assert np.linalg.norm(representation_error(R, [1], C)) <= 1e-10

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(2)
        dense = rng.integers(1, 6, size=(50, 30)) * (rng.random((50, 30)) < 0.5)
        R = RatingMatrix.from_dense(dense)
        k = [0, 3, 7, 11, 19]
        C = coefficients_via_ratings(R, k)
        X, *_ = np.linalg.lstsq(dense[:, k].astype(float), dense.astype(float), rcond=None)
        assert np.allclose(C, X, atol=1e-8)
        assert np.linalg.norm(representation_error(R, k, C)) == pytest.approx(
            np.linalg.norm(dense - dense[:, k] @ X), rel=1e-8)

    def test_singular_gram(self):
        R = RatingMatrix.from_dense([[1.0, 1.0, 2.0], [3.0, 3.0, 1.0], [2.0, 2.0, 5.0]])
        with pytest.raises(IllConditionedError) as e:
            coefficients_via_ratings(R, [0, 1])
        assert "factors" in str(e.value)
        assert gram_condition(R, [0, 2]) < 1e12

    def test_duplicate_seed(self):
        R = RatingMatrix.from_dense(np.eye(3))
        with pytest.raises(ArgumentError):
            coefficients_via_ratings(R, [0, 0])

    def test_index_out_of_range(self):
        R = RatingMatrix.from_dense(np.eye(3))
        with pytest.raises(ArgumentError):
            coefficients_via_ratings(R, [3])


# ===== Coefficients via factors =====

class TestCoefficientsViaFactors:
    def test_identity_seed(self):
        Q = np.array([[1.0, 0.0, 0.5, 0.2], [0.0, 1.0, 0.3, 0.9]])
        assert np.allclose(coefficients_via_factors(factors_only(Q), [0, 1]), Q)

    def test_square_is_inverse(self):
        Q = np.random.default_rng(3).standard_normal((3, 10))
        k = [1, 4, 8]
        C = coefficients_via_factors(factors_only(Q), k)
        assert np.allclose(C, np.linalg.solve(Q[:, k], Q))

    def test_matches_pseudoinverse(self):
        Q = np.random.default_rng(4).standard_normal((4, 25))
        k = [0, 2, 5, 9, 13, 17, 21]
        C = coefficients_via_factors(factors_only(Q), k)
        expected = pinv_oracle(Q[:, k]) @ Q
        assert np.linalg.norm(C - expected) / np.linalg.norm(expected) <= 1e-8

    def test_rank_deficient_seed(self):
        Q = np.array([[1.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(RankDeficiencyError):
            coefficients_via_factors(factors_only(Q), [0, 1])

    def test_least_norm(self):
        rng = np.random.default_rng(17)
        Q = rng.standard_normal((3, 20))
        k = [0, 3, 6, 9, 12, 15]
        C = coefficients_via_factors(factors_only(Q), k)
        N = null_space(Q[:, k])
        for _ in range(20):
            other = C + N @ rng.standard_normal((N.shape[1], 20))
            assert np.allclose(Q[:, k] @ other, Q, atol=1e-10)
            assert np.linalg.norm(C) <= np.linalg.norm(other) + 1e-10

    def test_error_decomposition(self):
        rng = np.random.default_rng(18)
        P, Q = rng.standard_normal((3, 40)), rng.standard_normal((3, 25))
        E = 0.01 * rng.standard_normal((40, 25))
        R = RatingMatrix.from_dense(P.T @ Q + E)
        F = Factorization(P=P, Q=Q, singular_values=np.ones(3))
        k = [1, 5, 8, 13, 20]
        C = coefficients_via_factors(F, k)
        assert np.allclose(representation_error(R, k, C), E - E[:, k] @ C, atol=1e-8)


# ===== Prediction =====

class TestPredictCold:
    def test_zero_ratings(self):
        C = np.random.default_rng(5).standard_normal((3, 8))
        assert np.array_equal(predict_cold(np.zeros(3), C), np.zeros(8))

    def test_identity_block(self):
        C = np.hstack([np.eye(2), np.ones((2, 2))])
        z = predict_cold([4.0, 2.0], C)
        assert z[:2].tolist() == [4.0, 2.0]

    def test_batch(self):
        C = np.random.default_rng(6).standard_normal((3, 5))
        Z = np.random.default_rng(7).standard_normal((4, 3))
        assert np.allclose(predict_cold(Z, C), Z @ C)

    def test_dimension_mismatch(self):
        with pytest.raises(ArgumentError):
            predict_cold([1.0, 2.0], np.ones((3, 4)))

    def test_warm_user_recovered(self):
        R = exact_rank(60, 40, 4, seed=8)
        F = pure_svd(R, 4)
        k = list(lu_pivot_init(F.Q).indices)
        C = coefficients_via_factors(F, k)
        row = R.toarray()[7]
        assert np.allclose(predict_cold(row[k], C), row, atol=1e-8)


# ===== Selection and predictor building =====

class TestSelectSeed:
    def test_square_needs_matching_sizes(self):
        Q = np.random.default_rng(9).standard_normal((3, 12))
        with pytest.raises(ArgumentError):
            select_seed(Q, 5, "square")

    def test_unknown_selector_hint(self):
        Q = np.random.default_rng(9).standard_normal((3, 12))
        with pytest.raises(ArgumentError) as e:
            select_seed(Q, 5, "rectangle")
        assert "rectangular" in str(e.value)


class TestBuildPredictor:
    def test_square(self):
        R = exact_rank(80, 50, 5, seed=10)
        predictor = build_predictor(R, 5, 5, "factors", "square")
        assert len(predictor.indices) == 5
        assert predictor.coefficients.shape == (5, 50)

    def test_degenerate_rectangle_is_init(self):
        R = exact_rank(80, 50, 5, seed=11)
        F = pure_svd(R, 5)
        predictor = build_predictor(R, 5, 5, "factors", "rectangular", factorization=F)
        assert predictor.indices == lu_pivot_init(F.Q).indices

    def test_held_out_rows(self):
        R = exact_rank(300, 60, 5, seed=12)
        train, held = R.rows(np.arange(250)), R.toarray()[250:]
        predictor = build_predictor(train, 5, 15, "factors", "rectangular")
        k = list(predictor.indices)
        assert len(set(k)) == 15
        assert np.allclose(predictor.predict(held[:, k]), held, atol=1e-6)

    def test_ratings_variant(self):
        rng = np.random.default_rng(13)
        R = RatingMatrix.from_dense(rng.integers(1, 6, size=(60, 25)))
        log = RunLog()
        predictor = build_predictor(R, 4, 8, "ratings", log=log)
        assert predictor.coefficients.shape == (8, 25)
        assert [t.step for t in log.traces] == ["svd", "select", "coefficients"]
        assert log.ok

    def test_auto_size(self):
        R = exact_rank(120, 80, 4, seed=14)
        predictor = build_predictor(R, 4, None, "factors")
        assert predictor.L0 >= 4
        assert predictor.meta["max_offseed_norm"] <= 1.0

    def test_rank_above_seed_size(self):
        R = exact_rank(30, 20, 3)
        with pytest.raises(ArgumentError):
            build_predictor(R, 6, 4)

    def test_square_auto_rejected(self):
        R = exact_rank(30, 20, 3)
        with pytest.raises(ArgumentError):
            build_predictor(R, 3, None, selector="square")

    def test_uses_given_svd_config(self):
        R = exact_rank(40, 30, 3, seed=15)
        log = RunLog()
        build_predictor(R, 3, 6, "factors", svd=SvdConfig(solver="dense"), log=log)
        assert log.find("svd")[0].meta["solver"] == "dense"


class TestPredictorFiles:
    def test_save_and_load(self, tmp_path):
        R = exact_rank(50, 30, 3, seed=16)
        predictor = build_predictor(R, 3, 6, "factors")
        predictor.save(tmp_path / "model")
        assert (tmp_path / "model.json").exists()
        loaded = Predictor.load(tmp_path / "model")
        assert loaded.indices == predictor.indices
        assert np.array_equal(loaded.coefficients, predictor.coefficients)
        assert loaded.dataset_hash == R.digest()
        assert loaded.header()["schema_version"] == 1

    def test_rejects_other_schema(self, tmp_path):
        R = exact_rank(50, 30, 3, seed=16)
        build_predictor(R, 3, 6, "factors").save(tmp_path / "model")
        path = tmp_path / "model.json"
        path.write_text(path.read_text().replace('"schema_version": 1', '"schema_version": 99'))
        with pytest.raises(ArgumentError):
            Predictor.load(tmp_path / "model")

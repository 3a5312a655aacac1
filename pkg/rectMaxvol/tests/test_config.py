"""
Tests for parameter bundles, error hints and the run ledger.
"""

import json
import os

import numpy as np
import pytest

from rectMaxvol.config import (
    EvalConfig, MaxvolConfig, RunConfig, SvdConfig, cache_dir, parse_seed_size,
)
from rectMaxvol.errors import (
    ArgumentError, ParseError, RectMaxvolError, check_indices, find_closest, parse_choice,
)
from rectMaxvol.ledger import Ledger, RunLog, stable_json, write_atomic


# ===== Errors =====

class TestErrors:
    def test_hint_in_message(self):
        e = RectMaxvolError("seed set is empty", hint="pass at least one index")
        assert str(e) == "seed set is empty. Hint: pass at least one index"
        assert e.message == "seed set is empty"

    def test_parse_error_line(self):
        assert str(ParseError("bad field", 7)).startswith("Line 7: ")
        assert str(ParseError("bad field")) == "bad field"

    def test_argument_error_is_value_error(self):
        assert issubclass(ArgumentError, ValueError)

    def test_did_you_mean(self):
        with pytest.raises(ArgumentError, match="Did you mean 'square'"):
            parse_choice("selector", "sqare", ("square", "rectangular"))

    def test_no_close_match(self):
        with pytest.raises(ArgumentError, match="Expected one of: user, item"):
            parse_choice("mode", "everything", ("user", "item"))

    def test_normalizes_case(self):
        assert parse_choice("variant", " Factors ", ("ratings", "factors")) == "factors"

    def test_find_closest(self):
        assert find_closest("arpak", ("auto", "dense", "arpack")) == "arpack"
        assert find_closest("zzzzzzz", ("auto", "dense")) is None

    def test_check_indices(self):
        check_indices([0, 4], 5)
        with pytest.raises(ArgumentError, match="out of range"):
            check_indices([5], 5, "seed index")


# ===== Config =====

class TestRunConfig:
    def test_defaults_valid(self):
        config = RunConfig.build(command="select")
        assert config.svd() == SvdConfig(solver="auto", seed=0)

    def test_normalizes_names(self):
        config = RunConfig.build(command="select", selector="SQUARE", f=5, L0=5, solver="Dense")
        assert config.selector == "square"
        assert config.solver == "dense"

    @pytest.mark.parametrize("fields,message", [
        ({"f": 8, "L0": 4}, "exceeds seed size"),
        ({"selector": "square", "f": 3, "L0": 5}, "needs f == L0"),
        ({"selector": "square", "L0": None}, "requires the rectangular selector"),
        ({"workers": 0}, "workers must be positive"),
        ({"fold_count": 0}, "fold_count"),
        ({"maxvol": MaxvolConfig(stop_norm=0.0)}, "stop_norm"),
    ])
    def test_rejects(self, fields, message):
        with pytest.raises(ArgumentError, match=message):
            RunConfig.build(command="select", **fields)

    def test_unknown_solver(self):
        with pytest.raises(ArgumentError, match="Did you mean 'arpack'"):
            RunConfig.build(command="select", solver="arpak")

    def test_auto_seed_size(self):
        assert RunConfig.build(command="select", f=3, L0=None).L0 is None

    def test_evaluation_bundle(self):
        config = RunConfig.build(command="evaluate", k_list=(5, 10), threshold=3.5, workers=2)
        ev = config.evaluation()
        assert ev == EvalConfig(threshold=3.5, k_list=(5, 10), workers=2)


class TestSmallConfigs:
    def test_swap_budget(self):
        assert MaxvolConfig().swap_budget(7) == 14
        assert MaxvolConfig(max_iters=3).swap_budget(7) == 3

    def test_solver_resolution(self):
        assert SvdConfig().resolve(100, 100) == "dense"
        assert SvdConfig(dense_limit=10).resolve(100, 100) == "arpack"
        assert SvdConfig(solver="arpack").resolve(2, 2) == "arpack"
        assert SvdConfig(solver="arpack").resolve(5, 4, 4) == "dense"
        assert SvdConfig(dense_limit=10).resolve(100, 100, 100) == "dense"
        assert SvdConfig(dense_limit=10).resolve(100, 100, 99) == "arpack"

    def test_eval_rejects_zero_k(self):
        with pytest.raises(ArgumentError):
            EvalConfig(k_list=(0, 5)).require()

    def test_seed_size(self):
        assert parse_seed_size("auto") is None
        assert parse_seed_size(" AUTO ") is None
        assert parse_seed_size("12") == 12
        with pytest.raises(ArgumentError):
            parse_seed_size("0")
        with pytest.raises(ArgumentError):
            parse_seed_size("twelve")

    def test_cache_dir(self, monkeypatch, tmp_path):
        monkeypatch.delenv("RECTMAXVOL_CACHE_DIR", raising=False)
        assert cache_dir() is None
        monkeypatch.setenv("RECTMAXVOL_CACHE_DIR", str(tmp_path))
        assert cache_dir() == tmp_path
        assert cache_dir("elsewhere").name == "elsewhere"


# ===== Ledger =====

class TestStableJson:
    def test_sorted_and_numpy(self):
        text = stable_json({"b": np.float64(0.5), "a": np.arange(3)})
        assert text == '{"a":[0,1,2],"b":0.5}'

    def test_non_finite(self):
        assert json.loads(stable_json({"x": float("inf")})) == {"x": "inf"}

    def test_nested_objects(self):
        assert json.loads(stable_json({"cfg": MaxvolConfig()}))["cfg"]["tol"] == 0.01


class TestWriteAtomic:
    def test_writes_and_replaces(self, tmp_path):
        path = tmp_path / "out" / "report.json"
        write_atomic(path, "one")
        write_atomic(path, "two")
        assert path.read_text() == "two"
        assert os.listdir(path.parent) == ["report.json"]


class TestRunLog:
    def test_timed_step(self):
        log = RunLog()
        with log.timed("svd") as t:
            t.meta["f"] = 3
        trace = log.find("svd")[0]
        assert trace.ok
        assert trace.meta["f"] == 3
        assert trace.meta["elapsed_ms"] >= 0.0

    def test_failed_step(self):
        log = RunLog()
        with pytest.raises(ArgumentError):
            with log.timed("select"):
                raise ArgumentError("boom")
        assert not log.ok
        assert log.traces[0].note == "boom"


class TestLedger:
    def test_chain(self):
        ledger = Ledger()
        assert ledger.head() == "GENESIS"
        ledger.append("load", {"path": "a.csv"}, {"hash": "x"})
        ledger.append("select", {"f": 3}, {"k": [1, 2, 3]})
        assert len(ledger) == 2
        assert ledger.entries[1].prev_hash == ledger.entries[0].hash
        assert ledger.verify_chain()

    def test_identical_runs_identical_heads(self):
        a, b = Ledger(), Ledger()
        for ledger in (a, b):
            ledger.append("select", {"f": 3}, {"k": np.array([4, 1])})
        assert a.head() == b.head()

    def test_tamper_detected(self):
        ledger = Ledger()
        ledger.append("load", {}, {"n": 1})
        ledger.append("select", {}, {"k": [0]})
        first = ledger.entries[0]
        ledger.entries[0] = type(first)(first.index, first.operation, first.input_hash,
                                        "0" * 64, first.prev_hash, first.hash)
        assert not ledger.verify_chain()

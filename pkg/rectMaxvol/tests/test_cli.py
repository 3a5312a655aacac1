"""
End-to-end tests for the rectmaxvol command line.
"""

import json

import numpy as np
import pytest

from rectMaxvol.cli import _int_list, build_parser, main
from rectMaxvol.data import RatingMatrix, write_ratings


def ratings(n: int = 60, m: int = 30, seed: int = 0) -> RatingMatrix:
    rng = np.random.default_rng(seed)
    mask = rng.random((n, m)) < 0.6
    mask[np.arange(n), np.arange(n) % m] = True
    return RatingMatrix.from_dense(rng.integers(1, 6, size=(n, m)) * mask,
                                   user_ids=np.arange(n) + 100, item_ids=np.arange(m) + 1000)


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "ratings.csv"
    with path.open("w", newline="") as f:
        write_ratings(ratings(), f)
    return path


def run_json(args, out):
    code = main([str(a) for a in args] + ["-o", str(out)])
    return code, json.loads(out.read_text()) if out.exists() else None


# ===== select =====

class TestSelect:
    def test_rectangular(self, dataset, tmp_path):
        code, report = run_json(["select", dataset, "-f", 3, "-L", 9], tmp_path / "seed.json")
        assert code == 0
        assert len(set(report["k"])) == 9
        assert all(1000 <= i < 1030 for i in report["external_ids"])
        assert report["schema_version"] == 1
        assert len(report["w"]) == 30
        assert "select" in report["timings_ms"]

    def test_square(self, dataset, tmp_path):
        code, report = run_json(["select", dataset, "--selector", "square", "-f", 4, "-L", 4],
                                tmp_path / "seed.json")
        assert code == 0
        assert len(report["k"]) == 4
        assert report["dominance_tol"] == 0.01

    def test_auto(self, dataset, tmp_path):
        code, report = run_json(["select", dataset, "-f", 3, "-L", "auto"], tmp_path / "seed.json")
        assert code == 0
        assert report["L0"] == "auto"
        assert report["max_offseed_norm"] <= 1.0
        assert len(report["k"]) >= 3

    def test_item_mode_returns_users(self, dataset, tmp_path):
        code, report = run_json(["select", dataset, "--mode", "item", "-f", 3, "-L", 5],
                                tmp_path / "seed.json")
        assert code == 0
        assert all(100 <= u < 160 for u in report["external_ids"])

    def test_save_predictor(self, dataset, tmp_path):
        code, report = run_json(["select", dataset, "-f", 3, "-L", 6, "--save-predictor", tmp_path / "model"],
                                tmp_path / "seed.json")
        assert code == 0
        assert (tmp_path / "model.npy").exists()
        header = json.loads((tmp_path / "model.json").read_text())
        assert header["k"] == report["k"]

    def test_cache_dir_from_env(self, dataset, tmp_path, monkeypatch):
        monkeypatch.setenv("RECTMAXVOL_CACHE_DIR", str(tmp_path / "cache"))
        assert main(["select", str(dataset), "-f", "3", "-L", "5", "-o", str(tmp_path / "a.json")]) == 0
        assert list((tmp_path / "cache").glob("factors-*.npz"))


class TestErrors:
    def test_unknown_selector(self, dataset, capsys):
        assert main(["select", str(dataset), "--selector", "rectangle"]) == 1
        assert "Did you mean 'rectangular'" in capsys.readouterr().err

    def test_rank_above_seed_size(self, dataset, capsys):
        assert main(["select", str(dataset), "-f", "6", "-L", "4"]) == 1
        assert "exceeds seed size" in capsys.readouterr().err

    def test_square_auto(self, dataset):
        assert main(["select", str(dataset), "--selector", "square", "-f", "3", "-L", "auto"]) == 1

    def test_missing_file(self, tmp_path, capsys):
        assert main(["select", str(tmp_path / "nope.csv")]) == 1
        assert "File not found" in capsys.readouterr().err

    def test_bad_rating_line(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("1,10,5\n2,11,12\n")
        assert main(["select", str(path), "-f", "1", "-L", "1"]) == 1
        assert "Line 2" in capsys.readouterr().err

    def test_bad_seed_size(self, dataset):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["select", str(dataset), "-L", "many"])

    def test_no_command(self):
        assert main([]) == 1


# ===== evaluate / sweep =====

class TestEvaluate:
    def test_writes_json_and_csv(self, dataset, tmp_path):
        csv_path = tmp_path / "metrics.csv"
        code, payload = run_json(["evaluate", dataset, "-f", 3, "-L", 6, "-k", "5,10", "--csv", csv_path],
                                 tmp_path / "report.json")
        assert code == 0
        assert payload["report"]["definitions"]["coverage"] == "toolkit"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "selector,f,L0,k,metric,mean,sigma"
        assert len(lines) == 5

    def test_rerun_is_byte_identical(self, dataset, tmp_path):
        for name in ("a", "b"):
            assert main(["evaluate", str(dataset), "-f", "3", "-L", "6", "--csv", str(tmp_path / f"{name}.csv"),
                         "-o", str(tmp_path / f"{name}.json")]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_item_mode(self, dataset, tmp_path):
        code, payload = run_json(["evaluate", dataset, "--mode", "item", "--folds", 3, "-f", 3, "-L", 6],
                                 tmp_path / "item.json")
        assert code == 0
        assert payload["report"]["config"]["mode"] == "item"
        assert len(payload["report"]["per_fold"]) + len(payload["report"]["skipped_folds"]) == 3

    def test_seed_flag_changes_folds(self, dataset, tmp_path):
        _, a = run_json(["evaluate", dataset, "-f", 3, "-L", 6], tmp_path / "a.json")
        assert main(["--seed", "9", "evaluate", str(dataset), "-f", "3", "-L", "6",
                     "-o", str(tmp_path / "b.json")]) == 0
        b = json.loads((tmp_path / "b.json").read_text())
        assert a["report"]["config"]["fold_seed"] == 0
        assert b["report"]["config"]["fold_seed"] == 9


class TestSweep:
    def test_grid_and_optimal_rank(self, dataset, tmp_path):
        code, payload = run_json(
            ["sweep", dataset, "--seed-sizes", "4:8:4", "--ranks", "2,4", "-k", "5",
             "--csv", tmp_path / "grid.csv", "--optimal-csv", tmp_path / "best.csv"],
            tmp_path / "sweep.json",
        )
        assert code == 0
        cells = [(c["f"], c["L0"]) for c in payload["table"]["cells"]]
        assert cells == [(2, 4), (4, 4), (2, 8), (4, 8)]
        assert len((tmp_path / "best.csv").read_text().splitlines()) == 3

    def test_requires_seed_sizes(self, dataset, tmp_path):
        assert main(["sweep", str(dataset), "-o", str(tmp_path / "s.json")]) == 1


# ===== verify =====

class TestVerifyCommand:
    def test_filtered_run(self, capsys):
        assert main(["verify", "--filter", "lemma"]) == 0
        assert "ALL 1 CHECKS PASSED" in capsys.readouterr().out

    def test_seeded_output_repeats(self, capsys):
        main(["--seed", "2", "verify", "--filter", "deletion"])
        first = capsys.readouterr().out
        main(["--seed", "2", "verify", "--filter", "deletion"])
        assert capsys.readouterr().out == first


class TestIntList:
    def test_range(self):
        assert _int_list("5:100:5") == tuple(range(5, 101, 5))

    def test_mixed(self):
        assert _int_list("5,10,20:30:10") == (5, 10, 20, 30)

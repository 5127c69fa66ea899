import json

import numpy as np
import pytest

from wmnmf.cli import main
from wmnmf.theory import BoundInputs, dim_dependent_bound, dim_independent_bound


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth2")
    assert main(["synth", "synth2-desk", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def fitted(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    code = main(["fit", str(synth_dir / "manifest.json"), "--mode", "wm-nmf", "--k", "10",
                 "--seed", "7", "--out", str(out)])
    assert code == 0
    return out


def test_synth_layout(synth_dir):
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    assert len(manifest["views"]) == 4
    labels = np.loadtxt(synth_dir / "labels.csv", dtype=int)
    assert np.bincount(labels).tolist() == [80] * 10


def test_synth_deterministic(synth_dir, tmp_path):
    assert main(["synth", "synth2-desk", "--out", str(tmp_path)]) == 0
    for name in ["view1.csv", "view4.csv", "labels.csv"]:
        assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()


def test_synth_errors(tmp_path):
    assert main(["synth", "nope", "--out", str(tmp_path)]) == 2
    spec = {"n_obs": 10, "n_clusters": 2,
            "views": [{"n_features": 3, "corruption": {"start": 0, "stop": 20}}]}
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    assert main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "o")]) == 2


def test_fit_results_schema(fitted):
    res = json.loads((fitted / "results.json").read_text())
    assert set(res["metrics"]) == {"acc", "nmi", "precision", "recall", "fscore", "adj_ri"}
    assert sum(res["alpha"]) == pytest.approx(1.0, abs=1e-12)
    assert res["config"]["seed"] == 7 and res["config"]["k"] == 10
    W = np.loadtxt(fitted / "weights.csv", delimiter=",")
    assert W.shape == (800, 4)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-9)
    assert np.loadtxt(fitted / "labels.csv", dtype=int).shape == (800,)


def test_fit_config_round_trip(fitted, synth_dir, tmp_path):
    code = main(["fit", "--config", str(fitted / "results.json"), str(synth_dir / "manifest.json"),
                 "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "weights.csv").read_bytes() == (fitted / "weights.csv").read_bytes()
    assert (tmp_path / "labels.csv").read_bytes() == (fitted / "labels.csv").read_bytes()


def test_fit_multinmf1_keeps_uniform_alpha(synth_dir, tmp_path):
    assert main(["fit", str(synth_dir / "manifest.json"), "--mode", "multinmf1", "--k", "10",
                 "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "results.json").read_text())
    assert res["alpha"] == [0.25] * 4


def test_fit_transposed_input(tmp_path, rng):
    X = rng.random((12, 5)) + 0.1
    np.savetxt(tmp_path / "v.csv", X, delimiter=",")
    (tmp_path / "m.json").write_text(json.dumps({"views": ["v.csv", "v.csv"]}))
    assert main(["fit", str(tmp_path / "m.json"), "--transpose", "--k", "2", "--assign", "argmax",
                 "--out", str(tmp_path / "o")]) == 0
    assert np.loadtxt(tmp_path / "o" / "weights.csv", delimiter=",").shape == (12, 2)


def test_fit_replications(tmp_path):
    assert main(["fit", "--preset", "synth2-desk", "--k", "10", "--replications", "2",
                 "--max-outer", "3", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "results.json").read_text())
    assert [r["seed"] for r in res["replications"]] == [0, 1]
    assert set(res["metrics_summary"]["acc"]) == {"mean", "sd"}


def test_fit_input_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    (tmp_path / "m.json").write_text(json.dumps({"views": ["bad.csv"]}))
    assert main(["fit", str(tmp_path / "m.json"), "--k", "1", "--out", str(tmp_path / "o")]) == 2
    assert "bad.csv" in capsys.readouterr().err
    assert main(["fit", str(tmp_path / "missing.json"), "--k", "1"]) == 2
    (tmp_path / "neg.csv").write_text("1,-2,3\n4,5,6\n")
    (tmp_path / "n.json").write_text(json.dumps({"views": ["neg.csv"]}))
    assert main(["fit", str(tmp_path / "n.json"), "--k", "1"]) == 2
    assert main(["fit", "--preset", "synth2-desk"]) == 2
    assert main(["fit", "--preset", "synth2-desk", "--k", "0"]) == 2
    assert main(["nonsense"]) == 2


def test_fit_overflowing_view_is_input_error(tmp_path):
    np.savetxt(tmp_path / "v.csv", np.full((3, 8), 1e308), delimiter=",")
    (tmp_path / "m.json").write_text(json.dumps({"views": ["v.csv"]}))
    assert main(["fit", str(tmp_path / "m.json"), "--k", "2", "--out", str(tmp_path / "o")]) == 2


def test_fit_computation_error(tmp_path, monkeypatch):
    import wmnmf.cli as cli
    from wmnmf.solver import NonFiniteObjective

    def boom(*a, **k):
        raise NonFiniteObjective("objective became nan", [1.0, float("nan")])

    monkeypatch.setattr(cli, "fit", boom)
    assert main(["fit", "--preset", "synth2-desk", "--k", "10", "--out", str(tmp_path)]) == 3


def test_bounds_table(capsys):
    assert main(["bounds", "--N", "100", "1000", "10000", "--M", "20", "--K", "3",
                 "--w-star", "0.9", "--delta", "0.05"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, map(float, line.split(",")))) for line in lines[1:]]
    dep = [r["dim_dependent"] for r in rows]
    ind = [r["dim_independent"] for r in rows]
    assert dep == sorted(dep, reverse=True) and ind == sorted(ind, reverse=True)
    inp = BoundInputs(N=100, M=20, K=3, w_star=0.9, delta=0.05)
    assert rows[0]["dim_dependent"] == dim_dependent_bound(inp)
    assert rows[0]["dim_independent"] == dim_independent_bound(inp)


def test_bounds_bad_delta():
    assert main(["bounds", "--N", "100", "--M", "5", "--K", "2", "--w-star", "1", "--delta", "1"]) == 2


def test_probe_sparsity(capsys, tmp_path):
    assert main(["probe", "sparsity", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    col = lines[0].split(",").index("max_alpha")
    maxes = [float(line.split(",")[col]) for line in lines[1:]]
    assert all(b <= a for a, b in zip(maxes, maxes[1:]))
    assert (tmp_path / "probe_sparsity.csv").exists()


def test_probe_monotonicity(capsys):
    assert main(["probe", "monotonicity", "--preset", "synth1-desk", "--replications", "20"]) == 0
    out = capsys.readouterr().out
    assert "# total_violations=0" in out


def test_probe_scaling(capsys):
    assert main(["probe", "scaling", "--preset", "synth2-desk", "--sizes", "2", "3", "4",
                 "--max-outer", "1"]) == 0
    assert "# r2=" in capsys.readouterr().out


def test_probe_perturbation(capsys):
    assert main(["probe", "perturbation", "--preset", "synth2-desk", "--k", "10",
                 "--replications", "1", "--levels", "0", "0.01"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    assert float(rows[0].split(",")[1]) == 0.0


def test_baseline_table(capsys):
    assert main(["baseline", "--preset", "synth1-desk", "--k", "10"]) == 0
    rows = {line.split(",")[0]: line.split(",") for line in capsys.readouterr().out.splitlines()}
    assert {"WM-NMF", "ConcatK", "BSV-kmeans"} <= set(rows)
    assert float(rows["WM-NMF"][1]) >= float(rows["ConcatK"][1])


def test_baseline_identical_views(tmp_path, capsys):
    r = np.random.default_rng(0)
    truth = np.repeat([0, 1, 2], 20)
    X = (np.eye(3)[truth] * 10 + r.random((60, 3))).T
    np.savetxt(tmp_path / "v.csv", X, delimiter=",")
    np.savetxt(tmp_path / "labels.csv", truth, fmt="%d")
    (tmp_path / "m.json").write_text(json.dumps({"views": ["v.csv", "v.csv"], "labels": "labels.csv"}))
    assert main(["baseline", str(tmp_path / "m.json"), "--k", "2"]) == 0
    rows = {line.split(",")[0]: line.split(",") for line in capsys.readouterr().out.splitlines()}
    assert float(rows["ConcatK"][1]) == pytest.approx(float(rows["BSV-kmeans"][1]), abs=0.05)


def test_baseline_needs_labels(tmp_path):
    np.savetxt(tmp_path / "v.csv", np.random.default_rng(0).random((4, 10)), delimiter=",")
    (tmp_path / "m.json").write_text(json.dumps({"views": ["v.csv"]}))
    assert main(["baseline", str(tmp_path / "m.json"), "--k", "2"]) == 2

import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from elastobayes.cli import main

SMOKE = str(Path(__file__).resolve().parents[1] / "configs" / "smoke.ini")


def run(out, *args, config=SMOKE, seed=0):
    return main(["--config", config, "--out", str(out), "--seed", str(seed), *args])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("smoke")
    for cmd in ("synth", "topo", "mcmc", "map", "laplace"):
        assert run(out, cmd) == 0, cmd
    assert run(out, "report") == 0
    assert run(out, "report", "--source", "laplace") == 0
    return out


def test_pipeline_writes_every_artifact(pipeline):
    names = {p.name for p in pipeline.iterdir()}
    expected = {
        "clean.csv", "noisy.csv", "truth_shapes.csv", "data_meta.json",
        "energy_full.txt", "circles.csv", "prior_mean.csv", "topo_meta.json",
        "chain.csv", "chain_diagnostics.json",
        "map_shapes.csv", "gamma_pt.csv", "cost_history.csv", "map_meta.json",
        "laplace_samples.csv",
        "chain_stats.csv", "chain_membership.csv", "chain_summary.json",
        "laplace_stats.csv", "laplace_membership.csv", "laplace_summary.json",
    }
    assert expected <= names
    assert any(n.startswith("energy_fraction_") for n in names)
    topo = json.loads((pipeline / "topo_meta.json").read_text())
    assert topo["n_circles"] >= 1
    diag = json.loads((pipeline / "chain_diagnostics.json").read_text())
    assert diag["W"] == 20 and diag["S_kept"] == 2
    G = np.loadtxt(pipeline / "gamma_pt.csv", delimiter=",")
    assert G.shape == (8, 8) and np.allclose(G, G.T)


def test_seed_determinism(pipeline, tmp_path):
    for name in ("data_meta.json", "noisy.csv", "circles.csv"):
        shutil.copy(pipeline / name, tmp_path / name)
    assert run(tmp_path, "mcmc") == 0
    assert (tmp_path / "chain.csv").read_text() == (pipeline / "chain.csv").read_text()
    assert run(tmp_path, "mcmc", seed=1) == 0
    assert (tmp_path / "chain.csv").read_text() != (pipeline / "chain.csv").read_text()


def test_synth_seed_controls_noise(tmp_path):
    assert run(tmp_path / "a", "synth", seed=4) == 0
    assert run(tmp_path / "b", "synth", seed=4) == 0
    assert run(tmp_path / "c", "synth", seed=5) == 0
    a, b, c = ((tmp_path / d / "noisy.csv").read_text() for d in "abc")
    assert a == b != c


def test_empty_chain_fails(pipeline, tmp_path):
    for name in ("circles.csv",):
        shutil.copy(pipeline / name, tmp_path / name)
    (tmp_path / "chain.csv").write_text("walker,step,log_post,accepted,p_0\n")
    assert run(tmp_path, "report") == 3


def test_missing_input_exit_code(tmp_path):
    assert run(tmp_path, "topo") == 3
    assert run(tmp_path, "laplace") == 3


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[nowhere]\nx = 1\n")
    assert run(tmp_path, "synth", config=str(bad)) == 2


def test_global_options_work_after_subcommand(pipeline, tmp_path):
    assert main(["report", "--config", SMOKE, "--out", str(pipeline)]) == 0


def test_inverse_crime_guard(pipeline, tmp_path):
    same = tmp_path / "same.ini"
    same.write_text(Path(SMOKE).read_text().replace("coarsen = 2", "coarsen = 1"))
    for name in ("data_meta.json", "noisy.csv"):
        shutil.copy(pipeline / name, tmp_path / name)
    assert run(tmp_path, "topo", config=str(same)) == 2
    assert main(["--config", str(same), "--out", str(tmp_path), "--allow-inverse-crime", "topo"]) == 0

import csv

import numpy as np
import pytest

from bcpgraph.harness import (ARCHETYPES, ExperimentLog, SceneSpec, archetype, load_scene,
                              run_experiment, simulate_scene, write_scene)
from bcpgraph.sampler import SamplerSchedule

FAST = SamplerSchedule(steps=12, discard=4, burn_in_fpp=3, n_app=2)


@pytest.mark.parametrize("name", sorted(ARCHETYPES))
def test_archetypes_are_valid(name):
    spec = archetype(name, 8, 8)
    assert spec.block_map.shape == (8, 8)
    assert len(np.unique(spec.block_map)) == len(spec.block_means)
    assert spec.truth.shape == (64,)


def test_half_split_layout():
    spec = archetype("half-split", 20, 20)
    grid = spec.truth.reshape(20, 20)
    assert np.all(grid[:, :10] == 0) and np.all(grid[:, 10:] == 1)
    assert spec.truth.mean() == 0.5


def test_scene_validation():
    with pytest.raises(ValueError):
        SceneSpec("bad", np.array([[0, 2]]), (0.0, 1.0), 1.0)
    with pytest.raises(ValueError):
        SceneSpec("bad", np.array([[0, 1]]), (0.0, 1.0), 0.0)
    with pytest.raises(KeyError):
        archetype("spiral")


def test_simulate_limits_and_determinism():
    spec = archetype("quadrants", 6, 6, sigma=1e-12)
    ds, truth = simulate_scene(spec, 3)
    assert np.max(np.abs(ds.y - truth)) < 1e-10
    spec = archetype("stripes", 6, 6)
    a, _ = simulate_scene(spec, 9)
    b, _ = simulate_scene(spec, 9)
    c, _ = simulate_scene(spec, 10)
    assert a.y.tobytes() == b.y.tobytes()
    assert a.y.tobytes() != c.y.tobytes()


def test_run_experiment_rows(tmp_path):
    spec = archetype("half-split", 6, 6)
    out = tmp_path / "res.csv"
    res = run_experiment([spec], [0.2], ["BCP-Graph-0"], 2, FAST, out_csv=out)
    assert len(res) == 2
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 2
    assert {r["method"] for r in rows} == {"BCP-Graph-0"}
    assert rows[0]["seed"] != rows[1]["seed"]
    again = run_experiment([spec], [0.2], ["BCP-Graph-0"], 2, FAST)
    assert [r.mse for r in res] == [r.mse for r in again]


def test_methods_share_replicate_data():
    spec = archetype("single-island", 6, 6)
    res = run_experiment([spec], [0.1, 0.3], ["BCP-Graph-0", "BCP-Graph-1"], 1, FAST)
    assert len(res) == 4
    assert len({r.seed for r in res}) == 1
    with pytest.raises(ValueError):
        run_experiment([spec], [0.1], ["BCP-Grid"], 1, FAST)


def test_failures_are_logged():
    spec = archetype("half-split", 4, 4)
    log = ExperimentLog()
    # alpha outside (0, 1) fails inside the run and must not stop the sweep
    res = run_experiment([spec], [1.5, 0.2], ["BCP-Graph-1"], 1, FAST, log=log)
    assert len(res) == 1 and len(log.failures) == 1
    assert "alpha" in log.failures[0]["error"]


def test_scene_round_trip(tmp_path):
    spec = archetype("nested-square", 9, 7, sigma=0.5)
    csv_path, side = write_scene(spec, tmp_path / "nested.csv")
    assert side.exists()
    back = load_scene(csv_path)
    assert np.array_equal(back.block_map, spec.block_map)
    assert back.block_means == spec.block_means and back.sigma == 0.5
    (tmp_path / "ragged.csv").write_text("0,1\n0\n")
    (tmp_path / "ragged.json").write_text('{"block_means": [0, 1], "sigma": 1}')
    with pytest.raises(ValueError):
        load_scene(tmp_path / "ragged.csv")

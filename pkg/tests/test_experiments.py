import csv
import json

import numpy as np
import pytest

from lyaplasso.experiments import (
    DEFAULTS,
    KINDS,
    ConfigError,
    ExperimentConfig,
    chain_drift,
    config_schema,
    irrep_curve,
    irrep_flags,
    run_custom,
    run_experiment,
    run_irrep_frequency,
    run_path_cycle,
    run_robustness_grid,
    run_weak_irrep_impact,
    validate_config,
)
from lyaplasso.irrep import SupportSet
from lyaplasso.simulation import sample_stable_uniform_many
from oracles import gram_bruteforce, lyapunov_scipy

SMALL_PATH = {"n_values": [200, "inf"], "replications": 2, "grid_size": 25}


def _pointers(data):
    with pytest.raises(ConfigError) as exc:
        validate_config(data)
    return [ptr for ptr, _ in exc.value.errors]


def test_every_kind_has_defaults_and_a_schema():
    for kind in KINDS:
        assert kind in DEFAULTS
        assert config_schema(kind)["additionalProperties"] is False


def test_validation_reports_json_pointers():
    assert _pointers({"kind": "path_cycle", "replications": 0}) == ["/replications"]
    assert _pointers({"kind": "path_cycle", "n_values": [100, "many"]}) == ["/n_values/1"]
    assert _pointers({"kind": "robustness_grid", "schemes": ["identity", "bogus"]}) == ["/schemes/1"]
    assert _pointers({"kind": "nope"}) == ["/kind"]
    assert set(_pointers({"kind": "custom", "p": 5})) == {""}
    assert _pointers({"kind": "irrep_curve", "extra": 1}) == [""]
    assert _pointers([]) == [""]


def test_config_defaults_and_overrides():
    cfg = ExperimentConfig.defaults("path_cycle", replications=3)
    assert cfg["replications"] == 3
    assert cfg["base_seed"] == DEFAULTS["common"]["base_seed"]
    assert cfg.to_dict()["kind"] == "path_cycle"
    cfg2 = ExperimentConfig.defaults("path_cycle")
    cfg2.params["diag"].append(7.0)
    assert DEFAULTS["path_cycle"]["diag"] == [2.0, 3.0, 4.0, 5.0, 6.0]


def test_chain_drift():
    m = chain_drift([2.0, 3.0, 4.0], 0.65, 0.5)
    assert np.array_equal(np.diag(m), [-2.0, -3.0, -4.0])
    assert m[1, 0] == m[2, 1] == 0.65
    assert m[0, 2] == 0.5
    assert np.count_nonzero(chain_drift([1.0, 1.0], 0.1)) == 3


def test_path_cycle_small_run():
    res = run_path_cycle(SMALL_PATH)
    rows = {(r["model"], r["n"]): r for r in res.tables["fig3"]}
    assert len(rows) == 6
    assert rows[("path", "inf")]["replications"] == 1
    assert rows[("cycle_random", "inf")]["replications"] == 2
    assert rows[("path", 200)]["replications"] == 2
    assert rows[("path", "inf")]["max_acc"] == 1.0
    assert rows[("cycle_fixed", "inf")]["max_acc"] < 1.0
    for r in rows.values():
        assert r["failures"] == 0
        assert set(r) >= {"replications", "failures", "unconverged", "max_acc", "max_f1", "auc_roc"}


def test_determinism_and_parallel_equivalence():
    a = run_path_cycle(SMALL_PATH)
    b = run_path_cycle(SMALL_PATH)
    c = run_path_cycle({**SMALL_PATH, "n_jobs": 2})
    assert a.tables == b.tables
    assert a.tables == c.tables
    d = run_path_cycle({**SMALL_PATH, "base_seed": 7})
    assert d.tables != a.tables


def test_irrep_curve_rows():
    rows = irrep_curve([0.5, 1.0, 1.5], [1.5, 1.0, 0.5], [0.01, 0.1, 0.5])
    assert [r["e"] for r in rows] == [0.01, 0.1, 0.5]
    assert rows[0]["rho_forward"] == pytest.approx(2 / 3, abs=0.05)
    assert rows[0]["rho_reverse"] == pytest.approx(2.0, abs=0.05)
    assert all(r["singular"] == "" for r in rows)
    with pytest.raises(ValueError):
        irrep_curve([0.5, 1.0, 1.5], [1.5, 1.0, 0.5], [])
    res = run_experiment({"kind": "irrep_curve", "e_grid": [0.01, 0.02]})
    assert len(res.tables["fig4"]) == 2


def test_robustness_grid_small_run():
    res = run_robustness_grid({
        "p_values": [5, 6], "k_values": [1, 2], "schemes": ["identity", "random_full"],
        "replications": 2, "n_samples": 200, "grid_size": 20,
    })
    rows = res.tables["fig5"]
    assert len(rows) == 8
    assert {r["k"] for r in rows} == {1.0, 2.0}
    assert all(r["replications"] == 2 and r["failures"] == 0 for r in rows)
    assert len(res.records) == 16


def test_custom_kind():
    res = run_custom({"p": 5, "density": 0.3, "scheme": "random_diag", "n_samples": "inf",
                      "replications": 2, "grid_size": 20})
    (row,) = res.tables["fig5"]
    assert row["replications"] == 2 and row["p"] == 5


@pytest.mark.slow
def test_high_dimensional_cell_runs_without_failure():
    res = run_robustness_grid({
        "p_values": [40], "k_values": [2], "schemes": ["identity"], "replications": 1, "n_samples": 1000,
    })
    (row,) = res.tables["fig5"]
    assert row["failures"] == 0
    assert row["unconverged"] == 0


def test_irrep_flags_shape_and_consistency():
    chain = SupportSet.from_edges(3, [(0, 1), (1, 2)])
    draws, _ = sample_stable_uniform_many(chain, 50, 1)
    flags = irrep_flags(draws, chain)
    assert flags.shape == (50, 3)
    assert np.all(flags[:, 1] | ~flags[:, 0])  # strong implies weak
    assert not flags[:, 2].any()


def test_irrep_frequency_small_run():
    res = run_irrep_frequency({"nodes": [2, 3], "draws": 300, "batch": 512})
    rows = res.tables["fig6"]
    assert len(rows) == 5
    for r in rows:
        assert r["draws"] == 300
        assert 0 < r["acceptance_rate"] <= 1
        assert r["weak_freq"] >= r["strong_freq"]
    assert rows[0]["nodes"] == 2


def test_irrep_flags_match_bruteforce_gram():
    edge = SupportSet.from_edges(2, [(0, 1)])
    draws, _ = sample_stable_uniform_many(edge, 200, 3)
    flags = irrep_flags(draws, edge)
    s = edge.flat
    sc = np.setdiff1d(np.arange(4), s)
    for m, (strong, weak, _) in zip(draws, flags):
        gamma = gram_bruteforce(lyapunov_scipy(m, 2.0 * np.eye(2)))
        x = gamma[np.ix_(sc, s)] @ np.linalg.inv(gamma[np.ix_(s, s)])
        assert strong == (np.abs(x).sum(axis=1).max() < 1.0)
        assert weak == (np.abs(x @ np.sign(m.flatten(order="F")[s])).max() < 1.0)


def test_weak_impact_small_run():
    res = run_weak_irrep_impact({"nodes": 3, "weak_count": 2, "random_count": 2, "n_samples": 100,
                                 "grid_size": 20, "max_tries": 20000})
    rows = res.tables["fig10_11"]
    assert len(rows) == 8
    assert {r["group"] for r in rows} == {"weak", "random"}
    for r in rows:
        if r["group"] == "weak":
            assert r["flagged"] == (r["replications"] < 2)


def test_result_files(tmp_path):
    res = run_experiment({"kind": "irrep_curve", "e_grid": [0.01, 0.5]})
    paths = res.write(tmp_path)
    assert {p.name for p in paths} == {"result.json", "fig4.csv"}
    payload = json.loads((tmp_path / "result.json").read_text())
    assert payload["config"]["kind"] == "irrep_curve"
    assert "PCG64" in payload["metadata"]["rng"]
    with open(tmp_path / "fig4.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_runner_rejects_mismatched_kind():
    with pytest.raises(ValueError):
        run_path_cycle(ExperimentConfig.defaults("irrep_curve"))
    with pytest.raises(TypeError):
        run_path_cycle(42)


@pytest.mark.slow
def test_weak_condition_drifts_recover_better():
    res = run_weak_irrep_impact({"weak_count": 4, "random_count": 4, "grid_size": 30})
    rows = res.tables["fig10_11"]
    assert len(rows) == 48

    def mean(group, key):
        return np.mean([r[key] for r in rows if r["group"] == group and r[key] is not None])

    assert mean("weak", "max_acc") > mean("random", "max_acc")
    assert mean("weak", "auc_roc") > mean("random", "auc_roc") + 0.2

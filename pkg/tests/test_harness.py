import json
import math

import numpy as np
import pytest

from balancenet.errors import InsufficientData, InvalidInput
from balancenet.harness import (
    CSV_HEADER,
    Estimator,
    ExperimentSpec,
    ModelSpec,
    aggregate,
    default_n_grid,
    geometric_n_grid,
    middle_third,
    pilot_tune_lambda,
    rate_check,
    read_results_csv,
    run_experiment,
    trial_seed,
    write_aggregates_json,
    write_results_csv,
)
from balancenet.sampling import SEED_MASK

CHAIN8 = ModelSpec(kind="chain", p=8, diag_margin=4.0)


def small_spec(**kw):
    base = dict(model=CHAIN8, n_grid=(100, 400, 1600), trials=4,
                estimators=("L1MLE", "GLASSO_SR"), lambda_constants={"L1MLE": 1.0, "GLASSO_SR": 0.5},
                base_seed=7)
    base.update(kw)
    return ExperimentSpec(**base)


def test_determinism_and_row_order():
    a = run_experiment(small_spec())
    b = run_experiment(small_spec())
    assert a.rows == b.rows
    assert len(a.rows) == 2 * 3 * 4
    keys = [(r["estimator"], r["n"], r["trial"]) for r in a.rows]
    assert keys == sorted(keys, key=lambda k: (k[0] != "L1MLE", k[1], k[2]))
    assert all(r["wall_ms"] is None for r in a.rows)


def test_worker_pool_matches_serial():
    serial = run_experiment(small_spec())
    pooled = run_experiment(small_spec(threads=2))
    assert serial.rows == pooled.rows


def test_seed_changes_rows():
    a = run_experiment(small_spec(trials=2))
    b = run_experiment(small_spec(trials=2, base_seed=8))
    assert [r["seed"] for r in a.rows] != [r["seed"] for r in b.rows]


def test_timing_flag_records_wall_time():
    res = run_experiment(small_spec(trials=1, n_grid=(200,), timing=True))
    assert all(r["wall_ms"] > 0 for r in res.rows)


def test_trial_seed():
    assert trial_seed(0, 100, 3) == trial_seed(0, 100, 3)
    assert trial_seed(0, 100, 3) != trial_seed(0, 100, 4)
    assert trial_seed(0, 100, 3) != trial_seed(0, 200, 3)
    assert trial_seed(SEED_MASK, 100, 3) == (trial_seed(0, 100, 3) - 1) & SEED_MASK


def test_large_n_recovers_chain():
    # With unit margin the chain is not incoherent and a spurious edge persists at any n.
    spec = ExperimentSpec(model=CHAIN8, n_grid=(10**6,), trials=1,
                          lambda_constants={"L1MLE": 1.0})
    assert run_experiment(spec).aggregates[0]["success_prob"] == 1.0


def test_tiny_n_fails():
    spec = ExperimentSpec(model=ModelSpec(kind="chain", p=32, diag_margin=4.0), n_grid=(5,), trials=20,
                          estimators=("L1MLE", "GLASSO_SR"),
                          lambda_constants={"L1MLE": 1.0, "GLASSO_SR": 0.5})
    for agg in run_experiment(spec).aggregates:
        assert agg["success_prob"] <= 0.05


def test_huge_lambda_kills_recovery():
    spec = small_spec(trials=3)
    base = run_experiment(spec)
    huge = run_experiment(small_spec(trials=3, lambda_constants={"L1MLE": 1e6, "GLASSO_SR": 0.5e6}))
    for a, b in zip(base.aggregates, huge.aggregates):
        assert b["success_prob"] == 0.0 <= a["success_prob"]


def test_pilot_single_candidate_and_degenerate_pair():
    spec = small_spec(trials=5, estimators=("L1MLE",), lambda_constants={})
    assert pilot_tune_lambda(spec, "L1MLE", [3.7]) == 3.7
    assert pilot_tune_lambda(spec, "L1MLE", [1e6, 0.1]) == 0.1
    with pytest.raises(InvalidInput):
        pilot_tune_lambda(spec, "L1MLE", [])


def test_pilot_result_recorded():
    spec = small_spec(trials=3, estimators=("L1MLE",), lambda_constants={"L1MLE": "pilot"},
                      pilot_candidates=(0.5, 1.0))
    res = run_experiment(spec)
    assert res.lambda_constants["L1MLE"] in (0.5, 1.0)


def test_middle_third_and_grids():
    assert middle_third([1, 2, 3, 4, 5, 6, 7, 8]) == (3, 4, 5, 6)
    assert middle_third([1, 2, 3]) == (2,)
    assert middle_third([1, 2]) == (1, 2)
    g = geometric_n_grid(50, 20000, 8)
    assert g[0] == 50 and g[-1] == 20000 and len(g) == 8
    d = default_n_grid(3, 32)
    assert d[0] == round(6.25 * 9 * math.log(32)) and d[-1] == round(40 * 9 * math.log(32))


def _synthetic(errs):
    return [{"estimator": "L1MLE", "n": n, "err_inf": e, "err_fro": 2 * e, "converged": True}
            for n, e in errs]


def test_rate_check_synthetic():
    rows = _synthetic([(n, n ** -0.5) for n in (100, 1000, 10000)])
    fit = rate_check(rows, "ErrInf")
    assert fit.slope == pytest.approx(-0.5) and fit.r2 == pytest.approx(1.0)
    assert rate_check(rows, "ErrFro").slope == pytest.approx(-0.5)
    const = rate_check(_synthetic([(n, 0.3) for n in (100, 1000, 10000)]))
    assert const.slope == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InsufficientData):
        rate_check(_synthetic([(100, 1.0), (200, 0.5)]))
    unconverged = rows + [dict(r, n=5, converged=False) for r in rows]
    assert rate_check(unconverged).slope == pytest.approx(-0.5)
    with pytest.raises(InvalidInput):
        rate_check(rows, "op2")


def test_spec_validation():
    with pytest.raises(InvalidInput):
        ExperimentSpec(model=CHAIN8, n_grid=(200, 100))
    with pytest.raises(InvalidInput):
        ExperimentSpec(model=CHAIN8, n_grid=(100,), trials=0)
    with pytest.raises(InvalidInput):
        ExperimentSpec(model=CHAIN8, n_grid=(100,), lambda_constants={"L1MLE": -1})
    with pytest.raises(ValueError):
        ExperimentSpec(model=CHAIN8, n_grid=(100,), estimators=("CLIME",))
    with pytest.raises(InvalidInput):
        ModelSpec(kind="ring", p=4).build()
    with pytest.raises(InvalidInput):
        ModelSpec(kind="grid", rows=2).build()
    assert ModelSpec(kind="edge_list", edge_list="ieee33", reduce_node=0).build().p == 32
    m = ModelSpec(kind="chain", p=4, sigma_mode="diag_random", sigma_seed=1).build()
    assert not np.allclose(m.sigma_x, np.eye(4))


def test_csv_and_json_roundtrip(tmp_path):
    res = run_experiment(small_spec(trials=2))
    csv_path = tmp_path / "results.csv"
    write_results_csv(csv_path, res)
    assert csv_path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    back = read_results_csv(csv_path)
    assert back == res.rows
    assert aggregate(back) == res.aggregates
    json_path = tmp_path / "aggregates.json"
    write_aggregates_json(json_path, res)
    doc = json.loads(json_path.read_text())
    assert doc["lambda_constants"] == {"L1MLE": 1.0, "GLASSO_SR": 0.5}
    assert doc["spec"]["n_grid"] == [100, 400, 1600]
    assert all(0 <= a["success_prob"] <= 1 for a in doc["aggregates"])


def test_laplacian_fixture_runs_all_estimators():
    spec = ExperimentSpec(model=ModelSpec(kind="chain", p=6, edge_weight=-1.0, diag_margin=4.0),
                          n_grid=(20000,), trials=2, estimators=tuple(Estimator),
                          lambda_constants={"L1MLE": 1.0, "GLASSO_SR": 0.5, "GLASSO_2HR": 0.5})
    res = run_experiment(spec)
    assert {a["estimator"] for a in res.aggregates} == {"L1MLE", "GLASSO_SR", "GLASSO_2HR"}
    l1 = [a for a in res.aggregates if a["estimator"] == "L1MLE"][0]
    assert l1["success_prob"] == 1.0

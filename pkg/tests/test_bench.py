import csv
import io
import math

import numpy as np
import pytest

from tdoa_cls.bench import CSV_HEADER, RmseRow, RmseTable, Scenario, builtin_scenario, run_monte_carlo
from tdoa_cls.estimators import Method
from tdoa_cls.scenarios import EXAMPLE6_SOURCE, example6_array, example7_array


def test_builtin_geometries():
    assert np.array_equal(example6_array().sensors, [[-1, 1], [-1, 4], [-4, 6], [-6, 7]])
    assert np.array_equal(example7_array().sensors, example6_array().sensors - 100)
    assert np.array_equal(example7_array().reference, [0, 0])
    assert np.array_equal(EXAMPLE6_SOURCE, [-5, 2])
    with pytest.raises(ValueError):
        builtin_scenario("example1", [0.1])


@pytest.mark.parametrize("sigmas,trials", [((0.1, 0.1), 5), ((0.2, 0.1), 5), ((0.0,), 5), ((), 5), ((0.1,), 0)])
def test_scenario_validation(sigmas, trials):
    with pytest.raises(ValueError):
        Scenario(example6_array(), [-5, 2], sigmas, trials)


def test_deterministic_and_worker_invariant():
    scn = builtin_scenario("example6", [0.05, 0.2], trials=40, seed=99)
    t1 = run_monte_carlo(scn)
    t2 = run_monte_carlo(scn)
    t3 = run_monte_carlo(scn, workers=4)
    assert t1.to_csv() == t2.to_csv() == t3.to_csv()
    other = run_monte_carlo(builtin_scenario("example6", [0.05, 0.2], trials=40, seed=100))
    assert other.to_csv() != t1.to_csv()


def test_rmse_is_sqrt_mse_and_axis():
    table = run_monte_carlo(builtin_scenario("example6", [0.1], trials=20, seed=1))
    for row in table.rows:
        assert row.rmse == pytest.approx(math.sqrt(row.mse))
        assert row.ten_log_inv_sigma2 == pytest.approx(20.0)
        assert row.trials == 20 and row.failed == 0
    assert table.get(0.1, "CLS").method is Method.CLS
    with pytest.raises(KeyError):
        table.get(0.3, "CLS")


def test_csv_format():
    table = run_monte_carlo(builtin_scenario("example6", [0.01, 0.3], trials=5, seed=3))
    text = table.to_csv()
    assert text.splitlines()[0] == "sigma,ten_log_inv_sigma2,method,rmse,mse,trials,failed"
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["method"] for r in rows] == ["CLS", "ULS", "CLS", "ULS"]
    for r, row in zip(rows, table.rows):
        assert float(r["rmse"]) == row.rmse  # 17 significant digits round-trip exactly
        assert float(r["sigma"]) == row.sigma
    assert list(rows[0]) == CSV_HEADER


def test_small_sigma_recovers():
    table = run_monte_carlo(builtin_scenario("example6", [1e-6], trials=20, seed=4, methods=("CLS",)))
    assert table.get(1e-6, "CLS").rmse <= 1e-4
    assert len(table.rows) == 1


def test_failures_counted(monkeypatch):
    import tdoa_cls.bench as bench

    calls = {"n": 0}
    real = bench.estimate

    def flaky(method, *args, **kw):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise ArithmeticError("boom")
        return real(method, *args, **kw)

    monkeypatch.setattr(bench, "estimate", flaky)
    table = run_monte_carlo(builtin_scenario("example6", [0.1], trials=9, seed=5, methods=("CLS",)))
    row = table.rows[0]
    assert row.failed == 3 and row.trials == 9 and math.isfinite(row.rmse)


def test_all_failed_row_is_nan():
    t = RmseTable([RmseRow(0.1, Method.CLS, math.nan, math.nan, 3, 3)])
    assert "nan" in t.to_csv()


def test_rmse_monotone_band_example6():
    table = run_monte_carlo(builtin_scenario("example6", [0.01, 0.03, 0.1, 0.3], trials=500, seed=6, methods=("CLS",)))
    r = [row.rmse for row in table.rows]
    assert all(a <= b * 1.5 for a, b in zip(r, r[1:]))

import math

import numpy as np
import pytest

from ncva.sweep import (cross_target_intersection, default_grid, evaluate_point, intersect_intervals,
                        sweep_admissible, sweep_branch, union_intervals, SweepResult, BranchSweep)
from ncva.tuning import NEGATIVE, POSITIVE


def test_default_grid():
    g = default_grid()
    assert g[0] == 2.0 and g[-1] == 12.0 and g.size == 201
    assert np.allclose(np.diff(g), 0.05)


def test_interval_algebra():
    assert union_intervals([(1, 3)], [(2, 5), (7, 8)]) == [(1, 5), (7, 8)]
    assert intersect_intervals([(1, 5), (7, 9)], [(4, 8)]) == [(4, 5), (7, 8)]
    assert intersect_intervals([(1, 2)], [(3, 4)]) == []


def _result(n, ivs):
    return SweepResult(n, np.zeros(0), {(NEGATIVE, k): BranchSweep(NEGATIVE, k, [], iv)
                                        for k, iv in ivs.items()})


def test_cross_target_intersection_with_assignment():
    res = {1: _result(1, {0: [(4.0, 12.0)], 1: [(3.0, 5.0)]}),
           2: _result(2, {0: [(3.5, 4.5), (8.0, 12.0)], 1: [(3.6, 4.4)]})}
    assert cross_target_intersection(res) == [(3.5, 4.5), (8.0, 12.0)]
    only0 = {1: [(NEGATIVE, 0)], 2: [(NEGATIVE, 0)]}
    assert cross_target_intersection(res, only0) == [(4.0, 4.5), (8.0, 12.0)]


@pytest.mark.parametrize("n, k, f_in, f_out", [
    (1, 0, 4.50, 4.05),
    (2, 0, 4.20, 6.00),
    (3, 0, 7.50, 5.50),
    (1, 1, 4.80, 5.75),
])
def test_point_classification(table1, n, k, f_in, f_out):
    inside = evaluate_point(table1, n, f_in, NEGATIVE, k)
    outside = evaluate_point(table1, n, f_out, NEGATIVE, k)
    assert inside.admissible and inside.alpha_os < 0 and abs(inside.alpha_rs) <= 1e-6
    assert not outside.admissible


def test_literal_branch_with_negative_delay_is_a_gap(table1):
    p = evaluate_point(table1, 1, 4.2, POSITIVE, 0)
    assert p.status == "negative-delay" and not p.admissible


def test_certified_point(table1):
    p = evaluate_point(table1, 2, 4.2, NEGATIVE, 0, certify=True)
    assert p.status == "ok" and p.admissible


def test_branch_sweep_bisects_endpoint(table1):
    b = sweep_branch(table1, 1, default_grid(4.0, 4.6, 0.05), NEGATIVE, 0)
    (lo, hi), = b.intervals
    assert hi == pytest.approx(4.6)
    assert 4.2 < lo < 4.35
    # the refined endpoint separates the classification
    assert not evaluate_point(table1, 1, lo - 0.01, NEGATIVE, 0).admissible
    assert evaluate_point(table1, 1, lo + 0.01, NEGATIVE, 0).admissible


def test_sweep_result_rows(table1):
    res = sweep_admissible(table1, 2, grid=[4.0, 4.2, 4.4], k_list=(0,))
    rows = list(res.rows())
    assert [r["omega_hz"] for r in rows] == [4.0, 4.2, 4.4]
    assert set(rows[0]) == {"omega_hz", "family", "k", "g", "tau", "alpha_rs", "alpha_os",
                            "admissible"}
    assert res.union() == res.admissible_intervals[(NEGATIVE, 0)]


def test_bad_grid_rejected(table1):
    with pytest.raises(ValueError):
        sweep_admissible(table1, 1, grid=[5.0, 4.0])

import numpy as np

from heatguide.studies import convergence_study, probe_grid


def test_probe_grid():
    pts = probe_grid([0.25, 0.5, 0.75])
    assert pts.shape == (27, 3)
    assert len({tuple(p) for p in pts}) == 27


def test_study_rows_and_summary():
    result = convergence_study([0.08, 0.04], seed=0, ie_grid=8)
    assert [r.a for r in result.rows_] == [0.08, 0.04]
    assert all(r.full_vs_reduced is not None for r in result.rows_)
    rows = list(result.rows())
    assert len(rows) == 2 and len(rows[0]) == len(result.header)
    summary = result.summary()
    assert summary["sup_differences"] == [r.sup_difference for r in result.rows_]
    assert np.all(np.isfinite(summary["ratio_bounds"]))


def test_study_is_deterministic():
    a = convergence_study([0.08, 0.04], seed=3, ie_grid=6).summary()
    b = convergence_study([0.08, 0.04], seed=3, ie_grid=6).summary()
    assert a == b

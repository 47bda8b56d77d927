"""Functional dataset container, quadrature, and CSV round trips."""

import numpy as np
import pytest

from funcscan.errors import GridMismatchError, ValidationError
from funcscan.fdata import (
    FunctionalDataset,
    group_mean,
    l2_inner,
    l2_norm_sq,
    pooled_variance_at_t,
    read_curves_csv,
    trapezoid_weights,
    write_curves_csv,
)

from conftest import random_dataset, trapz


def test_trapezoid_weights_uniform():
    w = trapezoid_weights(np.linspace(0.0, 1.0, 5))
    assert w == pytest.approx([0.125, 0.25, 0.25, 0.25, 0.125])
    assert w.sum() == pytest.approx(1.0)


def test_trapezoid_weights_match_numpy_trapz():
    rng = np.random.default_rng(1)
    t = np.sort(rng.uniform(0.0, 3.0, size=17))
    f = rng.normal(size=17)
    assert trapezoid_weights(t) @ f == pytest.approx(trapz(f, t), abs=1e-12)


def test_trapezoid_weights_reject_bad_grid():
    with pytest.raises(ValueError):
        trapezoid_weights(np.array([0.5]))
    with pytest.raises(ValueError):
        trapezoid_weights(np.ones((2, 2)))


def test_l2_helpers_against_direct_integral():
    t = np.linspace(0.0, 2.0, 41)
    f = np.sin(np.pi * t) + 0.3 * t
    g = np.cos(t)
    assert l2_norm_sq(f, t) == pytest.approx(trapz(f * f, t), rel=1e-12)
    assert l2_inner(f, g, t) == pytest.approx(trapz(f * g, t), rel=1e-12)
    with pytest.raises(ValueError):
        l2_inner(f, g[:-1], t)


def test_l2_norm_sq_is_clamped_non_negative():
    t = np.array([0.0, 1.0])
    assert l2_norm_sq(np.zeros(2), t) == 0.0


def test_group_mean(rng):
    ds = random_dataset(rng, 8, 6)
    summary = group_mean(ds, [5, 1, 1, 3])
    assert summary.member_count == 3
    assert summary.mean_curve == pytest.approx(ds.curves[[1, 3, 5]].mean(axis=0))
    with pytest.raises(ValueError):
        group_mean(ds, [])
    with pytest.raises(ValueError):
        group_mean(ds, [8])


def test_pooled_variance_matches_two_group_formula(rng):
    ds = random_dataset(rng, 9, 6)
    inside = [1, 4, 5]
    outside = [0, 2, 3, 6, 7, 8]
    got = pooled_variance_at_t(ds, inside)
    a, b = ds.curves[inside], ds.curves[outside]
    expected = (
        a.var(axis=0, ddof=1) * (len(inside) - 1)
        + b.var(axis=0, ddof=1) * (len(outside) - 1)
    ) / (ds.n - 2)
    assert got == pytest.approx(expected, rel=1e-12)
    with pytest.raises(ValueError):
        pooled_variance_at_t(ds, [])
    with pytest.raises(ValueError):
        pooled_variance_at_t(ds, range(9))


def test_dataset_validation():
    t = np.linspace(0.0, 1.0, 4)
    with pytest.raises(ValidationError):
        FunctionalDataset(
            curves=np.ones((2, 3)), time_grid=t, site_ids=("a", "b")
        )
    with pytest.raises(ValidationError):
        FunctionalDataset(
            curves=np.ones((2, 4)), time_grid=t, site_ids=("a",)
        )
    bad = np.ones((2, 4))
    bad[1, 2] = np.nan
    with pytest.raises(ValidationError):
        FunctionalDataset(curves=bad, time_grid=t, site_ids=("a", "b"))
    with pytest.raises(ValidationError):
        FunctionalDataset(
            curves=np.ones((2, 4)),
            time_grid=np.array([0.0, 0.5, 0.5, 1.0]),
            site_ids=("a", "b"),
        )


def test_dataset_is_frozen(rng):
    ds = random_dataset(rng, 5, 9)
    with pytest.raises(ValueError):
        ds.curves[0, 0] = 7.0
    assert ds.n == 5 and ds.n_times == 9
    assert ds.quad_weights.sum() == pytest.approx(1.0)


def test_reindex_permutes_rows(rng):
    ds = random_dataset(rng, 6, 8)
    new_order = ("s003", "s000", "s005", "s001", "s004", "s002")
    out = ds.reindex(new_order)
    assert out.site_ids == new_order
    for sid in new_order:
        assert np.array_equal(
            out.curves[out.site_ids.index(sid)],
            ds.curves[ds.site_ids.index(sid)],
        )
    with pytest.raises(GridMismatchError):
        ds.reindex(("s000", "s001"))
    with pytest.raises(GridMismatchError):
        ds.reindex(("x0", "x1", "x2", "x3", "x4", "x5"))


def test_curves_csv_round_trip(tmp_path, rng):
    ds = random_dataset(rng, 7, 11)
    path = tmp_path / "curves.csv"
    write_curves_csv(ds, path)
    back = read_curves_csv(path)
    assert back.site_ids == ds.site_ids
    assert np.array_equal(back.time_grid, ds.time_grid)
    assert np.array_equal(back.curves, ds.curves)


def test_curves_csv_rejects_malformed(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("id,0.0,1.0\na,1.0\n")                 # ragged row
    with pytest.raises(ValidationError):
        read_curves_csv(p)
    p.write_text("id,0.0,1.0\na,1.0,2.0\na,3.0,4.0\n")  # duplicate id
    with pytest.raises(ValidationError):
        read_curves_csv(p)
    p.write_text("id,1.0,0.0\na,1.0,2.0\n")             # decreasing grid
    with pytest.raises(ValidationError):
        read_curves_csv(p)
    p.write_text("id,0.0,oops\na,1.0,2.0\n")            # non-numeric time
    with pytest.raises(ValidationError):
        read_curves_csv(p)
    p.write_text("")                                     # empty file
    with pytest.raises(ValidationError):
        read_curves_csv(p)

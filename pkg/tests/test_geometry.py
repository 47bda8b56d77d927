"""Site geometry and candidate window enumeration."""

import numpy as np
import pytest

from funcscan.errors import (
    DuplicateCoordinateError,
    DuplicateIdError,
    NonFiniteCoordinateError,
    ValidationError,
)
from funcscan.geometry import (
    build_site_grid,
    enumerate_candidates,
    members_within,
    read_sites_csv,
    resolve_site_indices,
)

from conftest import random_grid


def square_grid():
    return build_site_grid(
        [("a", 0.0, 0.0), ("b", 1.0, 0.0), ("c", 0.0, 1.0), ("d", 1.0, 1.0)]
    )


def test_build_distances():
    grid = square_grid()
    assert grid.n == 4
    assert grid.dist[0, 1] == pytest.approx(1.0)
    assert grid.dist[0, 3] == pytest.approx(np.sqrt(2.0))
    assert np.allclose(grid.dist, grid.dist.T)
    assert np.all(np.diag(grid.dist) == 0.0)
    assert grid.index_of("c") == 2
    with pytest.raises(KeyError):
        grid.index_of("zz")


def test_build_rejects_bad_records():
    with pytest.raises(DuplicateIdError):
        build_site_grid([("a", 0, 0), ("a", 1, 1)])
    with pytest.raises(DuplicateCoordinateError):
        build_site_grid([("a", 0, 0), ("b", 0, 0)])
    with pytest.raises(NonFiniteCoordinateError):
        build_site_grid([("a", 0, 0), ("b", np.nan, 1)])
    with pytest.raises(ValidationError):
        build_site_grid([("a", 0, 0)])


def test_read_sites_csv(tmp_path):
    path = tmp_path / "sites.csv"
    path.write_text("id,x,y\na,0,0\nb,1.5,0\nc,0,2\n")
    grid = read_sites_csv(path)
    assert grid.ids == ("a", "b", "c")
    assert grid.coords[1, 0] == 1.5

    bad = tmp_path / "bad.csv"
    bad.write_text("id,x,y\na,0,oops\n")
    with pytest.raises(ValidationError):
        read_sites_csv(bad)


def test_candidates_are_closed_discs():
    rng = np.random.default_rng(42)
    grid = random_grid(rng, 15)
    for cand in enumerate_candidates(grid):
        inside = set(cand.member_indices)
        # every member is within the radius of the center, everyone else is not
        for j in range(grid.n):
            d = grid.dist[cand.center_index, j]
            assert (d <= cand.radius) == (j in inside)
        assert cand.center_index in inside
        assert cand.member_indices == tuple(sorted(inside))


def test_candidates_unique_and_size_limited():
    rng = np.random.default_rng(43)
    grid = random_grid(rng, 14)
    cands = enumerate_candidates(grid, max_fraction=0.5)
    seen = {c.member_indices for c in cands}
    assert len(seen) == len(cands)
    assert max(c.size for c in cands) <= grid.n // 2
    assert min(c.size for c in cands) == 1
    # singletons for every site survive the deduplication
    singles = {c.member_indices for c in cands if c.size == 1}
    assert singles == {(i,) for i in range(grid.n)}


def test_candidates_sorted_and_deterministic():
    rng = np.random.default_rng(44)
    grid = random_grid(rng, 12)
    cands = enumerate_candidates(grid)
    keys = [(c.size, c.center_index, c.radius) for c in cands]
    assert keys == sorted(keys)
    again = enumerate_candidates(grid)
    assert [(c.member_indices, c.center_index, c.radius) for c in cands] == [
        (c.member_indices, c.center_index, c.radius) for c in again
    ]


def test_max_fraction_bounds():
    rng = np.random.default_rng(45)
    grid = random_grid(rng, 10)
    small = enumerate_candidates(grid, max_fraction=0.2)
    assert max(c.size for c in small) <= 2
    with pytest.raises(ValueError):
        enumerate_candidates(grid, max_fraction=0.0)
    with pytest.raises(ValueError):
        enumerate_candidates(grid, max_fraction=1.5)


def test_members_within_matches_enumeration():
    rng = np.random.default_rng(46)
    grid = random_grid(rng, 13)
    for cand in enumerate_candidates(grid)[:25]:
        assert (
            members_within(grid, cand.center_index, cand.radius)
            == cand.member_indices
        )


def test_resolve_site_indices():
    grid = square_grid()
    assert resolve_site_indices(grid, ["d", "a"]) == (3, 0)
    with pytest.raises(ValidationError):
        resolve_site_indices(grid, ["a", "nope"])
    with pytest.raises(ValidationError):
        resolve_site_indices(grid, ["a", "a"])

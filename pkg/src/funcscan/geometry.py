"""Spatial sites and the circular candidate windows scanned for clusters.

A candidate window is the set of sites inside a closed disc centred on one
of the sites and passing through another one.  Window size is capped at a
fraction of the number of sites (one half by default), so a detected
cluster can never swallow most of the region.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateCoordinateError,
    DuplicateIdError,
    NonFiniteCoordinateError,
    ValidationError,
)


@dataclass(frozen=True, eq=False)
class SiteGrid:
    """Planar site locations with a precomputed Euclidean distance matrix."""

    ids: tuple[str, ...]
    coords: np.ndarray  # (n, 2)
    dist: np.ndarray    # (n, n), symmetric, zero diagonal

    @property
    def n(self) -> int:
        return len(self.ids)

    def index_of(self, site_id: str) -> int:
        try:
            return self.ids.index(site_id)
        except ValueError:
            raise KeyError(f"unknown site id {site_id!r}") from None


@dataclass(frozen=True)
class CandidateCluster:
    """Sites inside the closed disc of the given center and radius."""

    member_indices: tuple[int, ...]  # sorted site indices
    center_index: int
    radius: float

    @property
    def size(self) -> int:
        return len(self.member_indices)

    def member_ids(self, grid: SiteGrid) -> tuple[str, ...]:
        return tuple(grid.ids[i] for i in self.member_indices)


def build_site_grid(records: Iterable[tuple[str, float, float]]) -> SiteGrid:
    """Validate (id, x, y) records and build a SiteGrid.

    Raises a distinct :class:`ValidationError` subclass naming the
    offending record for duplicate ids, duplicate coordinates and
    non-finite coordinates.
    """
    recs = list(records)
    if len(recs) < 2:
        raise ValidationError("need at least 2 sites, got %d" % len(recs))

    ids: list[str] = []
    seen_ids: set[str] = set()
    seen_xy: dict[tuple[float, float], str] = {}
    xy = np.empty((len(recs), 2), dtype=float)
    for k, (site_id, x, y) in enumerate(recs):
        site_id = str(site_id)
        x = float(x)
        y = float(y)
        if not (np.isfinite(x) and np.isfinite(y)):
            raise NonFiniteCoordinateError(
                f"non-finite coordinate for site {site_id!r}: ({x}, {y})"
            )
        if site_id in seen_ids:
            raise DuplicateIdError(f"duplicate id {site_id!r}")
        if (x, y) in seen_xy:
            raise DuplicateCoordinateError(
                f"site {site_id!r} duplicates coordinates ({x}, {y}) "
                f"of site {seen_xy[(x, y)]!r}"
            )
        seen_ids.add(site_id)
        seen_xy[(x, y)] = site_id
        ids.append(site_id)
        xy[k] = (x, y)

    delta = xy[:, None, :] - xy[None, :, :]
    dist = np.sqrt((delta * delta).sum(axis=2))
    dist = 0.5 * (dist + dist.T)  # enforce exact symmetry
    np.fill_diagonal(dist, 0.0)

    xy.setflags(write=False)
    dist.setflags(write=False)
    return SiteGrid(ids=tuple(ids), coords=xy, dist=dist)


def read_sites_csv(path: str | Path) -> SiteGrid:
    """Read a sites file with header ``id,x,y`` into a SiteGrid."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty sites file") from None
        if [h.strip() for h in header[:3]] != ["id", "x", "y"]:
            raise ValidationError(
                f"{path}: expected header 'id,x,y', got {','.join(header)!r}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 columns")
            try:
                records.append((row[0].strip(), float(row[1]), float(row[2])))
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: non-numeric coordinate in {row!r}"
                ) from None
    return build_site_grid(records)


def enumerate_candidates(
    grid: SiteGrid, max_fraction: float = 0.5
) -> list[CandidateCluster]:
    """Enumerate all distinct circular candidate windows.

    For every center site, the closed discs through each other site are
    swept in increasing radius; each realizable member set with
    ``1 <= size <= floor(n * max_fraction)`` becomes one candidate.
    Windows with identical member sets are deduplicated, keeping the
    representative with the smallest (center_index, radius).  The result
    is sorted by (size, center_index, radius).
    """
    if not 0.0 < max_fraction <= 0.5:
        raise ValueError(f"max_fraction must be in (0, 0.5], got {max_fraction}")
    n = grid.n
    cap = int(np.floor(n * max_fraction))

    best: dict[tuple[int, ...], tuple[int, float]] = {}
    for i in range(n):
        row = grid.dist[i]
        order = np.argsort(row, kind="stable")
        d_sorted = row[order]
        for m in range(1, min(cap, n) + 1):
            # A closed disc cannot stop inside a tie: if the next site is at
            # the same distance, there is no window of exactly m members.
            if m < n and d_sorted[m] == d_sorted[m - 1]:
                continue
            members = tuple(sorted(int(j) for j in order[:m]))
            radius = float(d_sorted[m - 1])
            prev = best.get(members)
            if prev is None or (i, radius) < prev:
                best[members] = (i, radius)

    clusters = [
        CandidateCluster(member_indices=members, center_index=center, radius=radius)
        for members, (center, radius) in best.items()
    ]
    clusters.sort(key=lambda w: (w.size, w.center_index, w.radius))
    return clusters


def members_within(grid: SiteGrid, center_index: int, radius: float) -> tuple[int, ...]:
    """Re-derive a window's member set from its center and radius."""
    return tuple(int(j) for j in np.flatnonzero(grid.dist[center_index] <= radius))


def resolve_site_indices(grid: SiteGrid, ids: Sequence[str]) -> tuple[int, ...]:
    """Map site ids to indices, preserving order; reject unknowns and repeats."""
    out = []
    for s in ids:
        try:
            out.append(grid.index_of(s))
        except KeyError:
            raise ValidationError(f"unknown site id {s!r}") from None
    if len(set(out)) != len(out):
        dup = next(s for s in ids if list(ids).count(s) > 1)
        raise ValidationError(f"site id {dup!r} listed more than once")
    return tuple(out)

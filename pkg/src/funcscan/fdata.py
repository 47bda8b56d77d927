"""Functional observations on a shared time grid and their L2 machinery.

All integrals are trapezoid-rule quadratures on the observed grid, which
is exact for piecewise-linear integrands.  Every index in this package
consumes curves through these helpers, so the quadrature convention is
defined in exactly one place.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GridMismatchError, ValidationError


def trapezoid_weights(time_grid: np.ndarray) -> np.ndarray:
    """Quadrature weights w such that sum(w * f) approximates integral of f."""
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("time grid must be 1-D with at least 2 points")
    w = np.empty_like(t)
    w[0] = (t[1] - t[0]) / 2.0
    w[-1] = (t[-1] - t[-2]) / 2.0
    if t.size > 2:
        w[1:-1] = (t[2:] - t[:-2]) / 2.0
    return w


def l2_inner(f: np.ndarray, g: np.ndarray, time_grid: np.ndarray) -> float:
    """Inner product <f, g> = integral of f(t) g(t) dt over the grid."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    t = np.asarray(time_grid, dtype=float)
    if f.shape != g.shape or f.shape != t.shape:
        raise ValueError(
            f"length mismatch: f {f.shape}, g {g.shape}, grid {t.shape}"
        )
    return float((f * g) @ trapezoid_weights(t))


def l2_norm_sq(f: np.ndarray, time_grid: np.ndarray) -> float:
    """Squared L2 norm ||f||^2 = <f, f>; always >= 0."""
    return max(l2_inner(f, f, time_grid), 0.0)


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """n curves sampled on one strictly increasing time grid."""

    curves: np.ndarray          # (n, T)
    time_grid: np.ndarray       # (T,)
    site_ids: tuple[str, ...]   # aligned with curve rows

    def __post_init__(self):
        curves = np.asarray(self.curves, dtype=float)
        grid = np.asarray(self.time_grid, dtype=float)
        if curves.ndim != 2:
            raise ValidationError("curves must be a 2-D array (sites x times)")
        if grid.ndim != 1 or grid.size < 2:
            raise ValidationError("time grid must hold at least 2 points")
        if curves.shape[1] != grid.size:
            raise ValidationError(
                f"curves have {curves.shape[1]} columns but grid has {grid.size} points"
            )
        if curves.shape[0] != len(self.site_ids):
            raise ValidationError(
                f"{curves.shape[0]} curves but {len(self.site_ids)} site ids"
            )
        if not np.all(np.isfinite(curves)):
            bad = int(np.flatnonzero(~np.isfinite(curves).all(axis=1))[0])
            raise ValidationError(
                f"non-finite value in curve for site {self.site_ids[bad]!r}"
            )
        if not np.all(np.diff(grid) > 0):
            raise ValidationError("time grid must be strictly increasing")
        curves.setflags(write=False)
        grid.setflags(write=False)
        object.__setattr__(self, "curves", curves)
        object.__setattr__(self, "time_grid", grid)
        object.__setattr__(self, "site_ids", tuple(self.site_ids))

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    @property
    def n_times(self) -> int:
        return self.time_grid.size

    @cached_property
    def quad_weights(self) -> np.ndarray:
        w = trapezoid_weights(self.time_grid)
        w.setflags(write=False)
        return w

    def reindex(self, site_ids: Sequence[str]) -> "FunctionalDataset":
        """Reorder curve rows to the given id order; ids must match as sets."""
        if set(site_ids) != set(self.site_ids):
            missing = sorted(set(site_ids) - set(self.site_ids))[:5]
            extra = sorted(set(self.site_ids) - set(site_ids))[:5]
            raise GridMismatchError(
                f"curve ids do not match site ids (missing {missing}, extra {extra})"
            )
        pos = {s: k for k, s in enumerate(self.site_ids)}
        rows = [pos[s] for s in site_ids]
        return FunctionalDataset(
            curves=self.curves[rows].copy(),
            time_grid=self.time_grid,
            site_ids=tuple(site_ids),
        )


@dataclass(frozen=True, eq=False)
class GroupSummary:
    """Pointwise mean curve of a group of sites and the group size."""

    mean_curve: np.ndarray
    member_count: int


def group_mean(ds: FunctionalDataset, members: Iterable[int]) -> GroupSummary:
    """Pointwise arithmetic mean of the member curves."""
    idx = np.asarray(sorted(set(int(i) for i in members)), dtype=int)
    if idx.size == 0:
        raise ValueError("empty member set")
    if idx.min() < 0 or idx.max() >= ds.n:
        raise ValueError(f"member index out of range 0..{ds.n - 1}")
    return GroupSummary(
        mean_curve=ds.curves[idx].mean(axis=0), member_count=int(idx.size)
    )


def pooled_variance_at_t(ds: FunctionalDataset, w: Iterable[int]) -> np.ndarray:
    """Two-group pooled sample variance at each grid time.

    sigma2(t) = [sum_{i in w}(X_i(t) - mean_w(t))^2
                 + sum_{i not in w}(X_i(t) - mean_wc(t))^2] / (n - 2)
    """
    n = ds.n
    if n < 3:
        raise ValueError(f"pooled variance needs n >= 3, got {n}")
    idx = np.asarray(sorted(set(int(i) for i in w)), dtype=int)
    if idx.size == 0 or idx.size == n:
        raise ValueError("degenerate split: both groups must be non-empty")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    xw = ds.curves[mask]
    xc = ds.curves[~mask]
    ssw = ((xw - xw.mean(axis=0)) ** 2).sum(axis=0)
    ssc = ((xc - xc.mean(axis=0)) ** 2).sum(axis=0)
    return (ssw + ssc) / (n - 2)


def read_curves_csv(path: str | Path) -> FunctionalDataset:
    """Read a wide curves file: header ``id,t_1,...,t_T``, one row per site.

    The time grid is taken from the numeric tail of the header row.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty curves file") from None
        if len(header) < 3 or header[0].strip() != "id":
            raise ValidationError(
                f"{path}: expected header 'id,t_1,...,t_T' with at least 2 times"
            )
        try:
            grid = np.array([float(v) for v in header[1:]], dtype=float)
        except ValueError:
            raise ValidationError(
                f"{path}: malformed grid; header times must be numeric"
            ) from None

        ids: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}"
                )
            try:
                values = [float(v) for v in row[1:]]
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: non-numeric curve value for id {row[0]!r}"
                ) from None
            ids.append(row[0].strip())
            rows.append(values)

    if len(ids) != len(set(ids)):
        dup = next(s for s in ids if ids.count(s) > 1)
        raise ValidationError(f"{path}: duplicate curve id {dup!r}")
    if not rows:
        raise ValidationError(f"{path}: no curve rows")
    return FunctionalDataset(
        curves=np.array(rows, dtype=float), time_grid=grid, site_ids=tuple(ids)
    )


def write_curves_csv(ds: FunctionalDataset, path: str | Path) -> None:
    """Write a dataset in the wide curves format read by read_curves_csv."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [repr(float(t)) for t in ds.time_grid])
        for sid, row in zip(ds.site_ids, ds.curves):
            writer.writerow([sid] + [repr(float(v)) for v in row])

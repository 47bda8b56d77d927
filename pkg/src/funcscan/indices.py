"""Concentration indices comparing curves inside a window against outside.

Three indices are provided:

* ``pfss_index`` -- functional ANOVA F ratio between the window and its
  complement, with all norms taken in L2.
* ``dffss_index`` -- sup over grid times of the pointwise two-sample
  studentized mean difference.
* ``npfss_index`` -- L2 norm of the summed pairwise sign functions
  between the window and its complement, evaluated through a
  precomputed sign matrix so the double sum collapses to a row sum.

Scalar functions are direct transcriptions of the definitions and are
the reference path; the ``*_values`` family evaluates all candidate
windows at once (optionally for a batch of row permutations) and is what
the scanner uses.  Equality of the two paths is enforced by the test
suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateDataError
from .fdata import FunctionalDataset, l2_norm_sq, trapezoid_weights
from .geometry import CandidateCluster

PFSS = "pfss"
DFFSS = "dffss"
NPFSS = "npfss"
METHODS = (PFSS, DFFSS, NPFSS)

# Pointwise studentized index reported for a perfectly separated time
# point (zero pooled variance, non-zero mean gap).  Finite so permutation
# ranking stays well ordered.
SEPARATION_SENTINEL = 1.0e12

# Relative thresholds deciding when a denominator counts as zero.
_DEN_EPS_REL = 1.0e-12   # PFSS within-group scatter, relative to mean ||X_i||^2
_VAR_EPS_REL = 1.0e-12   # DFFSS pooled variance, relative to value scale squared


@dataclass(frozen=True, eq=False)
class SignMatrix:
    """Row i holds sum_j sign(X_j - X_i); built once per set of curves.

    The sign of a non-zero curve is the curve divided by its L2 norm
    (the Gateaux derivative of the norm); identical pairs contribute the
    zero function.  Row sums are antisymmetric, so the rows add up to
    the zero function.
    """

    rows: np.ndarray         # (n, T)
    pair_norms: np.ndarray   # (n, n) L2 distances between curves
    quad_weights: np.ndarray  # (T,) quadrature weights of the source grid

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class IndexValue:
    """A concentration index evaluated on one window."""

    method: str
    value: float
    window: CandidateCluster | None = None
    argmax_time: float | None = None   # dffss only
    degenerate: bool = False           # dffss: perfect separation hit


def _member_array(window, n: int) -> np.ndarray:
    if isinstance(window, CandidateCluster):
        idx = np.asarray(window.member_indices, dtype=int)
    else:
        idx = np.asarray(sorted(set(int(i) for i in window)), dtype=int)
    if idx.size == 0:
        raise ValueError("window has no members")
    if idx.min() < 0 or idx.max() >= n:
        raise ValueError(f"window index out of range 0..{n - 1}")
    return idx


def _split(ds: FunctionalDataset, window) -> tuple[np.ndarray, np.ndarray]:
    idx = _member_array(window, ds.n)
    if idx.size == ds.n:
        raise ValueError("window complement is empty")
    mask = np.zeros(ds.n, dtype=bool)
    mask[idx] = True
    return idx, np.flatnonzero(~mask)


def _as_cluster(window) -> CandidateCluster | None:
    return window if isinstance(window, CandidateCluster) else None


def value_scale(curves: np.ndarray) -> float:
    """Magnitude scale of a dataset, used for zero-variance thresholds."""
    return float(np.max(np.abs(curves))) if curves.size else 0.0


def pfss_index(ds: FunctionalDataset, window) -> IndexValue:
    """Functional ANOVA F ratio of the window against its complement.

    numerator:  |w| ||mean_w - mean||^2 + |wc| ||mean_wc - mean||^2
    denominator: within-group L2 scatter divided by (n - 2)

    Raises DegenerateDataError when the within-group scatter vanishes
    (all curves identical inside both groups).
    """
    if ds.n < 3:
        raise ValueError(f"pfss needs n >= 3, got {ds.n}")
    w_idx, c_idx = _split(ds, window)
    t = ds.time_grid
    xw = ds.curves[w_idx].mean(axis=0)
    xc = ds.curves[c_idx].mean(axis=0)
    xbar = ds.curves.mean(axis=0)

    num = w_idx.size * l2_norm_sq(xw - xbar, t) + c_idx.size * l2_norm_sq(xc - xbar, t)
    ss_w = sum(l2_norm_sq(row - xw, t) for row in ds.curves[w_idx])
    ss_c = sum(l2_norm_sq(row - xc, t) for row in ds.curves[c_idx])
    den = (ss_w + ss_c) / (ds.n - 2)

    q_mean = float((ds.curves**2 @ ds.quad_weights).mean())
    if den <= _DEN_EPS_REL * q_mean:
        raise DegenerateDataError(
            "zero within-group scatter: curves identical inside both groups"
        )
    return IndexValue(method=PFSS, value=num / den, window=_as_cluster(window))


def dffss_index(ds: FunctionalDataset, window) -> IndexValue:
    """Sup over grid times of the pointwise studentized mean difference.

    At each time: |mean_w(t) - mean_wc(t)| / sqrt(sigma2(t) (1/|w| + 1/|wc|))
    with the two-group pooled variance sigma2(t).  Time points with zero
    pooled variance score 0 when the group means also coincide there and
    SEPARATION_SENTINEL otherwise (flagged as degenerate).
    """
    if ds.n < 3:
        raise ValueError(f"dffss needs n >= 3, got {ds.n}")
    w_idx, c_idx = _split(ds, window)
    xw = ds.curves[w_idx].mean(axis=0)
    xc = ds.curves[c_idx].mean(axis=0)
    ssw = ((ds.curves[w_idx] - xw) ** 2).sum(axis=0)
    ssc = ((ds.curves[c_idx] - xc) ** 2).sum(axis=0)
    pooled = (ssw + ssc) / (ds.n - 2)

    scale = value_scale(ds.curves)
    eps_var = _VAR_EPS_REL * scale * scale
    eps_num = np.sqrt(_VAR_EPS_REL) * scale
    num = np.abs(xw - xc)
    var_term = pooled * (1.0 / w_idx.size + 1.0 / c_idx.size)

    ok = var_term > eps_var
    pointwise = np.zeros(ds.n_times)
    pointwise[ok] = num[ok] / np.sqrt(var_term[ok])
    separated = ~ok & (num > eps_num)
    pointwise[separated] = SEPARATION_SENTINEL

    k = int(np.argmax(pointwise))  # first grid time on ties
    return IndexValue(
        method=DFFSS,
        value=float(pointwise[k]),
        window=_as_cluster(window),
        argmax_time=float(ds.time_grid[k]),
        degenerate=bool(separated.any()),
    )


def build_sign_matrix(ds: FunctionalDataset) -> SignMatrix:
    """Row sums of pairwise curve sign functions; O(n^2 T) once per dataset.

    Row i = sum_j (X_j - X_i) / ||X_j - X_i||, skipping identical pairs.
    Random labelling permutes which rows belong to a window but never the
    curves themselves, so one matrix serves every permutation.
    """
    x = ds.curves
    qw = ds.quad_weights
    n = ds.n
    rows = np.empty_like(x)
    pair_norms = np.empty((n, n))
    for i in range(n):
        diff = x - x[i]
        norms = np.sqrt(np.maximum((diff * diff) @ qw, 0.0))
        pair_norms[i] = norms
        inv = np.zeros(n)
        nz = norms > 0.0
        inv[nz] = 1.0 / norms[nz]
        rows[i] = inv @ diff
    rows.setflags(write=False)
    pair_norms.setflags(write=False)
    return SignMatrix(rows=rows, pair_norms=pair_norms, quad_weights=qw)


def npfss_index(sm: SignMatrix, window) -> IndexValue:
    """Distribution-free rank-type index of a window from the sign matrix.

    U(w) = || sum_{i in w} rows_i || / sqrt(|w| |wc| n); the row sum
    equals the full double sum over (window, complement) pairs because
    within-window terms cancel by antisymmetry.
    """
    n = sm.n
    idx = _member_array(window, n)
    if idx.size == n:
        raise ValueError("window complement is empty")
    total = sm.rows[idx].sum(axis=0)
    norm_sq = max(float((total * total) @ sm.quad_weights), 0.0)
    u = np.sqrt(norm_sq / (idx.size * (n - idx.size) * n))
    return IndexValue(method=NPFSS, value=float(u), window=_as_cluster(window))


def npfss_index_naive(ds: FunctionalDataset, window) -> IndexValue:
    """Reference NPFSS: explicit double sum over (window, complement) pairs.

    Kept as the independent oracle for the sign-matrix path and as the
    baseline for the benchmark; cost O(|w| |wc| T) per window.
    """
    w_idx, c_idx = _split(ds, window)
    qw = ds.quad_weights
    diffs = ds.curves[c_idx][None, :, :] - ds.curves[w_idx][:, None, :]
    norms = np.sqrt(np.maximum((diffs * diffs) @ qw, 0.0))
    inv = np.zeros_like(norms)
    nz = norms > 0.0
    inv[nz] = 1.0 / norms[nz]
    total = (diffs * inv[:, :, None]).sum(axis=(0, 1))
    norm_sq = max(float((total * total) @ qw), 0.0)
    u = np.sqrt(norm_sq / (w_idx.size * c_idx.size * ds.n))
    return IndexValue(method=NPFSS, value=float(u), window=_as_cluster(window))


# ---------------------------------------------------------------------------
# Vectorized all-window evaluation (the scanner's hot path).
#
# Conventions: X has shape (B, n, T) -- a batch of B row-permuted copies of
# the curves; W is the (C, n) 0/1 window membership matrix; every function
# returns an array of shape (C, B).
#
# The group sums come from one matrix product; the per-window arithmetic
# then runs over slices of at most WINDOW_CHUNK windows so its (chunk, B, T)
# temporaries stay cache-resident instead of sweeping DRAM.
# ---------------------------------------------------------------------------

WINDOW_CHUNK = 64


def window_matrix(
    candidates: Sequence[CandidateCluster], n: int
) -> tuple[np.ndarray, np.ndarray]:
    """Membership matrix (C, n) as float64 plus window sizes (C,)."""
    mat = np.zeros((len(candidates), n))
    for k, cand in enumerate(candidates):
        mat[k, list(cand.member_indices)] = 1.0
    return mat, mat.sum(axis=1)


def group_row_sums(stack: np.ndarray, wmat: np.ndarray) -> np.ndarray:
    """(C, B, T) per-window row sums of a (B, n, T) stack via one GEMM."""
    b, n, t = stack.shape
    flat = stack.transpose(1, 0, 2).reshape(n, b * t)
    return (wmat @ flat).reshape(wmat.shape[0], b, t)



def pfss_values(
    stack: np.ndarray,
    quad_weights: np.ndarray,
    wmat: np.ndarray,
    counts: np.ndarray,
    group_sums: np.ndarray | None = None,
) -> np.ndarray:
    """PFSS for every window of every batch entry; NaN marks windows whose
    within-group scatter vanished (degenerate for that labelling).

    ``group_sums`` accepts a precomputed ``group_row_sums(stack, wmat)`` so
    callers evaluating several indices can share the matrix product.
    """
    b, n, t = stack.shape
    s = group_row_sums(stack, wmat) if group_sums is None else group_sums
    tot = stack.sum(axis=1)                          # (B, T)
    q = (stack * stack) @ quad_weights               # (B, n) per-curve ||X_i||^2
    q_tot = q.sum(axis=1)                            # (B,)
    qw_sum = (q @ wmat.T).T                          # (C, B) sum over window
    g = (tot * tot) @ quad_weights                   # (B,) ||sum of curves||^2
    tot_w = tot * quad_weights                       # (B, T)
    eps = _DEN_EPS_REL * float(q.mean())

    # Quadratic expansions keep all per-window arithmetic at (C, B):
    #   c ||s/c - tot/n||^2            = a/c - 2 b/n + c g/n^2
    #   cc ||(tot-s)/cc - tot/n||^2    = (g - 2b + a)/cc - 2 (g - b)/n + cc g/n^2
    #   SSW + SSC                      = q_tot - a/c - (g - 2b + a)/cc
    # with a = ||s||^2 and b = <s, tot> (both L2 on the grid).
    n_windows = wmat.shape[0]
    num = np.empty((n_windows, b))
    den = np.empty_like(num)
    for lo in range(0, n_windows, WINDOW_CHUNK):
        hi = min(lo + WINDOW_CHUNK, n_windows)
        c = counts[lo:hi, None]
        cc = (n - counts[lo:hi])[:, None]
        sc = s[lo:hi]
        a = (sc * sc) @ quad_weights
        bb = np.einsum("cbt,bt->cb", sc, tot_w)
        resid = (g - 2.0 * bb + a) / cc
        num[lo:hi] = (
            a / c
            - 2.0 * bb / n
            + c * g / n**2
            + resid
            - 2.0 * (g - bb) / n
            + cc * g / n**2
        )
        den[lo:hi] = np.maximum(q_tot - a / c - resid, 0.0) / (n - 2)

    values = np.full_like(den, np.nan)
    ok = den > eps
    values[ok] = num[ok] / den[ok]
    return values


def dffss_values(
    stack: np.ndarray,
    quad_weights: np.ndarray,
    wmat: np.ndarray,
    counts: np.ndarray,
    scale: float,
    details: bool = False,
    group_sums: np.ndarray | None = None,
):
    """DFFSS sup statistic for every window of every batch entry.

    With ``details=True`` also returns the argmax grid index and a flag
    marking windows that hit the perfect-separation sentinel.
    """
    b, n, t = stack.shape
    s = group_row_sums(stack, wmat) if group_sums is None else group_sums
    tot = stack.sum(axis=1)
    sumsq = (stack * stack).sum(axis=1)              # (B, T), labelling-invariant
    eps_var = _VAR_EPS_REL * scale * scale
    eps_num = np.sqrt(_VAR_EPS_REL) * scale

    n_windows = wmat.shape[0]
    values = np.empty((n_windows, b))
    if details:
        argmax = np.empty((n_windows, b), dtype=int)
        any_sep = np.empty((n_windows, b), dtype=bool)

    if not details:
        # Hot path: maximize the squared ratio and take one square root on
        # the reduced array.  Perfectly separated time points (zero pooled
        # variance, real mean gap) become +inf here and the sentinel after.
        tot2 = tot * tot
        eps_num_sq = eps_num * eps_num
        for lo in range(0, n_windows, WINDOW_CHUNK):
            hi = min(lo + WINDOW_CHUNK, n_windows)
            c = counts[lo:hi, None, None]
            cc = (n - counts[lo:hi])[:, None, None]
            k1 = 1.0 / c + 1.0 / cc
            sc = s[lo:hi]
            s2 = sc * sc
            # pooled * (n - 2), by expanding (tot - s)^2
            m = (
                sumsq[None, :, :]
                - tot2[None, :, :] / cc
                + (2.0 / cc) * (sc * tot[None, :, :])
                - k1 * s2
            )
            var_term = np.maximum(m, 0.0) * (k1 / (n - 2))
            num = k1 * sc - tot[None, :, :] / cc
            num *= num
            with np.errstate(divide="ignore", invalid="ignore"):
                r2 = np.where(
                    var_term > eps_var,
                    num / var_term,
                    np.where(num > eps_num_sq, np.inf, 0.0),
                )
            values[lo:hi] = r2.max(axis=2)
        np.sqrt(values, out=values)
        values[np.isinf(values)] = SEPARATION_SENTINEL
        return values

    for lo in range(0, n_windows, WINDOW_CHUNK):
        hi = min(lo + WINDOW_CHUNK, n_windows)
        c = counts[lo:hi, None, None]
        cc = (n - counts[lo:hi])[:, None, None]
        mean_w = s[lo:hi] / c
        mean_c = (tot[None, :, :] - s[lo:hi]) / cc

        pooled = np.maximum(
            sumsq[None, :, :] - c * mean_w**2 - cc * mean_c**2, 0.0
        ) / (n - 2)
        var_term = pooled * (1.0 / c + 1.0 / cc)
        num = np.abs(mean_w - mean_c)

        ok = var_term > eps_var
        pointwise = np.zeros_like(num)
        np.divide(num, np.sqrt(var_term, where=ok, out=np.ones_like(var_term)),
                  where=ok, out=pointwise)
        separated = ~ok & (num > eps_num)
        pointwise[separated] = SEPARATION_SENTINEL

        values[lo:hi] = pointwise.max(axis=2)
        argmax[lo:hi] = pointwise.argmax(axis=2)
        any_sep[lo:hi] = separated.any(axis=2)

    return values, argmax, any_sep


def npfss_values(
    sign_stack: np.ndarray,
    quad_weights: np.ndarray,
    wmat: np.ndarray,
    counts: np.ndarray,
) -> np.ndarray:
    """NPFSS for every window from (a batch of row permutations of) the
    sign-matrix rows."""
    b, n, t = sign_stack.shape
    s = group_row_sums(sign_stack, wmat)
    norm_sq = np.empty((wmat.shape[0], b))
    for lo in range(0, wmat.shape[0], WINDOW_CHUNK):
        hi = min(lo + WINDOW_CHUNK, wmat.shape[0])
        sc = s[lo:hi]
        norm_sq[lo:hi] = (sc * sc) @ quad_weights
    np.maximum(norm_sq, 0.0, out=norm_sq)
    denom = counts * (n - counts) * n
    return np.sqrt(norm_sq / denom[:, None])


def npfss_values_naive(
    ds: FunctionalDataset, candidates: Sequence[CandidateCluster]
) -> np.ndarray:
    """NPFSS for every window via the explicit double sum (benchmark baseline)."""
    return np.array([npfss_index_naive(ds, w).value for w in candidates])

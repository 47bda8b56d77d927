"""Window scanning: MLC detection, Monte-Carlo inference, secondary clusters.

The scanner maximizes a concentration index over every candidate window,
then calibrates the maximum by random labelling: curves are reassigned
to sites by uniform permutations and the maximum recomputed for each.
The p-value is (1 + #{permuted maxima >= observed}) / (M + 1), so it can
never be 0 and never exceeds 1.

Permutation m is generated from a child seed derived from
(master_seed, m); results are therefore identical for any thread count.
Permutations are processed in fixed-size batches so the arithmetic
(and hence the bits of the output) does not depend on scheduling.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import indices
from .errors import DegenerateDataError
from .fdata import FunctionalDataset
from .geometry import CandidateCluster, SiteGrid, enumerate_candidates
from .indices import DFFSS, METHODS, NPFSS, PFSS

# Batch of permutations evaluated per matrix product.  Fixed (never derived
# from the thread count) so the floating-point reduction pattern, and with
# it the output bytes, are invariant under --threads.
PERMUTATION_BATCH = 16

OVERLAP_MODES = ("none", "partial")


@dataclass(frozen=True)
class SecondaryCluster:
    """A non-overlapping runner-up window tested against the null maxima."""

    cluster: CandidateCluster
    statistic: float
    p_value: float
    rank: int                       # 1 is the MLC, secondaries start at 2
    significant: bool
    argmax_time: float | None = None


@dataclass(frozen=True)
class ScanResult:
    """Outcome of one method's scan of one dataset."""

    method: str
    mlc: CandidateCluster
    statistic: float
    p_value: float
    n_permutations: int
    master_seed: int
    level: float
    significant: bool
    secondaries: tuple[SecondaryCluster, ...]
    argmax_time: float | None = None        # dffss: time attaining the sup
    mlc_degenerate: bool = False            # dffss: separation sentinel hit
    degenerate_permutations: int = 0        # pfss: labellings scored 0
    null_maxima: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, grid: SiteGrid) -> dict:
        """JSON-ready payload; keys sorted by the serializer, not here."""

        def cluster_payload(cluster: CandidateCluster) -> dict:
            return {
                "member_ids": list(cluster.member_ids(grid)),
                "center_id": grid.ids[cluster.center_index],
                "radius": cluster.radius,
                "size": cluster.size,
            }

        payload = {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "significant": self.significant,
            "level": self.level,
            "n_permutations": self.n_permutations,
            "master_seed": self.master_seed,
            "mlc": cluster_payload(self.mlc),
            "degenerate_permutations": self.degenerate_permutations,
            "secondaries": [
                {
                    "rank": sec.rank,
                    "statistic": sec.statistic,
                    "p_value": sec.p_value,
                    "significant": sec.significant,
                    **(
                        {"argmax_time": sec.argmax_time}
                        if sec.argmax_time is not None
                        else {}
                    ),
                    "cluster": cluster_payload(sec.cluster),
                }
                for sec in self.secondaries
            ],
        }
        if self.argmax_time is not None:
            payload["argmax_time"] = self.argmax_time
        if self.mlc_degenerate:
            payload["mlc_degenerate"] = True
        return payload


def permutation_for(master_seed: int, m: int, n: int) -> np.ndarray:
    """Row permutation used by labelling m; independent of execution order."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(m,))
    return np.random.default_rng(seq).permutation(n)


def _require_methods(method) -> tuple[str, ...]:
    if isinstance(method, str):
        requested = METHODS if method == "all" else (method,)
    else:
        requested = tuple(method)
    for name in requested:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; expected one of {METHODS}")
    if not requested:
        raise ValueError("no method requested")
    return requested


def _window_data(candidates: Sequence[CandidateCluster], n: int):
    if len(candidates) == 0:
        raise ValueError("candidate list is empty")
    wmat, counts = indices.window_matrix(candidates, n)
    if counts.min() < 1 or counts.max() >= n:
        raise ValueError("every candidate window needs a non-empty complement")
    sizes = counts.astype(int)
    centers = np.array([c.center_index for c in candidates])
    radii = np.array([c.radius for c in candidates])
    return wmat, counts, sizes, centers, radii


def _argmax_with_ties(values: np.ndarray, sizes, centers, radii) -> int:
    """Index of the best window; exact value ties prefer the smallest
    (size, center_index, radius)."""
    finite = ~np.isnan(values)
    if not finite.any():
        raise DegenerateDataError(
            "index undefined on every candidate window (constant data?)"
        )
    best = np.nanmax(values)
    tied = np.flatnonzero(finite & (values == best))
    order = np.lexsort((radii[tied], centers[tied], sizes[tied]))
    return int(tied[order[0]])


class _Evaluator:
    """Evaluates all windows for a batch of labellings with shared products."""

    def __init__(
        self,
        ds: FunctionalDataset,
        candidates: Sequence[CandidateCluster],
        methods: tuple[str, ...],
    ):
        self.ds = ds
        self.methods = methods
        self.wmat, self.counts, self.sizes, self.centers, self.radii = _window_data(
            candidates, ds.n
        )
        self.qw = ds.quad_weights
        self.scale = indices.value_scale(ds.curves)
        self.sign = (
            indices.build_sign_matrix(ds) if NPFSS in methods else None
        )

    def values_for(self, perms: np.ndarray, details: bool = False):
        """perms: (B, n) row permutations; identity rows give the observed scan.

        Returns {method: (C, B) values}; with details, dffss additionally
        yields argmax grid indices and sentinel flags.
        """
        out: dict[str, np.ndarray] = {}
        extra: dict[str, tuple] = {}
        if PFSS in self.methods or DFFSS in self.methods:
            stack = self.ds.curves[perms]
            sums = indices.group_row_sums(stack, self.wmat)
            if PFSS in self.methods:
                out[PFSS] = indices.pfss_values(
                    stack, self.qw, self.wmat, self.counts, group_sums=sums
                )
            if DFFSS in self.methods:
                res = indices.dffss_values(
                    stack,
                    self.qw,
                    self.wmat,
                    self.counts,
                    self.scale,
                    details=details,
                    group_sums=sums,
                )
                if details:
                    out[DFFSS], amax, degen = res
                    extra[DFFSS] = (amax, degen)
                else:
                    out[DFFSS] = res
        if NPFSS in self.methods:
            sign_stack = self.sign.rows[perms]
            out[NPFSS] = indices.npfss_values(
                sign_stack, self.qw, self.wmat, self.counts
            )
        return (out, extra) if details else out


def detect_mlc(
    ds: FunctionalDataset,
    candidates: Sequence[CandidateCluster],
    method: str,
) -> tuple[CandidateCluster, float]:
    """Best window and its index value for one method, no inference.

    Windows where the index is undefined (PFSS with zero within-group
    scatter) are skipped; if every window is undefined the scan cannot
    proceed and a DegenerateDataError is raised.
    """
    (name,) = _require_methods(method)
    ev = _Evaluator(ds, candidates, (name,))
    identity = np.arange(ds.n)[None, :]
    values = ev.values_for(identity)[name][:, 0]
    k = _argmax_with_ties(values, ev.sizes, ev.centers, ev.radii)
    return candidates[k], float(values[k])


def _null_maxima(
    ev: _Evaluator,
    n_permutations: int,
    master_seed: int,
    threads: int,
) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    """Monte-Carlo maxima per method, plus degenerate-labelling counts."""
    n = ev.ds.n
    maxima = {m: np.empty(n_permutations) for m in ev.methods}
    degenerate = {m: 0 for m in ev.methods}
    starts = list(range(1, n_permutations + 1, PERMUTATION_BATCH))

    def run_batch(m0: int) -> dict[str, int]:
        m1 = min(m0 + PERMUTATION_BATCH, n_permutations + 1)
        perms = np.stack([permutation_for(master_seed, m, n) for m in range(m0, m1)])
        values = ev.values_for(perms)
        counts = {}
        for name, vals in values.items():
            if name == PFSS:
                # A labelling can leave some windows without within-group
                # scatter (duplicated curves); those windows are skipped.
                # A labelling degenerate on EVERY window scores 0.
                bad = np.isnan(vals)
                dead = bad.all(axis=0)
                col = np.where(bad, -np.inf, vals).max(axis=0)
                col = np.where(dead, 0.0, col)
                counts[name] = int(dead.sum())
            else:
                col = vals.max(axis=0)
                counts[name] = 0
            maxima[name][m0 - 1 : m1 - 1] = col
        return counts

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            batch_counts = list(pool.map(run_batch, starts))
    else:
        batch_counts = [run_batch(m0) for m0 in starts]
    for counts in batch_counts:
        for name, k in counts.items():
            degenerate[name] += k
    return maxima, degenerate


def _p_value(statistic: float, null_maxima: np.ndarray) -> float:
    m = null_maxima.size
    return (1 + int(np.count_nonzero(null_maxima >= statistic))) / (m + 1)


def _extract_secondaries(
    candidates: Sequence[CandidateCluster],
    values: np.ndarray,
    sizes: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    mlc_index: int,
    null_maxima: np.ndarray,
    level: float,
    overlap: str,
    all_secondaries: bool,
    argmax_times: np.ndarray | None = None,
) -> tuple[SecondaryCluster, ...]:
    """Greedy runner-up extraction in descending index order.

    overlap="none" admits only windows sharing no site with anything
    already reported; overlap="partial" admits overlapping windows as
    long as neither side contains the other.  Ranking against the null
    maxima is monotone, so once a candidate misses the level every later
    one does too and the walk stops (unless the full list is requested).
    """
    if overlap not in OVERLAP_MODES:
        raise ValueError(f"overlap must be one of {OVERLAP_MODES}")
    sort_key = np.where(np.isnan(values), np.inf, -values)
    order = np.lexsort((radii, centers, sizes, sort_key))

    accepted = [frozenset(candidates[mlc_index].member_indices)]
    out: list[SecondaryCluster] = []
    rank = 2
    for k in order:
        if k == mlc_index or np.isnan(values[k]):
            continue
        members = frozenset(candidates[k].member_indices)
        if overlap == "none":
            ok = all(not (members & prev) for prev in accepted)
        else:
            ok = all(
                not (members <= prev or prev <= members) for prev in accepted
            )
        if not ok:
            continue
        p = _p_value(float(values[k]), null_maxima)
        significant = p < level
        if not significant and not all_secondaries:
            break
        out.append(
            SecondaryCluster(
                cluster=candidates[k],
                statistic=float(values[k]),
                p_value=p,
                rank=rank,
                significant=significant,
                argmax_time=(
                    float(argmax_times[k]) if argmax_times is not None else None
                ),
            )
        )
        accepted.append(members)
        rank += 1
    return tuple(out)


def run_scan(
    ds: FunctionalDataset,
    candidates: Sequence[CandidateCluster],
    method="all",
    n_permutations: int = 999,
    master_seed: int = 0,
    level: float = 0.05,
    overlap: str = "none",
    threads: int = 1,
    all_secondaries: bool = False,
    with_secondaries: bool = True,
    keep_null_maxima: bool = True,
) -> dict[str, ScanResult]:
    """Full scan for one or several methods sharing the same labellings.

    Returns a dict keyed by method name.  All requested methods see the
    identical permutation stream, which makes their p-values directly
    comparable and halves the work when several run together.
    """
    methods = _require_methods(method)
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    master_seed = int(master_seed)
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")

    ev = _Evaluator(ds, candidates, methods)
    identity = np.arange(ds.n)[None, :]
    observed, extra = ev.values_for(identity, details=True)

    # Fail fast before spending permutation effort.
    mlc_pick = {}
    for name in methods:
        vals = observed[name][:, 0]
        mlc_pick[name] = _argmax_with_ties(vals, ev.sizes, ev.centers, ev.radii)

    maxima, degenerate = _null_maxima(ev, n_permutations, master_seed, threads)

    results: dict[str, ScanResult] = {}
    for name in methods:
        vals = observed[name][:, 0]
        k = mlc_pick[name]
        statistic = float(vals[k])
        p = _p_value(statistic, maxima[name])
        argmax_times = None
        argmax_time = None
        mlc_degenerate = False
        if name == DFFSS:
            amax, degen_flags = extra[DFFSS]
            argmax_times = ds.time_grid[amax[:, 0]]
            argmax_time = float(argmax_times[k])
            mlc_degenerate = bool(degen_flags[k, 0])
        secondaries: tuple[SecondaryCluster, ...] = ()
        if with_secondaries:
            secondaries = _extract_secondaries(
                candidates,
                vals,
                ev.sizes,
                ev.centers,
                ev.radii,
                k,
                maxima[name],
                level,
                overlap,
                all_secondaries,
                argmax_times,
            )
        results[name] = ScanResult(
            method=name,
            mlc=candidates[k],
            statistic=statistic,
            p_value=p,
            n_permutations=n_permutations,
            master_seed=master_seed,
            level=level,
            significant=p < level,
            secondaries=secondaries,
            argmax_time=argmax_time,
            mlc_degenerate=mlc_degenerate,
            degenerate_permutations=degenerate[name],
            null_maxima=maxima[name] if keep_null_maxima else None,
        )
    return results


def monte_carlo(
    ds: FunctionalDataset,
    candidates: Sequence[CandidateCluster],
    method: str,
    n_permutations: int,
    master_seed: int,
    **kwargs,
) -> ScanResult:
    """Single-method scan with Monte-Carlo inference (see run_scan)."""
    (name,) = _require_methods(method)
    return run_scan(
        ds,
        candidates,
        method=name,
        n_permutations=n_permutations,
        master_seed=master_seed,
        **kwargs,
    )[name]


def scan_grid(
    ds: FunctionalDataset,
    grid: SiteGrid,
    method="all",
    max_fraction: float = 0.5,
    **kwargs,
) -> dict[str, ScanResult]:
    """Convenience wrapper: enumerate candidate windows, then run_scan."""
    ds = ds.reindex(grid.ids)
    candidates = enumerate_candidates(grid, max_fraction=max_fraction)
    return run_scan(ds, candidates, method=method, **kwargs)

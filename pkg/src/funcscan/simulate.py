"""Synthetic functional data with planted clusters, plus the power study.

Curves follow X_i(t) = sin(2 pi t^2)^5 + Delta(t) 1{i in cluster} + eps_i(t)
where eps_i is a 7-term random basis expansion whose coefficients come
from one of three standardized distributions.  The study scans each
generated dataset with the requested methods and aggregates power,
true/false positive rates and the F-measure over replicates.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np

from .fdata import FunctionalDataset
from .geometry import SiteGrid, enumerate_candidates, read_sites_csv
from .indices import METHODS
from .scan import run_scan

DISTRIBUTIONS = ("gaussian", "student4", "chisq4")
SHIFT_FAMILIES = ("delta1", "delta2", "delta3")

# Intensity grids used by the full study, one per shift family.
DEFAULT_ALPHA_GRIDS: Mapping[str, tuple[float, ...]] = {
    "delta1": (0.0, 0.75, 1.5, 2.25, 3.0),
    "delta2": (0.0, 2.0, 4.0, 6.0, 8.0),
    "delta3": (0.0, 2.5, 5.0, 7.5, 10.0),
}

N_BASIS = 7
_BASIS_WEIGHTS = 1.5 * 0.2 ** np.arange(1, N_BASIS + 1)

# The packaged 94-site layout ships with this 8-site contiguous preset
# cluster (a center and its 7 nearest neighbours, itself a candidate
# window of the enumeration).
DEFAULT_CLUSTER_IDS: tuple[str, ...] = (
    "s21",
    "s22",
    "s23",
    "s30",
    "s31",
    "s32",
    "s40",
    "s41",
)

CSV_FIELDS = (
    "method",
    "distribution",
    "shift",
    "alpha",
    "power",
    "tpr",
    "fpr",
    "f_measure",
    "rejected_count",
    "replicates",
    "n_permutations",
    "master_seed",
)


def default_time_grid(n_points: int = 101) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_points)


@lru_cache(maxsize=1)
def default_site_grid() -> SiteGrid:
    """The packaged 94-site planar layout used by study defaults."""
    ref = resources.files("funcscan.data").joinpath("sites94.csv")
    with resources.as_file(ref) as path:
        return read_sites_csv(path)


def default_cluster_indices(grid: SiteGrid) -> tuple[int, ...]:
    return tuple(grid.index_of(i) for i in DEFAULT_CLUSTER_IDS)


def basis_psi(k: int, t):
    """Basis function k evaluated at t (scalar or array).

    Psi_1 = 1; Psi_k = sqrt(2) sin(k pi t) for even k;
    Psi_k = sqrt(2) cos((k-1) pi t) for odd k > 1.
    """
    if not 1 <= k <= N_BASIS:
        raise ValueError(f"basis index must be in 1..{N_BASIS}, got {k}")
    t = np.asarray(t, dtype=float)
    if k == 1:
        out = np.ones_like(t)
    elif k % 2 == 0:
        out = np.sqrt(2.0) * np.sin(k * np.pi * t)
    else:
        out = np.sqrt(2.0) * np.cos((k - 1) * np.pi * t)
    return out if out.ndim else float(out)


def basis_matrix(time_grid: np.ndarray) -> np.ndarray:
    """(7, T) matrix of all basis functions on the grid."""
    return np.stack([np.asarray(basis_psi(k, time_grid)) for k in range(1, N_BASIS + 1)])


def shift_value(shift_family: str, alpha: float, t):
    """Cluster shift Delta(t): delta1 = alpha t, delta2 = alpha t (1 - t),
    delta3 = alpha exp(-100 (t - 0.5)^2) / 3."""
    t = np.asarray(t, dtype=float)
    if shift_family == "delta1":
        out = alpha * t
    elif shift_family == "delta2":
        out = alpha * t * (1.0 - t)
    elif shift_family == "delta3":
        out = alpha * np.exp(-100.0 * (t - 0.5) ** 2) / 3.0
    else:
        raise ValueError(
            f"unknown shift family {shift_family!r}; expected one of {SHIFT_FAMILIES}"
        )
    return out if out.ndim else float(out)


def mean_curve(t) -> np.ndarray:
    """Deterministic component shared by every site."""
    t = np.asarray(t, dtype=float)
    return np.sin(2.0 * np.pi * t**2) ** 5


def analytic_noise_variance(time_grid) -> np.ndarray:
    """Pointwise variance of eps(t): each basis coefficient is a difference
    of two unit-variance draws, hence variance 2 per term."""
    psi = basis_matrix(np.asarray(time_grid, dtype=float))
    return 2.0 * (_BASIS_WEIGHTS @ psi**2)


@dataclass(frozen=True)
class SimulationConfig:
    """One cell of the study: a distribution, a shift family, an intensity."""

    distribution: str = "gaussian"
    shift: str = "delta1"
    alpha: float = 0.0
    true_cluster: tuple[int, ...] | None = None   # site indices; None = preset
    time_grid: tuple[float, ...] = tuple(default_time_grid())
    replicates: int = 100
    n_permutations: int = 199
    master_seed: int = 0
    level: float = 0.05
    max_fraction: float = 0.5

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(
                f"unknown distribution {self.distribution!r}; "
                f"expected one of {DISTRIBUTIONS}"
            )
        if self.shift not in SHIFT_FAMILIES:
            raise ValueError(
                f"unknown shift family {self.shift!r}; "
                f"expected one of {SHIFT_FAMILIES}"
            )
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be >= 1")
        if self.true_cluster is not None and len(self.true_cluster) == 0:
            raise ValueError("true_cluster must be non-empty when given")


def _draw_coefficients(rng: np.random.Generator, distribution: str, shape) -> np.ndarray:
    """i.i.d. draws standardized to unit variance."""
    if distribution == "gaussian":
        return rng.standard_normal(shape)
    if distribution == "student4":
        return rng.standard_t(4, size=shape) / np.sqrt(2.0)
    if distribution == "chisq4":
        return (rng.chisquare(4, size=shape) - 4.0) / (2.0 * np.sqrt(2.0))
    raise ValueError(f"unknown distribution {distribution!r}")


def replicate_rng(master_seed: int, replicate_index: int) -> np.random.Generator:
    """Data stream of one replicate; disjoint from every scan stream."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(replicate_index, 0))
    return np.random.default_rng(seq)


def replicate_scan_seed(master_seed: int, replicate_index: int) -> int:
    """Master seed for the permutation stream of one replicate's scan."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(replicate_index, 1))
    return int(seq.generate_state(1)[0])


def generate_noise(
    rng: np.random.Generator, distribution: str, n: int, time_grid: np.ndarray
) -> np.ndarray:
    """(n, T) draws of eps: coefficient differences times basis curves."""
    v = _draw_coefficients(rng, distribution, (n, 2, N_BASIS))
    coeff = np.sqrt(_BASIS_WEIGHTS) * (v[:, 0, :] - v[:, 1, :])
    return coeff @ basis_matrix(time_grid)


def generate_dataset(
    cfg: SimulationConfig,
    replicate_index: int,
    site_ids: Sequence[str] | None = None,
) -> FunctionalDataset:
    """One synthetic dataset; fully determined by (cfg, replicate_index).

    Drawing the whole coefficient block in one fixed-shape call pins the
    stream layout, so the dataset does not depend on evaluation order.
    """
    if site_ids is None:
        site_ids = default_site_grid().ids
    n = len(site_ids)
    t = np.asarray(cfg.time_grid, dtype=float)

    rng = replicate_rng(cfg.master_seed, replicate_index)
    curves = mean_curve(t)[None, :] + generate_noise(rng, cfg.distribution, n, t)
    if cfg.alpha > 0:
        cluster = (
            default_cluster_indices(default_site_grid())
            if cfg.true_cluster is None
            else tuple(cfg.true_cluster)
        )
        if not cluster or min(cluster) < 0 or max(cluster) >= n:
            raise ValueError(f"true_cluster indices out of range 0..{n - 1}")
        curves[list(cluster)] += shift_value(cfg.shift, cfg.alpha, t)
    return FunctionalDataset(curves=curves, time_grid=t, site_ids=tuple(site_ids))


@dataclass(frozen=True)
class StudyMetrics:
    """Aggregated detection quality of one method in one study cell.

    tpr/fpr/f_measure follow the convention of averaging only over the
    replicates that rejected the null; they are NaN when nothing did.
    """

    power: float
    tpr: float
    fpr: float
    f_measure: float
    rejected_count: int


def detection_metrics(
    detected: Iterable[int], true_cluster: Iterable[int], n: int
) -> tuple[float, float, float]:
    """(tpr, fpr, f_measure) of one detected site set against the truth."""
    det = set(detected)
    truth = set(true_cluster)
    if not truth or len(truth) >= n:
        raise ValueError("true cluster must be a proper non-empty subset")
    tp = len(det & truth)
    tpr = tp / len(truth)
    fpr = len(det - truth) / (n - len(truth))
    ppv = tp / len(det) if det else 0.0
    f = 2.0 * ppv * tpr / (ppv + tpr) if (ppv + tpr) > 0 else 0.0
    return tpr, fpr, f


def _aggregate(
    rejected: np.ndarray, tprs: np.ndarray, fprs: np.ndarray, fs: np.ndarray
) -> StudyMetrics:
    k = int(rejected.sum())
    if k:
        sel = rejected
        agg = (
            float(tprs[sel].mean()),
            float(fprs[sel].mean()),
            float(fs[sel].mean()),
        )
    else:
        agg = (float("nan"),) * 3
    return StudyMetrics(
        power=k / rejected.size,
        tpr=agg[0],
        fpr=agg[1],
        f_measure=agg[2],
        rejected_count=k,
    )


def run_power_study_multi(
    cfg: SimulationConfig,
    methods: Sequence[str] = METHODS,
    site_grid: SiteGrid | None = None,
    threads: int = 1,
    progress=None,
    with_flags: bool = False,
) -> dict[str, StudyMetrics] | tuple[dict[str, StudyMetrics], dict[str, np.ndarray]]:
    """Power study for several methods at once, sharing every dataset and
    permutation stream.  ``progress`` is called with (done, total) after
    each replicate when given.  With ``with_flags`` the per-replicate
    rejection indicators come back too; replicate r is self-contained, so
    ``flags[:k]`` equals what a k-replicate study would have produced."""
    grid = default_site_grid() if site_grid is None else site_grid
    cluster = (
        default_cluster_indices(grid)
        if cfg.true_cluster is None and site_grid is None
        else cfg.true_cluster
    )
    if cluster is None:
        raise ValueError("true_cluster is required with a custom site grid")
    cluster = tuple(cluster)
    candidates = enumerate_candidates(grid, max_fraction=cfg.max_fraction)
    names = tuple(methods)

    r_total = cfg.replicates
    rejected = {m: np.zeros(r_total, dtype=bool) for m in names}
    tprs = {m: np.zeros(r_total) for m in names}
    fprs = {m: np.zeros(r_total) for m in names}
    fs = {m: np.zeros(r_total) for m in names}

    cfg_fixed = replace(cfg, true_cluster=cluster)

    def one_replicate(r: int):
        ds = generate_dataset(cfg_fixed, r, site_ids=grid.ids)
        results = run_scan(
            ds,
            candidates,
            method=names,
            n_permutations=cfg.n_permutations,
            master_seed=replicate_scan_seed(cfg.master_seed, r),
            level=cfg.level,
            with_secondaries=False,
            keep_null_maxima=False,
        )
        for m in names:
            res = results[m]
            rejected[m][r] = res.significant
            if res.significant:
                t, f_, fm = detection_metrics(
                    res.mlc.member_indices, cluster, grid.n
                )
                tprs[m][r], fprs[m][r], fs[m][r] = t, f_, fm

    if threads > 1:
        done = 0
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for _ in pool.map(one_replicate, range(r_total)):
                done += 1
                if progress:
                    progress(done, r_total)
    else:
        for r in range(r_total):
            one_replicate(r)
            if progress:
                progress(r + 1, r_total)

    metrics = {
        m: _aggregate(rejected[m], tprs[m], fprs[m], fs[m]) for m in names
    }
    if with_flags:
        return metrics, {m: rejected[m].copy() for m in names}
    return metrics


def run_power_study(
    cfg: SimulationConfig,
    method: str = "npfss",
    site_grid: SiteGrid | None = None,
    threads: int = 1,
) -> StudyMetrics:
    """Single-method power study (see run_power_study_multi)."""
    return run_power_study_multi(cfg, (method,), site_grid, threads)[method]


def study_rows(
    cfg: SimulationConfig, metrics: Mapping[str, StudyMetrics]
) -> list[dict]:
    """Plot-ready rows, one per method, for the study CSV."""
    return [
        {
            "method": m,
            "distribution": cfg.distribution,
            "shift": cfg.shift,
            "alpha": cfg.alpha,
            "power": s.power,
            "tpr": s.tpr,
            "fpr": s.fpr,
            "f_measure": s.f_measure,
            "rejected_count": s.rejected_count,
            "replicates": cfg.replicates,
            "n_permutations": cfg.n_permutations,
            "master_seed": cfg.master_seed,
        }
        for m, s in metrics.items()
    ]


def write_study_csv(rows: Sequence[Mapping], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_FIELDS})

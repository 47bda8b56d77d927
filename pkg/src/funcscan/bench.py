"""Timing harness comparing the two NPFSS evaluation strategies.

The naive strategy evaluates every window by the explicit double sum
over (inside, outside) curve pairs, costing O(|w| |w^c| T) per window.
The fast strategy builds the n x T sign matrix once and reduces each
window to a row sum, so a full sweep is one matrix product.  Both must
agree to floating-point accuracy before any timing is trusted; the
report records the distribution of wall-clock times and the ratio.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import indices
from .fdata import FunctionalDataset
from .geometry import CandidateCluster

# Disagreement beyond this voids the whole comparison.
EQUALITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PhaseTiming:
    """Wall-clock summary of repeated runs of one phase, in seconds."""

    mean: float
    sd: float
    minimum: float
    maximum: float

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> "PhaseTiming":
        arr = np.asarray(samples)
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return cls(
            mean=float(arr.mean()),
            sd=sd,
            minimum=float(arr.min()),
            maximum=float(arr.max()),
        )

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "min": self.minimum,
            "max": self.maximum,
        }


@dataclass(frozen=True)
class BenchReport:
    """Comparison of naive vs sign-matrix NPFSS sweeps over all windows."""

    n_sites: int
    n_times: int
    n_windows: int
    repetitions: int
    naive: PhaseTiming            # full double-sum sweep
    fast: PhaseTiming             # matrix build + row-sum sweep
    fast_build: PhaseTiming       # sign-matrix construction alone
    fast_sums: PhaseTiming        # window row sums alone
    speedup: float                # naive.mean / fast.mean
    max_abs_difference: float

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "n_times": self.n_times,
            "n_windows": self.n_windows,
            "repetitions": self.repetitions,
            "naive_seconds": self.naive.to_dict(),
            "fast_seconds": self.fast.to_dict(),
            "fast_build_seconds": self.fast_build.to_dict(),
            "fast_sums_seconds": self.fast_sums.to_dict(),
            "speedup": self.speedup,
            "max_abs_difference": self.max_abs_difference,
        }

    def summary_lines(self) -> list[str]:
        return [
            f"sites={self.n_sites} times={self.n_times} windows={self.n_windows}"
            f" repetitions={self.repetitions}",
            f"naive sweep:  {self.naive.mean:.4f} s"
            f" (sd {self.naive.sd:.4f}, range"
            f" [{self.naive.minimum:.4f}, {self.naive.maximum:.4f}])",
            f"fast sweep:   {self.fast.mean:.4f} s"
            f" (sd {self.fast.sd:.4f}, range"
            f" [{self.fast.minimum:.4f}, {self.fast.maximum:.4f}])",
            f"  matrix build {self.fast_build.mean:.4f} s,"
            f" window sums {self.fast_sums.mean:.4f} s",
            f"speedup:      {self.speedup:.1f}x",
            f"max |diff|:   {self.max_abs_difference:.3e}",
        ]


def _timed(fn: Callable, repetitions: int) -> tuple[list[float], object]:
    fn()                           # warm run, not recorded
    samples = []
    result = None
    for _ in range(repetitions):
        t0 = time.perf_counter()
        result = fn()
        samples.append(time.perf_counter() - t0)
    return samples, result


def benchmark_npfss(
    ds: FunctionalDataset,
    candidates: Sequence[CandidateCluster],
    repetitions: int = 5,
) -> BenchReport:
    """Time both NPFSS sweeps over all candidates on identical inputs.

    Each phase gets one untimed warm run, then ``repetitions`` timed
    runs.  The fast total includes the sign-matrix build, since a fresh
    scan pays that cost too.  Raises if the two sweeps disagree beyond
    EQUALITY_TOLERANCE, which would make the timings meaningless.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    wmat, counts = indices.window_matrix(candidates, ds.n)

    def sums_only(sm):
        return indices.npfss_values(sm.rows[None], ds.quad_weights, wmat, counts)

    def fast_sweep():
        return sums_only(indices.build_sign_matrix(ds))[:, 0]

    build_samples, sm = _timed(lambda: indices.build_sign_matrix(ds), repetitions)
    sums_samples, _ = _timed(lambda: sums_only(sm), repetitions)
    fast_samples, fast_vals = _timed(fast_sweep, repetitions)
    naive_samples, naive_vals = _timed(
        lambda: indices.npfss_values_naive(ds, candidates), repetitions
    )

    diff = float(np.max(np.abs(fast_vals - naive_vals)))
    if diff > EQUALITY_TOLERANCE:
        raise RuntimeError(
            f"fast and naive NPFSS disagree by {diff:.3e}; timings void"
        )

    naive = PhaseTiming.from_samples(naive_samples)
    fast = PhaseTiming.from_samples(fast_samples)
    return BenchReport(
        n_sites=ds.n,
        n_times=ds.n_times,
        n_windows=len(candidates),
        repetitions=repetitions,
        naive=naive,
        fast=fast,
        fast_build=PhaseTiming.from_samples(build_samples),
        fast_sums=PhaseTiming.from_samples(sums_samples),
        speedup=naive.mean / fast.mean,
        max_abs_difference=diff,
    )

"""Benchmark harness: timing summaries and the agreement guard."""

import numpy as np
import pytest

import funcscan.bench as bench
from funcscan.bench import BenchReport, PhaseTiming, benchmark_npfss

from conftest import random_case


def test_phase_timing_from_samples():
    t = PhaseTiming.from_samples([1.0, 2.0, 3.0])
    assert t.mean == pytest.approx(2.0)
    assert t.sd == pytest.approx(1.0)  # ddof=1
    assert (t.minimum, t.maximum) == (1.0, 3.0)
    single = PhaseTiming.from_samples([4.0])
    assert single.sd == 0.0
    assert single.to_dict() == {"mean": 4.0, "sd": 0.0, "min": 4.0, "max": 4.0}


def test_benchmark_report_is_consistent():
    grid, ds, cands = random_case(301, n=10, n_times=11)
    rep = benchmark_npfss(ds, cands, repetitions=3)
    assert rep.n_sites == ds.n
    assert rep.n_times == ds.n_times
    assert rep.n_windows == len(cands)
    assert rep.repetitions == 3
    assert rep.max_abs_difference <= bench.EQUALITY_TOLERANCE
    assert rep.speedup == pytest.approx(rep.naive.mean / rep.fast.mean)
    for phase in (rep.naive, rep.fast, rep.fast_build, rep.fast_sums):
        assert phase.minimum <= phase.mean <= phase.maximum
    d = rep.to_dict()
    assert set(d) == {
        "n_sites", "n_times", "n_windows", "repetitions",
        "naive_seconds", "fast_seconds", "fast_build_seconds",
        "fast_sums_seconds", "speedup", "max_abs_difference",
    }
    text = "\n".join(rep.summary_lines())
    assert "speedup" in text and "naive sweep" in text


def test_benchmark_rejects_repetitions_below_one():
    grid, ds, cands = random_case(302, n=8, n_times=7)
    with pytest.raises(ValueError):
        benchmark_npfss(ds, cands, repetitions=0)


def test_benchmark_raises_when_sweeps_disagree(monkeypatch):
    grid, ds, cands = random_case(303, n=8, n_times=7)

    original = bench.indices.npfss_values_naive

    def corrupted(dataset, candidates):
        return original(dataset, candidates) + 1e-6

    monkeypatch.setattr(bench.indices, "npfss_values_naive", corrupted)
    with pytest.raises(RuntimeError):
        benchmark_npfss(ds, cands, repetitions=1)

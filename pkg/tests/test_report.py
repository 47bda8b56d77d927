"""Figure rendering smoke tests (headless backend, file outputs only)."""

import numpy as np

from funcscan.report import render_scan_figure, render_study_figure
from funcscan.scan import run_scan

from conftest import random_case


def test_render_scan_figure(tmp_path):
    grid, ds, cands = random_case(401, n=10, n_times=12)
    results = run_scan(ds, cands, n_permutations=19, master_seed=1,
                       all_secondaries=True)
    path = tmp_path / "scan.png"
    render_scan_figure(ds, grid, results, str(path))
    assert path.exists() and path.stat().st_size > 5000


def test_render_scan_figure_accepts_unordered_dataset(tmp_path):
    grid, ds, cands = random_case(402, n=9, n_times=10)
    rng = np.random.default_rng(0)
    order = rng.permutation(ds.n)
    shuffled = ds.reindex(tuple(ds.site_ids[i] for i in order))
    results = run_scan(ds, cands, n_permutations=9, master_seed=1)
    path = tmp_path / "scan.png"
    render_scan_figure(shuffled, grid, results, str(path))
    assert path.exists()


def test_render_study_figure(tmp_path):
    rows = []
    for method in ("pfss", "dffss", "npfss"):
        for alpha, power in ((0.0, 0.04), (5.0, 0.6), (10.0, 0.95)):
            rows.append(
                {
                    "method": method,
                    "distribution": "gaussian",
                    "shift": "delta3",
                    "alpha": alpha,
                    "power": power,
                    "tpr": power,
                    "fpr": 0.02,
                    "f_measure": power,
                    "rejected_count": int(100 * power),
                    "replicates": 100,
                    "n_permutations": 199,
                    "master_seed": 0,
                }
            )
    path = tmp_path / "study.png"
    render_study_figure(rows, str(path))
    assert path.exists() and path.stat().st_size > 5000

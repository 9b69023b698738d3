"""Margin-map sweep: CSV emission and the run manifest."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .mu import MarginResult, TuningGrid, default_frequency_grid, margins

CSV_HEADER = "M,C,rs_margin,rp_margin,peak_freq_rs,peak_freq_rp"


def write_margin_csv(results: list[MarginResult], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in results:
            fh.write(f"{r.M!r},{r.C!r},{r.rs_margin!r},{r.rp_margin!r},"
                     f"{r.peak_freq_rs!r},{r.peak_freq_rp!r}\n")


def read_margin_csv(path: str) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def grid_sweep(n_agents: int, grid: TuningGrid, out_dir: str,
               n_freqs: int = 80, n_jobs: int = 1, polish: bool = True,
               cfg_kwargs=None, tag: str = "") -> str:
    """Run the margin map and emit CSV plus a manifest; returns the CSV
    path. Identical configuration produces byte-identical output."""
    os.makedirs(out_dir, exist_ok=True)
    freqs = default_frequency_grid(n_freqs)
    results = margins(grid, n_agents, freqs=freqs, polish=polish,
                      n_jobs=n_jobs, cfg_kwargs=cfg_kwargs)
    name = tag or f"margins_n{n_agents}"
    csv_path = os.path.join(out_dir, f"{name}.csv")
    write_margin_csv(results, csv_path)
    manifest = {
        "n_agents": n_agents,
        "grid_M": [float(v) for v in grid.M_values],
        "grid_C": [float(v) for v in grid.C_values],
        "n_freqs": n_freqs,
        "freq_range": [float(freqs[0]), float(freqs[-1])],
        "polish": polish,
        "config_hash": hashlib.sha256(
            json.dumps({
                "n_agents": n_agents,
                "M": [float(v) for v in grid.M_values],
                "C": [float(v) for v in grid.C_values],
                "n_freqs": n_freqs,
            }, sort_keys=True).encode()).hexdigest()[:16],
    }
    with open(os.path.join(out_dir, f"{name}_manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return csv_path

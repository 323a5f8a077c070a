"""CSV emitters and the run manifest.

Every data file has a header row and a fixed column order.  Floats are
written with ``repr`` so identical runs give byte-identical files; wall
times and versions go only into ``manifest.json``.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "write_csv",
    "write_snapshots",
    "write_counts",
    "write_density_profile",
    "write_current",
    "write_entropy",
    "write_young",
    "write_burgers",
    "write_coupling",
    "write_manifest",
]


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_snapshots(path, trajectories) -> Path:
    def rows():
        for tr in trajectories:
            for k, t in enumerate(tr.times):
                for i, e in enumerate(tr.eta[k], start=1):
                    yield tr.replica, float(t), i, int(e)

    return write_csv(path, ("replica", "t", "site", "eta"), rows())


def write_counts(path, trajectories) -> Path:
    def rows():
        for tr in trajectories:
            for k, t in enumerate(tr.times):
                for b in range(tr.h_plus.shape[1]):
                    yield tr.replica, float(t), b, int(tr.h_plus[k, b]), int(tr.h_minus[k, b])

    return write_csv(path, ("replica", "t", "bond", "h_plus", "h_minus"), rows())


def write_density_profile(path, times, mean, stderr) -> Path:
    rows = (
        (float(t), c, float(mean[k, c]), float(stderr[k, c]))
        for k, t in enumerate(times)
        for c in range(mean.shape[1])
    )
    return write_csv(path, ("t", "x_cell", "mean", "stderr"), rows)


def write_current(path, windows, mean, stderr) -> Path:
    """``windows[k]`` is ``(t1, t2)``; written as ``"t1:t2"``."""
    rows = (
        (f"{w[0]!r}:{w[1]!r}", g, float(mean[k, g]), float(stderr[k, g]))
        for k, w in enumerate(windows)
        for g in range(mean.shape[1])
    )
    return write_csv(path, ("t_window", "bond_group", "flux", "stderr"), rows)


def write_entropy(path, records) -> Path:
    """``records`` are ``(N, pair, replica, X_value)`` tuples."""
    return write_csv(path, ("N", "pair", "replica", "X_value"), records)


def write_young(path, hist) -> Path:
    m = hist.mass
    rows = (
        (tc, xc, b, float(m[tc, xc, b]))
        for tc in range(m.shape[0])
        for xc in range(m.shape[1])
        for b in range(m.shape[2])
    )
    return write_csv(path, ("t_cell", "x_cell", "bin", "mass"), rows)


def write_burgers(path_rho, path_flux, runs) -> tuple[Path, Path]:
    def rho_rows():
        for r in runs:
            for k, t in enumerate(r.times):
                for c in range(r.rho.shape[1]):
                    yield r.epsilon, float(t), c, float(r.rho[k, c])

    def flux_rows():
        for r in runs:
            for k, t in enumerate(r.times):
                for j in range(r.fluxes.shape[1]):
                    yield r.epsilon, float(t), j, float(r.fluxes[k, j])

    return (
        write_csv(path_rho, ("epsilon", "t", "cell", "rho"), rho_rows()),
        write_csv(path_flux, ("epsilon", "t", "interface", "flux"), flux_rows()),
    )


def write_coupling(path, trajectories) -> Path:
    def rows():
        for tr in trajectories:
            for k, t in enumerate(tr.times):
                for i in range(tr.lower.shape[1]):
                    yield tr.replica, float(t), i + 1, int(tr.lower[k, i]), int(tr.upper[k, i])

    return write_csv(path, ("replica", "t", "site", "eta_lower", "eta_upper"), rows())


def _versions() -> dict:
    import numba
    import scipy

    from . import __version__

    return {
        "qsasep": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "platform": platform.platform(),
    }


def write_manifest(path, verb: str, config_hash: str, seed: int, wall_time: float, files, extra=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "verb": verb,
        "config_hash": config_hash,
        "seed": seed,
        "versions": _versions(),
        "wall_time_s": wall_time,
        "files": sorted(Path(f).name for f in files),
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path

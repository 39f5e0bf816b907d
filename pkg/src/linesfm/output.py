"""Serialization of run records: time-series CSV, summary JSON, plot data.

Floats are written with ``repr``, the shortest decimal that round-trips to
the same double, and nothing time- or host-dependent goes into the files,
so a given record always serializes to the same bytes.

Time-series columns, for ``L`` lines (``N = 1..L``)::

    t
    lN_h_x lN_h_y lN_h_z  lN_hhat_x lN_hhat_y lN_hhat_z
    lN_chi_a lN_chi_b  lN_chihat_a lN_chihat_b
    lN_err_h_x lN_err_h_y lN_err_h_z  lN_err_chi_a lN_err_chi_b  lN_err_L
    nu_x nu_y nu_z  om_x om_y om_z
    lN_sigma1_sq lN_sigma2_sq

``a`` and ``b`` are the two kept components of ``chi`` (in index order),
errors are ``true - estimate`` and ``err_L`` is the Plücker error norm.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import RunConfig
from .sim import RunRecord

XYZ = ("x", "y", "z")
PER_LINE_STATE = (
    [f"h_{c}" for c in XYZ] + [f"hhat_{c}" for c in XYZ]
    + ["chi_a", "chi_b", "chihat_a", "chihat_b"]
    + [f"err_h_{c}" for c in XYZ] + ["err_chi_a", "err_chi_b", "err_L"]
)
PER_LINE_SIGMA = ("sigma1_sq", "sigma2_sq")


def fmt(x) -> str:
    return repr(float(x))


def columns(n_lines: int) -> list[str]:
    cols = ["t"]
    for i in range(1, n_lines + 1):
        cols += [f"l{i}_{c}" for c in PER_LINE_STATE]
    cols += [f"nu_{c}" for c in XYZ] + [f"om_{c}" for c in XYZ]
    for i in range(1, n_lines + 1):
        cols += [f"l{i}_{c}" for c in PER_LINE_SIGMA]
    return cols


def timeseries_matrix(rec: RunRecord) -> np.ndarray:
    """All CSV values as an ``(n_samples, n_columns)`` array."""
    n, L = rec.t.size, rec.n_lines
    parts = [rec.t[:, None]]
    for i in range(L):
        parts += [rec.h[:, i], rec.h_hat[:, i], rec.chi[:, i], rec.chi_hat[:, i],
                  rec.err_h[:, i], rec.err_chi[:, i], rec.plucker_error[:, i, None]]
    parts += [rec.nu, rec.omega]
    parts += [rec.sigma_sq[:, i] for i in range(L)]
    out = np.hstack(parts)
    assert out.shape == (n, len(columns(L)))
    return out


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_timeseries(rec: RunRecord, path) -> Path:
    path = Path(path)
    _write_table(path, columns(rec.n_lines), timeseries_matrix(rec))
    return path


def read_timeseries(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def summary_dict(rec: RunRecord, config: RunConfig) -> dict:
    s = rec.summary()
    s["seed"] = rec.seed
    s["config"] = config.to_dict()
    return s


def dump_json(obj, path) -> Path:
    path = Path(path)
    # allow_nan=False: a NaN would make the file invalid JSON
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")
    return path


def write_summary(rec: RunRecord, config: RunConfig, path) -> Path:
    return dump_json(summary_dict(rec, config), path)


def plot_panels(rec: RunRecord) -> dict[str, tuple[list[str], np.ndarray]]:
    """One table per figure panel, keyed by a file stem."""
    L = rec.n_lines
    t = rec.t[:, None]

    def per_line(fmt_name, arr, comps):
        names, cols = ["t"], [t]
        for i in range(L):
            names += [fmt_name.format(i=i + 1, c=c) for c in comps]
            cols.append(arr[:, i].reshape(rec.t.size, -1))
        return names, np.hstack(cols)

    panels = {
        "state_h": per_line("l{i}_h_{c}", rec.h, XYZ),
        "state_hhat": per_line("l{i}_hhat_{c}", rec.h_hat, XYZ),
        "state_chi": per_line("l{i}_chi_{c}", rec.chi, "ab"),
        "state_chihat": per_line("l{i}_chihat_{c}", rec.chi_hat, "ab"),
        "error_h": per_line("l{i}_err_h_{c}", rec.err_h, XYZ),
        "error_chi": per_line("l{i}_err_chi_{c}", rec.err_chi, "ab"),
        "error_plucker": per_line("l{i}_err_{c}", rec.plucker_error[:, :, None], "L"),
        "velocity_nu": (["t", "nu_x", "nu_y", "nu_z"], np.hstack([t, rec.nu])),
        "velocity_omega": (["t", "om_x", "om_y", "om_z"], np.hstack([t, rec.omega])),
        "sigma_sq": per_line("l{i}_sigma{c}_sq", rec.sigma_sq, "12"),
    }
    return panels


def write_plot_data(rec: RunRecord, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for stem, (header, data) in plot_panels(rec).items():
        p = directory / f"{stem}.csv"
        _write_table(p, header, data)
        paths.append(p)
    return paths


def write_montecarlo(result: dict, config: RunConfig, directory) -> list[Path]:
    """``montecarlo.json`` with the statistics and a per-run ``montecarlo.csv``."""
    directory = Path(directory)
    doc = {k: v for k, v in result.items() if k != "runs"}
    doc["config"] = config.to_dict()
    doc["runs"] = result["runs"]
    paths = [dump_json(doc, directory / "montecarlo.json")]
    p = directory / "montecarlo.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["run", "seed", "max_final_error", "max_convergence_time", "failure"])
        for k, r in enumerate(result["runs"]):
            s = r["summary"]
            if s is None:
                w.writerow([k, r["seed"], "", "", r["failure"]])
                continue
            conv = s["convergence_time"]
            ct = "" if any(c is None for c in conv) else fmt(max(conv))
            w.writerow([k, r["seed"], fmt(max(s["final_plucker_error"])), ct,
                        r["failure"] or ""])
    paths.append(p)
    return paths

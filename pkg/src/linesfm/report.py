"""PNG figures of a run, rendered off-screen with the Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sim import RunRecord  # noqa: E402

XYZ = "xyz"


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _line_label(rec, i, s):
    return f"{s} (line {i + 1})" if rec.n_lines > 1 else s


def plot_state(rec: RunRecord, path) -> Path:
    """True (solid) and estimated (dashed) ``h`` and ``chi``."""
    fig, (ax_h, ax_c) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for i in range(rec.n_lines):
        for k in range(3):
            p = ax_h.plot(rec.t, rec.h[:, i, k], label=_line_label(rec, i, f"h_{XYZ[k]}"))
            ax_h.plot(rec.t, rec.h_hat[:, i, k], "--", color=p[0].get_color())
        for k in range(2):
            p = ax_c.plot(rec.t, rec.chi[:, i, k], label=_line_label(rec, i, f"chi_{'ab'[k]}"))
            ax_c.plot(rec.t, rec.chi_hat[:, i, k], "--", color=p[0].get_color())
    ax_h.set_ylabel("h")
    ax_c.set_ylabel("chi [1/m]")
    ax_c.set_xlabel("t [s]")
    ax_h.legend(fontsize=7, ncol=3)
    ax_c.legend(fontsize=7, ncol=2)
    return _finish(fig, Path(path))


def plot_errors(rec: RunRecord, path) -> Path:
    fig, (ax_h, ax_c, ax_l) = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    for i in range(rec.n_lines):
        for k in range(3):
            ax_h.plot(rec.t, rec.err_h[:, i, k], label=_line_label(rec, i, XYZ[k]))
        for k in range(2):
            ax_c.plot(rec.t, rec.err_chi[:, i, k], label=_line_label(rec, i, "ab"[k]))
        ax_l.semilogy(rec.t, np.maximum(rec.plucker_error[:, i], 1e-16),
                      label=_line_label(rec, i, "|L - L_est|"))
    ax_h.set_ylabel("h error")
    ax_c.set_ylabel("chi error [1/m]")
    ax_l.set_ylabel("Plücker error")
    ax_l.set_xlabel("t [s]")
    for ax in (ax_h, ax_c, ax_l):
        ax.legend(fontsize=7, ncol=3)
    return _finish(fig, Path(path))


def plot_velocities(rec: RunRecord, path) -> Path:
    fig, (ax_v, ax_w) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for k in range(3):
        ax_v.plot(rec.t, rec.nu[:, k], label=f"nu_{XYZ[k]}")
        ax_w.plot(rec.t, rec.omega[:, k], label=f"omega_{XYZ[k]}")
    ax_v.set_ylabel("nu [m/s]")
    ax_w.set_ylabel("omega [rad/s]")
    ax_w.set_xlabel("t [s]")
    ax_v.legend(fontsize=7)
    ax_w.legend(fontsize=7)
    return _finish(fig, Path(path))


def plot_eigenvalues(rec: RunRecord, path, sigma_des_sq=None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for k in range(2):
        p = ax.plot(rec.t, rec.sigma_sq_agg[:, k], label=f"sigma_{k + 1}^2")
        if sigma_des_sq is not None:
            ax.axhline(sigma_des_sq[k], ls=":", color=p[0].get_color())
    ax.set_xlabel("t [s]")
    ax.set_ylabel("eigenvalue [m^2/s^2]")
    ax.legend(fontsize=7)
    return _finish(fig, Path(path))


def render_all(rec: RunRecord, directory, sigma_des_sq=None) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [
        plot_state(rec, directory / "state.png"),
        plot_errors(rec, directory / "errors.png"),
        plot_velocities(rec, directory / "velocities.png"),
        plot_eigenvalues(rec, directory / "eigenvalues.png", sigma_des_sq),
    ]


def plot_montecarlo(result: dict, path) -> Path:
    """Histogram of per-run final errors (worst line of each run)."""
    finals = [max(r["summary"]["final_plucker_error"]) for r in result["runs"]
              if r["failure"] is None]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if finals:
        bins = np.logspace(np.log10(max(min(finals), 1e-16)), np.log10(max(finals) * 1.01 + 1e-16), 20)
        ax.hist(finals, bins=bins)
        ax.set_xscale("log")
    ax.set_xlabel("final Plücker error")
    ax.set_ylabel("runs")
    ax.set_title(f"{len(finals)} of {result['n_runs']} runs completed")
    return _finish(fig, Path(path))

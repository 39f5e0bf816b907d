"""Closed-loop simulation: true line motion, observers, and the active controller.

One loop iteration at time ``t_k``:

1. measure ``h`` of every line (noise-free),
2. eigen-analysis per line and the aggregate over lines,
3. angular velocity from the compensation law, mask unactuated axes,
4. record the sample,
5. observer RK4 step per line with the (optionally noisy) sensed velocity,
6. true-line RK4 step with the commanded velocity,
7. Euler update of the linear velocity.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .control import (
    ControlGains,
    EigenAnalysis,
    aggregate_multiline,
    compensating_angular_velocity,
    eigen_analysis,
    velocity_rate,
)
from .dynamics import line_rates, omega_matrix
from .errors import (
    DegenerateLineError,
    DepthOverflowError,
    EliminationSingularityError,
    LineSfMError,
    ScenarioError,
)
from .geometry import (
    DEPTH_OVERFLOW_TOL,
    Axis,
    HomogeneousLine,
    PluckerLine,
    binormalize,
    chi_full,
    select_axis,
)
from .observer import ObserverGains, gain_matrix, rk4_observer

log = logging.getLogger(__name__)

MAX_DRAWS = 1000
MIN_DEPTH = 0.1        # m; closer lines are rejected at generation
MAX_ABS_HZ = 0.95      # |h_z| above this puts the image line far outside the view


@dataclass(frozen=True)
class Scenario:
    lines: tuple[PluckerLine, ...]
    chi_hat_init: tuple[np.ndarray, ...]
    nu_init: np.ndarray
    observer_gains: ObserverGains
    control_gains: ControlGains
    dt: float
    duration: float
    noise_nu_std: np.ndarray = field(default_factory=lambda: np.zeros(3))
    noise_omega_std: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dof_mask: np.ndarray = field(default_factory=lambda: np.ones(6))
    seed: int = 0
    compensation: str = "estimate"
    multiline_strategy: str = "average"
    convergence_fraction: float = 0.05

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        if not self.lines:
            raise ValueError("a scenario needs at least one line")
        for line in self.lines:
            if not line.is_valid(1e-9):
                raise ValueError("scenario line violates the Plücker constraints")
            if line.closest_point[2] <= 0:
                raise ValueError("scenario line is not in front of the camera")

    @property
    def n_steps(self) -> int:
        # guard against 5.0 / 1e-3 = 4999.999...
        return int(math.floor(self.duration / self.dt + 1e-9))


@dataclass
class RunRecord:
    """Time series of one closed-loop run (``N`` samples, ``L`` lines)."""

    t: np.ndarray              # (N,)
    h: np.ndarray              # (N, L, 3) true moment direction
    h_hat: np.ndarray          # (N, L, 3)
    chi: np.ndarray            # (N, L, 2) true free unknowns
    chi_hat: np.ndarray        # (N, L, 2)
    nu: np.ndarray             # (N, 3) commanded
    omega: np.ndarray          # (N, 3) commanded
    sigma_sq: np.ndarray       # (N, L, 2)
    sigma_sq_agg: np.ndarray   # (N, 2)
    plucker_error: np.ndarray  # (N, L)
    h_dot_norm: np.ndarray     # (N, L) residual |h_dot| of the true lines
    constraint_drift: np.ndarray  # (N, L) max(| |d|-1 |, | |h|-1 |, |d.h|)
    axes: tuple[Axis, ...]
    seed: int
    convergence_fraction: float = 0.05
    aborted: str | None = None

    @property
    def n_lines(self) -> int:
        return self.h.shape[1]

    @property
    def err_h(self) -> np.ndarray:
        return self.h - self.h_hat

    @property
    def err_chi(self) -> np.ndarray:
        return self.chi - self.chi_hat

    @property
    def final_error(self) -> np.ndarray:
        return self.plucker_error[-1].copy()

    @property
    def convergence_time(self) -> np.ndarray:
        """First time the Plücker error drops below the fraction of its initial value.

        ``nan`` for lines that never get there.
        """
        out = np.full(self.n_lines, np.nan)
        for i in range(self.n_lines):
            e = self.plucker_error[:, i]
            hit = np.flatnonzero(e < self.convergence_fraction * e[0])
            if hit.size:
                out[i] = self.t[hit[0]]
        return out

    def summary(self) -> dict:
        conv = self.convergence_time
        return {
            "n_lines": self.n_lines,
            "n_samples": int(self.t.size),
            "final_time": float(self.t[-1]),
            "axes": [a.name for a in self.axes],
            "final_plucker_error": [float(x) for x in self.final_error],
            "initial_plucker_error": [float(x) for x in self.plucker_error[0]],
            "convergence_time": [None if np.isnan(x) else float(x) for x in conv],
            "final_sigma_sq": [float(x) for x in self.sigma_sq_agg[-1]],
            "max_h_dot_norm": [float(x) for x in self.h_dot_norm.max(axis=0)],
            "max_constraint_drift": [float(x) for x in self.constraint_drift.max(axis=0)],
            "aborted": self.aborted,
        }


def _random_line(rng, side, z0):
    half = 0.5 * side
    p = rng.uniform([-half, -half, z0], [half, half, z0 + side])
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    return HomogeneousLine.from_point_direction(p, u)


def draw_line(rng: np.random.Generator, side: float = 3.0, z0: float = 1.0) -> PluckerLine:
    """Line through a uniform point of the cube in front of the camera.

    Draws that pass closer than ``MIN_DEPTH`` to the camera, whose closest
    point is behind the image plane, or whose image lies far outside the
    view are redrawn.
    """
    for _ in range(MAX_DRAWS):
        hl = _random_line(rng, side, z0)
        try:
            line = binormalize(hl)
        except DegenerateLineError:
            continue
        if line.l < MIN_DEPTH or abs(line.h[2]) > MAX_ABS_HZ:
            continue
        if line.closest_point[2] <= 0:
            continue
        return line
    raise ScenarioError(f"no admissible line after {MAX_DRAWS} draws")


def default_nu_init(lines, speed: float) -> np.ndarray:
    """Initial linear velocity along the (sign-aligned) mean moment direction.

    Moving along ``h`` maximises ``|nu . h|`` for a given speed, so the
    excitation is non-zero from the first step.
    """
    ref = lines[0].h
    acc = np.zeros(3)
    for line in lines:
        acc += line.h if line.h @ ref >= 0 else -line.h
    n = np.linalg.norm(acc)
    if n < 1e-9:
        acc, n = ref, 1.0
    return speed * acc / n


def generate_scenario(config: RunConfig) -> Scenario:
    rng = np.random.default_rng(config.seed)
    lines = tuple(draw_line(rng, config.cube_side, config.cube_z0) for _ in range(config.lines))
    lo, hi = config.chi_hat_range
    chi0 = tuple(rng.uniform(lo, hi, size=2) for _ in lines)
    if config.nu_init is None:
        nu0 = default_nu_init(lines, config.nu_init_speed)
    else:
        nu0 = np.asarray(config.nu_init, dtype=float)
    return Scenario(
        lines=lines,
        chi_hat_init=chi0,
        nu_init=nu0,
        observer_gains=ObserverGains(config.alpha, config.d2),
        control_gains=ControlGains(config.k1, config.k2, tuple(config.sigma_des_sq)),
        dt=config.dt,
        duration=config.duration,
        noise_nu_std=np.asarray(config.noise_nu_std, dtype=float),
        noise_omega_std=np.asarray(config.noise_omega_std, dtype=float),
        dof_mask=np.asarray(config.mask, dtype=float),
        seed=config.seed,
        compensation=config.compensation,
        multiline_strategy=config.multiline_strategy,
        convergence_fraction=config.convergence_fraction,
    )


def _rk4_lines(d, h, l, nu, omega, dt):
    def rates(d, h, l):
        dd = np.empty_like(d)
        dh = np.empty_like(h)
        dl = np.empty_like(l)
        for i in range(d.shape[0]):
            dd[i], dh[i], dl[i] = line_rates(d[i], h[i], l[i], nu, omega)
        return dd, dh, dl

    k1 = rates(d, h, l)
    k2 = rates(d + 0.5 * dt * k1[0], h + 0.5 * dt * k1[1], l + 0.5 * dt * k1[2])
    k3 = rates(d + 0.5 * dt * k2[0], h + 0.5 * dt * k2[1], l + 0.5 * dt * k2[2])
    k4 = rates(d + dt * k3[0], h + dt * k3[1], l + dt * k3[2])
    c = dt / 6.0
    return (
        d + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        h + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        l + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
    )


def _estimate_error(d, h, l, h_hat, chi_hat, axis):
    nh = np.linalg.norm(h_hat)
    hn = h_hat / nh
    chi = chi_full(chi_hat, hn, axis)
    nchi = np.linalg.norm(chi)
    if nchi < DEPTH_OVERFLOW_TOL:
        return math.inf
    l_est = 1.0 / nchi
    diff = np.concatenate([d - chi * l_est, l * h - l_est * hn])
    return float(np.linalg.norm(diff))


def run(scenario: Scenario) -> RunRecord:
    """Integrate the closed loop; returns the full time series.

    Numerical failures (elimination singularity, a line reaching the
    optical center) end the run early; the partial record carries the
    reason in ``aborted``.
    """
    sc = scenario
    L = len(sc.lines)
    N = sc.n_steps + 1
    dt = sc.dt
    og, cg = sc.observer_gains, sc.control_gains
    alpha = og.alpha
    mask_nu, mask_om = sc.dof_mask[:3], sc.dof_mask[3:]
    noisy = bool(np.any(sc.noise_nu_std > 0) or np.any(sc.noise_omega_std > 0))
    noise_rng = np.random.default_rng(np.random.SeedSequence([sc.seed, 1]))

    d = np.array([ln.d for ln in sc.lines])
    h = np.array([ln.h for ln in sc.lines])
    l = np.array([ln.l for ln in sc.lines])
    axes = tuple(select_axis(hi) for hi in h)
    h_hat = h.copy()
    chi_hat = np.array(sc.chi_hat_init, dtype=float).reshape(L, 2)
    nu = sc.nu_init * mask_nu

    rec = dict(
        t=np.zeros(N), h=np.zeros((N, L, 3)), h_hat=np.zeros((N, L, 3)),
        chi=np.zeros((N, L, 2)), chi_hat=np.zeros((N, L, 2)),
        nu=np.zeros((N, 3)), omega=np.zeros((N, 3)),
        sigma_sq=np.zeros((N, L, 2)), sigma_sq_agg=np.zeros((N, 2)),
        plucker_error=np.zeros((N, L)), h_dot_norm=np.zeros((N, L)),
        constraint_drift=np.zeros((N, L)),
    )
    prev_vecs: list[np.ndarray | None] = [None] * L
    switched = [False] * L
    aborted = None
    k = 0
    recorded = 0
    try:
        # overflow in a diverging estimate is caught by the finiteness check below
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(N):
                t = k * dt
                # 1-2: measurement and eigen analysis
                analyses: list[EigenAnalysis] = []
                for i in range(L):
                    a = eigen_analysis(h[i], nu, axes[i], prev_vecs[i])
                    prev_vecs[i] = a.eigvecs
                    analyses.append(a)
                    if not switched[i] and select_axis(h[i]) != axes[i]:
                        switched[i] = True
                        log.warning("line %d: largest |h| component moved off axis %s at t=%.3f s",
                                    i, axes[i].name, t)
                agg = aggregate_multiline(analyses)
                # 3: angular velocity
                omega = _compensation(sc, h, nu, chi_hat, d, l, axes) * mask_om
                # 4: record
                rec["t"][k] = t
                rec["nu"][k] = nu
                rec["omega"][k] = omega
                rec["sigma_sq_agg"][k] = agg.sigma_sq
                for i in range(L):
                    chi_true = d[i] / l[i]
                    f0, f1 = axes[i].free
                    rec["h"][k, i] = h[i]
                    rec["h_hat"][k, i] = h_hat[i]
                    rec["chi"][k, i] = (chi_true[f0], chi_true[f1])
                    rec["chi_hat"][k, i] = chi_hat[i]
                    rec["sigma_sq"][k, i] = analyses[i].sigma_sq
                    rec["plucker_error"][k, i] = _estimate_error(d[i], h[i], l[i], h_hat[i],
                                                                 chi_hat[i], axes[i])
                    rec["h_dot_norm"][k, i] = np.linalg.norm(
                        line_rates(d[i], h[i], l[i], nu, omega)[1])
                    rec["constraint_drift"][k, i] = max(abs(np.linalg.norm(d[i]) - 1.0),
                                                        abs(np.linalg.norm(h[i]) - 1.0),
                                                        abs(d[i] @ h[i]))
                recorded = k + 1
                if k == N - 1:
                    break
                # 5: observers, fed the sensed velocity
                nu_s, om_s = nu, omega
                if noisy:
                    nu_s = nu + noise_rng.normal(0.0, 1.0, 3) * sc.noise_nu_std
                    om_s = omega + noise_rng.normal(0.0, 1.0, 3) * sc.noise_omega_std
                for i in range(L):
                    Om = omega_matrix(h[i], nu_s, axes[i])
                    H = gain_matrix(Om, og)
                    h_hat[i], chi_hat[i] = rk4_observer(h_hat[i], chi_hat[i], h[i], nu_s, om_s,
                                                        Om, H, alpha, axes[i], dt)
                # 6: true lines, driven by the commanded velocity
                d, h, l = _rk4_lines(d, h, l, nu, omega, dt)
                if np.any(l <= 0) or not np.all(np.isfinite(l)):
                    raise DegenerateLineError("a line reached the optical center")
                # 7: linear velocity
                nu = (nu + dt * velocity_rate(agg, nu, cg)) * mask_nu
                if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(chi_hat))
                        and np.all(np.isfinite(h_hat))):
                    raise FloatingPointError("state became non-finite")
    except (EliminationSingularityError, DepthOverflowError, DegenerateLineError,
            FloatingPointError) as exc:
        aborted = f"{type(exc).__name__} at t={k * dt:.6g}: {exc}"
        log.error("run aborted: %s", aborted)
        rec = {key: val[:max(1, recorded)] for key, val in rec.items()}
    return RunRecord(**rec, axes=axes, seed=sc.seed,
                     convergence_fraction=sc.convergence_fraction, aborted=aborted)


def _compensation(sc: Scenario, h, nu, chi_hat, d, l, axes) -> np.ndarray:
    """Angular velocity that holds the interpretation planes still.

    ``estimate`` uses the observer output; ``true`` is a diagnostic mode fed
    the true ``chi``; ``none`` disables compensation.  With several lines
    the per-line terms are averaged (or only the first line is used).
    """
    if sc.compensation == "none":
        return np.zeros(3)
    L = h.shape[0]
    terms = []
    for i in range(L):
        if sc.compensation == "true":
            chi = d[i] / l[i]
        else:
            chi = chi_full(chi_hat[i], h[i], axes[i])
        terms.append(compensating_angular_velocity(h[i], nu, chi))
        if sc.multiline_strategy == "first":
            break
    return np.mean(terms, axis=0)


def run_config(config: RunConfig) -> RunRecord:
    return run(generate_scenario(config))


def _run_seed(args):
    config, seed = args
    try:
        rec = run_config(config.replace(seed=seed))
    except LineSfMError as exc:
        return seed, None, f"{type(exc).__name__}: {exc}"
    return seed, rec.summary(), rec.aborted


def run_seeds(config: RunConfig, n_runs: int) -> list[int]:
    """Per-run seeds derived from the master ``config.seed``."""
    ss = np.random.SeedSequence(config.seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(n_runs)]


def monte_carlo(config: RunConfig, n_runs: int | None = None,
                workers: int | None = None) -> dict:
    """Run ``n_runs`` independently seeded scenarios and summarise them.

    Results are reduced in run-index order, so the statistics do not depend
    on ``workers``.
    """
    n_runs = config.runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    workers = config.workers if workers is None else workers
    jobs = [(config, s) for s in run_seeds(config, n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_seed, jobs))
    else:
        results = [_run_seed(j) for j in jobs]

    runs = []
    failures = 0
    for seed, summary, problem in results:
        if summary is None or problem is not None:
            failures += 1
        runs.append({"seed": seed, "summary": summary, "failure": problem})
    ok = [r["summary"] for r in runs if r["failure"] is None]
    final = np.array([max(s["final_plucker_error"]) for s in ok]) if ok else np.array([])
    conv = np.array([np.nan if any(c is None for c in s["convergence_time"])
                     else max(s["convergence_time"]) for s in ok]) if ok else np.array([])
    return {
        "n_runs": n_runs,
        "failures": failures,
        "final_error": _stats(final),
        "convergence_time": _stats(conv),
        "converged_below_0.01": float(np.mean(final < 0.01)) if final.size else 0.0,
        "runs": runs,
    }


def _stats(x: np.ndarray) -> dict:
    x = x[~np.isnan(x)] if x.size else x
    if x.size == 0:
        return {"count": 0, "median": None, "p10": None, "p90": None, "min": None, "max": None}
    return {
        "count": int(x.size),
        "median": float(np.median(x)),
        "p10": float(np.percentile(x, 10)),
        "p90": float(np.percentile(x, 90)),
        "min": float(x.min()),
        "max": float(x.max()),
    }

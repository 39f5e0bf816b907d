"""Active control of the observer convergence rate.

The eigenvalues ``sigma_i^2`` of ``Omega Omega^T`` set how fast the
estimation error decays.  The linear velocity is steered so that they reach
a desired pair, while the angular velocity keeps the interpretation plane
still (``h_dot ~ 0``) so that only ``nu`` moves the eigenvalues.

Since ``Omega = (nu . h) B(h)``, the derivative with respect to ``nu_k`` is::

    d(Omega Omega^T)/d nu_k = 2 (nu . h) h_k B B^T

and the quadratic form ``v_i^T (.) v_i`` is the same for any orthonormal
eigenbasis of a repeated eigenvalue, because every unit vector ``v`` of that
eigenspace gives ``v^T B B^T v = sigma^2 / (nu . h)^2``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import interaction_basis
from .geometry import Axis

log = logging.getLogger(__name__)

PINV_DAMPING = 1e-2


@dataclass(frozen=True)
class EigenAnalysis:
    """Ascending eigenvalues of ``Omega Omega^T`` and their velocity Jacobian.

    ``eigvecs`` columns are the unit eigenvectors; it is ``None`` for an
    aggregate over several lines.
    """

    sigma_sq: np.ndarray
    eigvecs: np.ndarray | None
    J_nu: np.ndarray

    def scaled(self, c: float) -> "EigenAnalysis":
        return EigenAnalysis(c * self.sigma_sq, self.eigvecs, c * self.J_nu)


@dataclass(frozen=True)
class ControlGains:
    k1: float = 1.0
    k2: float = 1.0
    sigma_des_sq: tuple[float, float] = (0.1, 0.2)

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise ValueError("k1 and k2 must be positive")
        if len(self.sigma_des_sq) != 2 or min(self.sigma_des_sq) <= 0:
            raise ValueError("sigma_des_sq must hold two positive values")


def eigen_analysis(h, nu, axis: Axis, previous: np.ndarray | None = None) -> EigenAnalysis:
    """Eigen-decomposition of ``Omega Omega^T`` and the Jacobian ``J_nu`` (2x3).

    Parameters
    ----------
    h : array_like
        Measured unit moment direction.
    nu : array_like
        Camera linear velocity (m/s).
    axis : Axis
        Eliminated coordinate of ``chi``.
    previous : ndarray, optional
        Eigenvectors from the previous control step.  Signs are aligned
        with them, and for a repeated eigenvalue the previous basis is
        projected onto the eigenspace instead of taking LAPACK's choice.
    """
    h = np.asarray(h, dtype=float)
    nu = np.asarray(nu, dtype=float)
    B = interaction_basis(h, axis)
    BBt = B @ B.T
    nh = float(nu @ h)
    OOt = nh * nh * BBt
    w, V = np.linalg.eigh(OOt)
    if previous is not None:
        V = _align(V, w, previous)
    # J[i, k] = v_i^T (2 nh h_k BBt) v_i
    q = np.einsum("ji,jk,ki->i", V, BBt, V)
    J = 2.0 * nh * np.outer(q, h)
    return EigenAnalysis(w, V, J)


def _align(V, w, previous):
    scale = max(abs(w[1]), 1e-300)
    if abs(w[1] - w[0]) <= 1e-12 * scale:
        # repeated eigenvalue: keep the previous basis
        V = previous.copy()
    for i in range(2):
        if V[:, i] @ previous[:, i] < 0:
            V[:, i] = -V[:, i]
    return V


def damped_pinv(J: np.ndarray, damping: float = PINV_DAMPING):
    """Pseudo-inverse of ``J`` with damping on near-null singular values.

    With ``lambda^2 = damping * trace(J J^T)``, singular values ``s >= lambda``
    are inverted exactly and smaller ones get ``s / lambda^2``, which is
    continuous at ``s = lambda`` and bounded by ``1 / lambda``.  Returns
    ``(J_pinv, rank_deficient)``.
    """
    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    lam2 = damping * float(np.sum(s * s))
    if lam2 <= 0.0:
        return np.zeros(J.T.shape), True
    lam = math.sqrt(lam2)
    small = s < lam
    inv = np.where(small, s / lam2, 1.0 / np.where(small, 1.0, s))
    return (Vt.T * inv) @ U.T, bool(small.any())


def velocity_rate(analysis: EigenAnalysis, nu, gains: ControlGains) -> np.ndarray:
    """``nu_dot = k1 J^+ (sigma_des^2 - sigma^2) + k2 (I - J^+ J) nu``."""
    nu = np.asarray(nu, dtype=float)
    J = analysis.J_nu
    Jp, deficient = damped_pinv(J)
    if deficient:
        log.debug("velocity Jacobian is rank deficient; using damped pseudo-inverse")
    err = np.asarray(gains.sigma_des_sq, dtype=float) - analysis.sigma_sq
    null = np.eye(3) - Jp @ J
    return gains.k1 * (Jp @ err) + gains.k2 * (null @ nu)


def velocity_command(analysis: EigenAnalysis, nu, gains: ControlGains, dt: float) -> np.ndarray:
    """One explicit Euler step of :func:`velocity_rate`."""
    nu = np.asarray(nu, dtype=float)
    return nu + dt * velocity_rate(analysis, nu, gains)


def compensating_angular_velocity(h, nu, chi_hat_full) -> np.ndarray:
    """``omega = (nu . h) chi_hat``, which zeroes ``h_dot`` when ``chi_hat = chi``."""
    h = np.asarray(h, dtype=float)
    return float(np.asarray(nu, dtype=float) @ h) * np.asarray(chi_hat_full, dtype=float)


def aggregate_multiline(per_line: list[EigenAnalysis]) -> EigenAnalysis:
    """Mean eigenvalue pair and mean Jacobian over several lines."""
    if not per_line:
        raise ValueError("aggregate_multiline needs at least one analysis")
    if len(per_line) == 1:
        a = per_line[0]
        return EigenAnalysis(a.sigma_sq.copy(), None, a.J_nu.copy())
    sigma = np.mean([a.sigma_sq for a in per_line], axis=0)
    J = np.mean([a.J_nu for a in per_line], axis=0)
    return EigenAnalysis(sigma, None, J)

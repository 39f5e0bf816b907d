"""Nonlinear observer for the reduced line state.

The measured part is ``h``; the unknowns are the two free components of
``chi``.  Innovation ``h - h_hat`` drives both estimates::

    h_hat_dot   = omega x h + Omega^T chi_hat + H (h - h_hat)
    chi_hat_dot = f_u(h, chi_hat, v) + alpha Omega (h - h_hat)

``Omega`` and ``f_u`` are evaluated at the measured ``h``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import CameraVelocity, omega_matrix, unknown_rates
from .geometry import Axis, cross

log = logging.getLogger(__name__)

EXCITATION_TOL = 1e-12


@dataclass(frozen=True)
class ObserverGains:
    alpha: float = 2000.0
    d2_value: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.d2_value > 0:
            raise ValueError(f"d2_value must be positive, got {self.d2_value}")


@dataclass(frozen=True)
class ObserverState:
    """Estimate ``(h_hat, chi_hat)``; ``h_hat`` is not renormalised."""

    h_hat: np.ndarray
    chi_hat: np.ndarray
    axis: Axis

    def __post_init__(self):
        object.__setattr__(self, "h_hat", np.asarray(self.h_hat, dtype=float).reshape(3))
        object.__setattr__(self, "chi_hat", np.asarray(self.chi_hat, dtype=float).reshape(2))
        object.__setattr__(self, "axis", Axis(self.axis))


def gain_matrix(Om: np.ndarray, gains: ObserverGains) -> np.ndarray:
    """Innovation gain ``H = V diag(2 sqrt(alpha) sigma_1, 2 sqrt(alpha) sigma_2, d2) V^T``.

    ``V`` holds the right singular vectors of ``Omega = U S V^T``.  ``H``
    only depends on the right singular subspaces: flipping the sign of a
    column of ``V`` leaves ``V D V^T`` unchanged, and when ``sigma_1 ==
    sigma_2`` the gain restricted to that 2D subspace is a multiple of the
    identity, so any orthonormal basis of it gives the same ``H``.

    With ``sigma_i = 0`` the result is only positive semidefinite.
    """
    _, s, Vt = np.linalg.svd(Om)
    diag = np.array([2.0 * math.sqrt(gains.alpha) * s[0],
                     2.0 * math.sqrt(gains.alpha) * s[1],
                     gains.d2_value])
    if s[-1] <= EXCITATION_TOL:
        log.debug("excitation lost: smallest singular value of Omega is %.3e", s[-1])
    H = (Vt.T * diag) @ Vt
    return 0.5 * (H + H.T)


def _rates(h_hat, chi_hat, h_meas, nu, omega, Om, H, alpha, axis):
    h_err = h_meas - h_hat
    h_hat_dot = cross(omega, h_meas) + Om.T @ chi_hat + H @ h_err
    chi_hat_dot = unknown_rates(h_meas, chi_hat, nu, omega, axis) + alpha * (Om @ h_err)
    return h_hat_dot, chi_hat_dot


def observer_derivative(obs: ObserverState, h_meas, vel: CameraVelocity,
                        gains: ObserverGains):
    """Right-hand side ``(h_hat_dot, chi_hat_dot)`` of the observer."""
    h_meas = np.asarray(h_meas, dtype=float)
    Om = omega_matrix(h_meas, vel.nu, obs.axis)
    H = gain_matrix(Om, gains)
    return _rates(obs.h_hat, obs.chi_hat, h_meas, vel.nu, vel.omega, Om, H,
                  gains.alpha, obs.axis)


def step(obs: ObserverState, h_meas, vel: CameraVelocity, gains: ObserverGains,
         dt: float) -> ObserverState:
    """Advance the observer by one RK4 step with ``h_meas`` and ``vel`` held."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return obs
    h_meas = np.asarray(h_meas, dtype=float)
    Om = omega_matrix(h_meas, vel.nu, obs.axis)
    H = gain_matrix(Om, gains)
    h_hat, chi_hat = rk4_observer(obs.h_hat, obs.chi_hat, h_meas, vel.nu, vel.omega,
                                  Om, H, gains.alpha, obs.axis, dt)
    return replace(obs, h_hat=h_hat, chi_hat=chi_hat)


def rk4_observer(h_hat, chi_hat, h_meas, nu, omega, Om, H, alpha, axis, dt):
    """Array-level RK4 step; ``Om`` and ``H`` are constant over the step."""
    args = (h_meas, nu, omega, Om, H, alpha, axis)
    k1h, k1c = _rates(h_hat, chi_hat, *args)
    k2h, k2c = _rates(h_hat + 0.5 * dt * k1h, chi_hat + 0.5 * dt * k1c, *args)
    k3h, k3c = _rates(h_hat + 0.5 * dt * k2h, chi_hat + 0.5 * dt * k2c, *args)
    k4h, k4c = _rates(h_hat + dt * k3h, chi_hat + dt * k3c, *args)
    h_new = h_hat + (dt / 6.0) * (k1h + 2.0 * k2h + 2.0 * k3h + k4h)
    chi_new = chi_hat + (dt / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
    return h_new, chi_new


def error_block(sigma: float, c: float, alpha: float) -> np.ndarray:
    """Linearised error dynamics along one singular direction.

    State ``(h_err_i, chi_err_i / sqrt(alpha))``; ``c`` is the gain of ``H``
    on that direction.  Eigenvalues are ``-c/2 +- sqrt(c^2/4 - alpha sigma^2)``.
    """
    r = math.sqrt(alpha) * sigma
    return np.array([[-c, r], [-r, 0.0]])

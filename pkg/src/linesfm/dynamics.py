"""Line kinematics under camera motion.

Units: ``nu`` in m/s, ``omega`` in rad/s, ``chi`` in 1/m.  The interaction
matrix ``Omega`` maps ``chi_free`` (1/m) to ``h_dot`` (1/s), so its entries
carry m/s.

Sign convention: lines evolve with ``d_dot = omega x d`` and
``l_dot = nu . (d x h)``, i.e. ``(nu, omega)`` is the twist of the scene
relative to the camera frame.  A camera physically translating by ``+v``
towards a line corresponds to ``nu = -v`` here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Axis,
    PluckerLine,
    ReducedState,
    chi_full,
    cross,
    elimination_matrix,
    skew,
)


@dataclass(frozen=True)
class CameraVelocity:
    """Camera twist ``[nu, omega]`` expressed in the camera frame."""

    nu: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float).reshape(3)
        omega = np.asarray(self.omega, dtype=float).reshape(3)
        if not (np.all(np.isfinite(nu)) and np.all(np.isfinite(omega))):
            raise ValueError("camera velocity must be finite")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def zero(cls) -> "CameraVelocity":
        return cls(np.zeros(3), np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.nu, self.omega])


def line_rates(d, h, l, nu, omega):
    """Array form of :func:`full_dynamics`: returns ``(d_dot, h_dot, l_dot)``."""
    dxh = cross(d, h)
    nh = nu @ h
    d_dot = cross(omega, d)
    h_dot = cross(omega, h) - (nh / l) * dxh
    l_dot = nu @ dxh
    return d_dot, h_dot, float(l_dot)


def full_dynamics(line: PluckerLine, vel: CameraVelocity):
    """Time derivatives ``(d_dot, h_dot, l_dot)`` of a binormalized line."""
    return line_rates(line.d, line.h, line.l, vel.nu, vel.omega)


def chi_dynamics_full(chi, h, vel: CameraVelocity) -> np.ndarray:
    """``chi_dot = omega x chi - chi * nu . (chi x h)`` for the full 3-vector."""
    chi = np.asarray(chi, dtype=float)
    h = np.asarray(h, dtype=float)
    return _chi_rate(chi, h, vel.nu, vel.omega)


def _chi_rate(chi, h, nu, omega):
    return cross(omega, chi) - chi * (nu @ cross(chi, h))


def interaction_basis(h, axis: Axis) -> np.ndarray:
    """Velocity-free factor ``B`` of ``Omega = (nu . h) B`` (2x3).

    ``B = ([h]x E)^T`` with ``E`` the elimination matrix.  For ``axis=Z`` this
    expands to the rows ``[-hx hy/hz, hz + hx^2/hz, -hy]`` and
    ``[-hz - hy^2/hz, hx hy/hz, hx]``.
    """
    h = np.asarray(h, dtype=float)
    E = elimination_matrix(h, axis)
    return (skew(h) @ E).T


def omega_matrix(h, nu, axis: Axis) -> np.ndarray:
    """Interaction matrix ``Omega`` (2x3) of the reduced system.

    It has rank 2 exactly when ``nu . h != 0``.  Raises
    :class:`~linesfm.errors.EliminationSingularityError` when
    ``|h[axis]| < 1e-6``.
    """
    h = np.asarray(h, dtype=float)
    return (np.asarray(nu, dtype=float) @ h) * interaction_basis(h, axis)


def omega_matrix_unreduced(h, nu) -> np.ndarray:
    """``-(nu . h) [h]x``: the 3x3 matrix before coordinate elimination (rank <= 2)."""
    h = np.asarray(h, dtype=float)
    return -(np.asarray(nu, dtype=float) @ h) * skew(h)


def unknown_rates(h, chi_free, nu, omega, axis: Axis) -> np.ndarray:
    """Dynamics of the free components of ``chi`` (the ``f_u`` term).

    Obtained by substituting the elimination identity into the full ``chi``
    dynamics and keeping the two free rows; valid for any axis.
    """
    chi = chi_full(chi_free, h, axis)
    rate = _chi_rate(chi, h, nu, omega)
    i, j = Axis(axis).free
    return np.array([rate[i], rate[j]])


def reduced_dynamics(state: ReducedState, vel: CameraVelocity):
    """``(h_dot, chi_free_dot)`` of the reduced state.

    ``h_dot = omega x h + Omega^T chi_free`` is linear in the unknowns.
    """
    Om = omega_matrix(state.h, vel.nu, state.axis)
    h_dot = cross(vel.omega, state.h) + Om.T @ state.chi_free
    chi_dot = unknown_rates(state.h, state.chi_free, vel.nu, vel.omega, state.axis)
    return h_dot, chi_dot

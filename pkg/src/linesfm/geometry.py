"""Plücker-line representations and the inverse-depth change of variables.

A 3D line not through the camera center is stored in binormalized form
``(d, l, h)``: unit direction ``d``, depth ``l`` (distance of the closest
point to the origin, meters) and unit moment direction ``h``.  ``h`` is the
normal of the interpretation plane and is the only quantity a camera measures.

The estimator works on ``chi = d / l`` (1/m).  Because ``chi . h = 0`` one
component of ``chi`` is redundant; it is expressed through the other two,
using the component of ``h`` with the largest magnitude as denominator.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateLineError,
    DepthOverflowError,
    EliminationSingularityError,
    InvalidLineError,
)

# Library-wide tolerances.
UNIT_TOL = 1e-12          # unit norms / orthogonality at construction
ELIMINATION_TOL = 1e-6    # minimum |h[axis]| for the elimination denominator
DEPTH_OVERFLOW_TOL = 1e-9  # minimum ||chi|| before depth is treated as infinite
ZERO_TOL = 1e-15


class Axis(enum.IntEnum):
    """Coordinate of ``chi`` eliminated through ``chi . h = 0``."""

    X = 0
    Y = 1
    Z = 2

    @property
    def free(self) -> tuple[int, int]:
        """Indices of the two components kept in the reduced state."""
        return _FREE[self]


_FREE = {
    Axis.X: (1, 2),
    Axis.Y: (0, 2),
    Axis.Z: (0, 1),
}


def cross(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (cheaper than ``np.cross`` for one pair)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def skew(v) -> np.ndarray:
    """Matrix ``[v]x`` with ``[v]x @ w == v x w``."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


@dataclass(frozen=True)
class HomogeneousLine:
    """Plücker coordinates ``(u, m)``, defined up to a common scale."""

    u: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(3))
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float).reshape(3))

    @classmethod
    def from_point_direction(cls, p, d) -> "HomogeneousLine":
        return cls(np.asarray(d, dtype=float), moment_from_point(p, d))

    @property
    def klein_residual(self) -> float:
        """``u . m`` normalised by ``|u||m|``; zero for a valid line."""
        nu = np.linalg.norm(self.u)
        nm = np.linalg.norm(self.m)
        if nu == 0.0 or nm == 0.0:
            return 0.0
        return float(self.u @ self.m / (nu * nm))


@dataclass(frozen=True)
class PluckerLine:
    """Binormalized Plücker coordinates ``(d, l, h)``."""

    d: np.ndarray
    l: float
    h: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).reshape(3)
        h = np.asarray(self.h, dtype=float).reshape(3)
        l = float(self.l)
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(h)) and math.isfinite(l)):
            raise InvalidLineError("non-finite line coordinates")
        if not l > 0.0:
            raise InvalidLineError(f"depth must be positive, got {l}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "l", l)

    @property
    def n(self) -> np.ndarray:
        """Euclidean moment ``l * h``."""
        return self.l * self.h

    @property
    def chi(self) -> np.ndarray:
        """Inverse-depth direction ``d / l`` (1/m)."""
        return self.d / self.l

    @property
    def closest_point(self) -> np.ndarray:
        """Point of the line closest to the optical center."""
        return cross(self.d, self.n)

    def as_vector(self) -> np.ndarray:
        """The 6-vector ``[d, l h]`` used for error norms."""
        return np.concatenate([self.d, self.n])

    def is_valid(self, tol: float = UNIT_TOL) -> bool:
        return (
            abs(np.linalg.norm(self.d) - 1.0) <= tol
            and abs(np.linalg.norm(self.h) - 1.0) <= tol
            and abs(self.d @ self.h) <= tol
            and self.l > 0.0
        )


@dataclass(frozen=True)
class ReducedState:
    """Measured ``h`` plus the two free components of ``chi``."""

    h: np.ndarray
    chi_free: np.ndarray
    axis: Axis

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float).reshape(3))
        object.__setattr__(self, "chi_free", np.asarray(self.chi_free, dtype=float).reshape(2))
        object.__setattr__(self, "axis", Axis(self.axis))

    @property
    def chi(self) -> np.ndarray:
        return chi_full(self.chi_free, self.h, self.axis)


def moment_from_point(p, d) -> np.ndarray:
    """Moment ``p x d`` of the line through ``p`` with direction ``d``.

    Its norm is the distance of the line to the origin when ``|d| = 1``.
    A zero moment (line through the origin) is returned as-is.
    """
    return cross(np.asarray(p, dtype=float), np.asarray(d, dtype=float))


def binormalize(line: HomogeneousLine) -> PluckerLine:
    """Convert ``(u, m)`` to ``(d, l, h)``; invariant to positive rescaling."""
    nu = float(np.linalg.norm(line.u))
    if not np.isfinite(nu) or nu <= ZERO_TOL:
        raise InvalidLineError("line direction is zero")
    nm = float(np.linalg.norm(line.m))
    if not np.isfinite(nm):
        raise InvalidLineError("line moment is not finite")
    if nm <= ZERO_TOL * nu:
        raise DegenerateLineError("line passes through the optical center")
    d = line.u / nu
    h = line.m / nm
    # Strip the residual Klein-quadric error so that d . h = 0 to roundoff.
    h = h - (h @ d) * d
    h = h / np.linalg.norm(h)
    return PluckerLine(d, nm / nu, h)


def select_axis(h) -> Axis:
    """Axis of the largest ``|h|`` component (ties resolved toward Z)."""
    a = np.abs(np.asarray(h, dtype=float))
    # argmax returns the first maximum; scan from Z so ties favour Z.
    return Axis(2 - int(np.argmax(a[::-1])))


def elimination_matrix(h, axis: Axis) -> np.ndarray:
    """3x2 matrix ``E`` with ``chi = E @ chi_free`` on the plane ``chi . h = 0``."""
    axis = Axis(axis)
    ha = h[axis]
    if abs(ha) < ELIMINATION_TOL:
        raise EliminationSingularityError(
            f"|h[{axis.name}]| = {abs(ha):.3e} below {ELIMINATION_TOL:g}")
    i, j = axis.free
    E = np.zeros((3, 2))
    E[i, 0] = 1.0
    E[j, 1] = 1.0
    E[axis, 0] = -h[i] / ha
    E[axis, 1] = -h[j] / ha
    return E


def chi_full(chi_free, h, axis: Axis) -> np.ndarray:
    """Rebuild the 3-vector ``chi`` from its free components."""
    axis = Axis(axis)
    ha = h[axis]
    if abs(ha) < ELIMINATION_TOL:
        raise EliminationSingularityError(
            f"|h[{axis.name}]| = {abs(ha):.3e} below {ELIMINATION_TOL:g}")
    i, j = axis.free
    chi = np.empty(3)
    chi[i] = chi_free[0]
    chi[j] = chi_free[1]
    chi[axis] = -(chi_free[0] * h[i] + chi_free[1] * h[j]) / ha
    return chi


def reduce(line: PluckerLine, axis: Axis | None = None) -> ReducedState:
    """Change of variables ``chi = d / l`` followed by coordinate elimination.

    ``axis`` defaults to the largest component of ``line.h``; pass it
    explicitly to keep the choice made at initialization.
    """
    if axis is None:
        axis = select_axis(line.h)
    axis = Axis(axis)
    assert np.max(np.abs(line.h)) > 1e-9, "unit moment direction has no component"
    chi = line.d / line.l
    i, j = axis.free
    return ReducedState(line.h, np.array([chi[i], chi[j]]), axis)


def recover(state: ReducedState) -> PluckerLine:
    """Inverse of :func:`reduce`.

    The eliminated coordinate is rebuilt from ``chi . h = 0``, so the output
    direction is orthogonal to ``h`` by construction.

    Raises
    ------
    EliminationSingularityError
        If ``|h[axis]| < 1e-6``.
    DepthOverflowError
        If ``|chi| < 1e-9`` (the line is at infinity).
    """
    chi = chi_full(state.chi_free, state.h, state.axis)
    nchi = float(np.linalg.norm(chi))
    if nchi < DEPTH_OVERFLOW_TOL:
        raise DepthOverflowError(f"|chi| = {nchi:.3e}: line at infinity")
    return PluckerLine(chi / nchi, 1.0 / nchi, state.h)


def project(line: PluckerLine) -> np.ndarray:
    """Image of the line: the unit normal of its interpretation plane."""
    return line.h.copy()


def plucker_error(true: PluckerLine, estimate: PluckerLine) -> float:
    """``|| [d, l h] - [d_est, l_est h_est] ||``."""
    return float(np.linalg.norm(true.as_vector() - estimate.as_vector()))

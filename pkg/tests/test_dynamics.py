import numpy as np
import pytest
import sympy as sp

from conftest import random_line, random_unit
from linesfm.dynamics import (
    CameraVelocity,
    chi_dynamics_full,
    full_dynamics,
    interaction_basis,
    line_rates,
    omega_matrix,
    omega_matrix_unreduced,
    reduced_dynamics,
    unknown_rates,
)
from linesfm.errors import EliminationSingularityError
from linesfm.geometry import Axis, PluckerLine, ReducedState, reduce, select_axis


def random_velocity(rng, scale=1.0):
    return CameraVelocity(rng.normal(size=3) * scale, rng.normal(size=3) * scale)


def test_stationary_camera():
    line = PluckerLine([1, 0, 0], 2.0, [0, 0, 1])
    d_dot, h_dot, l_dot = full_dynamics(line, CameraVelocity.zero())
    assert not d_dot.any() and not h_dot.any() and l_dot == 0


def test_h_dot_against_symbolic_cross_product():
    d = sp.Matrix([1, 0, 0])
    h = sp.Matrix([0, 0, 1])
    nu = sp.Matrix([0, 0, 1])
    l = 1
    expected = -(nu.dot(h) / l) * d.cross(h)
    _, h_dot, _ = full_dynamics(PluckerLine([1, 0, 0], 1.0, [0, 0, 1]),
                                CameraVelocity([0, 0, 1], [0, 0, 0]))
    np.testing.assert_array_equal(h_dot, np.array(expected, dtype=float).ravel())
    np.testing.assert_array_equal(h_dot, [0, 1, 0])


def test_constraint_rates_vanish(rng):
    """Finite differences of the constraints along the flow are zero."""
    eps = 1e-6
    for _ in range(200):
        line = random_line(rng)
        v = random_velocity(rng)
        dd, dh, dl = full_dynamics(line, v)

        def constraints(s):
            d = line.d + s * dd
            h = line.h + s * dh
            return np.array([d @ h, d @ d, h @ h])

        rate = (constraints(eps) - constraints(-eps)) / (2 * eps)
        np.testing.assert_allclose(rate, 0, atol=1e-8)


def test_chi_dynamics_pure_rotation(rng):
    chi = rng.normal(size=3)
    w = rng.normal(size=3)
    np.testing.assert_allclose(
        chi_dynamics_full(chi, random_unit(rng), CameraVelocity([0, 0, 0], w)),
        np.cross(w, chi))


def test_chi_dynamics_at_infinity(rng):
    out = chi_dynamics_full(np.zeros(3), random_unit(rng), random_velocity(rng))
    np.testing.assert_array_equal(out, 0)


def test_chi_dynamics_matches_quotient_rule(rng):
    for _ in range(500):
        line = random_line(rng)
        v = random_velocity(rng)
        dd, _, dl = full_dynamics(line, v)
        expected = dd / line.l - line.d * dl / line.l ** 2
        np.testing.assert_allclose(chi_dynamics_full(line.chi, line.h, v), expected,
                                   rtol=1e-10, atol=1e-12)


def test_reduced_dynamics_zero_velocity(rng):
    s = reduce(random_line(rng))
    h_dot, chi_dot = reduced_dynamics(s, CameraVelocity.zero())
    assert not h_dot.any() and not chi_dot.any()


@pytest.mark.parametrize("axis", [None, *Axis])
def test_reduced_dynamics_consistent_with_full(rng, axis):
    """(h_dot, chi_free_dot) equals the full flow pushed through reduce()."""
    eps = 1e-6
    checked = 0
    while checked < 300:
        line = random_line(rng)
        if axis is not None and abs(line.h[axis]) < 0.2:
            continue
        checked += 1
        v = random_velocity(rng)
        state = reduce(line, axis)
        dd, dh, dl = full_dynamics(line, v)

        def chi_free(s):
            d = line.d + s * dd
            l = line.l + s * dl
            chi = d / l
            i, j = state.axis.free
            return np.array([chi[i], chi[j]])

        fd = (chi_free(eps) - chi_free(-eps)) / (2 * eps)
        h_dot, chi_dot = reduced_dynamics(state, v)
        np.testing.assert_allclose(h_dot, dh, atol=1e-10)
        np.testing.assert_allclose(chi_dot, fd, rtol=1e-6, atol=1e-6)


def test_compensation_cancels_h_dot(rng):
    for _ in range(500):
        line = random_line(rng)
        nu = rng.normal(size=3)
        omega = (nu @ line.h) * line.chi
        h_dot, _ = reduced_dynamics(reduce(line), CameraVelocity(nu, omega))
        np.testing.assert_allclose(h_dot, 0, atol=1e-14)


def test_h_dot_linear_in_unknowns(rng):
    for _ in range(200):
        h = random_unit(rng)
        axis = select_axis(h)
        v = random_velocity(rng)
        chi = rng.normal(size=2)
        h1, _ = reduced_dynamics(ReducedState(h, chi, axis), v)
        h0, _ = reduced_dynamics(ReducedState(h, [0, 0], axis), v)
        np.testing.assert_allclose(h1 - h0, omega_matrix(h, v.nu, axis).T @ chi, atol=1e-12)


def test_omega_matrix_examples():
    np.testing.assert_array_equal(omega_matrix([0, 0, 1], [0, 0, 1], Axis.Z),
                                  [[0, 1, 0], [-1, 0, 0]])
    np.testing.assert_array_equal(omega_matrix([0, 0, 1], [1, 0, 0], Axis.Z), np.zeros((2, 3)))


def test_omega_matrix_z_axis_closed_form(rng):
    for _ in range(200):
        h = random_unit(rng)
        if abs(h[2]) < 0.1:
            continue
        nu = rng.normal(size=3)
        hx, hy, hz = h
        B = np.array([[-hx * hy / hz, hz + hx ** 2 / hz, -hy],
                      [-hz - hy ** 2 / hz, hx * hy / hz, hx]])
        np.testing.assert_allclose(omega_matrix(h, nu, Axis.Z), (nu @ h) * B, atol=1e-12)


def test_omega_eigenvalues_factor(rng):
    for _ in range(300):
        h = random_unit(rng)
        axis = select_axis(h)
        nu = rng.normal(size=3)
        Om = omega_matrix(h, nu, axis)
        B = interaction_basis(h, axis)
        np.testing.assert_allclose(np.linalg.eigvalsh(Om @ Om.T),
                                   (nu @ h) ** 2 * np.linalg.eigvalsh(B @ B.T),
                                   rtol=1e-10, atol=1e-14)


def test_omega_matrix_singular_axis():
    with pytest.raises(EliminationSingularityError):
        omega_matrix([1, 0, 0], [1, 0, 0], Axis.Z)


def test_unreduced_omega_rank_at_most_two(rng):
    for _ in range(1000):
        M = omega_matrix_unreduced(random_unit(rng), rng.normal(size=3))
        assert np.linalg.matrix_rank(M) <= 2


def test_unknown_rates_first_row_matches_expanded_z_form(rng):
    """Expanded chi_x dynamics for the Z elimination, term by term."""
    for _ in range(200):
        h = random_unit(rng)
        if abs(h[2]) < 0.2:
            continue
        hx, hy, hz = h
        cx, cy = rng.normal(size=2)
        nu = rng.normal(size=3)
        w = rng.normal(size=3)
        s = (hx * cx + hy * cy) / hz
        expected = (-w[2] * cy - w[1] * s
                    - nu[0] * (hz * cx * cy + hy * cx * s)
                    + nu[1] * (hz * cx ** 2 + hx * cx * s)
                    - nu[2] * (hy * cx ** 2 - hx * cy * cx))
        got = unknown_rates(h, [cx, cy], nu, w, Axis.Z)[0]
        assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_rk4_step_conserves_constraints(rng):
    dt = 1e-3
    for _ in range(200):
        line = random_line(rng)
        v = random_velocity(rng)
        d, h, l = line.d, line.h, line.l

        def f(d, h, l):
            return line_rates(d, h, l, v.nu, v.omega)

        k1 = f(d, h, l)
        k2 = f(d + dt / 2 * k1[0], h + dt / 2 * k1[1], l + dt / 2 * k1[2])
        k3 = f(d + dt / 2 * k2[0], h + dt / 2 * k2[1], l + dt / 2 * k2[2])
        k4 = f(d + dt * k3[0], h + dt * k3[1], l + dt * k3[2])
        d1 = d + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        h1 = h + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        assert abs(np.linalg.norm(d1) - 1) < 1e-10
        assert abs(np.linalg.norm(h1) - 1) < 1e-10
        assert abs(d1 @ h1) < 1e-10

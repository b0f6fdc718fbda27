"""P1 finite-element pieces: element formulas, assembly, inner solve."""

import numpy as np
import pytest

from tvinpaint.core import (
    DamagedRegion,
    NodalFunction,
    ObservedSignal,
    WeightField,
    build_mesh,
    resample_signal,
)
from tvinpaint.energy import element_gradients
from tvinpaint.fem import (
    fem_assemble,
    fem_element_load,
    fem_element_matrix,
    fem_solve_step,
)
from tvinpaint.linsolve import DenseSystem, SingularSystemError, dense_solve

from oracles import fem_dense_oracle

GAUSS2 = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))


def quad_element_matrix(w, lt, h):
    """2-pt Gauss integration of w phi_i' phi_j' + lt phi_i phi_j on (0, h)."""
    out = np.zeros((2, 2))
    for gp in GAUSS2:
        x = 0.5 * h + 0.5 * h * gp
        vals = np.array([(h - x) / h, x / h])
        ders = np.array([-1.0 / h, 1.0 / h])
        out += 0.5 * h * (w * np.outer(ders, ders) + lt * np.outer(vals, vals))
    return out


def test_element_matrix_pure_stiffness():
    np.testing.assert_array_equal(
        fem_element_matrix(1.0, 0.0, 1.0), [[1.0, -1.0], [-1.0, 1.0]])


def test_element_matrix_mass_part():
    # vanishing weight isolates the mass block lt * h * [[1/3,1/6],[1/6,1/3]]
    got = fem_element_matrix(1e-13, 3.0, 1.0)
    np.testing.assert_allclose(got, [[1.0, 0.5], [0.5, 1.0]], atol=1e-12)


def test_element_matrix_mixed_case():
    got = fem_element_matrix(2.0, 6.0, 0.5)
    np.testing.assert_allclose(got, [[5.0, -3.5], [-3.5, 5.0]], atol=1e-14)
    np.testing.assert_allclose(got, quad_element_matrix(2.0, 6.0, 0.5), atol=1e-12)


def test_element_matrix_matches_quadrature_randomized():
    rng = np.random.default_rng(2)
    for _ in range(50):
        w = float(rng.uniform(0.01, 10.0))
        lt = float(rng.uniform(0.0, 100.0))
        h = float(rng.uniform(0.001, 1.0))
        np.testing.assert_allclose(
            fem_element_matrix(w, lt, h), quad_element_matrix(w, lt, h),
            rtol=1e-12, atol=1e-14)


def test_element_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        fem_element_matrix(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        fem_element_matrix(1.0, 1.0, 0.0)


def test_element_matrix_spd_and_constant_annihilation():
    rng = np.random.default_rng(4)
    for _ in range(30):
        w = float(rng.uniform(0.01, 5.0))
        lt = float(rng.uniform(0.0, 50.0))
        h = float(rng.uniform(0.01, 1.0))
        a = fem_element_matrix(w, lt, h)
        eig = np.linalg.eigvalsh(a)
        assert eig.min() >= -1e-13
        if lt > 0:
            assert eig.min() > 0
    # with lt = 0 the row sums vanish exactly
    a = fem_element_matrix(2.5, 0.0, 0.25)
    np.testing.assert_array_equal(a @ np.ones(2), np.zeros(2))


def test_element_load_cases():
    np.testing.assert_array_equal(fem_element_load(2.0, 3.0, 1.0), [3.0, 3.0])
    np.testing.assert_array_equal(fem_element_load(0.0, 7.0, 0.5), [0.0, 0.0])
    np.testing.assert_allclose(fem_element_load(100.0, 1.0, 1.0 / 300.0),
                               [1.0 / 6.0, 1.0 / 6.0], rtol=1e-15)


def test_element_load_matches_quadrature():
    w_unused, lt, g, h = 0.0, 100.0, 1.0, 1.0 / 300.0
    load = np.zeros(2)
    for gp in GAUSS2:
        x = 0.5 * h + 0.5 * h * gp
        load += 0.5 * h * lt * g * np.array([(h - x) / h, x / h])
    np.testing.assert_allclose(fem_element_load(lt, g, h), load, rtol=1e-13)


def test_assemble_single_damaged_element_flagged():
    mesh = build_mesh(1)
    w = WeightField.constant(1.0, 1)
    signal = ObservedSignal(g_elem=np.array([2.0]), observed=np.array([False]),
                            lam=0.5, lambda_tilde=np.array([0.0]))
    system = fem_assemble(mesh, w, signal)
    np.testing.assert_array_equal(system.to_dense(), [[1.0, -1.0], [-1.0, 1.0]])
    np.testing.assert_array_equal(system.rhs, [0.0, 0.0])
    assert system.flagged_singular
    with pytest.raises(SingularSystemError):
        fem_solve_step(mesh, w, signal)


def test_assemble_two_elements_by_hand():
    mesh = build_mesh(2)
    w = WeightField(w_elem=np.array([1.0, 1.0]))
    signal = ObservedSignal.from_mask([0.0, 0.0], [True, True], 1.0)
    system = fem_assemble(mesh, w, signal)
    h = 0.5
    elem = fem_element_matrix(1.0, 1.0, h)
    expected = np.zeros((3, 3))
    expected[0:2, 0:2] += elem
    expected[1:3, 1:3] += elem
    np.testing.assert_allclose(system.to_dense(), expected, atol=1e-15)


def test_assemble_matches_dense_scatter_oracle():
    rng = np.random.default_rng(8)
    for _ in range(30):
        n = int(rng.integers(1, 25))
        mesh = build_mesh(n)
        w = WeightField(w_elem=rng.uniform(0.05, 5.0, n))
        observed = rng.random(n) < 0.7
        if not observed.any():
            observed[0] = True
        signal = ObservedSignal.from_mask(rng.normal(size=n), observed,
                                          float(rng.uniform(0.001, 1.0)))
        system = fem_assemble(mesh, w, signal)
        a_ref, b_ref = fem_dense_oracle(mesh, w.w_elem, signal.lambda_tilde,
                                        signal.g_elem)
        np.testing.assert_allclose(system.to_dense(), a_ref, rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(system.rhs, b_ref, rtol=1e-14, atol=1e-14)
        np.testing.assert_array_equal(system.sub, system.super)


def test_solve_constant_datum_reproduced():
    mesh = build_mesh(9)
    w = WeightField.constant(1.0, 9)
    signal = resample_signal([4.2] * 9, mesh, DamagedRegion.empty(), 0.05)
    u = fem_solve_step(mesh, w, signal)
    np.testing.assert_allclose(u.values, 4.2, rtol=1e-12)


def test_solve_matches_dense_oracle_small():
    mesh = build_mesh(2)
    w = WeightField(w_elem=np.array([2.0, 0.5]))
    signal = ObservedSignal.from_mask([1.0, -1.0], [True, True], 0.2)
    u = fem_solve_step(mesh, w, signal)
    a_ref, b_ref = fem_dense_oracle(mesh, w.w_elem, signal.lambda_tilde, signal.g_elem)
    x_ref = dense_solve(DenseSystem(matrix=a_ref, rhs=b_ref))
    np.testing.assert_allclose(u.values, x_ref, rtol=1e-12)


def test_solve_step_damaged_middle_monotone():
    # step datum with the middle third missing: reconstruction bridges
    # monotonically between the plateaus (discrete maximum principle)
    n = 30
    mesh = build_mesh(n)
    x = np.arange(n) / (n - 1)
    samples = np.where(x < 0.5, 0.0, 1.0)
    signal = resample_signal(samples, mesh, DamagedRegion(intervals=((1/3, 2/3),)),
                             lam=0.01)
    u = fem_solve_step(mesh, WeightField.constant(1.0, n), signal)
    assert u.values.min() >= -1e-10 and u.values.max() <= 1.0 + 1e-10
    diffs = np.diff(u.values)
    assert (diffs >= -1e-10).all()


def test_solution_satisfies_weak_form():
    # residual of the weak form against every nodal hat function,
    # evaluated independently of the assembly path
    rng = np.random.default_rng(12)
    n = 23
    mesh = build_mesh(n)
    w = WeightField(w_elem=rng.uniform(0.1, 3.0, n))
    observed = rng.random(n) < 0.8
    if not observed.any():
        observed[0] = True
    signal = ObservedSignal.from_mask(rng.normal(size=n), observed, 0.05)
    u = fem_solve_step(mesh, w, signal)
    h = mesh.h
    slopes = element_gradients(u, mesh)
    scale = np.abs(u.values).max() + 1.0
    for i in range(n + 1):
        residual = 0.0
        for m, vprime in ((i - 1, 1.0 / h), (i, -1.0 / h)):
            if not (0 <= m < n):
                continue
            residual += w.w_elem[m] * slopes[m] * vprime * h
            # mass term against the hat: quadratic integrand, 2-pt Gauss exact
            for gp in GAUSS2:
                x = mesh.nodes[m] + 0.5 * h + 0.5 * h * gp
                uval = u.values[m] + slopes[m] * (x - mesh.nodes[m])
                hat = (x - mesh.nodes[m]) / h if m == i - 1 else (mesh.nodes[m + 1] - x) / h
                residual += 0.5 * h * signal.lambda_tilde[m] * (
                    uval - signal.g_elem[m]) * hat
        assert abs(residual) <= 1e-9 * scale


def test_joint_scaling_invariance():
    # scaling w -> c w and lambda_tilde -> c lambda_tilde (lam -> lam/c)
    # leaves the minimizer unchanged
    rng = np.random.default_rng(14)
    n = 40
    mesh = build_mesh(n)
    w = WeightField(w_elem=rng.uniform(0.2, 2.0, n))
    observed = rng.random(n) < 0.75
    observed[0] = True
    g = rng.normal(size=n)
    c = 7.3
    u1 = fem_solve_step(mesh, w, ObservedSignal.from_mask(g, observed, 0.1))
    u2 = fem_solve_step(mesh, WeightField(w_elem=c * w.w_elem),
                        ObservedSignal.from_mask(g, observed, 0.1 / c))
    np.testing.assert_allclose(u1.values, u2.values, atol=1e-9)

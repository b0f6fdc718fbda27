"""Continuous P1 finite-element discretization of the weighted inner problem.

One inner step solves, for a frozen gradient weight w,

    integral( w u' v' + lambda_tilde (u - g) v ) = 0   for all P1 test v,

with natural (do nothing) Neumann boundaries.  The assembled operator is
symmetric tridiagonal on the N+1 nodal unknowns.
"""

from __future__ import annotations

import numpy as np

from .core import Mesh, NodalFunction, ObservedSignal, WeightField
from .linsolve import SingularSystemError, TridiagonalSystem, thomas_solve

# Relative residual bound asserted after every inner solve.
SOLVE_RTOL = 1e-10


def fem_element_matrix(w_m: float, lt_m: float, h: float) -> np.ndarray:
    """2x2 element matrix: weighted stiffness plus lambda_tilde-scaled mass.

    A_m = (w/h) [[1, -1], [-1, 1]] + lt * h [[1/3, 1/6], [1/6, 1/3]]
    """
    if h <= 0:
        raise ValueError("element size must be positive")
    if w_m <= 0:
        raise ValueError("weight must be positive")
    if lt_m < 0:
        raise ValueError("lambda_tilde must be nonnegative")
    stiff = (w_m / h) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    mass = (lt_m * h) * np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])
    return stiff + mass


def fem_element_load(lt_m: float, g_m: float, h: float) -> np.ndarray:
    """Element load vector b_m = lt * g * [h/2, h/2]."""
    if h <= 0:
        raise ValueError("element size must be positive")
    return lt_m * g_m * np.array([h / 2.0, h / 2.0])


def fem_assemble(mesh: Mesh, w: WeightField, signal: ObservedSignal) -> TridiagonalSystem:
    """Scatter element matrices and loads into the global tridiagonal system.

    No boundary rows are modified (natural Neumann conditions).  When the
    data term vanishes identically the pure-stiffness operator is rank
    deficient; the returned system carries ``flagged_singular`` so the
    solve step can refuse it with a clear diagnostic.
    """
    n = mesh.n_elements
    if w.n_elements != n or signal.n_elements != n:
        raise ValueError("field lengths inconsistent with mesh")
    h = mesh.h
    wv = w.w_elem
    lt = signal.lambda_tilde
    a11 = wv / h + lt * h / 3.0          # element (1,1) and (2,2) diagonal entry
    a12 = -wv / h + lt * h / 6.0         # element off-diagonal entry
    diag = np.zeros(n + 1)
    diag[:-1] += a11
    diag[1:] += a11
    off = a12.copy()
    rhs = np.zeros(n + 1)
    load = lt * signal.g_elem * h / 2.0
    rhs[:-1] += load
    rhs[1:] += load
    singular = not (lt > 0).any()
    return TridiagonalSystem(sub=off, diag=diag, super=off.copy(), rhs=rhs,
                             flagged_singular=singular)


def fem_solve_step(mesh: Mesh, w: WeightField, signal: ObservedSignal) -> NodalFunction:
    """One inner solve; raises SingularSystemError when no element carries data."""
    system = fem_assemble(mesh, w, signal)
    if system.flagged_singular:
        raise SingularSystemError(
            "inner problem is singular: every element is damaged, the "
            "pure Neumann stiffness operator has the constants in its kernel"
        )
    values = thomas_solve(system)
    scale = (np.abs(system.diag).max() + np.abs(system.sub).max()) * np.abs(values).max() \
        + np.abs(system.rhs).max()
    res = np.abs(system.matvec(values) - system.rhs).max()
    assert res <= SOLVE_RTOL * scale + 1e-300, "FEM solve residual out of contract"
    return NodalFunction(values=values)

"""Interior-penalty discontinuous Galerkin discretization of the inner problem.

The broken P1 space carries two coefficients per element.  Interface
coupling comes from three node terms,

    -{w u'}[v]  -  beta {w v'}[u]  +  (alpha/h) [u][v],

with [v] = v(x-) - v(x+) and {f} the two-sided average.  beta = +1 makes
the form symmetric; beta = -1 gives the skew variant whose consistency
terms cancel in the energy.  All face and boundary matrices are produced
by evaluating these node terms on basis trace pairs, not from transcribed
closed forms; docs/ERRATA.md records the transcription pitfalls that
motivated this choice together with the derived closed forms.

Boundary nodes use the one-sided extensions [v(x_0)] = -v(x_0+),
{v(x_0)} = v(x_0+) (mirrored at x_N).  In "neumann" mode every boundary
face term is dropped; "weak-dirichlet" keeps them and prescribes the end
datum from the adjacent observed element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BrokenFunction, Mesh, ObservedSignal, SolveParams, WeightField
from .fem import fem_element_matrix
from .linsolve import BlockTridiagonalSystem, SingularSystemError, block_thomas_solve

SOLVE_RTOL = 1e-10

# Default penalty rule: scales with the largest gradient weight so the
# symmetric form stays coercive while reweighting grows w toward 1/epsilon.
PENALTY_FACTOR = 10.0

# Basis traces at a shared node, rows ordered (left phi1, left phi2,
# right phi1, right phi2); columns (value-, value+, h*deriv-, h*deriv+).
_NODE_TRACES = np.array(
    [
        [0.0, 0.0, -1.0, 0.0],
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, -1.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


@dataclass(frozen=True)
class FaceMatrices:
    """Interface blocks at one interior node.

    Scatter targets: B into the right element's diagonal block, C into the
    left element's, D couples right-element trial with left-element test
    (upper off-diagonal), E the reverse (lower off-diagonal).
    """

    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray


def jump_and_average(v_left, v_right, node_kind: str):
    """Jump and average of a two-sided trace pair.

    Interior nodes use [v] = v- - v+ and {v} = (v- + v+)/2; the domain
    endpoints use the one-sided extensions.
    """
    if node_kind == "interior":
        return v_left - v_right, 0.5 * (v_left + v_right)
    if node_kind == "left-end":
        return -v_right, v_right
    if node_kind == "right-end":
        return v_left, v_left
    raise ValueError(f"unknown node kind {node_kind!r}")


def dg_volume_matrix(w_n: float, lt_n: float, h: float) -> np.ndarray:
    """Element matrix of the broken form; identical to the P1 element matrix."""
    return fem_element_matrix(w_n, lt_n, h)


def _node_blocks(w_left, w_right, alpha, beta, h):
    """Evaluate the three node terms on all 16 basis trace pairs.

    w_left / w_right may be arrays (one entry per interior node); returns
    the (..., 4, 4) array T with T[..., i, j] = node_term(trial_j, test_i),
    rows/columns ordered (left phi1, left phi2, right phi1, right phi2).
    """
    w_left = np.asarray(w_left, dtype=float)
    w_right = np.asarray(w_right, dtype=float)
    jump = _NODE_TRACES[:, 0] - _NODE_TRACES[:, 1]
    # {w f'} per basis function: one-sided derivatives weighted by the
    # adjacent element weights.
    wavg = 0.5 * (
        w_left[..., None] * _NODE_TRACES[:, 2] / h
        + w_right[..., None] * _NODE_TRACES[:, 3] / h
    )
    t = (
        -wavg[..., None, :] * jump[:, None]
        - beta * wavg[..., :, None] * jump[None, :]
        + (alpha / h) * jump[:, None] * jump[None, :]
    )
    return t


def dg_face_matrices(w_left: float, w_right: float, alpha: float, beta: float,
                     h: float) -> FaceMatrices:
    """Interface blocks at one interior node, derived from the node terms.

    w_left and w_right are the weight traces w(x-) and w(x+), i.e. the
    adjacent element weights.
    """
    if h <= 0:
        raise ValueError("element size must be positive")
    if w_left < 0 or w_right < 0:
        raise ValueError("weight traces must be nonnegative")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    t = _node_blocks(float(w_left), float(w_right), alpha, beta, h)
    return FaceMatrices(B=t[2:4, 2:4], C=t[0:2, 0:2], D=t[0:2, 2:4], E=t[2:4, 0:2])


def dg_boundary_matrices(w_end: float, alpha: float, beta: float, h: float,
                         boundary_mode: str, side: str, datum: float = 0.0):
    """Boundary block and load contribution at a domain endpoint.

    "neumann" drops every boundary face term (zero matrix and load).
    "weak-dirichlet" evaluates the node terms with the one-sided jump and
    average extensions and moves the datum-carrying terms to the load.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if boundary_mode == "neumann":
        return np.zeros((2, 2)), np.zeros(2)
    if boundary_mode != "weak-dirichlet":
        raise ValueError(f"unknown boundary mode {boundary_mode!r}")
    val = np.array([1.0, 0.0]) if side == "left" else np.array([0.0, 1.0])
    der = np.array([-1.0, 1.0]) / h
    sign = -1.0 if side == "left" else 1.0   # one-sided jump extension [f] = sign * f
    jump = sign * val
    wder = w_end * der
    f = (
        -wder[None, :] * jump[:, None]
        - beta * wder[:, None] * jump[None, :]
        + (alpha / h) * jump[:, None] * jump[None, :]
    )
    # Datum terms of the linear form: the symmetrization and penalty terms
    # evaluated with the prescribed boundary value.
    rhs = datum * (-beta * wder * sign + (alpha / h) * val)
    return f, rhs


def _boundary_datum(signal: ObservedSignal, side: str) -> float:
    idx = 0 if side == "left" else signal.n_elements - 1
    if not signal.observed[idx]:
        raise ValueError(
            f"weak-dirichlet boundary needs an observed end element, but the "
            f"{side} end element is damaged"
        )
    return float(signal.g_elem[idx])


def resolve_alpha(params: SolveParams, w: WeightField) -> float:
    """Penalty actually used by a solve: explicit alpha, or the default rule."""
    if params.alpha is not None:
        return params.alpha
    return PENALTY_FACTOR * float(np.max(w.w_elem))


def dg_assemble(mesh: Mesh, w: WeightField, signal: ObservedSignal,
                params: SolveParams) -> BlockTridiagonalSystem:
    """Assemble the 2N x 2N block-tridiagonal system."""
    n = mesh.n_elements
    if w.n_elements != n or signal.n_elements != n:
        raise ValueError("field lengths inconsistent with mesh")
    h = mesh.h
    wv = w.w_elem
    lt = signal.lambda_tilde
    alpha = resolve_alpha(params, w)
    beta = params.beta

    main = np.zeros((n, 2, 2))
    # Volume contributions, vectorized over elements.
    main[:, 0, 0] = main[:, 1, 1] = wv / h + lt * h / 3.0
    main[:, 0, 1] = main[:, 1, 0] = -wv / h + lt * h / 6.0

    lower = np.zeros((max(n - 1, 0), 2, 2))
    upper = np.zeros((max(n - 1, 0), 2, 2))
    if n > 1:
        t = _node_blocks(wv[:-1], wv[1:], alpha, beta, h)
        main[:-1] += t[:, 0:2, 0:2]   # C at each node goes to the left element
        main[1:] += t[:, 2:4, 2:4]    # B to the right element
        upper += t[:, 0:2, 2:4]       # D couples right trial with left test
        lower += t[:, 2:4, 0:2]       # E the reverse

    rhs = np.repeat(lt * signal.g_elem * h / 2.0, 2)

    if params.boundary_mode == "weak-dirichlet":
        f0, r0 = dg_boundary_matrices(wv[0], alpha, beta, h, params.boundary_mode,
                                      "left", _boundary_datum(signal, "left"))
        fn, rn = dg_boundary_matrices(wv[-1], alpha, beta, h, params.boundary_mode,
                                      "right", _boundary_datum(signal, "right"))
        main[0] += f0
        main[-1] += fn
        rhs[0:2] += r0
        rhs[-2:] += rn

    singular = params.boundary_mode == "neumann" and not (lt > 0).any()
    return BlockTridiagonalSystem(lower=lower, main=main, upper=upper, rhs=rhs,
                                  flagged_singular=singular)


def dg_solve_step(mesh: Mesh, w: WeightField, signal: ObservedSignal,
                  params: SolveParams) -> BrokenFunction:
    """One inner solve on the broken space."""
    system = dg_assemble(mesh, w, signal, params)
    if system.flagged_singular:
        raise SingularSystemError(
            "inner problem is singular: every element is damaged and no "
            "boundary data anchors the broken operator"
        )
    try:
        coeffs = block_thomas_solve(system)
    except SingularSystemError as exc:
        raise SingularSystemError(
            f"block elimination degenerated at element {exc.index} "
            f"(node x_{exc.index})", index=exc.index
        ) from exc
    row_sums = np.abs(system.main).sum(axis=2)
    if mesh.n_elements > 1:
        row_sums[1:] += np.abs(system.lower).sum(axis=2)
        row_sums[:-1] += np.abs(system.upper).sum(axis=2)
    scale = row_sums.max()
    res = np.abs(system.matvec(coeffs) - system.rhs).max()
    bound = SOLVE_RTOL * (scale * np.abs(coeffs).max(initial=0.0)
                          + np.abs(system.rhs).max(initial=0.0))
    assert res <= bound + 1e-300, "DG solve residual out of contract"
    return BrokenFunction(coeffs=coeffs)

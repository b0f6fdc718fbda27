"""Direct solvers for the band structures produced by the 1-D assemblies.

Thomas elimination for scalar tridiagonal systems, block-Thomas for
2x2-block tridiagonal systems, and a dense partial-pivoting oracle used
by the test suite.  No pivoting is performed inside the band solvers:
the assembled systems are positive definite for valid inputs, so a
degenerate pivot indicates an assembly bug and is reported, not repaired.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Scaled pivot threshold below which elimination is considered degenerate.
PIVOT_RTOL = 1e-14

# Largest dense system the oracle accepts; it exists for tests only.
DENSE_N_MAX = 64


class SingularSystemError(Exception):
    """Raised when elimination hits a degenerate pivot.

    Attributes
    ----------
    index : int or None
        Row (scalar solver) or block (block solver) where elimination
        degenerated, when applicable.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class TridiagonalSystem:
    """Symmetric-storage tridiagonal system A x = rhs.

    sub, diag, super have lengths n-1, n, n-1.  ``flagged_singular`` is
    set by the assembler when the operator is known to be rank deficient
    (pure Neumann stiffness with no data term); the solver refuses such
    systems up front instead of failing mid-elimination.
    """

    sub: np.ndarray
    diag: np.ndarray
    super: np.ndarray
    rhs: np.ndarray
    flagged_singular: bool = False

    def __post_init__(self):
        n = len(self.diag)
        if len(self.sub) != n - 1 or len(self.super) != n - 1 or len(self.rhs) != n:
            raise ValueError("inconsistent tridiagonal band lengths")

    @property
    def n(self) -> int:
        return len(self.diag)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.super * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    def to_dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        a += np.diag(self.sub, -1)
        a += np.diag(self.super, 1)
        return a


@dataclass(frozen=True)
class BlockTridiagonalSystem:
    """2x2-block tridiagonal system with unknowns ordered elementwise.

    ``main`` holds N diagonal blocks, ``lower``/``upper`` the N-1 off
    diagonals; ``rhs`` has length 2N ordered (b1_0, b2_0, ..., b1_{N-1},
    b2_{N-1}), matching the unknown ordering of broken P1 coefficients.
    """

    lower: np.ndarray
    main: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray
    flagged_singular: bool = False

    def __post_init__(self):
        nb = self.main.shape[0]
        if self.main.shape[1:] != (2, 2):
            raise ValueError("main blocks must be 2x2")
        if self.lower.shape != (nb - 1, 2, 2) or self.upper.shape != (nb - 1, 2, 2):
            raise ValueError("inconsistent block counts")
        if self.rhs.shape != (2 * nb,):
            raise ValueError("rhs length must be 2N")

    @property
    def n_blocks(self) -> int:
        return self.main.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        nb = self.n_blocks
        xb = x.reshape(nb, 2)
        y = np.einsum("nij,nj->ni", self.main, xb)
        y[:-1] += np.einsum("nij,nj->ni", self.upper, xb[1:])
        y[1:] += np.einsum("nij,nj->ni", self.lower, xb[:-1])
        return y.reshape(-1)

    def to_dense(self) -> np.ndarray:
        nb = self.n_blocks
        a = np.zeros((2 * nb, 2 * nb))
        for i in range(nb):
            a[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = self.main[i]
            if i < nb - 1:
                a[2 * i : 2 * i + 2, 2 * i + 2 : 2 * i + 4] = self.upper[i]
                a[2 * i + 2 : 2 * i + 4, 2 * i : 2 * i + 2] = self.lower[i]
        return a


@dataclass(frozen=True)
class DenseSystem:
    """Small dense system for the test oracle; capped at n = 64."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        if m.shape[0] > DENSE_N_MAX:
            raise ValueError(f"dense oracle capped at n={DENSE_N_MAX}")
        if len(self.rhs) != m.shape[0]:
            raise ValueError("rhs length must match matrix")


def _check_residual(matvec, x, rhs, norm_a, rtol):
    scale = norm_a * np.abs(x).max(initial=0.0) + np.abs(rhs).max(initial=0.0)
    res = np.abs(matvec(x) - rhs).max(initial=0.0)
    assert res <= rtol * scale + 1e-300, (
        f"solver residual {res:.3e} exceeds {rtol:.1e} * scale {scale:.3e}"
    )


def thomas_solve(sys: TridiagonalSystem) -> np.ndarray:
    """Solve a tridiagonal system by Thomas forward elimination.

    Raises SingularSystemError with the offending row index when a
    scaled pivot falls below PIVOT_RTOL.
    """
    if sys.flagged_singular:
        raise SingularSystemError("system flagged singular at assembly")
    n = sys.n
    diag = sys.diag
    sub = sys.sub
    sup = sys.super
    d = np.empty(n)
    y = np.empty(n)
    d[0] = diag[0]
    y[0] = sys.rhs[0]
    row_scale = np.abs(diag) + np.concatenate(([0.0], np.abs(sub))) + np.concatenate(
        (np.abs(sup), [0.0])
    )
    for i in range(1, n):
        piv = d[i - 1]
        if abs(piv) < PIVOT_RTOL * max(row_scale[i - 1], 1e-300):
            raise SingularSystemError(
                f"zero pivot in row {i - 1} during forward elimination", index=i - 1
            )
        l = sub[i - 1] / piv
        d[i] = diag[i] - l * sup[i - 1]
        y[i] = sys.rhs[i] - l * y[i - 1]
    if abs(d[n - 1]) < PIVOT_RTOL * max(row_scale[n - 1], 1e-300):
        raise SingularSystemError(f"zero pivot in row {n - 1}", index=n - 1)
    x = np.empty(n)
    x[n - 1] = y[n - 1] / d[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (y[i] - sup[i] * x[i + 1]) / d[i]
    _check_residual(sys.matvec, x, sys.rhs, row_scale.max(), 1e-12)
    return x


def _inv2(block: np.ndarray, index: int) -> np.ndarray:
    """Adjugate inverse of a 2x2 block with a scaled determinant check."""
    det = block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0]
    scale = np.abs(block).max()
    if abs(det) < PIVOT_RTOL * max(scale * scale, 1e-300):
        raise SingularSystemError(
            f"singular 2x2 pivot block at block index {index}", index=index
        )
    return np.array(
        [[block[1, 1], -block[0, 1]], [-block[1, 0], block[0, 0]]]
    ) / det


def block_thomas_solve(sys: BlockTridiagonalSystem) -> np.ndarray:
    """Solve a 2x2-block tridiagonal system by block forward elimination."""
    if sys.flagged_singular:
        raise SingularSystemError("system flagged singular at assembly")
    nb = sys.n_blocks
    rhs = sys.rhs.reshape(nb, 2)
    gam = np.empty((nb - 1, 2, 2)) if nb > 1 else np.empty((0, 2, 2))
    y = np.empty((nb, 2))
    dcur = sys.main[0]
    bcur = rhs[0]
    for i in range(nb):
        inv = _inv2(dcur, i)
        y[i] = inv @ bcur
        if i < nb - 1:
            gam[i] = inv @ sys.upper[i]
            dcur = sys.main[i + 1] - sys.lower[i] @ gam[i]
            bcur = rhs[i + 1] - sys.lower[i] @ y[i]
    x = np.empty((nb, 2))
    x[nb - 1] = y[nb - 1]
    for i in range(nb - 2, -1, -1):
        x[i] = y[i] - gam[i] @ x[i + 1]
    x = x.reshape(-1)
    row_sums = np.abs(sys.main).sum(axis=2)
    if nb > 1:
        row_sums[1:] += np.abs(sys.lower).sum(axis=2)
        row_sums[:-1] += np.abs(sys.upper).sum(axis=2)
    _check_residual(sys.matvec, x, sys.rhs, row_sums.max(), 1e-12)
    return x


def dense_solve(sys: DenseSystem) -> np.ndarray:
    """Partial-pivoting dense solve (LAPACK); the testing oracle."""
    a = np.asarray(sys.matrix, dtype=float)
    b = np.asarray(sys.rhs, dtype=float)
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"singular dense matrix: {exc}") from exc
    norm_a = np.abs(a).sum(axis=1).max()
    scale = norm_a * np.abs(x).max(initial=0.0) + np.abs(b).max(initial=0.0)
    res = np.abs(a @ x - b).max(initial=0.0)
    if res > 1e-12 * scale:
        raise SingularSystemError(
            f"dense solve residual {res:.3e} exceeds tolerance, matrix near singular"
        )
    return x

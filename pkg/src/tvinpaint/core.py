"""Shared domain types: mesh, damage mask, observed datum, solver parameters.

Everything here is immutable after construction; instances can be shared
freely across concurrent solver runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Absolute tolerance for mesh uniformity checks.
MESH_ATOL = 1e-12


@dataclass(frozen=True)
class Mesh:
    """Uniform partition of [0, 1] into ``n_elements`` intervals."""

    n_elements: int
    nodes: np.ndarray
    h: float

    def __post_init__(self):
        if len(self.nodes) != self.n_elements + 1:
            raise ValueError("node count must be n_elements + 1")
        if self.nodes[0] != 0.0 or self.nodes[-1] != 1.0:
            raise ValueError("mesh must span [0, 1] exactly")
        widths = np.diff(self.nodes)
        if (widths <= 0).any():
            raise ValueError("nodes must be strictly increasing")
        if np.abs(widths - self.h).max() > MESH_ATOL:
            raise ValueError("elements must have equal size h")
        if abs(self.n_elements * self.h - 1.0) > MESH_ATOL:
            raise ValueError("N * h must equal 1")

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])


@dataclass(frozen=True)
class DamagedRegion:
    """Disjoint open subintervals of (0, 1) where the datum is missing."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        for a, b in ivs:
            if not (0.0 <= a < b <= 1.0):
                raise ValueError(f"interval ({a}, {b}) must satisfy 0 <= a < b <= 1")
        ordered = sorted(ivs)
        for (a0, b0), (a1, b1) in zip(ordered, ordered[1:]):
            if a1 < b0:
                raise ValueError(f"intervals ({a0}, {b0}) and ({a1}, {b1}) overlap")
        if sum(b - a for a, b in ivs) >= 1.0:
            raise ValueError("damaged region must leave positive observed measure")

    @classmethod
    def empty(cls) -> "DamagedRegion":
        return cls(intervals=())

    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, x: float) -> bool:
        return any(a < x < b for a, b in self.intervals)


@dataclass(frozen=True)
class ObservedSignal:
    """Per-element constant datum with the observed/damaged mask baked in.

    ``lambda_tilde`` is 1/lam on observed elements and exactly 0 on
    damaged ones, so damaged data never enters a load vector.
    """

    g_elem: np.ndarray
    observed: np.ndarray
    lam: float
    lambda_tilde: np.ndarray

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("regularization parameter must be positive")
        n = len(self.g_elem)
        if len(self.observed) != n or len(self.lambda_tilde) != n:
            raise ValueError("per-element field lengths disagree")
        expected = np.where(self.observed, 1.0 / self.lam, 0.0)
        if not np.array_equal(self.lambda_tilde, expected):
            raise ValueError("lambda_tilde must equal observed / lam exactly")

    @property
    def n_elements(self) -> int:
        return len(self.g_elem)

    @classmethod
    def from_mask(cls, g_elem, observed, lam) -> "ObservedSignal":
        g_elem = np.asarray(g_elem, dtype=float)
        observed = np.asarray(observed, dtype=bool)
        return cls(
            g_elem=g_elem,
            observed=observed,
            lam=float(lam),
            lambda_tilde=np.where(observed, 1.0 / float(lam), 0.0),
        )


@dataclass(frozen=True)
class SolveParams:
    """Knobs shared by both inner solvers and the outer loop.

    epsilon     clamp bound for the gradient weight, w in [epsilon, 1/epsilon]
    alpha       jump penalty coefficient; None picks 10 * max(w) per solve
    beta        symmetrization sign of the interface terms; +1 is the
                symmetric method, -1 the skew variant
    tau         relaxation exponent for the weight update, in (0, 1]
    n_max       outer iteration cap
    rel_tol     optional relative iterate-change stopping tolerance
    boundary_mode  "neumann" (drop boundary face terms) or "weak-dirichlet"
    """

    epsilon: float = 0.1
    alpha: float | None = None
    beta: float = 1.0
    tau: float = 1.0
    n_max: int = 20
    rel_tol: float | None = 1e-8
    boundary_mode: str = "neumann"

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must be in (0, 1]")
        if self.alpha is not None and self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must be in (0, 1]")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if self.rel_tol is not None and self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive when set")
        if self.boundary_mode not in ("neumann", "weak-dirichlet"):
            raise ValueError("boundary_mode must be 'neumann' or 'weak-dirichlet'")


@dataclass(frozen=True)
class WeightField:
    """Per-element gradient weight."""

    w_elem: np.ndarray

    def __post_init__(self):
        if (np.asarray(self.w_elem) <= 0).any():
            raise ValueError("weights must be positive")

    @property
    def n_elements(self) -> int:
        return len(self.w_elem)

    @classmethod
    def constant(cls, value: float, n_elements: int) -> "WeightField":
        return cls(w_elem=np.full(n_elements, float(value)))


@dataclass(frozen=True)
class NodalFunction:
    """Continuous piecewise-linear function given by its nodal values."""

    values: np.ndarray

    @property
    def n_elements(self) -> int:
        return len(self.values) - 1

    def element_endpoint_values(self):
        """(left, right) values of the restriction to each element."""
        return self.values[:-1], self.values[1:]


@dataclass(frozen=True)
class BrokenFunction:
    """Discontinuous piecewise-linear function, two coefficients per element.

    Coefficient ordering is (a1_0, a2_0, a1_1, a2_1, ...): a1 is the value
    at the element's left endpoint, a2 at its right endpoint.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        if len(self.coeffs) % 2 != 0 or len(self.coeffs) == 0:
            raise ValueError("broken function needs exactly 2 coefficients per element")

    @property
    def n_elements(self) -> int:
        return len(self.coeffs) // 2

    def element_endpoint_values(self):
        return self.coeffs[0::2], self.coeffs[1::2]

    def interior_jumps(self) -> np.ndarray:
        """[u] = u(x_n^-) - u(x_n^+) at the N-1 interior nodes."""
        left, right = self.element_endpoint_values()
        return right[:-1] - left[1:]


def build_mesh(n_elements: int) -> Mesh:
    """Uniform mesh on [0, 1] with h = 1/N."""
    if n_elements < 1:
        raise ValueError("n_elements must be a positive integer")
    n = int(n_elements)
    nodes = np.linspace(0.0, 1.0, n + 1)
    return Mesh(n_elements=n, nodes=nodes, h=1.0 / n)


def rasterize_mask(region: DamagedRegion, mesh: Mesh) -> np.ndarray:
    """Observed flag per element; an element is damaged iff its midpoint
    lies inside some damage interval."""
    mids = mesh.midpoints
    damaged = np.zeros(mesh.n_elements, dtype=bool)
    for a, b in region.intervals:
        damaged |= (mids > a) & (mids < b)
    if damaged.all():
        raise ValueError("damage covers every element; nothing observed")
    return ~damaged


def resample_signal(samples, mesh: Mesh, region: DamagedRegion, lam: float) -> ObservedSignal:
    """Bin uniformly spaced samples to per-element means.

    Samples are read as values at abscissae i/(K-1) on [0, 1] (a single
    sample sits at 0.5).  Every element must receive at least one sample.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    k = samples.size
    if k == 1:
        x = np.array([0.5])
    else:
        x = np.arange(k) / (k - 1)
    idx = np.minimum((x * mesh.n_elements).astype(int), mesh.n_elements - 1)
    g = np.zeros(mesh.n_elements)
    counts = np.bincount(idx, minlength=mesh.n_elements)
    if (counts == 0).any():
        empty = int(np.argmax(counts == 0))
        raise ValueError(
            f"element {empty} receives no sample; supply at least one sample "
            f"per element (got {k} samples for {mesh.n_elements} elements)"
        )
    np.add.at(g, idx, samples)
    g /= counts
    observed = rasterize_mask(region, mesh)
    return ObservedSignal.from_mask(g, observed, lam)

"""Outer alternating-minimization loop and experiment-level comparisons.

One outer iteration freezes the gradient weight, solves the linear inner
problem (FEM or DG), then refreshes the weight from the new gradients via
the clamped (optionally relaxed) update.  The loop is deterministic: a
given RunConfig always reproduces the same trace bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    BrokenFunction,
    DamagedRegion,
    Mesh,
    NodalFunction,
    ObservedSignal,
    SolveParams,
    WeightField,
    build_mesh,
    resample_signal,
)
from .dg import dg_solve_step
from .energy import element_gradients, tv_energy, update_weight_relaxed
from .fem import fem_solve_step
from .linsolve import SingularSystemError

BACKENDS = ("fem", "dg")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one alternating run."""

    backend: str
    n_elements: int
    samples: tuple
    damage: DamagedRegion
    lam: float
    params: SolveParams
    initial_iterate: float = 0.0
    initial_weight: float = 1.0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.n_elements < 1:
            raise ValueError("n_elements must be positive")
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if not (self.params.epsilon <= self.initial_weight
                <= 1.0 / self.params.epsilon):
            raise ValueError("initial weight must lie inside the clamp box")
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))


@dataclass(frozen=True)
class IterationRecord:
    """Energies and diagnostics after one completed outer iteration."""

    n: int
    total_J: float
    surrogate: float
    fidelity: float
    tv: float
    iterate_change: float
    weight_min: float
    weight_max: float


@dataclass(frozen=True)
class IterationTrace:
    """Per-iteration records plus the final state of a run."""

    records: tuple
    final_u: NodalFunction | BrokenFunction
    final_w: WeightField
    n_iterations: int
    converged: bool


@dataclass(frozen=True)
class BackendComparison:
    """Paired FEM/DG runs on identical data with reconstruction metrics."""

    fem_trace: IterationTrace
    dg_trace: IterationTrace
    fem_l2_error: float
    dg_l2_error: float
    fem_max_increment: float
    dg_max_jump: float
    true_jump: float


def _l2_norm(left: np.ndarray, right: np.ndarray, h: float) -> float:
    """Exact L2 norm of a piecewise-linear function given endpoint values."""
    return float(np.sqrt(np.sum(h / 3.0 * (left * left + left * right + right * right))))


def _zero_iterate(backend: str, n: int, value: float):
    if backend == "fem":
        return NodalFunction(values=np.full(n + 1, value))
    return BrokenFunction(coeffs=np.full(2 * n, value))


def prepare_problem(config: RunConfig):
    """Mesh and observed signal for a run (shared by both backends)."""
    mesh = build_mesh(config.n_elements)
    signal = resample_signal(config.samples, mesh, config.damage, config.lam)
    return mesh, signal


def run_alternating(config: RunConfig) -> IterationTrace:
    """Execute the outer loop until n_max or the relative-change tolerance."""
    mesh, signal = prepare_problem(config)
    params = config.params
    w = WeightField.constant(config.initial_weight, mesh.n_elements)
    u = _zero_iterate(config.backend, mesh.n_elements, config.initial_iterate)
    solve = fem_solve_step if config.backend == "fem" else dg_solve_step

    records = []
    converged = False
    for n in range(1, params.n_max + 1):
        try:
            if config.backend == "fem":
                u_next = solve(mesh, w, signal)
            else:
                u_next = solve(mesh, w, signal, params)
        except SingularSystemError as exc:
            raise SingularSystemError(
                f"inner solve failed at outer iteration {n}: {exc}",
                index=exc.index,
            ) from exc
        grads = element_gradients(u_next, mesh)
        w_next = update_weight_relaxed(grads, params.epsilon, params.tau)

        report = tv_energy(u_next, mesh, signal, w=w_next)
        dl = u_next.element_endpoint_values()[0] - u.element_endpoint_values()[0]
        dr = u_next.element_endpoint_values()[1] - u.element_endpoint_values()[1]
        change = _l2_norm(dl, dr, mesh.h)
        records.append(
            IterationRecord(
                n=n,
                total_J=report.total_J,
                surrogate=report.surrogate,
                fidelity=report.fidelity,
                tv=report.tv,
                iterate_change=change,
                weight_min=float(np.min(w_next.w_elem)),
                weight_max=float(np.max(w_next.w_elem)),
            )
        )
        u, w = u_next, w_next
        if params.rel_tol is not None:
            norm = _l2_norm(*u.element_endpoint_values(), mesh.h)
            if change <= params.rel_tol * norm:
                converged = True
                break

    return IterationTrace(
        records=tuple(records),
        final_u=u,
        final_w=w,
        n_iterations=len(records),
        converged=converged,
    )


def iterations_to_converge(trace: IterationTrace, rel: float = 0.01) -> int:
    """First iteration whose energy is within ``rel`` of the final energy."""
    if not trace.records:
        raise ValueError("trace has no records")
    if not (0.0 < rel < 1.0):
        raise ValueError("rel must be in (0, 1)")
    final = trace.records[-1].total_J
    for rec in trace.records:
        if rec.total_J <= (1.0 + rel) * final:
            return rec.n
    return trace.records[-1].n


def reconstruction_midpoints(u, mesh: Mesh) -> np.ndarray:
    """Reconstruction sampled at element midpoints."""
    left, right = u.element_endpoint_values()
    return 0.5 * (left + right)


def l2_error_to_truth(u, mesh: Mesh, truth_elem: np.ndarray) -> float:
    """Discrete L2 distance to a per-element ground truth at midpoints."""
    diff = reconstruction_midpoints(u, mesh) - truth_elem
    return float(np.sqrt(mesh.h * np.sum(diff * diff)))


def max_recovered_jump(u, mesh: Mesh) -> float:
    """Largest single-node discontinuity (DG) or single-element increment (FEM)."""
    if isinstance(u, BrokenFunction):
        jumps = u.interior_jumps()
        return float(np.max(np.abs(jumps))) if jumps.size else 0.0
    return float(np.max(np.abs(np.diff(u.values))))


def compare_backends(config: RunConfig) -> BackendComparison:
    """Run both backends on identical data and compare reconstructions.

    The ground truth is the undamaged per-element datum; the true jump is
    its largest single-step increment.
    """
    mesh = build_mesh(config.n_elements)
    truth = resample_signal(config.samples, mesh, DamagedRegion.empty(),
                            config.lam).g_elem
    fem_trace = run_alternating(replace(config, backend="fem"))
    dg_trace = run_alternating(replace(config, backend="dg"))
    true_jump = float(np.max(np.abs(np.diff(truth)))) if len(truth) > 1 else 0.0
    return BackendComparison(
        fem_trace=fem_trace,
        dg_trace=dg_trace,
        fem_l2_error=l2_error_to_truth(fem_trace.final_u, mesh, truth),
        dg_l2_error=l2_error_to_truth(dg_trace.final_u, mesh, truth),
        fem_max_increment=max_recovered_jump(fem_trace.final_u, mesh),
        dg_max_jump=max_recovered_jump(dg_trace.final_u, mesh),
        true_jump=true_jump,
    )

"""Left-point Euler integration of flows driven by rough paths, with tangents.

The state update over one cell is

    x_{k+1} = x_k + sum_gamma U_gamma(x_k) (B_gamma(t_{k+1}) - B_gamma(t_k)),

which is the Young/left-point scheme; it converges for Hurst index > 1/2.
The tangent (Jacobian of the flow map with respect to the initial point)
satisfies the linearised recursion with the gradient of the fields frozen at
the pre-update state:

    J_{k+1} = J_k + sum_gamma W_gamma(x_k) J_k dB_gamma,      J_0 = I.

Both recursions are advanced jointly in one pass, and the per-step algebra
is vectorised over an arbitrary batch of initial points, which is what the
manifold pipeline feeds in.  ``refinement`` consumes sub-resolution
increments of the same path realisation (the path must have been sampled
with a compatible ``refinement``), so convergence studies compare schemes on
one fixed driver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fbm import FbmPath
from .fields import VectorFieldSet
from .grid import TimeGrid

__all__ = [
    "FlowStepError",
    "FlowTrajectory",
    "TangentTrajectory",
    "estimate_convergence_order",
    "integrate_flow",
    "integrate_flow_with_tangent",
    "integrate_tangent",
]


class FlowStepError(RuntimeError):
    """Integration aborted (bad inputs or non-finite state)."""


@dataclass(frozen=True)
class FlowTrajectory:
    """States of the Euler flow; ``states[k]`` is x at node k.

    Shapes: (steps + 1, dim) for a single initial point, or
    (steps + 1, batch, dim) for a batch.
    """

    grid: TimeGrid
    initial: np.ndarray
    states: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class TangentTrajectory:
    """Jacobians of the flow map along a trajectory, J_0 = identity.

    Shapes mirror :class:`FlowTrajectory`: (steps + 1, dim, dim) or
    (steps + 1, batch, dim, dim).  ``vectors`` is J_k v0 when an initial
    vector was supplied.
    """

    grid: TimeGrid
    jacobians: np.ndarray
    vectors: np.ndarray | None = None

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def final(self) -> np.ndarray:
        return self.jacobians[-1]


def _resolve_increments(path: FbmPath, refinement: int) -> tuple[TimeGrid, np.ndarray]:
    if not isinstance(refinement, (int, np.integer)) or refinement < 1:
        raise FlowStepError(f"refinement must be a positive integer, got {refinement!r}")
    refinement = int(refinement)
    if path.refinement % refinement != 0:
        raise FlowStepError(
            f"path stores refinement {path.refinement}, which {refinement} does not divide"
        )
    grid = path.grid.refined(refinement)
    return grid, path.increments(stride=refinement)


def _euler_core(
    fields: VectorFieldSet,
    increments: np.ndarray,
    x0: np.ndarray,
    want_tangent: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    steps = increments.shape[0]
    x = np.array(x0, dtype=float)
    states = np.empty((steps + 1,) + x.shape)
    states[0] = x
    jac = None
    jacs = None
    if want_tangent:
        jac = np.zeros(x.shape + (fields.dim,))
        jac[..., np.arange(fields.dim), np.arange(fields.dim)] = 1.0
        jacs = np.empty((steps + 1,) + jac.shape)
        jacs[0] = jac
    for k in range(steps):
        db = increments[k]  # (channels,)
        u = fields.evaluate(x)  # (channels, ..., dim)
        if want_tangent:
            w = fields.jacobian(x)  # (channels, ..., dim, dim)
            jac = jac + np.einsum("g,g...ij,...jl->...il", db, w, jac)
            jacs[k + 1] = jac
        x = x + np.einsum("g,g...i->...i", db, u)
        if not np.all(np.isfinite(x)):
            raise FlowStepError(f"non-finite state at step {k + 1} of {steps}")
        states[k + 1] = x
    return states, jacs


def _check_flow_inputs(fields: VectorFieldSet, path: FbmPath, x0) -> np.ndarray:
    if path.hurst <= 0.5:
        raise FlowStepError(
            f"flow integration requires Hurst index > 1/2, path has H = {path.hurst}"
        )
    if fields.channels != path.channels:
        raise FlowStepError(
            f"field has {fields.channels} channels but path has {path.channels}"
        )
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim not in (1, 2) or x0.shape[-1] != fields.dim:
        raise FlowStepError(
            f"initial point must have shape ({fields.dim},) or (batch, {fields.dim}); "
            f"got {x0.shape}"
        )
    if not np.all(np.isfinite(x0)):
        raise FlowStepError("initial point must be finite")
    return x0


def integrate_flow(
    fields: VectorFieldSet,
    path: FbmPath,
    x0,
    refinement: int = 1,
) -> FlowTrajectory:
    """Euler flow of ``fields`` along ``path`` from ``x0`` (point or batch)."""
    x0 = _check_flow_inputs(fields, path, x0)
    grid, increments = _resolve_increments(path, refinement)
    states, _ = _euler_core(fields, increments, x0, want_tangent=False)
    return FlowTrajectory(grid=grid, initial=x0, states=states)


def integrate_flow_with_tangent(
    fields: VectorFieldSet,
    path: FbmPath,
    x0,
    refinement: int = 1,
    v0=None,
) -> tuple[FlowTrajectory, TangentTrajectory]:
    """Flow and Jacobian in one pass; the cheap way to get both."""
    x0 = _check_flow_inputs(fields, path, x0)
    grid, increments = _resolve_increments(path, refinement)
    states, jacs = _euler_core(fields, increments, x0, want_tangent=True)
    vectors = None
    if v0 is not None:
        v0 = np.asarray(v0, dtype=float)
        if v0.shape[-1] != fields.dim:
            raise FlowStepError(f"initial vector dimension {v0.shape} != {fields.dim}")
        vectors = np.einsum("t...ij,...j->t...i", jacs, v0)
    traj = FlowTrajectory(grid=grid, initial=x0, states=states)
    tangent = TangentTrajectory(grid=grid, jacobians=jacs, vectors=vectors)
    return traj, tangent


def integrate_tangent(
    fields: VectorFieldSet,
    path: FbmPath,
    trajectory: FlowTrajectory,
    v0=None,
) -> TangentTrajectory:
    """Tangent along an existing trajectory (recomputed jointly and cross-checked).

    The joint pass reproduces the flow states bit for bit; a mismatch means
    ``trajectory`` was not produced by this path/field combination.
    """
    refinement = trajectory.grid.steps // path.grid.steps
    if trajectory.grid.steps != path.grid.steps * max(refinement, 1):
        raise FlowStepError("trajectory grid is not a refinement of the path grid")
    traj2, tangent = integrate_flow_with_tangent(
        fields, path, trajectory.initial, refinement=refinement, v0=v0
    )
    if not np.array_equal(traj2.states, trajectory.states):
        raise FlowStepError(
            "trajectory states do not match a recomputation from this path and field"
        )
    return tangent


def estimate_convergence_order(errors: np.ndarray) -> np.ndarray:
    """log2 error ratios for a sequence computed at N, 2N, 4N, ... cells."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or len(errors) < 2:
        raise ValueError("need errors at two or more consecutive refinement levels")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be positive to estimate an order")
    return np.log2(errors[:-1] / errors[1:])

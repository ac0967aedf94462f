"""Symmetric split-operator propagation for H(t) = H0 + E(t) H1.

One step over ``dt`` with field value ``e`` (the step midpoint, linearly
interpolated from the node samples) applies

    U = exp(-i H0 dt/2) exp(-i e H1 dt) exp(-i H0 dt/2)

which is locally third-order accurate. The H0 half-steps are precomputed
once; the H1 factor is applied in the eigenbasis of H1, so a step costs two
N x N matrix-vector products and N complex exponentials. The two basis
changes are folded into the half-step matrices:

    left  = V1^H exp(-i H0 dt/2)
    right = exp(-i H0 dt/2) V1
    U     = right diag(exp(-i e w1 dt)) left
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

from .core import ControlField, QuantumState, SystemModel, TimeGrid


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


def _half_step(h0, dt: float) -> np.ndarray:
    w, v = h0.eigh
    if h0.is_diagonal:
        return np.diag(np.exp(-0.5j * np.diag(h0.matrix) * dt))
    return (v * np.exp(-0.5j * w * dt)) @ v.conj().T


@dataclass(frozen=True, eq=False)
class PropagatorSpec:
    """Cached split-operator factors for one model and one step size."""

    model: SystemModel
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        half = _half_step(self.model.h0, self.dt)
        w1, v1 = self.model.h1.eigh
        v1 = v1.astype(complex)
        object.__setattr__(self, "half", half)
        object.__setattr__(self, "w1", np.ascontiguousarray(w1, dtype=float))
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "left", np.ascontiguousarray(v1.conj().T @ half))
        object.__setattr__(self, "right", np.ascontiguousarray(half @ v1))
        object.__setattr__(self, "left_adj", np.ascontiguousarray(self.left.conj().T))
        object.__setattr__(self, "right_adj", np.ascontiguousarray(self.right.conj().T))

    @classmethod
    def for_grid(cls, model: SystemModel, grid: TimeGrid) -> "PropagatorSpec":
        return cls(model, grid.dt)

    @property
    def dim(self) -> int:
        return self.model.dim

    def unitarity_error(self) -> float:
        """Largest deviation of a cached factor's column norms from one."""
        errs = [
            np.max(np.abs(np.linalg.norm(m, axis=0) - 1.0))
            for m in (self.half, self.v1, self.left, self.right)
        ]
        return float(max(errs))

    def step_matrix(self, e_mid: float, direction=Direction.FORWARD) -> np.ndarray:
        u = (self.right * np.exp(-1j * e_mid * self.w1 * self.dt)) @ self.left
        return u if Direction(direction) is Direction.FORWARD else u.conj().T


@numba.njit(cache=True)
def _fwd_step(left, right, w1, dt, e, psi):
    return right @ (np.exp(-1j * e * dt * w1) * (left @ psi))


@numba.njit(cache=True)
def _bwd_step(left_adj, right_adj, w1, dt, e, psi):
    return left_adj @ (np.exp(1j * e * dt * w1) * (right_adj @ psi))


@numba.njit(cache=True)
def _propagate_forward(left, right, w1, dt, e_mid, psi0):
    n = e_mid.shape[0]
    traj = np.empty((n + 1, psi0.shape[0]), dtype=np.complex128)
    traj[0] = psi0
    psi = psi0.copy()
    for i in range(n):
        psi = _fwd_step(left, right, w1, dt, e_mid[i], psi)
        traj[i + 1] = psi
    return traj


@numba.njit(cache=True)
def _propagate_backward(left_adj, right_adj, w1, dt, e_mid, psi_final):
    n = e_mid.shape[0]
    traj = np.empty((n + 1, psi_final.shape[0]), dtype=np.complex128)
    traj[n] = psi_final
    psi = psi_final.copy()
    for i in range(n - 1, -1, -1):
        psi = _bwd_step(left_adj, right_adj, w1, dt, e_mid[i], psi)
        traj[i] = psi
    return traj


def _check_state(spec: PropagatorSpec, state: QuantumState) -> None:
    if state.dim != spec.dim:
        raise ValueError(f"state has dimension {state.dim}, model has {spec.dim}")


def step(
    spec: PropagatorSpec,
    state: QuantumState,
    e_mid: float,
    dt: float | None = None,
    direction=Direction.FORWARD,
) -> QuantumState:
    """Advance ``state`` by one step (or undo one step when backward)."""
    _check_state(spec, state)
    if dt is not None and dt != spec.dt:
        spec = PropagatorSpec(spec.model, dt)
    psi = np.ascontiguousarray(state.coeffs)
    if Direction(direction) is Direction.FORWARD:
        out = _fwd_step(spec.left, spec.right, spec.w1, spec.dt, float(e_mid), psi)
    else:
        out = _bwd_step(spec.left_adj, spec.right_adj, spec.w1, spec.dt, float(e_mid), psi)
    return QuantumState(out, state.basis_id)


def propagate_array(
    spec: PropagatorSpec, psi: np.ndarray, field: ControlField, direction=Direction.FORWARD
) -> np.ndarray:
    """Trajectory as an ``(n_steps + 1, N)`` array.

    Forward: ``psi`` is the state at t = 0. Backward: ``psi`` is the state at
    t = tf and row ``i`` is the state at node ``i``.
    """
    if not np.isclose(field.grid.dt, spec.dt, rtol=1e-14, atol=0.0):
        raise ValueError("field grid step does not match the propagator step")
    psi = np.ascontiguousarray(psi, dtype=complex)
    if psi.shape != (spec.dim,):
        raise ValueError(f"state has shape {psi.shape}, model has dimension {spec.dim}")
    e_mid = np.ascontiguousarray(field.midpoints())
    if Direction(direction) is Direction.FORWARD:
        return _propagate_forward(spec.left, spec.right, spec.w1, spec.dt, e_mid, psi)
    return _propagate_backward(spec.left_adj, spec.right_adj, spec.w1, spec.dt, e_mid, psi)


def propagate(
    spec: PropagatorSpec,
    initial: QuantumState,
    field: ControlField,
    direction=Direction.FORWARD,
) -> list[QuantumState]:
    """States at every node of ``field.grid``.

    ``initial`` is the first element for forward propagation and the last
    element for backward propagation.
    """
    _check_state(spec, initial)
    traj = propagate_array(spec, initial.coeffs, field, direction)
    return [QuantumState(row, initial.basis_id) for row in traj]


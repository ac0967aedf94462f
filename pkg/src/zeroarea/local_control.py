"""Lyapunov (local) control with an area penalty.

The Lyapunov function J(t) = <psi|O|psi> - mu A(t)^2, with O commuting with
H0, grows monotonically when the field is chosen as

    E(t) = eps (<psi| [O, H1]/i |psi> - 2 mu A(t))

since then dJ/dt = E^2 / eps. The closed loop is integrated explicitly: the
field at node t_i is computed from psi(t_i) and A(t_i), held constant over
the step, and A accumulates E_i dt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import ControlField, HermitianOp, QuantumState, SystemModel, TimeGrid
from .propagation import PropagatorSpec, _fwd_step, propagate_array

MONOTONIC_TOL = 1e-9

# Surrogate dissociation-style model. Levels 0-3 form the initial channel,
# levels 4-7 the target channel. Energies (a.u.) are chosen with
# incommensurate spacings; the coupling is a fixed real-symmetric matrix
# with zero diagonal (drawn once from numpy's default_rng(20240611) and
# rounded to three decimals).
SURROGATE_ENERGIES = (0.0, 0.0731, 0.1587, 0.2419, 0.3862, 0.4410, 0.5053, 0.5779)
SURROGATE_TARGET = (4, 5, 6, 7)
SURROGATE_COUPLING = (
    (+0.000, -1.235, -0.319, -0.775, +0.991, -0.414, -0.620, -0.548),
    (-1.235, +0.000, -0.206, +0.104, -0.760, -0.625, +0.120, -1.419),
    (-0.319, -0.206, +0.000, +0.542, +0.455, -1.386, -0.307, -0.682),
    (-0.775, +0.104, +0.542, +0.000, +0.173, -0.641, +0.408, +0.159),
    (+0.991, -0.760, +0.455, +0.173, +0.000, -0.082, -1.000, -1.358),
    (-0.414, -0.625, -1.386, -0.641, -0.082, +0.000, +0.096, -0.254),
    (-0.620, +0.120, -0.307, +0.408, -1.000, +0.096, +0.000, +0.436),
    (-0.548, -1.419, -0.682, +0.159, -1.358, -0.254, +0.436, +0.000),
)
SURROGATE_EPSILON = 0.05
SURROGATE_TF = 100.0
SURROGATE_STEPS = 10000
SURROGATE_SEED_AMPLITUDE = 1e-2


class CommutationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LyapunovSpec:
    model: SystemModel
    observable: HermitianOp
    epsilon: float
    mu: float
    grid: TimeGrid

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon!r}")
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu!r}")
        if self.observable.dim != self.model.dim:
            raise ValueError("observable and model dimensions differ")
        h0, o = self.model.h0.matrix, self.observable.matrix
        comm = np.max(np.abs(self.model.h0.commutator(self.observable)))
        if comm > 1e-10 * np.max(np.abs(h0)) * np.max(np.abs(o)):
            raise CommutationError(f"observable does not commute with H0 (max |[H0,O]| = {comm:.3e})")
        # [O, H1]/i is Hermitian
        k = self.observable.commutator(self.model.h1) / 1j
        object.__setattr__(self, "gradient_op", np.ascontiguousarray(k, dtype=complex))

    def with_mu(self, mu: float) -> "LyapunovSpec":
        return LyapunovSpec(self.model, self.observable, self.epsilon, mu, self.grid)


@dataclass(frozen=True, eq=False)
class LocalRun:
    spec: LyapunovSpec
    t: np.ndarray
    field: np.ndarray
    j_lc: np.ndarray
    exp_o: np.ndarray
    area: np.ndarray
    states: np.ndarray
    violations: tuple[int, ...] = ()

    @property
    def control(self) -> ControlField:
        return ControlField(self.spec.grid, self.field)

    @property
    def final_objective(self) -> float:
        return float(self.exp_o[-1])

    @property
    def final_area(self) -> float:
        return float(self.area[-1])

    @property
    def monotonic(self) -> bool:
        return not self.violations

    def rows(self):
        return zip(self.t, self.field, self.j_lc, self.exp_o, self.area)


def field_law(state: QuantumState | np.ndarray, running_area_value: float, spec: LyapunovSpec) -> float:
    """Local-control field for the given state and accumulated area."""
    psi = state.coeffs if isinstance(state, QuantumState) else np.asarray(state)
    g = np.vdot(psi, spec.gradient_op @ psi)
    if abs(g.imag) > 1e-12:
        raise ArithmeticError(f"commutator expectation is not real (imag = {g.imag:.3e})")
    return spec.epsilon * (g.real - 2.0 * spec.mu * running_area_value)


@numba.njit(cache=True)
def _closed_loop(left, right, w1, dt, kop, obs, eps, mu, psi0, n):
    dim = psi0.shape[0]
    states = np.empty((n + 1, dim), dtype=np.complex128)
    field = np.empty(n + 1)
    area = np.empty(n + 1)
    exp_o = np.empty(n + 1)
    psi = psi0.copy()
    a = 0.0
    for i in range(n + 1):
        states[i] = psi
        area[i] = a
        e = eps * (np.vdot(psi, kop @ psi).real - 2.0 * mu * a)
        field[i] = e
        exp_o[i] = np.vdot(psi, obs @ psi).real
        if i < n:
            psi = _fwd_step(left, right, w1, dt, e, psi)
            a += e * dt
    return states, field, area, exp_o


def run_local(spec: LyapunovSpec, psi0: QuantumState) -> LocalRun:
    if abs(np.linalg.norm(psi0.coeffs) - 1.0) > 1e-10:
        raise ValueError("initial state is not normalized")
    grid = spec.grid
    prop = PropagatorSpec.for_grid(spec.model, grid)
    states, field, area, exp_o = _closed_loop(
        prop.left, prop.right, prop.w1, prop.dt, spec.gradient_op,
        np.ascontiguousarray(spec.observable.matrix, dtype=complex),
        float(spec.epsilon), float(spec.mu),
        np.ascontiguousarray(psi0.coeffs, dtype=complex), grid.n_steps,
    )
    j_lc = exp_o - spec.mu * area**2
    bad = np.flatnonzero(np.diff(j_lc) < -MONOTONIC_TOL) + 1
    return LocalRun(
        spec=spec, t=np.array(grid.t), field=field, j_lc=j_lc, exp_o=exp_o,
        area=area, states=states, violations=tuple(int(i) for i in bad),
    )


def replay_objective(spec: LyapunovSpec, psi0: QuantumState, field: ControlField) -> float:
    """<O> at tf after propagating psi0 open-loop under a node-sampled field."""
    prop = PropagatorSpec.for_grid(spec.model, field.grid)
    psi_t = propagate_array(prop, psi0.coeffs, field)[-1]
    return float(np.vdot(psi_t, spec.observable.matrix @ psi_t).real)


def build_surrogate(
    epsilon: float = SURROGATE_EPSILON,
    mu: float = 0.0,
    tf: float = SURROGATE_TF,
    n_steps: int = SURROGATE_STEPS,
) -> tuple[SystemModel, LyapunovSpec]:
    """Eight-level two-channel model with O projecting on the target channel."""
    e = np.array(SURROGATE_ENERGIES)
    proj = np.zeros(e.size)
    proj[list(SURROGATE_TARGET)] = 1.0
    labels = tuple(
        f"{'target' if k in SURROGATE_TARGET else 'initial'}:{k}" for k in range(e.size)
    )
    model = SystemModel(
        HermitianOp(np.diag(e)),
        HermitianOp(np.array(SURROGATE_COUPLING)),
        labels,
        name="two-channel surrogate",
    )
    spec = LyapunovSpec(model, HermitianOp(np.diag(proj)), epsilon, mu, TimeGrid(tf, n_steps))
    return model, spec


def surrogate_initial_state(
    model: SystemModel, seed_amplitude: float = SURROGATE_SEED_AMPLITUDE
) -> QuantumState:
    """Ground state with a small admixture of the lowest target level.

    The field law vanishes identically while the state has no weight in the
    target channel, so a seed is needed to switch the control on.
    """
    c = np.zeros(model.dim, dtype=complex)
    c[0] = np.sqrt(1.0 - seed_amplitude**2)
    c[SURROGATE_TARGET[0]] = seed_amplitude
    return QuantumState(c, model.name)

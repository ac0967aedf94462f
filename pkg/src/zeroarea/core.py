"""Shared domain types: time grids, control fields, states and operators.

Everything is in atomic units. Instances are frozen; array payloads are
copied on construction and marked read-only so they can be shared freely.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps + 1`` nodes on ``[0, tf]``."""

    tf: float
    n_steps: int
    t0: float = 0.0

    def __post_init__(self):
        if self.t0 != 0.0:
            raise ValueError("time grids start at t0 = 0")
        if not np.isfinite(self.tf) or self.tf <= 0:
            raise ValueError(f"tf must be positive and finite, got {self.tf!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.tf / self.n_steps

    @cached_property
    def t(self) -> np.ndarray:
        # i*dt rather than linspace keeps the spacing exactly uniform
        return _frozen(np.arange(self.n_steps + 1) * self.dt)

    def __len__(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True, eq=False)
class ControlField:
    """Real control signal E(t) sampled at every node of ``grid``."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.shape != (len(self.grid),):
            raise ValueError(
                f"expected {len(self.grid)} samples for this grid, got shape {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise ValueError("control field contains NaN or Inf")
        object.__setattr__(self, "samples", _frozen(s))

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "ControlField":
        return cls(grid, np.zeros(len(grid)))

    @classmethod
    def from_function(cls, grid: TimeGrid, func) -> "ControlField":
        return cls(grid, np.asarray(func(grid.t), dtype=float))

    def midpoints(self) -> np.ndarray:
        """Field at step midpoints by linear interpolation of the nodes."""
        s = self.samples
        return 0.5 * (s[1:] + s[:-1])

    def __mul__(self, c: float) -> "ControlField":
        return ControlField(self.grid, c * self.samples)

    __rmul__ = __mul__

    def __add__(self, other: "ControlField") -> "ControlField":
        _check_same_grid(self, other)
        return ControlField(self.grid, self.samples + other.samples)

    def __sub__(self, other: "ControlField") -> "ControlField":
        _check_same_grid(self, other)
        return ControlField(self.grid, self.samples - other.samples)


def _check_same_grid(a: ControlField, b: ControlField) -> None:
    if a.grid != b.grid:
        raise ValueError("control fields live on different grids")


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Unit-norm complex coefficient vector tied to a basis by ``basis_id``."""

    coeffs: np.ndarray
    basis_id: str = ""
    norm_tol: float = 1e-10

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1:
            raise ValueError("state coefficients must be a 1-d array")
        nrm = np.linalg.norm(c)
        if abs(nrm - 1.0) > self.norm_tol:
            raise ValueError(f"state is not normalized (norm = {nrm:.15g})")
        object.__setattr__(self, "coeffs", _frozen(c))

    @classmethod
    def basis(cls, n: int, k: int, basis_id: str = "") -> "QuantumState":
        c = np.zeros(n, dtype=complex)
        c[k] = 1.0
        return cls(c, basis_id)

    @classmethod
    def normalized(cls, coeffs, basis_id: str = "") -> "QuantumState":
        c = np.asarray(coeffs, dtype=complex)
        return cls(c / np.linalg.norm(c), basis_id)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def overlap(self, other: "QuantumState") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.coeffs, other.coeffs))

    def expectation(self, op: "HermitianOp | np.ndarray") -> complex:
        m = op.matrix if isinstance(op, HermitianOp) else np.asarray(op)
        return complex(np.vdot(self.coeffs, m @ self.coeffs))


@dataclass(frozen=True, eq=False)
class HermitianOp:
    """Dense Hermitian matrix with a lazily cached eigendecomposition."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        scale = np.max(np.abs(m)) if m.size else 0.0
        dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if dev > 1e-12 * max(scale, np.finfo(float).tiny):
            raise ValueError(f"operator is not Hermitian (max |M - M^H| = {dev:.3e})")
        if np.iscomplexobj(m) and not np.any(m.imag):
            m = m.real
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        w, v = np.linalg.eigh(self.matrix)
        return _frozen(w), _frozen(v)

    @property
    def is_diagonal(self) -> bool:
        m = self.matrix
        return not np.any(m - np.diag(np.diag(m)))

    def commutator(self, other: "HermitianOp") -> np.ndarray:
        a, b = self.matrix, other.matrix
        return a @ b - b @ a


@dataclass(frozen=True, eq=False)
class SystemModel:
    """H(t) = h0 + E(t) h1 on an ordered, labelled basis."""

    h0: HermitianOp
    h1: HermitianOp
    basis_labels: Sequence[str] = field(default_factory=tuple)
    name: str = ""

    def __post_init__(self):
        if self.h0.dim != self.h1.dim:
            raise ValueError(f"h0 is {self.h0.dim}-dimensional but h1 is {self.h1.dim}")
        if self.h0.dim < 2:
            raise ValueError("a control model needs at least two levels")
        labels = tuple(self.basis_labels) or tuple(str(i) for i in range(self.h0.dim))
        if len(labels) != self.h0.dim:
            raise ValueError("one basis label per basis state is required")
        object.__setattr__(self, "basis_labels", labels)

    @property
    def dim(self) -> int:
        return self.h0.dim

    def state(self, coeffs) -> QuantumState:
        return QuantumState.normalized(coeffs, self.name)

    def basis_state(self, k: int) -> QuantumState:
        return QuantumState.basis(self.dim, k, self.name)


def trapezoid(values: np.ndarray, dt: float) -> float:
    """Trapezoidal integral of node samples on a uniform grid."""
    v = np.asarray(values)
    return float(dt * (np.sum(v) - 0.5 * (v[0] + v[-1])))


def area(field: ControlField) -> float:
    """Time-integrated area of the field over the whole grid."""
    return float(running_area(field)[-1])


def running_area(field: ControlField) -> np.ndarray:
    """Cumulative area A(t_i) at every node, starting from A(0) = 0."""
    s = field.samples
    out = np.empty_like(s)
    out[0] = 0.0
    np.cumsum(0.5 * field.grid.dt * (s[1:] + s[:-1]), out=out[1:])
    return out

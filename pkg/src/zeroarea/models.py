"""Rigid-rotor model of CO driven by a linearly polarized field.

Only the m = 0 sector is kept, so the basis is |j, 0>, j = 0..j_max and

    H(t) = B j(j+1) - d cos(theta) E(t)

with cos(theta) tridiagonal in that basis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ControlField, HermitianOp, QuantumState, SystemModel, TimeGrid
from .units import fs_to_au

DEFAULT_B_AU = 8.79919e-6
DEFAULT_D_AU = 0.044
DEFAULT_FWHM_FS = 288.0
DEFAULT_E_PEAK_AU = 2e-4


@dataclass(frozen=True)
class RotorParams:
    B: float = DEFAULT_B_AU
    d: float = DEFAULT_D_AU
    j_max: int = 15
    j_opt: int = 4

    def __post_init__(self):
        if not (self.j_max >= self.j_opt >= 1):
            raise ValueError(
                f"need j_max >= j_opt >= 1, got j_max={self.j_max}, j_opt={self.j_opt}"
            )
        if self.B <= 0 or self.d <= 0:
            raise ValueError("rotational constant and dipole moment must be positive")

    @property
    def dim(self) -> int:
        return self.j_max + 1

    @property
    def rotational_period(self) -> float:
        return rotational_period(self.B)


def rotational_period(B: float) -> float:
    """Revival time pi/B of the B j(j+1) spectrum.

    j(j+1) is always even, so every phase exp(-i B j(j+1) T) returns to one
    at T = pi/B.
    """
    return np.pi / B


def cos_theta_matrix(j_max: int) -> np.ndarray:
    """<j,0|cos(theta)|j',0> for j, j' = 0..j_max."""
    j = np.arange(j_max)
    off = (j + 1) / np.sqrt((2 * j + 1) * (2 * j + 3))
    return np.diag(off, 1) + np.diag(off, -1)


def build_rotor(params: RotorParams = RotorParams()) -> SystemModel:
    j = np.arange(params.dim)
    h0 = HermitianOp(np.diag(params.B * j * (j + 1.0)))
    h1 = HermitianOp(-params.d * cos_theta_matrix(params.j_max))
    labels = tuple(f"|{k},0>" for k in j)
    return SystemModel(h0, h1, labels, name=f"CO rotor (j_max={params.j_max})")


def ground_state(params: RotorParams = RotorParams()) -> QuantumState:
    return QuantumState.basis(params.dim, 0, build_rotor(params).name)


def target_state(params: RotorParams = RotorParams()) -> QuantumState:
    """Most oriented state within span{|0,0>, ..., |j_opt,0>}.

    This is the top eigenvector of cos(theta) restricted to the first
    j_opt + 1 levels, padded with zeros and phased so that the j = 0
    coefficient is real and positive.
    """
    c = cos_theta_matrix(params.j_max)[: params.j_opt + 1, : params.j_opt + 1]
    _, v = np.linalg.eigh(c)
    top = v[:, -1]
    top = top * np.sign(top[0])
    coeffs = np.zeros(params.dim, dtype=complex)
    coeffs[: params.j_opt + 1] = top
    return QuantumState(coeffs, build_rotor(params).name)


def guess_pulse(
    params: RotorParams,
    grid: TimeGrid,
    e_peak: float = DEFAULT_E_PEAK_AU,
    fwhm_fs: float = DEFAULT_FWHM_FS,
) -> ControlField:
    """Gaussian guess centred at a quarter of the rotational period."""
    t_rot = params.rotational_period
    if not np.isclose(grid.tf, t_rot, rtol=1e-12):
        raise ValueError(
            f"guess pulse needs a grid spanning [0, T_rot = {t_rot:.6g}], got tf = {grid.tf:.6g}"
        )
    tau = fs_to_au(fwhm_fs)
    t0 = t_rot / 4
    return ControlField(grid, e_peak * np.exp(-4 * np.log(2) * (grid.t - t0) ** 2 / tau**2))


def expectation_cos_theta(state: QuantumState | np.ndarray, model: SystemModel) -> float:
    """Orientation <cos(theta)> of a rotor state (or of each row of a trajectory)."""
    c = state.coeffs if isinstance(state, QuantumState) else np.asarray(state)
    cos = cos_theta_matrix(model.dim - 1)
    val = np.einsum("...i,ij,...j->...", c.conj(), cos, c)
    if np.max(np.abs(val.imag), initial=0.0) > 1e-12:
        raise ArithmeticError("<cos theta> has a non-negligible imaginary part")
    return val.real if val.ndim else float(val.real)


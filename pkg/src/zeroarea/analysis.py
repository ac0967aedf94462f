"""Fidelity, area measures and low-frequency filtering of control fields."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import ControlField, QuantumState, area, trapezoid


class UndefinedMeasureError(ValueError):
    """A normalized area measure has a vanishing denominator."""


@dataclass(frozen=True)
class Measures:
    area: float
    abs_area: float
    fluence: float
    a_norm: float
    b_norm: float | None = None
    reference_area: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def fidelity(psi_final: QuantumState, target: QuantumState) -> float:
    """|<psi_final|target>|^2."""
    return abs(np.vdot(psi_final.coeffs, target.coeffs)) ** 2


def abs_area(field: ControlField) -> float:
    return trapezoid(np.abs(field.samples), field.grid.dt)


def fluence(field: ControlField) -> float:
    """Integral of E(t)^2."""
    return trapezoid(field.samples**2, field.grid.dt)


def a_norm(field: ControlField) -> float:
    """Signed area over absolute area; 1 for a single-signed field."""
    denom = abs_area(field)
    if denom == 0.0:
        raise UndefinedMeasureError("a_norm is undefined for an identically zero field")
    return area(field) / denom


def b_norm(field_with: ControlField, field_without: ControlField) -> float:
    """Area of the constrained field relative to the unconstrained one."""
    ref = area(field_without)
    if ref == 0.0:
        raise UndefinedMeasureError("b_norm is undefined: reference field has zero area")
    return area(field_with) / ref


def measures(field: ControlField, reference: ControlField | None = None) -> Measures:
    b = ref_area = None
    if reference is not None:
        ref_area = area(reference)
        b = b_norm(field, reference)
    return Measures(
        area=area(field),
        abs_area=abs_area(field),
        fluence=fluence(field),
        a_norm=a_norm(field),
        b_norm=b,
        reference_area=ref_area,
    )


def highpass_filter(field: ControlField, cutoff: float) -> ControlField:
    """Zero every DFT bin with |frequency| <= cutoff (angular, a.u.).

    The node samples are treated as one period of a periodic record, so the
    duplicate endpoint is dropped before transforming and restored after.
    The DC bin is always removed. No window is applied.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be nonnegative, got {cutoff!r}")
    s = field.samples
    n = s.size - 1
    # periodic extension: node n coincides with node 0
    rec = s[:-1] if n > 0 else s
    m = rec.size
    spec = np.fft.fft(rec)
    omega = 2 * np.pi * np.fft.fftfreq(m, d=field.grid.dt)
    spec[np.abs(omega) <= cutoff] = 0.0
    spec[0] = 0.0
    out = np.fft.ifft(spec)
    scale = max(np.max(np.abs(rec)), np.finfo(float).tiny)
    if np.max(np.abs(out.imag)) > 1e-10 * scale:
        raise ArithmeticError("filtered field has a non-negligible imaginary part")
    out = out.real
    return ControlField(field.grid, np.append(out, out[0]) if n > 0 else out)


def bin_frequency(field: ControlField, n_bins: float) -> float:
    """Angular frequency of DFT bin ``n_bins`` for this field's record length."""
    return 2 * np.pi * n_bins / field.grid.tf

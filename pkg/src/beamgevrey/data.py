"""Initial-data families.

Every family returns Hermitian coefficients with the Nyquist mode zeroed.
``lorentz`` and ``expdecay`` have a known radius of analyticity ``a``:
``lorentz`` is the periodized ``a^2 / (a^2 + x^2)`` profile (one per axis,
multiplied) centred in the box, whose coefficients are exactly
proportional to ``exp(-a |xi|)`` along each axis.
"""
from dataclasses import dataclass

import numpy as np

from .spectral import RealField, SpectralField, forward_transform, zero_nyquist

FAMILIES = ("gaussian", "lorentz", "expdecay", "single_mode", "random_band", "zero")


@dataclass(frozen=True)
class InitialDataSpec:
    family: str = "zero"
    amplitude: float = 1.0
    a: float = 0.5
    width: float = 1.0
    k: tuple = (1,)
    band: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown data family {self.family!r}; expected one of {FAMILIES}")
        if self.family in ("lorentz", "expdecay") and not self.a > 0:
            raise ValueError("a must be positive")
        if self.family == "gaussian" and not self.width > 0:
            raise ValueError("width must be positive")

    @property
    def known_radius(self):
        if self.family in ("lorentz", "expdecay"):
            return self.a
        if self.family in ("gaussian", "single_mode", "random_band", "zero"):
            return np.inf
        return None


def periodic_lorentz(x, a, length):
    """``sum_j a^2 / (a^2 + (x + j L)^2)`` in closed form; poles at ``+-i a``."""
    q = 2.0 * np.pi / length
    return (np.pi * a / length) * np.sinh(q * a) / (np.cosh(q * a) - np.cos(q * x))


def lorentz_coefficients(grid, a, amplitude=1.0):
    """Exact coefficients of the centred, peak-normalized periodic Lorentz product.

    Per axis they are ``(pi a / L) exp(-a |xi|) (-1)^k / peak``; building
    them directly avoids the roundoff floor of a sampled transform, which
    a cosh lift would otherwise amplify.
    """
    length = grid.box_length
    peak = periodic_lorentz(0.0, a, length)
    k = grid.k_index
    axis = (np.pi * a / length) * np.exp(-a * np.abs(k) * grid.dk) * np.where(k % 2, -1.0, 1.0)
    axis = axis / peak
    out = np.full(grid.shape, float(amplitude))
    for d in range(grid.dim):
        shape = [1] * grid.dim
        shape[d] = -1
        out = out * axis.reshape(shape)
    return out.astype(complex)


def build(spec, grid):
    """SpectralField of the data ``spec`` on ``grid``."""
    fam = spec.family
    amp = spec.amplitude
    if fam == "zero":
        return SpectralField(grid, np.zeros(grid.shape, dtype=complex))
    if fam == "expdecay":
        coeffs = amp * np.exp(-spec.a * grid.xi_abs)
        return SpectralField(grid, zero_nyquist(coeffs, grid))
    if fam == "random_band":
        from .lemmas import Sampler
        c = next(Sampler(spec.seed).fields(grid, spec.band, 1))
        values = np.fft.ifftn(c.coefficients, norm="forward").real
        peak = np.abs(values).max()
        return SpectralField(grid, c.coefficients * (amp / peak if peak else 0.0))
    if fam == "single_mode":
        k = tuple(spec.k) + (0,) * (grid.dim - len(spec.k))
        if len(k) != grid.dim:
            raise ValueError(f"mode index {spec.k} does not fit a {grid.dim}-d grid")
        n = grid.points_per_dim
        coeffs = np.zeros(grid.shape, dtype=complex)
        # cos(k.x) = (e^{ik.x} + e^{-ik.x}) / 2
        coeffs[tuple(ki % n for ki in k)] += 0.5 * amp
        coeffs[tuple(-ki % n for ki in k)] += 0.5 * amp
        return SpectralField(grid, zero_nyquist(coeffs, grid))
    if fam == "lorentz":
        return SpectralField(grid, zero_nyquist(lorentz_coefficients(grid, spec.a, amp), grid))
    centre = 0.5 * grid.box_length
    r2 = sum((x - centre) ** 2 for x in grid.mesh())
    values = amp * np.exp(-0.5 * r2 / spec.width**2)
    c = forward_transform(RealField(grid, values))
    return SpectralField(grid, zero_nyquist(c.coefficients, grid))

"""Periodic grids, Fourier transforms and radial Fourier multipliers.

Conventions
-----------
* Grid points are ``x_j = j * L / N`` on ``[0, L)`` in every dimension.
* Angular frequencies are ``xi_k = 2 pi k / L`` with integer ``k`` in numpy
  FFT order ``0, 1, ..., N/2 - 1, -N/2, ..., -1`` along each axis. Arrays
  are row-major over axes; this is the layout written to ``spectrum.csv``.
* The forward transform carries the ``1/N**n`` factor, so a coefficient is
  the discrete analogue of ``(1/L**n) * integral f(x) exp(-i xi.x) dx``.
  Parseval then reads ``sum(f**2) * h**n == L**n * sum(|c|**2)``.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

OVERFLOW_CAP = 700.0
LOG_ROUTE_THRESHOLD = 300.0
HERMITIAN_TOL = 1e-10


class OverflowCapError(ValueError):
    """A growing weight would exceed the double-precision exponent range."""


class HermitianError(ValueError):
    """Coefficients do not describe a real-valued field."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic box of side ``box_length`` in ``dim`` dimensions."""

    dim: int
    points_per_dim: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.points_per_dim
        if int(n) != n or n % 2 or n < 8:
            raise ValueError(f"points_per_dim must be an even integer >= 8, got {n}")
        if not (self.box_length > 0 and np.isfinite(self.box_length)):
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "points_per_dim", int(n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def shape(self):
        return (self.points_per_dim,) * self.dim

    @property
    def size(self):
        return self.points_per_dim**self.dim

    @property
    def spacing(self):
        return self.box_length / self.points_per_dim

    @property
    def dk(self):
        """Frequency spacing ``2 pi / L``."""
        return 2.0 * np.pi / self.box_length

    @cached_property
    def k_index(self):
        """Integer mode numbers along one axis, FFT order."""
        n = self.points_per_dim
        return np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)

    @cached_property
    def wavenumbers(self):
        """Angular frequencies along one axis, FFT order."""
        return self.dk * self.k_index

    @cached_property
    def coordinates(self):
        """Physical sample points along one axis."""
        return self.spacing * np.arange(self.points_per_dim)

    def mesh(self):
        return np.meshgrid(*([self.coordinates] * self.dim), indexing="ij")

    @cached_property
    def xi_sq(self):
        k = self.wavenumbers
        out = np.zeros(self.shape)
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = -1
            out = out + (k**2).reshape(shape)
        return out

    @cached_property
    def xi_abs(self):
        return np.sqrt(self.xi_sq)

    @cached_property
    def xi_max(self):
        return float(self.xi_abs.max())

    @cached_property
    def nyquist_mask(self):
        """True on modes with any index at ``-N/2``."""
        mask = np.zeros(self.shape, dtype=bool)
        half = self.points_per_dim // 2
        for axis in range(self.dim):
            index = [slice(None)] * self.dim
            index[axis] = half
            mask[tuple(index)] = True
        return mask


def make_grid(dim, points_per_dim, box_length):
    return Grid(dim, points_per_dim, box_length)


def _readonly(arr):
    view = arr.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True, eq=False)
class RealField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        if not np.isfinite(values).all():
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _readonly(values))

    def l2_norm(self):
        return float(np.sqrt((self.values**2).sum() * self.grid.spacing**self.grid.dim))


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=complex)
        if coeffs.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {coeffs.shape} != grid shape {self.grid.shape}")
        if not np.isfinite(coeffs).all():
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", _readonly(coeffs))

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coefficients + other.coefficients)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coefficients - other.coefficients)

    def __neg__(self):
        return SpectralField(self.grid, -self.coefficients)

    def __mul__(self, scalar):
        return SpectralField(self.grid, scalar * self.coefficients)

    __rmul__ = __mul__

    def hermitian_defect(self):
        return hermitian_defect(self.coefficients)

    def l2_norm(self):
        return float(np.sqrt(self.grid.box_length**self.grid.dim
                             * (np.abs(self.coefficients) ** 2).sum()))


def reflect(coeffs):
    """Return the array ``c(-k)`` in FFT layout."""
    out = np.flip(coeffs)
    return np.roll(out, 1, axis=tuple(range(coeffs.ndim)))


def hermitian_defect(coeffs, scale=None):
    """``max |c(k) - conj(c(-k))|`` relative to ``scale`` (default ``max |c|``)."""
    if scale is None:
        scale = np.abs(coeffs).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(coeffs - np.conj(reflect(coeffs))).max() / scale)


def forward_transform(f):
    return SpectralField(f.grid, np.fft.fftn(f.values, norm="forward"))


def inverse_transform(c):
    defect = hermitian_defect(c.coefficients)
    if defect > HERMITIAN_TOL:
        raise HermitianError(f"coefficients violate Hermitian symmetry (defect {defect:.3e})")
    return RealField(c.grid, np.fft.ifftn(c.coefficients, norm="forward").real)


def logcosh(r):
    """``log(cosh(r))`` without overflow or small-argument cancellation."""
    r = np.abs(np.asarray(r, dtype=float))
    small = r < 1.0
    sh = np.sinh(0.5 * np.where(small, r, 0.0))
    big = r + np.log1p(np.exp(-2.0 * r)) - np.log(2.0)
    return np.where(small, np.log1p(2.0 * sh * sh), big)


@dataclass(frozen=True)
class MultiplierSpec:
    """A radial Fourier symbol.

    ``kind`` is one of ``cosh``, ``sech``, ``exp``, ``abs_d``, ``bracket``,
    ``prop_cos`` (``cos(t w)``) or ``prop_sinc`` (``sin(t w) / w``), where
    ``w = sqrt(m + |xi|**4)``.
    """

    kind: str
    sigma: float = 0.0
    sign: int = 1
    s: float = 0.0
    m: float = 1.0
    t: float = 0.0

    KINDS = ("cosh", "sech", "exp", "abs_d", "bracket", "prop_cos", "prop_sinc")
    POSITIVE = ("cosh", "sech", "exp", "abs_d", "bracket")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.kind in ("prop_cos", "prop_sinc") and not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")

    @classmethod
    def cosh_sigma(cls, sigma):
        return cls("cosh", sigma=sigma)

    @classmethod
    def sech_sigma(cls, sigma):
        return cls("sech", sigma=sigma)

    @classmethod
    def exp_sigma(cls, sigma, sign=1):
        return cls("exp", sigma=sigma, sign=sign)

    @classmethod
    def abs_d(cls):
        return cls("abs_d")

    @classmethod
    def japanese_bracket(cls, s):
        return cls("bracket", s=s)

    @classmethod
    def propagator_cos(cls, m, t):
        return cls("prop_cos", m=m, t=t)

    @classmethod
    def propagator_sinc(cls, m, t):
        return cls("prop_sinc", m=m, t=t)

    @property
    def grows(self):
        return self.kind == "cosh" or (self.kind == "exp" and self.sign > 0)

    def exponent_reach(self, grid):
        """Largest ``sigma |xi|`` on the grid."""
        return self.sigma * grid.xi_max

    def symbol(self, grid):
        xi = grid.xi_abs
        if self.kind == "cosh":
            return np.cosh(self.sigma * xi)
        if self.kind == "sech":
            return 1.0 / np.cosh(self.sigma * xi)
        if self.kind == "exp":
            return np.exp(self.sign * self.sigma * xi)
        if self.kind == "abs_d":
            return xi.copy()
        if self.kind == "bracket":
            return (1.0 + grid.xi_sq) ** (0.5 * self.s)
        w = np.sqrt(self.m + grid.xi_sq**2)
        if self.kind == "prop_cos":
            return np.cos(self.t * w)
        return np.sin(self.t * w) / w

    def log_symbol(self, grid):
        if self.kind not in self.POSITIVE:
            raise ValueError(f"{self.kind} symbol changes sign; no log-domain form")
        xi = grid.xi_abs
        if self.kind == "cosh":
            return logcosh(self.sigma * xi)
        if self.kind == "sech":
            return -logcosh(self.sigma * xi)
        if self.kind == "exp":
            return self.sign * self.sigma * xi
        if self.kind == "abs_d":
            with np.errstate(divide="ignore"):
                return np.log(xi)
        return 0.5 * self.s * np.log1p(grid.xi_sq)


def check_overflow(spec, grid):
    reach = spec.exponent_reach(grid)
    if spec.grows and reach > OVERFLOW_CAP:
        raise OverflowCapError(
            f"sigma*|xi_max| = {reach:.6g} exceeds the cap {OVERFLOW_CAP:g} "
            f"({spec.kind}, sigma={spec.sigma:g})")


def apply_multiplier(c, spec, log_domain=False):
    """Multiply coefficients by the symbol of ``spec``.

    With ``log_domain=True`` positive symbols are applied as
    ``exp(log|c| + log symbol)``, which avoids forming the symbol itself and
    so lifts the exponent cap; the result must still be finite.
    """
    grid = c.grid
    if not log_domain:
        check_overflow(spec, grid)
        return SpectralField(grid, c.coefficients * spec.symbol(grid))
    coeffs = c.coefficients
    mag = np.abs(coeffs)
    with np.errstate(divide="ignore"):
        logmag = np.log(mag) + spec.log_symbol(grid)
    phase = np.where(mag > 0, coeffs / np.where(mag > 0, mag, 1.0), 0.0)
    out = np.where(mag > 0, np.exp(logmag), 0.0) * phase
    if not np.isfinite(out).all():
        raise OverflowCapError(f"log-domain {spec.kind} multiplier overflowed the result")
    return SpectralField(grid, out)


def zero_nyquist(coeffs, grid):
    out = np.array(coeffs, dtype=complex)
    out[grid.nyquist_mask] = 0.0
    return out


def _embed_indices(n, m):
    """Source/target indices for modes ``|k| < n/2`` moved from size n to m."""
    k = np.arange(-(n // 2) + 1, n // 2)
    return k % n, k % m


def pad_coefficients(coeffs, grid, m):
    """Embed non-Nyquist modes into an ``m**dim`` spectrum (zero elsewhere)."""
    src, dst = _embed_indices(grid.points_per_dim, m)
    out = np.zeros((m,) * grid.dim, dtype=complex)
    out[np.ix_(*([dst] * grid.dim))] = coeffs[np.ix_(*([src] * grid.dim))]
    return out


def truncate_coefficients(padded, grid):
    src, dst = _embed_indices(grid.points_per_dim, padded.shape[0])
    out = np.zeros(grid.shape, dtype=complex)
    out[np.ix_(*([src] * grid.dim))] = padded[np.ix_(*([dst] * grid.dim))]
    return out


def padded_size(grid, p):
    return (p + 1) * grid.points_per_dim // 2


def power_coefficients(coeffs, grid, p, real=True):
    """Coefficients of ``u**p`` on the retained (non-Nyquist) modes.

    Padding to ``(p + 1) N / 2`` points per axis makes the result the exact
    truncated p-fold convolution. ``real=True`` drops the roundoff imaginary
    part of the padded physical field; only valid for Hermitian input.
    """
    if p == 1:
        return zero_nyquist(coeffs, grid)
    padded = pad_coefficients(coeffs, grid, padded_size(grid, p))
    phys = np.fft.ifftn(padded, norm="forward")
    if real:
        phys = phys.real
    return truncate_coefficients(np.fft.fftn(phys**p, norm="forward"), grid)


def _check_odd(p):
    if int(p) != p or p < 1 or p % 2 == 0:
        raise ValueError(f"p must be an odd integer >= 1, got {p}")
    return int(p)


def dealiased_power(c, p):
    """Spectral coefficients of ``u**p`` without aliasing.

    The Nyquist mode is excluded from both input and output; every other
    retained mode equals the p-fold discrete convolution of the input
    coefficients exactly (to roundoff).
    """
    p = _check_odd(p)
    if p == 1:
        return c
    real = hermitian_defect(c.coefficients) <= 1e-12
    return SpectralField(c.grid, power_coefficients(c.coefficients, c.grid, p, real=real))


def modulus_majorant(c):
    return SpectralField(c.grid, np.abs(c.coefficients))

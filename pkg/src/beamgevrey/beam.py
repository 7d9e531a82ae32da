"""Time evolution of ``u_tt + (m + Delta^2) u + u^p = 0`` (odd p).

The state is the first-order pair ``(u, u_t)`` held as Fourier
coefficients. Each mode obeys ``u'' + w^2 u = F`` with
``w(xi) = sqrt(m + |xi|^4)`` and ``F = -coupling * u^p``; the linear part
is propagated exactly.
"""
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .norms import cosh_norm
from .spectral import (
    HERMITIAN_TOL,
    HermitianError,
    RealField,
    SpectralField,
    _check_odd,
    hermitian_defect,
    inverse_transform,
    power_coefficients,
)

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-10


class PicardDivergence(RuntimeError):
    """Picard iteration failed to converge; carries the last contraction ratio."""

    def __init__(self, message, ratio):
        super().__init__(message)
        self.ratio = ratio


class EnergyDriftError(RuntimeError):
    """Energy drift exceeded the configured bound during integration."""


@dataclass(frozen=True, eq=False)
class State:
    u: SpectralField
    ut: SpectralField
    time: float = 0.0
    m: float = 1.0
    p: int = 3
    coupling: float = 1.0

    def __post_init__(self):
        if self.u.grid != self.ut.grid:
            raise ValueError("u and u_t live on different grids")
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        object.__setattr__(self, "p", _check_odd(self.p))
        # one scale for both fields: a component that is pure roundoff
        # (u_t after a time-reversed round trip) must not fail on its own
        scale = max(np.abs(self.u.coefficients).max(), np.abs(self.ut.coefficients).max())
        for name in ("u", "ut"):
            defect = hermitian_defect(getattr(self, name).coefficients, scale)
            if defect > HERMITIAN_TOL:
                raise HermitianError(f"{name} is not Hermitian-symmetric (defect {defect:.3e})")

    @property
    def grid(self):
        return self.u.grid

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    bending: float
    mass: float
    potential: float
    total: float
    time: float


def omega(grid, m):
    return np.sqrt(m + grid.xi_sq**2)


def _rotation(grid, m, dt):
    w = omega(grid, m)
    s = np.sin(dt * w)
    return (np.ascontiguousarray(np.cos(dt * w).ravel()),
            np.ascontiguousarray((s / w).ravel()),
            np.ascontiguousarray((w * s).ravel()))


def _rotate(u, v, rot):
    # u, v: C-contiguous complex arrays, modified in place
    kernels.rotate_modes(u.reshape(-1), v.reshape(-1), *rot)


def linear_propagate(st, dt):
    """Exact linear flow over ``dt`` (negative ``dt`` runs backwards)."""
    u = np.array(st.u.coefficients)
    v = np.array(st.ut.coefficients)
    _rotate(u, v, _rotation(st.grid, st.m, dt))
    return st.replace(u=SpectralField(st.grid, u), ut=SpectralField(st.grid, v),
                      time=st.time + dt)


def _force(u, st):
    if st.coupling == 0.0:
        return np.zeros_like(u)
    return -st.coupling * power_coefficients(u, st.grid, st.p)


def _pad_split_nyquist(coeffs, n, m, axis):
    k = np.arange(-(n // 2) + 1, n // 2)
    shape = list(coeffs.shape)
    shape[axis] = m
    out = np.zeros(shape, dtype=complex)
    src = [slice(None)] * coeffs.ndim
    dst = [slice(None)] * coeffs.ndim
    src[axis], dst[axis] = k % n, k % m
    out[tuple(dst)] = coeffs[tuple(src)]
    src[axis] = n // 2
    half = 0.5 * coeffs[tuple(src)]
    dst[axis] = m - n // 2
    out[tuple(dst)] = half
    dst[axis] = n // 2
    out[tuple(dst)] = half
    return out


def power_integral(coeffs, grid, q):
    """``integral of u**q`` for the real trigonometric interpolant of ``coeffs``.

    Exact for even ``q``: the interpolant (Nyquist mode split evenly between
    ``+-N/2``) is sampled on a grid fine enough that the zero mode of its
    q-th power is alias-free.
    """
    n = grid.points_per_dim
    m = q * n // 2 + 2
    padded = coeffs
    for axis in range(grid.dim):
        padded = _pad_split_nyquist(padded, n, m, axis)
    phys = np.fft.ifftn(padded, norm="forward").real
    return float((phys**q).sum() * (grid.box_length / m) ** grid.dim)


def energy(st):
    grid = st.grid
    vol = grid.box_length**grid.dim
    u2 = np.abs(st.u.coefficients) ** 2
    kinetic = 0.5 * vol * float((np.abs(st.ut.coefficients) ** 2).sum())
    bending = 0.5 * vol * float((grid.xi_sq**2 * u2).sum())
    mass = 0.5 * st.m * vol * float(u2.sum())
    p = st.p
    potential = st.coupling * power_integral(st.u.coefficients, grid, p + 1) / (p + 1)
    total = kinetic + bending + mass + potential
    return EnergyReport(kinetic, bending, mass, potential, total, st.time)


def data_norm(st, sigma):
    """``||u||_{H^{sigma,2}} + ||u_t||_{H^{sigma,0}}``."""
    return cosh_norm(st.u, sigma, 2.0) + cosh_norm(st.ut, sigma, 0.0)


def local_existence_time(st, sigma, c0, delta_max=1.0):
    """Step-size rule ``c0 * data_norm**-(p - 1)``, capped at ``delta_max``."""
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0}")
    if st.p == 1:
        return delta_max
    norm = data_norm(st, sigma)
    if norm == 0.0:
        return delta_max
    return min(delta_max, c0 * norm ** (-(st.p - 1)))


def _duhamel_nodes(u0, v0, forces, h, rot):
    """Solution at equispaced nodes of the forced linear flow.

    ``forces[j]`` is the forcing at ``t_j = j h``. The Duhamel integral is
    the composite trapezoid rule with the propagator applied exactly, built
    by the recurrences ``B_j = R(h) B_{j-1} + h (0, F_j)`` and
    ``C_j = R(h) C_{j-1}``, ``C_0 = (0, F_0)``.
    """
    n = len(forces)
    us = np.empty((n,) + u0.shape, dtype=complex)
    vs = np.empty_like(us)
    lin_u, lin_v = u0.copy(), v0.copy()
    bu, bv = np.zeros_like(u0), h * forces[0]
    cu, cv = np.zeros_like(u0), forces[0].copy()
    us[0], vs[0] = u0, v0
    for j in range(1, n):
        _rotate(lin_u, lin_v, rot)
        _rotate(bu, bv, rot)
        _rotate(cu, cv, rot)
        bv += h * forces[j]
        us[j] = lin_u + bu - 0.5 * h * cu
        vs[j] = lin_v + bv - 0.5 * h * (cv + forces[j])
    return us, vs


@dataclass
class PicardResult:
    trajectory: list
    iterations: int
    ratios: list


def _pair_norm(du, dv, grid, sigma):
    return (cosh_norm(SpectralField(grid, du), sigma, 2.0)
            + cosh_norm(SpectralField(grid, dv), sigma, 0.0))


def picard_local_solve(st, delta, n_steps, tol=1e-12, max_iter=50, sigma=0.0, c0=None):
    """Fixed-point iteration of the Duhamel map on ``[0, delta]``.

    Iterates until successive iterates differ by less than ``tol`` in
    ``H^{sigma,2} x H^{sigma,0}`` at every node. Raises
    :class:`PicardDivergence` after ``max_iter`` iterations.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if c0 is not None and delta > local_existence_time(st, sigma, c0, delta_max=np.inf):
        warnings.warn(f"delta={delta:g} exceeds the local existence time for c0={c0:g}",
                      stacklevel=2)
    grid = st.grid
    h = delta / n_steps
    rot = _rotation(grid, st.m, h)
    u0 = np.ascontiguousarray(st.u.coefficients, dtype=complex)
    v0 = np.ascontiguousarray(st.ut.coefficients, dtype=complex)
    zero = [np.zeros_like(u0)] * (n_steps + 1)
    us, vs = _duhamel_nodes(u0, v0, zero, h, rot)
    ratios = []
    prev = None
    for it in range(1, max_iter + 1):
        # a diverging iteration overflows; that is reported below, not warned
        with np.errstate(over="ignore", invalid="ignore"):
            forces = [np.ascontiguousarray(_force(u, st)) for u in us]
            new_us, new_vs = _duhamel_nodes(u0, v0, forces, h, rot)
            if not (np.isfinite(new_us).all() and np.isfinite(new_vs).all()):
                raise PicardDivergence("Picard iterates blew up",
                                       ratios[-1] if ratios else np.inf)
            diff = max(_pair_norm(new_us[j] - us[j], new_vs[j] - vs[j], grid, sigma)
                       for j in range(n_steps + 1))
        us, vs = new_us, new_vs
        if prev is not None and prev > 0:
            ratios.append(diff / prev)
        if not np.isfinite(diff):
            raise PicardDivergence("Picard iterates blew up", ratios[-1] if ratios else np.inf)
        if diff < tol:
            traj = [st.replace(u=SpectralField(grid, us[j]), ut=SpectralField(grid, vs[j]),
                               time=st.time + j * h) for j in range(n_steps + 1)]
            return PicardResult(traj, it, ratios)
        prev = diff
    ratio = ratios[-1] if ratios else np.nan
    raise PicardDivergence(
        f"Picard iteration did not converge in {max_iter} iterations "
        f"(last contraction ratio {ratio:.3g}); delta={delta:g} is likely too large", ratio)


def forced_linear_step(st, forcing, dt, quad_nodes):
    """Advance the forced linear flow by ``dt``.

    ``forcing(tau)`` returns a RealField or SpectralField for
    ``tau in [0, dt]`` measured from ``st.time``; the Duhamel integral uses
    the composite trapezoid rule on ``quad_nodes`` equispaced nodes.
    """
    us, vs, _ = _forced_nodes(st, forcing, dt, quad_nodes)
    return st.replace(u=SpectralField(st.grid, us[-1]), ut=SpectralField(st.grid, vs[-1]),
                      time=st.time + dt)


def _as_coefficients(f):
    if isinstance(f, RealField):
        return np.fft.fftn(f.values, norm="forward")
    return np.asarray(f.coefficients, dtype=complex)


def _forced_nodes(st, forcing, T, quad_nodes):
    if quad_nodes < 2:
        raise ValueError("need at least two quadrature nodes")
    taus = np.linspace(0.0, T, quad_nodes)
    forces = [np.ascontiguousarray(_as_coefficients(forcing(t))) for t in taus]
    h = T / (quad_nodes - 1)
    us, vs = _duhamel_nodes(np.ascontiguousarray(st.u.coefficients, dtype=complex),
                            np.ascontiguousarray(st.ut.coefficients, dtype=complex),
                            forces, h, _rotation(st.grid, st.m, h))
    return us, vs, forces


def energy_inequality_ratio(st, forcing, T, quad_nodes, sigma=0.0):
    """Observed ratio of the two sides of the linear energy inequality.

    Left side: ``sup_t ||u||_{H^{sigma,2}} + ||u_t||_{H^{sigma,0}}`` over the
    nodes. Right side: data norm plus the trapezoid value of
    ``integral ||F||_{H^{sigma,0}} dt``. Returns ``(lhs, rhs, lhs / rhs)``.
    """
    grid = st.grid
    us, vs, forces = _forced_nodes(st, forcing, T, quad_nodes)
    lhs = max(_pair_norm(u, v, grid, sigma) for u, v in zip(us, vs))
    fn = np.array([cosh_norm(SpectralField(grid, f), sigma, 0.0) for f in forces])
    h = T / (quad_nodes - 1)
    rhs = data_norm(st, sigma) + h * (fn.sum() - 0.5 * (fn[0] + fn[-1]))
    return lhs, rhs, lhs / rhs


def boundary_ratio(st):
    """Max of |u| on the box faces relative to max |u|."""
    values = inverse_transform(st.u).values
    peak = np.abs(values).max()
    if peak == 0.0:
        return 0.0
    face = max(np.abs(np.take(values, 0, axis=a)).max() for a in range(values.ndim))
    return float(face / peak)


@dataclass
class Trajectory:
    states: list
    scheme: str
    dt: float
    warnings: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([s.time for s in self.states])

    def energies(self):
        return [energy(s) for s in self.states]


def strang_step(st, dt):
    """One Strang step: half kick, exact linear flow, half kick."""
    u = np.array(st.u.coefficients)
    v = np.array(st.ut.coefficients)
    v += 0.5 * dt * _force(u, st)
    _rotate(u, v, _rotation(st.grid, st.m, dt))
    v += 0.5 * dt * _force(u, st)
    return st.replace(u=SpectralField(st.grid, u), ut=SpectralField(st.grid, v),
                      time=st.time + dt)


def _check_drift(st, e0, max_drift):
    e = energy(st).total
    drift = abs(e - e0) / abs(e0) if e0 != 0.0 else abs(e - e0)
    if drift > max_drift:
        raise EnergyDriftError(
            f"energy drift {drift:.3e} exceeds bound {max_drift:.3e} at t={st.time:.6g}; "
            "reduce dt")


def integrate(st, T, dt, scheme="strang", output_stride=1, max_drift=1e-2,
              c0=0.5, sigma=0.0, picard_tol=1e-12, picard_max_iter=50, delta_max=1.0):
    """Evolve ``st`` to time ``st.time + T``.

    ``T`` is split into ``n = round(T / dt)`` equal steps; states are kept
    every ``output_stride`` steps and at the end. ``scheme`` is ``"strang"``
    (default) or ``"picard"`` (successive Picard windows of the local
    existence time, rounded to whole steps).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if T < 0:
        raise ValueError("T must be nonnegative")
    n = max(int(round(T / dt)), 0)
    dt = T / n if n else dt
    traj = Trajectory([st], scheme, dt)
    ratio = boundary_ratio(st)
    if ratio > BOUNDARY_TOL:
        msg = f"field at box boundary is {ratio:.2e} of its max (> {BOUNDARY_TOL:g})"
        log.warning(msg)
        traj.warnings.append(msg)
    e0 = energy(st).total
    if scheme == "strang":
        _strang_loop(st, n, dt, output_stride, e0, max_drift, traj)
    elif scheme == "picard":
        _picard_loop(st, n, dt, output_stride, e0, max_drift, traj,
                     c0, sigma, picard_tol, picard_max_iter, delta_max)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return traj


def _strang_loop(st, n, dt, stride, e0, max_drift, traj):
    grid = st.grid
    rot = _rotation(grid, st.m, dt)
    u = np.array(st.u.coefficients)
    v = np.array(st.ut.coefficients)
    half = 0.5 * dt
    force = _force(u, st)
    for step in range(1, n + 1):
        v += half * force
        _rotate(u, v, rot)
        force = _force(u, st)
        v += half * force
        if step % stride == 0 or step == n:
            out = st.replace(u=SpectralField(grid, u), ut=SpectralField(grid, v),
                             time=st.time + step * dt)
            _check_drift(out, e0, max_drift)
            traj.states.append(out)


def _picard_loop(st, n, dt, stride, e0, max_drift, traj, c0, sigma, tol, max_iter,
                 delta_max):
    current = st
    done = 0
    while done < n:
        delta = local_existence_time(current, sigma, c0, delta_max)
        steps = min(max(1, int(delta / dt)), n - done)
        res = picard_local_solve(current, steps * dt, steps, tol, max_iter, sigma)
        for j in range(1, steps + 1):
            k = done + j
            if k % stride == 0 or k == n:
                out = res.trajectory[j].replace(time=st.time + k * dt)
                _check_drift(out, e0, max_drift)
                traj.states.append(out)
        current = res.trajectory[-1].replace(time=st.time + (done + steps) * dt)
        done += steps


def calibrate_c0(states, sigma=0.0, n_steps=16, tol=1e-12, max_iter=40,
                 candidates=None, delta_max=np.inf):
    """Largest candidate ``c0`` for which Picard converges on every state, halved."""
    if candidates is None:
        candidates = 2.0 ** np.arange(-6, 7)
    best = None
    for c0 in sorted(candidates):
        try:
            for s in states:
                delta = local_existence_time(s, sigma, c0, delta_max)
                picard_local_solve(s, delta, n_steps, tol, max_iter, sigma)
        except PicardDivergence:
            break
        best = c0
    if best is None:
        raise PicardDivergence("no candidate c0 converged", np.nan)
    return 0.5 * best

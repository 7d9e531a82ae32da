"""Randomized and lattice checks of the scalar cosh/exp inequalities.

Every suite draws its samples in fixed-size chunks; chunk ``j`` of suite
``name`` uses the generator seeded by ``SeedSequence(seed, spawn_key=(stream,
j))``. Reports are merged in chunk order, so results do not depend on the
number of worker threads.

Margins are relative to the dominant side of each inequality and a sample
counts as a violation when its margin is below ``-TOL``.
"""
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .norms import NormSpec, sobolev, weighted_norm
from .spectral import MultiplierSpec, SpectralField, apply_multiplier, dealiased_power

TOL = 1e-12
CHUNK = 1 << 16

# spawn-key streams; fixed so adding suites never shifts existing ones
STREAMS = {
    "cosh_difference": 1,
    "product_identity": 2,
    "product_sech": 3,
    "exp_cosh_sandwich": 4,
    "cosh_deficit_bound": 5,
    "fields": 100,
}


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    samples: int
    violations: int
    worst_margin: float
    worst_input: object
    seed: int
    extra: dict = field(default_factory=dict)

    def merge(self, other):
        """Associative combination of two reports on disjoint samples."""
        if other.check_name != self.check_name:
            raise ValueError("cannot merge reports of different checks")
        worst = self if self.worst_margin <= other.worst_margin else other
        extra = dict(self.extra)
        for key, val in other.extra.items():
            if key not in extra:
                extra[key] = val
            elif key.startswith("max_"):
                extra[key] = max(extra[key], val)
            elif key.startswith("min_"):
                extra[key] = min(extra[key], val)
            else:
                extra[key] = extra[key] + val
        return replace(self, samples=self.samples + other.samples,
                       violations=self.violations + other.violations,
                       worst_margin=worst.worst_margin, worst_input=worst.worst_input,
                       extra=extra)

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        return {
            "check_name": self.check_name,
            "samples": self.samples,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "worst_input": self.worst_input,
            "seed": self.seed,
            "extra": dict(sorted(self.extra.items())),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


class Sampler:
    """Deterministic sample streams.

    Scalars come from uniform boxes; fields are complex Gaussian on the
    integer modes ``|k_i| <= band`` (Hermitian, Nyquist zero). Field modes
    are drawn in a canonical lattice order that does not depend on the
    grid size, so the same seed gives the same function on every grid that
    resolves the band.
    """

    def __init__(self, seed, stream=STREAMS["fields"]):
        self.seed = int(seed)
        self.stream = int(stream)

    def generator(self, chunk):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, int(chunk)))
        return np.random.Generator(np.random.PCG64(ss))

    def uniform(self, chunk, low, high, size):
        return self.generator(chunk).uniform(low, high, size)

    def fields(self, grid, band, count, start=0):
        band = int(band)
        if not 0 < band < grid.points_per_dim // 2:
            raise ValueError(f"band {band} must satisfy 0 < band < N/2 = {grid.points_per_dim // 2}")
        lattice = [k for k in itertools.product(range(-band, band + 1), repeat=grid.dim)
                   if _canonical(k)]
        n = grid.points_per_dim
        idx = tuple(np.array(col) % n for col in zip(*lattice))
        neg = tuple((-np.array(col)) % n for col in zip(*lattice))
        origin = (0,) * grid.dim
        for j in range(start, start + count):
            rng = self.generator(j)
            z = rng.standard_normal((len(lattice), 2)) @ np.array([1.0, 1j]) / np.sqrt(2.0)
            c0 = rng.standard_normal()
            coeffs = np.zeros(grid.shape, dtype=complex)
            coeffs[idx] = z
            coeffs[neg] = np.conj(z)
            coeffs[origin] = c0
            yield SpectralField(grid, coeffs)


def _canonical(k):
    for ki in k:
        if ki:
            return ki > 0
    return False


# -- scalar checks -------------------------------------------------------------

def check_cosh_difference(a, b):
    """``1/2 |b^2 - a^2| (cosh a + cosh b) - |cosh b - cosh a|``."""
    rel, logdom = kernels.cosh_difference_rel(np.array([float(a)]), np.array([float(b)]))
    if logdom[0] == -np.inf:
        return 0.0
    return float(rel[0] * np.exp(logdom[0]))


def check_product_identity(r):
    """Relative residual of ``prod cosh r_j = 2^(1-p) sum_signs cosh(r_1 + sum s_j r_j)``."""
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if not 1 <= r.shape[1] <= 12:
        raise ValueError("need 1 <= p <= 12")
    if (r < 0).any():
        raise ValueError("r_j must be nonnegative")
    return float(kernels.product_identity_residual(np.ascontiguousarray(r))[0])


@dataclass(frozen=True)
class SechMargins:
    margin: float
    margin2: float
    lhs: float
    rhs: float
    rhs2: float


def check_product_sech(xi):
    """Margins of ``|1 - cosh|xi| prod sech|xi_j||`` against the pairwise
    bound ``2^p sum_{j != k} |xi_j||xi_k|`` and against ``p^2 2^p |xi_1||xi_2|``
    (two largest)."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    p = xi.shape[0]
    if p < 2:
        raise ValueError("need p >= 2")
    r = np.sqrt((xi * xi).sum(axis=1))
    if (r > 50).any():
        raise ValueError("|xi_j| must be <= 50")
    _, _, lhs = kernels.product_sech_margins(np.ascontiguousarray(xi[None]))
    lhs = float(lhs[0])
    rhs = 2.0**p * (r.sum() ** 2 - (r * r).sum())
    top = np.sort(r)[::-1]
    rhs2 = p * p * 2.0**p * top[0] * top[1]
    return SechMargins(float(rhs - lhs), float(rhs2 - lhs), lhs, float(rhs), float(rhs2))


def check_exp_cosh_sandwich(r):
    """``(cosh r - e^r / 2, e^r - cosh r)``; both nonnegative."""
    if r < 0:
        raise ValueError("need r >= 0")
    ch, ex = np.cosh(r), np.exp(r)
    return float(ch - 0.5 * ex), float(ex - ch)


# -- suites --------------------------------------------------------------------

def _report(name, margins, inputs, seed, extra=None):
    j = int(np.argmin(margins))
    return CheckReport(name, len(margins), int((margins < -TOL).sum()), float(margins[j]),
                       _jsonable(inputs(j)), seed, extra or {})


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _rel(rhs, lhs):
    dom = np.maximum(np.abs(rhs), np.abs(lhs))
    return np.where(dom == 0.0, 0.0, (rhs - lhs) / np.where(dom == 0.0, 1.0, dom))


def _chunk_cosh_difference(rng, count, seed):
    a = rng.uniform(-50.0, 50.0, count)
    b = rng.uniform(-50.0, 50.0, count)
    rel, _ = kernels.cosh_difference_rel(a, b)
    return _report("cosh_difference", rel, lambda j: {"a": a[j], "b": b[j]}, seed)


def _chunk_product_identity(rng, count, seed):
    ps = rng.integers(1, 9, count)
    r = rng.uniform(0.0, 10.0, (count, 8))
    resid = np.empty(count)
    for p in range(1, 9):
        sel = ps == p
        if sel.any():
            resid[sel] = kernels.product_identity_residual(np.ascontiguousarray(r[sel, :p]))
    return _report("product_identity", -resid,
                   lambda j: {"r": r[j, :ps[j]]}, seed, {"max_residual": float(resid.max())})


def _chunk_product_sech(rng, count, seed):
    ps = rng.integers(2, 6, count)
    ns = rng.integers(1, 4, count)
    raw = rng.standard_normal((count, 5, 3))
    scale = 50.0 * 10.0 ** rng.uniform(-6.0, 0.0, (count, 5))
    margins = np.empty(count)
    rel1 = np.empty(count)
    rel2 = np.empty(count)
    tri = np.empty(count)
    constant = np.zeros(count)
    vectors = np.zeros_like(raw)
    for p in range(2, 6):
        for n in range(1, 4):
            sel = np.flatnonzero((ps == p) & (ns == n))
            if not len(sel):
                continue
            v = raw[sel, :p, :n]
            norms = np.sqrt((v * v).sum(axis=2, keepdims=True))
            xi = np.ascontiguousarray(v / np.where(norms == 0, 1.0, norms) * scale[sel, :p, None])
            m1, m2, lhs = kernels.product_sech_margins(xi)
            r = np.sqrt((xi * xi).sum(axis=2))
            total = r.sum(axis=1)
            tri[sel] = _rel(total, np.sqrt((xi.sum(axis=1) ** 2).sum(axis=1)))
            pairs = total**2 - (r * r).sum(axis=1)
            constant[sel] = np.where(pairs > 0, lhs / np.where(pairs > 0, pairs, 1.0), 0.0)
            rel1[sel], rel2[sel] = m1, m2
            vectors[sel, :p, :n] = xi
            margins[sel] = np.minimum(np.minimum(m1, m2), tri[sel])
    extra = {
        "violations_pairwise": int((rel1 < -TOL).sum()),
        "violations_two_largest": int((rel2 < -TOL).sum()),
        "violations_triangle": int((tri < -TOL).sum()),
        "min_margin_pairwise": float(rel1.min()),
        "min_margin_two_largest": float(rel2.min()),
        "max_lhs_over_pair_sum": float(constant.max()),
    }
    return _report("product_sech", margins, lambda j: {"xi": vectors[j, :ps[j], :ns[j]]}, seed, extra)


def _chunk_exp_cosh_sandwich(rng, count, seed, first):
    r = rng.uniform(0.0, 700.0, count)
    if first:
        r[:2] = (0.0, 700.0)
    # scale every term by exp(-r)
    ch = 0.5 * (1.0 + np.exp(-2.0 * r))
    lower = _rel(ch, 0.5)
    upper = _rel(1.0, ch)
    return _report("exp_cosh_sandwich", np.minimum(lower, upper), lambda j: {"r": r[j]}, seed,
                   {"min_margin_lower": float(lower.min()), "min_margin_upper": float(upper.min())})


def _chunk_cosh_deficit(rng, count, seed):
    r = rng.uniform(0.0, 50.0, count)
    alpha = np.clip(rng.uniform(-0.01, 1.01, count), 0.0, 1.0)
    # both sides divided by cosh r
    rhs = np.power(r, 2.0 * alpha)
    lhs = 1.0 - 1.0 / np.cosh(r)
    return _report("cosh_deficit_bound", _rel(rhs, lhs),
                   lambda j: {"r": r[j], "alpha": alpha[j]}, seed)


SUITES = {
    "cosh_difference": _chunk_cosh_difference,
    "product_identity": _chunk_product_identity,
    "product_sech": _chunk_product_sech,
    "exp_cosh_sandwich": _chunk_exp_cosh_sandwich,
    "cosh_deficit_bound": _chunk_cosh_deficit,
}


def run_suite(name, samples=10**6, seed=0, threads=1, chunk=CHUNK):
    """Run suite ``name`` over ``samples`` seeded samples; returns a CheckReport."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    samples = int(samples)
    if samples < 1:
        raise ValueError("need at least one sample")
    sampler = Sampler(seed, STREAMS[name])
    counts = [min(chunk, samples - s) for s in range(0, samples, chunk)]
    fn = SUITES[name]

    def work(j):
        rng = sampler.generator(j)
        if name == "exp_cosh_sandwich":
            return fn(rng, counts[j], seed, j == 0)
        return fn(rng, counts[j], seed)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(work, range(len(counts))))
    else:
        parts = [work(j) for j in range(len(counts))]
    out = parts[0]
    for part in parts[1:]:
        out = out.merge(part)
    return out


def run_all(samples=10**6, seed=0, threads=1):
    return [run_suite(name, samples, seed, threads) for name in SUITES]


def lattice_product_identity(max_p=4, step=0.5, top=5.0):
    """Exhaustive residuals of the product identity on ``{0, step, ..., top}^p``."""
    values = np.arange(0.0, top + step / 2, step)
    worst = 0.0
    worst_r = None
    count = 0
    for p in range(1, max_p + 1):
        r = np.array(list(itertools.product(values, repeat=p)))
        resid = kernels.product_identity_residual(np.ascontiguousarray(r))
        count += len(r)
        j = int(np.argmax(resid))
        if resid[j] > worst or worst_r is None:
            worst, worst_r = float(resid[j]), r[j].tolist()
    return CheckReport("product_identity_lattice", count, int(worst > TOL), -worst, worst_r, 0)


# -- nonlinear estimate --------------------------------------------------------

@dataclass(frozen=True)
class NonlinearStats:
    sigma: float
    p: int
    s_target: float
    ratios: np.ndarray
    exp_ratios: np.ndarray
    max_form_gap: float
    min_majorant_margin: float

    @property
    def max_ratio(self):
        return float(self.ratios.max())

    @property
    def q95(self):
        return float(np.quantile(self.ratios, 0.95))

    @property
    def forms_agree(self):
        return self.max_form_gap <= 1e-10


def _u_substituted(u, sigma, p):
    up = MultiplierSpec.exp_sigma(sigma)
    down = MultiplierSpec.exp_sigma(sigma, sign=-1)
    big_u = apply_multiplier(u, up)
    inner = dealiased_power(apply_multiplier(big_u, down), p)
    return big_u, weighted_norm(apply_multiplier(inner, up), sobolev(0.0))


def check_nonlinear_estimate(corpus, sigma, p, s_target=2.0):
    """Ratio ``||u^p||_{H^{sigma,0}} / ||u||_{H^{sigma,s}}^p`` over ``corpus``.

    Also evaluates the exponential-weight numerator both directly and in
    the substituted form ``exp(sigma|D|)[(exp(-sigma|D|) U)^p]`` with
    ``U = exp(sigma|D|) u``, and checks it against the modulus majorant
    ``|| |U|^{*p} ||_{L2}``.
    """
    ratios, exp_ratios, gaps, majorant = [], [], [], []
    h0 = NormSpec(sigma, 0.0, "cosh")
    hs = NormSpec(sigma, s_target, "cosh")
    g0 = NormSpec(sigma, 0.0, "exp")
    gs = NormSpec(sigma, s_target, "exp")
    for u in corpus:
        up = dealiased_power(u, p)
        ratios.append(weighted_norm(up, h0) / weighted_norm(u, hs) ** p)
        direct = weighted_norm(up, g0)
        big_u, substituted = _u_substituted(u, sigma, p)
        exp_ratios.append(direct / weighted_norm(u, gs) ** p)
        gaps.append(abs(direct - substituted) / max(direct, substituted, 1e-300))
        bound = weighted_norm(dealiased_power(SpectralField(u.grid, np.abs(big_u.coefficients)),
                                              p), sobolev(0.0))
        majorant.append(_rel(np.array(bound), np.array(direct)).item())
    return NonlinearStats(sigma, p, s_target, np.array(ratios), np.array(exp_ratios),
                          float(max(gaps)), float(min(majorant)))

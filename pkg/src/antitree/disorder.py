"""Single-site distributions and harmonic-mean statistics.

The random potential takes i.i.d. values ``v`` in ``[-sigma, sigma]``. Most
quantities here are moments of ``1/(lam - v)`` for a real spectral parameter
``lam`` outside the support, and of the harmonic mean

    V_s = ( (1/s) * sum_k 1/(lam - v_k) )**-1

of ``s`` independent draws.

Monte Carlo partitioning rule: samples are produced in chunks of a fixed
number of rows; chunk ``k`` draws from
``np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))``.
The chunk layout depends only on ``(count, s)``, so results do not depend on
how many workers process the chunks.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy import special, stats

from .errors import ConfigurationError, DomainError, SingularityError

KINDS = ("uniform_symmetric", "two_point_symmetric", "truncated_gaussian", "point_mass")

# |lam| must exceed sigma by at least this much.
EDGE_GUARD = 1e-9

_CHUNK_VALUES = 1 << 21


@dataclass(frozen=True)
class DisorderSpec:
    """Single-site law on ``[-sigma, sigma]``.

    ``params`` by kind:

    * ``truncated_gaussian``: ``scale`` (std of the untruncated normal,
      default ``sigma / 2``)
    * ``point_mass``: ``location`` (default 0, must lie in the support)
    """

    kind: str
    sigma: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown disorder kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma!r}")
        allowed = {"truncated_gaussian": {"scale"}, "point_mass": {"location"}}.get(self.kind, set())
        extra = set(self.params) - allowed
        if extra:
            raise ConfigurationError(f"unknown parameter(s) {sorted(extra)} for kind {self.kind!r}")
        if self.kind == "truncated_gaussian" and self.scale <= 0:
            raise ConfigurationError("truncated_gaussian scale must be positive")
        if self.kind == "point_mass" and abs(self.location) > self.sigma:
            raise ConfigurationError("point_mass location lies outside [-sigma, sigma]")

    @property
    def scale(self):
        return float(self.params.get("scale", self.sigma / 2))

    @property
    def location(self):
        return float(self.params.get("location", 0.0))

    @property
    def is_discrete(self):
        return self.kind in ("two_point_symmetric", "point_mass")

    def atoms(self):
        """Support points and weights of a discrete law."""
        if self.kind == "two_point_symmetric":
            return np.array([-self.sigma, self.sigma]), np.array([0.5, 0.5])
        if self.kind == "point_mass":
            return np.array([self.location]), np.array([1.0])
        raise TypeError(f"{self.kind} is not discrete")

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], float(d["sigma"]), dict(d.get("params", {})))


@dataclass(frozen=True)
class HarmonicStats:
    """Population statistics of ``1/(lam - v)``.

    ``sigma3`` holds the third centred moment itself (not its cube root).
    """

    lam: float
    h: float
    sigma2: float
    sigma3: float
    w_drift: float


def sample_potential(spec, count, seed):
    """Draw ``count`` i.i.d. potential values; deterministic in ``seed``."""
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    return _draw(spec, np.random.default_rng(seed), (int(count),))


def _draw(spec, rng, shape):
    sig = spec.sigma
    if spec.kind == "uniform_symmetric":
        return rng.uniform(-sig, sig, size=shape)
    if spec.kind == "two_point_symmetric":
        return np.where(rng.integers(0, 2, size=shape) == 1, sig, -sig).astype(float)
    if spec.kind == "point_mass":
        return np.full(shape, spec.location)
    bound = sig / spec.scale
    return stats.truncnorm.rvs(-bound, bound, loc=0.0, scale=spec.scale, size=shape, random_state=rng)


def _check_lambda(spec, lam):
    if not abs(lam) > spec.sigma + EDGE_GUARD:
        raise DomainError(f"lambda={lam!r} inside disorder support [-{spec.sigma}, {spec.sigma}]")


def _gauss_legendre(f, lo, hi, rtol=1e-12, max_level=12):
    """64-point Gauss-Legendre on 2**level panels, doubled until converged."""
    x, w = np.polynomial.legendre.leggauss(64)
    prev = None
    for level in range(max_level):
        edges = np.linspace(lo, hi, 2 ** level + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * np.diff(edges)[:, None]
        val = np.sum(half * w * f(mid + half * x))
        if prev is not None and abs(val - prev) <= rtol * abs(val):
            return val
        prev = val
    return val


def inverse_moments(spec, lam, orders=(1, 2, 3)):
    """Raw moments ``E[(lam - v)**-k]`` for each ``k`` in ``orders``."""
    _check_lambda(spec, lam)
    sig = spec.sigma
    if spec.is_discrete:
        v, p = spec.atoms()
        return np.array([np.sum(p / (lam - v) ** k) for k in orders])
    if spec.kind == "uniform_symmetric":
        out = []
        for k in orders:
            if k == 1:
                out.append(np.log((lam + sig) / (lam - sig)) / (2 * sig))
            else:
                out.append(((lam - sig) ** (1 - k) - (lam + sig) ** (1 - k)) / ((k - 1) * 2 * sig))
        return np.array(out)
    bound = sig / spec.scale
    norm = special.ndtr(bound) - special.ndtr(-bound)

    def density(v):
        return np.exp(-0.5 * (v / spec.scale) ** 2) / (np.sqrt(2 * np.pi) * spec.scale * norm)

    return np.array([_gauss_legendre(lambda v, k=k: density(v) / (lam - v) ** k, -sig, sig) for k in orders])


def harmonic_average(spec, lam):
    """Harmonic average ``h``, variance ``sigma2`` and third moment of ``1/(lam - v)``."""
    lam = float(lam)
    m1, m2, m3 = inverse_moments(spec, lam)
    sigma2 = max(m2 - m1 * m1, 0.0)
    sigma3 = m3 - 3 * m1 * m2 + 2 * m1 ** 3
    if spec.is_discrete:
        v, p = spec.atoms()
        dev = 1.0 / (lam - v) - m1
        sigma2 = float(np.sum(p * dev ** 2))
        sigma3 = float(np.sum(p * dev ** 3))
    h = 1.0 / m1
    return HarmonicStats(lam=lam, h=h, sigma2=sigma2, sigma3=sigma3, w_drift=h ** 3 * sigma2)


def perturbed_harmonic(spec, lam, eps):
    """``h`` evaluated at the shifted parameter ``lam + eps``."""
    _check_lambda(spec, lam)
    return harmonic_average(spec, lam + eps).h


def h_expansion_residual(spec, lam, eps):
    """``h(lam+eps) - h(lam) - eps*(sigma2*h**2 + 1)``; of order ``eps**2``."""
    st = harmonic_average(spec, lam)
    return perturbed_harmonic(spec, lam, eps) - st.h - eps * (st.sigma2 * st.h ** 2 + 1.0)


def empirical_harmonic_mean(values, lam):
    """Harmonic mean of ``lam - v_k`` over the given sample."""
    x = lam - np.asarray(values)
    if np.any(x == 0):
        raise SingularityError(f"lambda={lam!r} coincides with a sample value")
    return 1.0 / np.mean(1.0 / x)


def _chunk_rng(seed, k):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))


def sample_harmonic_means(spec, lam, s, count, seed, workers=1):
    """``count`` independent copies of ``V_s`` at real ``lam``.

    The two-point law is sampled through the number of ``+sigma`` atoms,
    which is Binomial(s, 1/2); this gives the same distribution as drawing all
    ``s`` values.
    """
    _check_lambda(spec, lam)
    if s < 1 or count < 1:
        raise ConfigurationError("s and count must be positive")
    rows = max(1, _CHUNK_VALUES // s) if spec.kind != "two_point_symmetric" else _CHUNK_VALUES
    sizes = [min(rows, count - start) for start in range(0, count, rows)]

    def chunk(k):
        rng = _chunk_rng(seed, k)
        n = sizes[k]
        if spec.kind == "point_mass":
            return np.full(n, lam - spec.location)
        if spec.kind == "two_point_symmetric":
            plus = rng.binomial(s, 0.5, size=n)
            sig = spec.sigma
            return s / (plus / (lam - sig) + (s - plus) / (lam + sig))
        v = _draw(spec, rng, (n, s))
        return 1.0 / np.mean(1.0 / (lam - v), axis=1)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(chunk, range(len(sizes))))
    else:
        parts = [chunk(k) for k in range(len(sizes))]
    return np.concatenate(parts)


def expected_harmonic_mean(spec, lam, s, mc_samples=200_000, seed=0):
    """``E(V_s)`` at real ``lam``: exact for discrete laws, Monte Carlo otherwise."""
    _check_lambda(spec, lam)
    if spec.kind == "point_mass":
        return lam - spec.location
    if spec.kind == "two_point_symmetric":
        k = np.arange(s + 1)
        sig = spec.sigma
        vals = s / (k / (lam - sig) + (s - k) / (lam + sig))
        return float(np.sum(stats.binom.pmf(k, s, 0.5) * vals))
    return float(np.mean(sample_harmonic_means(spec, lam, s, mc_samples, seed)))


@dataclass(frozen=True)
class WYEstimate:
    W_s_hat: float
    W_s_se: float
    Y_variance_hat: float
    Y_variance_se: float


def wy_decomposition(spec, lam, s, mc_samples, seed, workers=1):
    """Monte Carlo estimates of ``W_s = s*(E V_s - h)`` and ``E Y^2 = s*Var V_s``."""
    if s < 2:
        raise ConfigurationError("s must be >= 2")
    h = harmonic_average(spec, lam).h
    v = sample_harmonic_means(spec, lam, s, mc_samples, seed, workers)
    n = v.size
    mean = v.mean()
    dev2 = (v - mean) ** 2
    return WYEstimate(
        W_s_hat=s * (mean - h),
        W_s_se=s * v.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0,
        Y_variance_hat=s * dev2.mean(),
        Y_variance_se=s * dev2.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0,
    )


@dataclass
class MomentReport:
    lam: float
    h: float
    sigma2: float
    a: float
    b: float
    records: list

    @property
    def passed(self):
        return all(r["pass"] for r in self.records)

    def violations(self):
        return [r for r in self.records if not r["pass"]]

    def select(self, quantity, s=None):
        return [r for r in self.records if r["quantity"] == quantity and (s is None or r["s"] == s)]


def _record(quantity, s, estimate, se, low, high, n_se):
    ok = (low - n_se * se <= estimate) and (estimate <= high + n_se * se)
    return {
        "quantity": quantity,
        "s": int(s),
        "estimate": float(estimate),
        "se": float(se),
        "bound_low": float(low),
        "bound_high": float(high),
        "pass": bool(ok),
    }


def check_moment_bounds(spec, lam, s_grid, mc_samples, seed, n_se=5.0, workers=1):
    """Monte Carlo check of the harmonic-mean moment bounds.

    With ``a = |lam| - sigma`` and ``b = |lam| + sigma`` every ``|lam - v_k|``
    lies in ``[a, b]``. For negative ``lam`` the signs are folded so that the
    statements are about ``|V_s|`` and ``|h|``. Per ``s`` the report contains

    * ``mean``: ``0 < E(V_s-h) <= b h^2 sigma2 / s``
    * ``second``: ``a^2 h^2 sigma2/s <= E((V_s-h)^2) <= b^2 h^2 sigma2/s``
    * ``moment4``, ``moment6``: ``E((V_s-h)^2m) <= (2m)! h^2m b^2m / (2^m m! a^2m s^m)``
    * ``third``: ``E((V_s-h)^3)`` (no explicit bound; reported with ``s^2`` scaling)
    * ``leading_mean``: ``s E(V_s-h)`` against ``h^3 sigma2``
    * ``leading_second``: ``s E((V_s-h)^2)`` against ``h^4 sigma2``

    A record passes when it is inside its bounds up to ``n_se`` standard errors.
    The leading-term records carry an ``O(1/s)`` bias, so they are only
    expected to pass once ``s`` is large compared with the sample size.
    """
    st = harmonic_average(spec, lam)
    sign = 1.0 if lam > 0 else -1.0
    h = abs(st.h)
    sig2 = st.sigma2
    a = abs(lam) - spec.sigma
    b = abs(lam) + spec.sigma
    records = []
    for i, s in enumerate(s_grid):
        v = sample_harmonic_means(spec, lam, int(s), mc_samples, (seed, i), workers)
        d = sign * v - h
        n = d.size
        root = np.sqrt(n)

        def est(x):
            return x.mean(), (x.std(ddof=1) / root if n > 1 else 0.0)

        m, se = est(d)
        records.append(_record("mean", s, m, se, 0.0, b * h * h * sig2 / s, n_se))
        m2, se2 = est(d * d)
        records.append(_record("second", s, m2, se2, a * a * h * h * sig2 / s, b * b * h * h * sig2 / s, n_se))
        for mm in (2, 3):
            bound = factorial(2 * mm) * h ** (2 * mm) * b ** (2 * mm) / (2 ** mm * factorial(mm) * a ** (2 * mm) * s ** mm)
            mk, sek = est(d ** (2 * mm))
            records.append(_record(f"moment{2 * mm}", s, mk, sek, 0.0, bound, n_se))
        m3, se3 = est(d ** 3)
        records.append(_record("third", s, m3 * s * s, se3 * s * s, -np.inf, np.inf, n_se))
        target = h ** 3 * sig2
        records.append(_record("leading_mean", s, s * m, s * se, target, target, n_se))
        target = h ** 4 * sig2
        records.append(_record("leading_second", s, s * m2, s * se2, target, target, n_se))
    return MomentReport(lam=float(lam), h=st.h, sigma2=sig2, a=a, b=b, records=records)

"""Limiting matrix SDEs for the scaled transfer products and their zero processes.

Conventions: ``r_e`` elliptic channels with phases ``z_j``;
``S = diag(s, s)`` with ``s_j = 1/(conj(z_j) - z_j) = i/(2 Im z_j)``;
``D = diag(I, -I)``. The Brownian motions ``A`` (Hermitian) and ``B``
(complex symmetric) have covariance scale ``v = h^4 sigma^2 / (r+1)``:

    E|B_ij|^2 = E|A_ij|^2 = v t (3/2 if i == j else 1),  E(A_ii A_jj) = v t,

all other covariances zero. For finite ``m`` the path solves

    dL = (eps + (h^3 sigma^2 - q)/m) S D L dt + m^-1/2 S [[dA, dB], [-dB*, -conj(dA)]] L,

and as ``m -> inf`` the rescaled path is ``eps t S D + S [[A, B], [-B*, -conj(A)]]``.
"""
import os
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la

from ._io import write_csv, write_json
from .errors import ConfigurationError, IntegrationError, UnresolvedZerosWarning

BLOWUP = 1e12


def hyperbolic_drift(channels, stats):
    """``q = (h^4 sigma^2/(r+1)) sum_j 1/(gamma_j^-1 - gamma_j)`` over hyperbolic channels."""
    g = np.asarray(channels.gamma, dtype=float)
    return stats.h ** 4 * stats.sigma2 / (channels.r + 1) * float(np.sum(1.0 / (1.0 / g - g)))


@dataclass(frozen=True)
class SdeParams:
    r_e: int
    r: int
    lambda_stats: object
    m: float
    q: float
    S: np.ndarray
    eps_grid: np.ndarray
    t_steps: int = 10_000
    variance_scale: float = None

    def __post_init__(self):
        if self.r_e < 1 or self.r < self.r_e:
            raise ConfigurationError("need 1 <= r_e <= r")
        if not self.m > 0:
            raise ConfigurationError("m must be positive (inf allowed)")
        s = np.asarray(self.S)
        if s.shape != (2 * self.r_e, 2 * self.r_e):
            raise ConfigurationError("S must be 2 r_e x 2 r_e")
        object.__setattr__(self, "S", s.astype(complex))
        object.__setattr__(self, "eps_grid", np.atleast_1d(np.asarray(self.eps_grid)))
        if self.variance_scale is None:
            st = self.lambda_stats
            object.__setattr__(self, "variance_scale", st.h ** 4 * st.sigma2 / (self.r + 1))

    @property
    def drift(self):
        """``(h^3 sigma^2 - q)/m``; zero for ``m = inf``."""
        if np.isinf(self.m):
            return 0.0
        return (self.lambda_stats.w_drift - self.q) / self.m

    @property
    def D(self):
        return np.diag(np.concatenate((np.ones(self.r_e), -np.ones(self.r_e))))

    def to_dict(self):
        st = self.lambda_stats
        return {
            "r_e": self.r_e, "r": self.r, "m": None if np.isinf(self.m) else self.m, "q": self.q,
            "S_diag_imag": np.diag(self.S).imag.tolist(), "eps_grid": np.real(self.eps_grid).tolist(),
            "t_steps": self.t_steps, "variance_scale": self.variance_scale,
            "lambda_stats": {"lam": st.lam, "h": st.h, "sigma2": st.sigma2, "w_drift": st.w_drift},
        }


def s_matrix(z):
    """``diag(s, s)`` with ``s_j = 1/(conj(z_j) - z_j)``."""
    z = np.asarray(z, dtype=complex)
    s = 1.0 / (z.conj() - z)
    return np.diag(np.concatenate((s, s)))


def default_eps_grid(r_e, variance_scale, drift=0.0, points=512):
    """Symmetric grid spanning four times the semicircle radius of the endpoint matrix."""
    radius = 2.0 * np.sqrt(variance_scale * r_e) + abs(drift)
    radius = radius if radius > 0 else 1.0
    return np.linspace(-4 * radius, 4 * radius, points)


def sde_params_from_channels(channels, stats, m, eps_grid=None, t_steps=10_000, variance_scale=None):
    q = hyperbolic_drift(channels, stats)
    v = stats.h ** 4 * stats.sigma2 / (channels.r + 1) if variance_scale is None else variance_scale
    if eps_grid is None:
        drift = 0.0 if np.isinf(m) else (stats.w_drift - q) / m
        eps_grid = default_eps_grid(channels.r_e, v, drift)
    return SdeParams(r_e=channels.r_e, r=channels.r, lambda_stats=stats, m=m, q=q, S=s_matrix(channels.z),
                     eps_grid=eps_grid, t_steps=t_steps, variance_scale=v)


def _increments(rng, r_e, dt, v, count):
    """``count`` independent (dA, dB) pairs, shapes ``(count, r_e, r_e)``."""
    sd = np.sqrt(v * dt)
    common = rng.standard_normal(count) * sd
    diag = common[:, None] + rng.standard_normal((count, r_e)) * sd * np.sqrt(0.5)
    off = (rng.standard_normal((count, r_e, r_e)) + 1j * rng.standard_normal((count, r_e, r_e))) * sd / np.sqrt(2)
    upper = np.triu(off, 1)
    da = upper + np.conj(np.swapaxes(upper, 1, 2))
    idx = np.arange(r_e)
    da[:, idx, idx] = diag
    raw = (rng.standard_normal((count, r_e, r_e)) + 1j * rng.standard_normal((count, r_e, r_e))) * sd / np.sqrt(2)
    ub = np.triu(raw, 1)
    db = ub + np.swapaxes(ub, 1, 2)
    db[:, idx, idx] = raw[:, idx, idx] * np.sqrt(1.5)
    return da, db


def sample_brownian_increment(r_e, dt, variance_scale, seed_state):
    """One increment ``(dA, dB)``; ``seed_state`` is a seed or a ``numpy.random.Generator``."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    rng = np.random.default_rng(seed_state)
    da, db = _increments(rng, r_e, dt, variance_scale, 1)
    return {"dA": da[0], "dB": db[0]}


def brownian_increments(r_e, t_steps, variance_scale, seed):
    """Increment sequence on ``[0, 1]`` with ``dt = 1/t_steps``; shared by all path constructions."""
    return _increments(np.random.default_rng(seed), r_e, 1.0 / t_steps, variance_scale, t_steps)


def noise_block(da, db):
    """``[[dA, dB], [-dB*, -conj(dA)]]`` (works on stacks)."""
    dbs = np.conj(np.swapaxes(db, -1, -2))
    return np.block([[da, db], [-dbs, -np.conj(da)]])


@dataclass
class SdePath:
    """``values[e, k]`` is the ``2 r_e x 2 r_e`` matrix at ``eps_grid[e]`` and ``times[k]``."""

    params: SdeParams
    seed: int
    values: np.ndarray
    times: np.ndarray
    affine: bool = False
    # for affine paths: values(eps) = eps * slope + intercept at t = 1
    slope: np.ndarray = field(default=None, repr=False)
    intercept: np.ndarray = field(default=None, repr=False)

    @property
    def endpoint(self):
        return self.values[:, -1]

    def evaluate(self, eps):
        """Endpoint at an arbitrary ``eps`` (affine paths only)."""
        if not self.affine:
            raise ConfigurationError("only affine (closed-form) paths can be evaluated off-grid")
        return eps * self.slope + self.intercept


def integrate_lambda(params, seed, save_every=None, increments=None):
    """Euler-Maruyama on ``[0, 1]``; every eps uses the same increments.

    ``save_every``: store every k-th step (default: only t = 0 and t = 1).
    """
    if np.isinf(params.m):
        raise ConfigurationError("integrate_lambda needs finite m; use closed_form_limit")
    if params.t_steps < 100:
        raise ConfigurationError("t_steps must be >= 100")
    n = params.t_steps
    dt = 1.0 / n
    save_every = n if save_every is None else save_every
    da, db = brownian_increments(params.r_e, n, params.variance_scale, seed) if increments is None else increments
    eps = np.asarray(params.eps_grid, dtype=complex)
    dim = 2 * params.r_e
    sd = params.S @ params.D
    eye = np.eye(dim)
    lam = np.broadcast_to(eye, (eps.size, dim, dim)).astype(complex)
    drift_gen = (eps + params.drift)[:, None, None] * sd * dt
    scale = 1.0 / np.sqrt(params.m)
    saved, times = [lam.copy()], [0.0]
    for k in range(n):
        step = eye + drift_gen + scale * (params.S @ noise_block(da[k], db[k]))
        with np.errstate(over="ignore", invalid="ignore"):  # blow-up is detected below
            lam = step @ lam
        if (k + 1) % save_every == 0 or k == n - 1:
            norm = np.max(np.abs(lam))
            if not np.isfinite(norm) or norm > BLOWUP:
                raise IntegrationError(f"path norm {norm:.3g} exceeded {BLOWUP:g} at step {k + 1} (t={(k + 1) * dt:.4g})")
            if (k + 1) * dt != times[-1]:
                saved.append(lam.copy())
                times.append((k + 1) * dt)
    return SdePath(params, seed, np.stack(saved, axis=1), np.array(times))


def closed_form_limit(params, seed):
    """``eps t S D + S [[A_t, B_t], [-B_t*, -conj(A_t)]]`` at t = 0, 1 with the shared increments summed."""
    da, db = brownian_increments(params.r_e, params.t_steps, params.variance_scale, seed)
    a1, b1 = da.sum(axis=0), db.sum(axis=0)
    slope = params.S @ params.D
    intercept = params.S @ noise_block(a1, b1)
    eps = np.asarray(params.eps_grid, dtype=complex)
    end = eps[:, None, None] * slope + intercept
    start = np.zeros_like(end)
    return SdePath(params, seed, np.stack((start, end), axis=1), np.array([0.0, 1.0]), affine=True,
                   slope=slope, intercept=intercept)


def endpoint_matrices(params, seed):
    """``(A_1, B_1)`` as used by :func:`closed_form_limit`."""
    da, db = brownian_increments(params.r_e, params.t_steps, params.variance_scale, seed)
    return da.sum(axis=0), db.sum(axis=0)


def _contraction(r_e, boundary, z_star):
    if boundary == "identity":
        left = np.hstack((np.eye(r_e), np.eye(r_e)))
    elif boundary == "zstar":
        if z_star is None:
            raise ConfigurationError("boundary 'zstar' needs z_star")
        zs = np.asarray(z_star, dtype=complex)
        zs = np.diag(zs) if zs.ndim == 1 else zs
        left = np.hstack((zs.conj(), zs))
    else:
        raise ConfigurationError(f"unknown boundary {boundary!r}")
    right = np.vstack((np.eye(r_e), -np.eye(r_e)))
    return left.astype(complex), right


def _newton_affine(path, left, right, x0, tol=1e-14, maxiter=60):
    mp = left @ path.slope @ right
    x = complex(x0)
    for _ in range(maxiter):
        m = left @ path.evaluate(x) @ right
        try:
            with warnings.catch_warnings(), np.errstate(all="ignore"):
                warnings.simplefilter("ignore", la.LinAlgWarning)
                step = 1.0 / np.trace(la.solve(m, mp))
        except la.LinAlgError:
            return x
        if not np.isfinite(step):
            return x
        x -= step
        if abs(step) <= tol * max(1.0, abs(x)):
            break
    return x


def _interp_root(eps, f, k, width=2):
    lo, hi = max(0, k - width), min(len(eps), k + width + 1)
    x, y = eps[lo:hi], f[lo:hi]
    c = np.polyfit(x - eps[k], y, len(x) - 1)
    roots = np.roots(c) + eps[k] if len(c) > 1 else np.array([])
    if roots.size == 0:
        return None
    return roots[np.argmin(np.abs(roots - eps[k]))]


def zero_process(path, boundary="identity", z_star=None, threshold=1e-6, max_refine=4):
    """Real zeros of ``eps -> det(L Lambda_1^eps R)`` with the chosen boundary contraction.

    Candidates are local minima of ``|det|`` on the eps grid, refined by
    complex Newton iteration (affine paths, exact evaluation) or local
    polynomial interpolation (integrated paths). A candidate is accepted when
    the refined point is real to ``threshold`` relative scale and, for affine
    paths, ``|det|`` there is below ``threshold`` times the grid median.
    For affine paths the grid is doubled when fewer than ``r_e`` zeros are
    found; persistent shortfall triggers :class:`UnresolvedZerosWarning`.
    """
    p = path.params
    left, right = _contraction(p.r_e, boundary, z_star)
    eps = np.real(np.asarray(p.eps_grid)).astype(float)
    for attempt in range(max_refine + 1):
        if path.affine:
            mats = eps[:, None, None] * path.slope + path.intercept
        else:
            mats = path.endpoint
        f = np.linalg.det(left @ mats @ right)
        af = np.abs(f)
        median = np.median(af)
        step = np.min(np.diff(eps)) if eps.size > 1 else 1.0
        cands = [k for k in range(eps.size)
                 if (k == 0 or af[k] <= af[k - 1]) and (k == eps.size - 1 or af[k] <= af[k + 1])]
        zeros = []
        for k in cands:
            if path.affine:
                x = _newton_affine(path, left, right, eps[k])
                val = abs(np.linalg.det(left @ path.evaluate(x.real) @ right))
                ok = abs(x.imag) <= threshold * max(1.0, abs(x.real)) and val <= threshold * median
            else:
                x = _interp_root(eps, f, k)
                ok = x is not None and abs(x.imag) <= step and abs(x.real - eps[k]) <= step
            if ok and eps[0] - step <= x.real <= eps[-1] + step:
                zeros.append(float(x.real))
        zeros = _dedupe(sorted(zeros), 1e-9 * max(1.0, np.max(np.abs(eps))))
        if not path.affine or boundary != "identity" or len(zeros) >= p.r_e:
            break
        if attempt < max_refine:
            eps = np.linspace(eps[0], eps[-1], 2 * eps.size - 1)
    if path.affine and boundary == "identity" and len(zeros) < p.r_e:
        warnings.warn(f"found {len(zeros)} of {p.r_e} zeros; refine or widen eps_grid", UnresolvedZerosWarning)
    return np.array(zeros)


def _dedupe(xs, tol):
    out = []
    for x in xs:
        if not out or x - out[-1] > tol:
            out.append(x)
    return out


def sample_goe_endpoint(r_e, r, lambda_stats, seed, use_K_form=True, variance_scale=None):
    """Symmetric ``r_e x r_e`` matrix distributed as ``Re(B_1 - A_1)``.

    ``use_K_form``: ``(h^2 sigma/sqrt(r+1)) (K + b I)`` with ``K`` symmetric,
    ``E K_ii^2 = 5/4``, ``E K_ij^2 = 1`` and ``b`` standard normal. Otherwise
    ``A_1, B_1`` are drawn with covariance scale ``h^4 sigma^2/(r+1)``.
    """
    if r < r_e:
        raise ConfigurationError("need r >= r_e")
    v = lambda_stats.h ** 4 * lambda_stats.sigma2 / (r + 1) if variance_scale is None else variance_scale
    rng = np.random.default_rng(seed)
    if use_K_form:
        g = rng.standard_normal((r_e, r_e))
        k = np.triu(g, 1)
        k = k + k.T
        k[np.diag_indices(r_e)] = np.sqrt(1.25) * rng.standard_normal(r_e)
        b = rng.standard_normal()
        return np.sqrt(v) * (k + b * np.eye(r_e))
    da, db = _increments(rng, r_e, 1.0, v, 1)
    out = np.real(db[0] - da[0])
    return (out + out.T) / 2


def sample_goe_endpoints(r_e, r, lambda_stats, seed, count, use_K_form=True, variance_scale=None):
    """``count`` independent draws of :func:`sample_goe_endpoint` in one batch, shape ``(count, r_e, r_e)``."""
    if r < r_e:
        raise ConfigurationError("need r >= r_e")
    v = lambda_stats.h ** 4 * lambda_stats.sigma2 / (r + 1) if variance_scale is None else variance_scale
    rng = np.random.default_rng(seed)
    if use_K_form:
        k = np.triu(rng.standard_normal((count, r_e, r_e)), 1)
        k = k + np.swapaxes(k, 1, 2)
        idx = np.arange(r_e)
        k[:, idx, idx] = np.sqrt(1.25) * rng.standard_normal((count, r_e)) + rng.standard_normal(count)[:, None]
        return np.sqrt(v) * k
    da, db = _increments(rng, r_e, 1.0, v, count)
    out = np.real(db - da)
    return (out + np.swapaxes(out, 1, 2)) / 2


def write_path(path, directory, stem=None):
    """``<stem>.json`` manifest and ``<stem>.csv`` with columns
    ``eps_index,eps,t_index,t,row,col,re,im`` (row-major matrix entries)."""
    stem = os.path.join(directory, stem or f"sde_re{path.params.r_e}_seed{path.seed}")
    rows = []
    for e, eps in enumerate(np.real(path.params.eps_grid)):
        for k, t in enumerate(path.times):
            mat = path.values[e, k]
            for i in range(mat.shape[0]):
                for j in range(mat.shape[1]):
                    rows.append((e, float(eps), k, float(t), i, j, float(mat[i, j].real), float(mat[i, j].imag)))
    write_csv(stem + ".csv", ["eps_index", "eps", "t_index", "t", "row", "col", "re", "im"], rows)
    write_json(stem + ".json", {"params": path.params.to_dict(), "seed": path.seed,
                                "dt": 1.0 / path.params.t_steps, "affine": path.affine})
    return stem + ".csv", stem + ".json"


def write_matrix(matrix, path):
    """Row-major CSV ``row,col,re,im``."""
    m = np.asarray(matrix)
    write_csv(path, ["row", "col", "re", "im"],
              ((i, j, float(np.real(m[i, j])), float(np.imag(m[i, j]))) for i in range(m.shape[0]) for j in range(m.shape[1])))


def with_noise_scale(params, variance_scale):
    return replace(params, variance_scale=variance_scale)

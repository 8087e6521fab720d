"""Transfer matrices of the antitree Anderson model.

For slice ``i`` the potential block ``V_i`` (``r*s`` values, rows of ``s``)
enters only through the harmonic means

    v_j(z) = ( (1/s) sum_k 1/(z - v_{i,j,k}) )**-1,   j = 1..r

and the transfer matrix acting on ``(u_{i}, u_{i-1})`` is

    T_i(z) = [[diag(v(z)) - w I - D_r, -I], [I, 0]]

with ``D_r`` the Dirichlet path adjacency on ``r`` points. For ``|z|``
outside the range of the potential, ``z`` is an eigenvalue of ``H`` iff the
upper-left ``r x r`` corner of ``T_n ... T_1`` is singular.
"""
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.linalg as la
from scipy import optimize

from .disorder import _check_lambda, expected_harmonic_mean, harmonic_average
from .errors import (
    ConfigurationError,
    DomainError,
    GridTooCoarseError,
    MultiplicityWarning,
    ReturnTimeWarning,
    SingularityError,
)
from .graph import path_adjacency

PARABOLIC_TOL = 1e-8


def symplectic_form(r):
    eye = np.eye(r)
    zero = np.zeros((r, r))
    return np.block([[zero, -eye], [eye, zero]])


@dataclass
class TransferMatrix:
    """A transfer matrix or a product of them.

    For products ``entries`` may carry a positive scale factor: the actual
    product is ``entries * exp(log_scale)``.
    """

    entries: np.ndarray
    z: complex
    slice: int = None
    log_scale: float = 0.0

    @property
    def dimension(self):
        return self.entries.shape[0]

    @property
    def r(self):
        return self.dimension // 2

    @property
    def matrix(self):
        return self.entries * np.exp(self.log_scale)

    def det(self):
        sign, logdet = np.linalg.slogdet(self.entries)
        return sign * np.exp(logdet + self.dimension * self.log_scale)

    def corner(self):
        return self.entries[: self.r, : self.r]

    def symplectic_defect(self):
        """``max|T^T J T - J|`` relative to ``|T|^2`` (``T`` as stored)."""
        j = symplectic_form(self.r)
        t = self.entries
        return np.max(np.abs(t.T @ j @ t - j * np.exp(-2 * self.log_scale))) / max(np.max(np.abs(t)) ** 2, 1.0)


def effective_potential_block(block, z, slice_index=None):
    """Harmonic mean ``((1/s) sum 1/(z - v_k))**-1`` of one block.

    When real ``z`` equals a potential value the analytic extension (zero) is
    returned; a vanishing harmonic sum is a pole and raises.
    """
    x = z - np.asarray(block)
    if np.any(x == 0):
        return 0.0 * z
    inv = 1.0 / x
    total = inv.mean()
    if abs(total) <= 1e-14 * np.max(np.abs(inv)):
        raise SingularityError(f"harmonic sum vanishes at z={z!r}", slice_index)
    return 1.0 / total


def _effective_potentials(potential, r, s, z):
    """Harmonic means for every (slice, row) block; ``z`` scalar or 1-d array.

    Returns shape ``(len(z), n, r)`` (or ``(n, r)`` for scalar ``z``).
    """
    v = np.asarray(potential, dtype=float).reshape(-1, r, s)
    zz = np.atleast_1d(z)
    x = zz[:, None, None, None] - v[None]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / x
        total = inv.mean(axis=-1)
        hit = np.any(x == 0, axis=-1)
        scale = np.max(np.abs(np.where(hit[..., None], 0, inv)), axis=-1)
        pole = (~hit) & (np.abs(total) <= 1e-14 * scale)
        if np.any(pole):
            k = np.argwhere(pole)[0]
            raise SingularityError(f"harmonic sum vanishes at z={zz[k[0]]!r}", int(k[1]) + 1)
        out = np.where(hit, 0.0, 1.0 / np.where(hit, 1.0, total))
    return out if np.ndim(z) else out[0]


def _check_slice(p, potential_slice):
    potential_slice = np.asarray(potential_slice, dtype=float)
    if potential_slice.shape != (p.r * p.s,):
        raise ConfigurationError(f"slice potential must have length r*s = {p.r * p.s}")
    return potential_slice


def transfer_matrix(p, potential_slice, z, slice_index=None):
    potential_slice = _check_slice(p, potential_slice)
    r = p.r
    vz = np.array([effective_potential_block(b, z, slice_index) for b in potential_slice.reshape(r, p.s)])
    upper = np.diag(vz) - p.w * np.eye(r) - path_adjacency(r)
    t = np.block([[upper, -np.eye(r)], [np.eye(r), np.zeros((r, r))]])
    if np.iscomplexobj(z) and np.imag(z) != 0:
        t = t.astype(complex)
    else:
        t = t.real
    return TransferMatrix(t, z, slice_index)


def _slices(p, potential):
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (p.dimension,):
        raise ConfigurationError(f"potential must have length n*r*s = {p.dimension}")
    return potential.reshape(p.n, p.r * p.s)


def transfer_product(p, potential, z, normalize=True):
    """Ordered product ``T_n ... T_1``; with ``normalize`` a running scalar keeps entries O(1)."""
    prod = None
    log_scale = 0.0
    for i, sl in enumerate(_slices(p, potential), start=1):
        t = transfer_matrix(p, sl, z, i).entries
        prod = t if prod is None else t @ prod
        if normalize:
            m = np.max(np.abs(prod))
            prod = prod / m
            log_scale += np.log(m)
    return TransferMatrix(prod, z, None, log_scale)


def _qr_secular(p, potential, zs):
    """Batched QR-stabilized secular function.

    Propagates ``X [I; 0]`` and re-orthonormalizes after each slice. Returns
    ``det(Q_top)`` and the accumulated ``log prod det R``; the secular
    determinant equals ``det(Q_top) * exp(logscale)``.
    """
    r = p.r
    zs = np.atleast_1d(zs)
    veff = _effective_potentials(potential, r, p.s, zs)
    lap = path_adjacency(r)
    dtype = complex if np.iscomplexobj(veff) else float
    top = np.broadcast_to(np.eye(r, dtype=dtype), (zs.size, r, r)).copy()
    bot = np.zeros_like(top)
    logscale = np.zeros(zs.size)
    for i in range(p.n):
        new_top = veff[:, i, :, None] * top - p.w * top - lap @ top - bot
        y = np.concatenate((new_top, top), axis=1)
        q, rr = np.linalg.qr(y)
        d = np.diagonal(rr, axis1=1, axis2=2)
        phase = d / np.abs(d)
        q = q * phase[:, None, :]
        logscale += np.sum(np.log(np.abs(d)), axis=1)
        top, bot = q[:, :r, :], q[:, r:, :]
    return np.linalg.det(top), logscale, top


def secular_value(p, potential, lam, method="qr", return_log_scale=False):
    """Determinant of the upper-left ``r x r`` corner of the transfer product.

    The value is divided by a positive, logged scale (``exp(log_scale)``);
    zeros and signs are unchanged. ``method`` is ``"qr"`` (orthonormalized
    propagation of the first ``r`` columns) or ``"direct"`` (full product with
    scalar normalization).
    """
    if method == "direct":
        prod = transfer_product(p, potential, lam, normalize=True)
        val = np.linalg.det(prod.corner())
        log_scale = p.r * prod.log_scale
    elif method == "qr":
        det, log_scale, _ = _qr_secular(p, potential, lam)
        val, log_scale = det[0], log_scale[0]
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    if np.isrealobj(val) or np.imag(lam) == 0:
        val = float(np.real(val))
    return (val, float(log_scale)) if return_log_scale else val


def _kernel_dim(top, tol=1e-6):
    sv = np.linalg.svd(top, compute_uv=False)
    return int(np.sum(sv < tol * max(sv[0], 1e-300)))


@dataclass
class ZeroScan:
    zeros: np.ndarray
    residuals: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    log_scales: np.ndarray = field(repr=False, default=None)


def locate_zeros(p, potential, window, grid_step=None, xtol=1e-13, oracle=None, min_ratio=1e-8):
    """Zeros of the secular function in ``window``, with multiplicity.

    Simple zeros are bracketed by sign changes on a uniform grid and refined
    with Brent's method. A local minimum of ``|f|`` without sign change is
    refined by bounded minimization and accepted as an even-order zero when
    ``|f|`` there drops below ``min_ratio`` times its grid neighbours.
    Multiplicity comes from the kernel dimension of the corner matrix.

    ``oracle``: reference eigenvalues; a count mismatch in the window raises
    :class:`GridTooCoarseError`.
    """
    lo, hi = map(float, window)
    if not hi > lo:
        raise ConfigurationError("window must satisfy lo < hi")
    v = np.asarray(potential, dtype=float)
    if not (lo > v.max() or hi < v.min()):
        raise DomainError(f"window {window} intersects the potential range [{v.min()}, {v.max()}]")
    if grid_step is None:
        grid_step = (hi - lo) / (20.0 * p.n * p.r)
    npts = int(np.ceil((hi - lo) / grid_step)) + 1
    grid = np.linspace(lo, hi, max(npts, 3))
    det, logs, _ = _qr_secular(p, v, grid)
    f = np.real(det)

    def g(x):
        return float(np.real(_qr_secular(p, v, x)[0][0]))

    def true_abs(x, ref):
        d, l, _ = _qr_secular(p, v, x)
        return abs(d[0]) * np.exp(l[0] - ref)

    found, resid = [], []

    def add(x0, mult_default):
        d, _, top = _qr_secular(p, v, x0)
        k = _kernel_dim(top[0])
        mult = k if (k >= 1 and k % 2 == mult_default % 2) else mult_default
        found.extend([x0] * mult)
        resid.extend([abs(float(np.real(d[0])))] * mult)

    for k in range(len(grid)):
        if f[k] == 0.0:
            add(grid[k], 1)
    for k in range(len(grid) - 1):
        if f[k] * f[k + 1] < 0:
            add(optimize.brentq(g, grid[k], grid[k + 1], xtol=xtol, rtol=4 * np.finfo(float).eps), 1)
    af = np.abs(f)
    for k in range(1, len(grid) - 1):
        if f[k] == 0 or f[k - 1] * f[k] <= 0 or f[k] * f[k + 1] <= 0:
            continue
        if af[k] < af[k - 1] and af[k] < af[k + 1]:
            ref = logs[k]
            res = optimize.minimize_scalar(
                lambda x: true_abs(x, ref), bounds=(grid[k - 1], grid[k + 1]), method="bounded",
                options={"xatol": xtol},
            )
            neighbour = min(af[k - 1] * np.exp(logs[k - 1] - ref), af[k + 1] * np.exp(logs[k + 1] - ref))
            if res.fun <= min_ratio * neighbour:
                add(res.x, 2)
    order = np.argsort(found)
    zeros = np.array(found)[order] if found else np.array([])
    residuals = np.array(resid)[order] if resid else np.array([])
    if oracle is not None:
        o = np.asarray(oracle)
        expected = int(np.sum((o > lo) & (o < hi)))
        if expected != zeros.size:
            raise GridTooCoarseError(
                f"scan found {zeros.size} zeros but the oracle has {expected} eigenvalues in {window}; "
                "reduce grid_step"
            )
    return ZeroScan(zeros, residuals, grid, f, logs)


def eigenvalue_scan(p, potential, window, grid_step=None, oracle=None):
    """Eigenvalues of ``H`` in ``window`` (outside the potential range) from the secular condition."""
    return locate_zeros(p, potential, window, grid_step=grid_step, oracle=oracle).zeros


def meanfield_block(p):
    """``A^w_{r,s}``: the ``rs x rs`` diagonal block of the antitree adjacency."""
    strip_r = path_adjacency(p.r) + p.w * np.eye(p.r)
    return np.kron(strip_r, np.ones((p.s, p.s))) / p.s


def meanfield_isometry(r, s):
    """``Phi``: ``rs x r`` with orthonormal columns ``e_j (x) 1_s / sqrt(s)``."""
    return np.kron(np.eye(r), np.ones((s, 1)) / np.sqrt(s))


def _psi_matrix(a_rs, v_i, phi, z):
    m = z * np.eye(len(v_i)) - a_rs - np.diag(v_i)
    g = la.solve(m, phi)
    return g @ la.inv(phi.T @ g)


def reconstruct_eigenvector(p, potential, lam, u1=None, extension_eps=1e-7, force_extension=False,
                            near_tol=1e-9):
    """Eigenvector for a located zero ``lam`` of the secular function.

    The mean-field amplitudes ``u_i`` follow from the transfer recursion with
    ``u_0 = 0``; then ``psi_i = Psi_i u_i`` with
    ``Psi_i = (lam - A - V_i)^-1 Phi (Phi^T (lam - A - V_i)^-1 Phi)^-1``.
    Where ``lam`` is (numerically) an eigenvalue of ``A + V_i`` the matrix
    ``Psi_i`` is evaluated at ``lam + extension_eps`` instead, as its
    analytic extension is continuous there.

    ``u1``: kernel vector of the corner matrix; computed when omitted. A
    kernel of dimension ``k > 1`` triggers :class:`MultiplicityWarning` and an
    ``nrs x k`` basis is returned. Results have unit norm (columnwise).
    """
    slices = _slices(p, potential)
    r = p.r
    if u1 is None:
        prod = transfer_product(p, potential, lam, normalize=True)
        corner = prod.corner()
        _, sv, vh = np.linalg.svd(corner)
        k = max(1, int(np.sum(sv < 1e-8 * sv[0])))
        if k > 1:
            warnings.warn(f"corner kernel has dimension {k} at lambda={lam}", MultiplicityWarning)
            basis = [reconstruct_eigenvector(p, potential, lam, vh[-j - 1].conj(), extension_eps,
                                             force_extension, near_tol) for j in range(k)]
            q, _ = np.linalg.qr(np.column_stack(basis))
            return q
        u1 = vh[-1].conj()
    u1 = np.asarray(u1)
    if u1.shape != (r,):
        raise ConfigurationError(f"u1 must have length r = {r}")
    a_rs = meanfield_block(p)
    phi = meanfield_isometry(r, p.s)
    us = [np.zeros(r, dtype=u1.dtype), u1]
    for i, sl in enumerate(slices[:-1], start=1):
        t = transfer_matrix(p, sl, lam, i).entries
        nxt = t @ np.concatenate((us[-1], us[-2]))
        us.append(nxt[:r])
    psi = []
    for i, sl in enumerate(slices):
        z = lam
        if force_extension:
            z = lam + extension_eps
        else:
            ev = la.eigvalsh(a_rs + np.diag(sl))
            if np.min(np.abs(ev - lam)) <= near_tol * max(1.0, np.max(np.abs(ev))):
                z = lam + extension_eps
        psi.append(_psi_matrix(a_rs, sl, phi, z) @ us[i + 1])
    vec = np.concatenate(psi)
    return vec / np.linalg.norm(vec)


@dataclass(frozen=True)
class EffectiveEnergy:
    E: float
    in_interval: bool
    h: float


def effective_energy(spec, lam, w):
    """``E = h_lam - w`` and whether ``lam`` lies in ``I_{w,nu}`` (``|E| < 4``)."""
    h = harmonic_average(spec, lam).h
    e = h - w
    return EffectiveEnergy(E=e, in_interval=bool(abs(e) < 4), h=h)


class ParabolicChannelError(DomainError):
    pass


@dataclass
class ChannelData:
    """Channel decomposition of the free transfer matrix at effective energy ``E``.

    Channels are the eigenvectors of ``D_r`` (columns of ``O``), reordered so
    that the ``r_h`` hyperbolic channels come first: for ``E <= 0`` in the
    natural order ``j = 1..r``, for ``E > 0`` reversed (``j = r..1``), which is
    the mirror ``E -> -E``, ``a_j -> -a_{r+1-j}``. ``order`` lists the original
    1-based indices and ``a``, ``O`` follow the new order.

    ``Q`` has row blocks ``(r_h, r_e, r_h, r_e)`` and column blocks
    ``(r_h, r_e, r_e, r_h)`` so that ``Q^-1 Ot^T T0 Ot Q = diag(Gamma, conj(Z), Z, Gamma^-1)``.
    """

    lam: float
    E: float
    r: int
    r_h: int
    r_e: int
    order: np.ndarray
    a: np.ndarray
    gamma: np.ndarray
    z: np.ndarray
    O: np.ndarray
    Q: np.ndarray
    U: np.ndarray

    @property
    def O_tilde(self):
        return la.block_diag(self.O, self.O)

    @property
    def Z(self):
        return np.diag(self.z)

    def T_r(self):
        return np.diag(np.concatenate((self.gamma, np.diag(self.U), 1.0 / self.gamma)))

    def free_transfer(self):
        """Transfer matrix with every harmonic mean equal to ``E + w``."""
        r = self.r
        upper = self.E * np.eye(r) - path_adjacency(r)
        return np.block([[upper, -np.eye(r)], [np.eye(r), np.zeros((r, r))]])

    def conjugate(self, t):
        """``Q^-1 Ot^T t Ot Q``."""
        ot = self.O_tilde
        return la.solve(self.Q, ot.T @ np.asarray(t) @ ot @ self.Q)

    def W_r(self):
        r = self.r
        return la.solve(self.Q, la.block_diag(np.eye(r), np.zeros((r, r))) @ self.Q)

    def conjugation_error(self):
        return float(np.max(np.abs(self.conjugate(self.free_transfer()) - self.T_r())))

    def to_dict(self):
        def cx(a):
            a = np.asarray(a)
            return np.stack((a.real, a.imag), axis=-1).tolist()

        return {
            "lambda": self.lam, "E": self.E, "r": self.r, "r_h": self.r_h, "r_e": self.r_e,
            "order": self.order.tolist(), "a": self.a.tolist(), "gamma": self.gamma.tolist(),
            "z": cx(self.z), "O": self.O.tolist(), "Q": cx(self.Q), "U": cx(np.diag(self.U)),
        }


def dirichlet_modes(r):
    """Eigenvalues ``a_j = 2 cos(pi j/(r+1))`` and the orthogonal sine matrix ``O``."""
    j = np.arange(1, r + 1)
    o = np.sqrt(2.0 / (r + 1)) * np.sin(np.pi * np.outer(j, j) / (r + 1))
    return 2 * np.cos(np.pi * j / (r + 1)), o


def channels_at_energy(E, r, lam=np.nan, tol=PARABOLIC_TOL):
    a, o = dirichlet_modes(r)
    if np.min(np.abs(np.abs(E - a) - 2)) <= tol:
        raise ParabolicChannelError(f"E={E!r} has a parabolic channel for r={r}")
    order = np.arange(1, r + 1) if E <= 0 else np.arange(r, 0, -1)
    a = a[order - 1]
    o = o[:, order - 1]
    e = E - a
    hyp = np.abs(e) > 2
    r_h = int(hyp.sum())
    r_e = r - r_h
    if not np.all(hyp[:r_h]):
        raise AssertionError("hyperbolic channels are not leading")
    eh = e[:r_h]
    gamma = (eh - np.sign(eh) * np.sqrt(eh * eh - 4)) / 2
    ee = e[r_h:]
    z = ee / 2 + 1j * np.sqrt(1 - ee * ee / 4)
    ih, ie = np.eye(r_h), np.eye(r_e)
    zh_e = np.zeros((r_h, r_e))
    ze_h = zh_e.T
    zh = np.zeros((r_h, r_h))
    ze = np.zeros((r_e, r_e))
    q = np.block([
        [np.diag(gamma), zh_e, zh_e, np.diag(1 / gamma) if r_h else zh],
        [ze_h, np.diag(z.conj()), np.diag(z), ze_h],
        [ih, zh_e, zh_e, ih],
        [ze_h, ie, ie, ze_h],
    ]).astype(complex)
    u = np.diag(np.concatenate((z.conj(), z)))
    return ChannelData(lam=lam, E=float(E), r=r, r_h=r_h, r_e=r_e, order=order, a=a, gamma=gamma, z=z,
                       O=o, Q=q, U=u)


def channel_decomposition(spec, lam, w, r, tol=PARABOLIC_TOL):
    ee = effective_energy(spec, lam, w)
    if not ee.in_interval:
        raise DomainError(f"lambda={lam!r} is outside I_(w,nu): |E|={abs(ee.E)} >= 4")
    return channels_at_energy(ee.E, r, lam=lam, tol=tol)


def chaotic_check(z, tol=1e-9):
    """Check the non-resonance conditions on unit phases ``z``.

    Fails when, within ``tol``, ``z_i z_j z_k z_l = 1``,
    ``conj(z_i) z_j z_k z_l = 1`` or ``conj(z_i z_j) z_k z_l = 1`` with
    ``{i, j} != {k, l}``. Returns ``(True, None)`` or ``(False, witness)``
    with ``witness = (condition, (i, j, k, l))`` (0-based indices).
    """
    z = np.asarray(z, dtype=complex).ravel()
    if np.any(np.abs(np.abs(z) - 1) > 1e-12) or np.any(z.imag <= 0):
        raise DomainError("phases must have modulus one and positive imaginary part")
    n = z.size
    for i, j, k, l in product(range(n), repeat=4):
        if abs(z[i] * z[j] * z[k] * z[l] - 1) <= tol:
            return False, ("zzzz", (i, j, k, l))
        if abs(z[i].conjugate() * z[j] * z[k] * z[l] - 1) <= tol:
            return False, ("z*zzz", (i, j, k, l))
        if {i, j} != {k, l} and abs((z[i] * z[j]).conjugate() * z[k] * z[l] - 1) <= tol:
            return False, ("z*z*zz", (i, j, k, l))
    return True, None


def find_return_times(Z, target, count, tol, horizon, chunk=1 << 16):
    """Integers ``1 <= n <= horizon`` with ``max|Z^(n+1) - target| < tol``, increasing.

    ``Z`` and ``target`` are diagonal unitaries (matrices or their diagonals).
    Returns at most ``count`` values; fewer trigger :class:`ReturnTimeWarning`.
    """
    z = np.asarray(Z)
    z = np.diag(z) if z.ndim == 2 else z
    t = np.asarray(target)
    t = np.diag(t) if t.ndim == 2 else np.broadcast_to(t, z.shape)
    theta = np.angle(z)
    found = []
    start = 1
    while start <= horizon and len(found) < count:
        ns = np.arange(start, min(start + chunk, horizon + 1))
        powers = np.exp(1j * np.outer(ns + 1, theta))
        dist = np.max(np.abs(powers - t), axis=1)
        found.extend(ns[dist < tol].tolist())
        start = ns[-1] + 1
    found = found[:count]
    if len(found) < count:
        warnings.warn(f"only {len(found)} of {count} return times within horizon {horizon}", ReturnTimeWarning)
    return found


def scaled_energy(spec, lam, eps, n):
    """``lam + eps / (n (h^2 sigma2 + 1))``."""
    st = harmonic_average(spec, lam)
    return lam + eps / (n * (st.h ** 2 * st.sigma2 + 1.0))


def _check_scaled(p, spec, lam, eps, m, n):
    if p.s != m * n:
        raise ConfigurationError(f"s must equal m*n = {m * n}, got s={p.s}")
    z = scaled_energy(spec, lam, eps, n)
    try:
        _check_lambda(spec, z)
    except DomainError as exc:
        raise DomainError(f"scaled energy {z!r} left the admissible set") from exc
    if not effective_energy(spec, z, p.w).in_interval:
        raise DomainError(f"scaled energy {z!r} left I_(w,nu)")
    return z


def scaled_transfer(p, spec, lam, eps, m, n, potential_slice, which="raw", channels=None):
    """Transfer matrix at the scaled energy, raw or in the fixed channel basis at ``lam``."""
    z = _check_scaled(p, spec, lam, eps, m, n)
    t = transfer_matrix(p, potential_slice, z)
    if which == "raw":
        return t
    if which != "conjugated":
        raise ConfigurationError(f"which must be 'raw' or 'conjugated', got {which!r}")
    if channels is None:
        channels = channel_decomposition(spec, lam, p.w, p.r)
    return TransferMatrix(channels.conjugate(t.entries), z, t.slice)


@dataclass
class TransferParts:
    """Pieces of the conjugated transfer matrix at the scaled energy.

    ``T = T_r + Ycal / sqrt(mn) + (eps/n + W/(mn)) W_r + residual``.
    """

    T: np.ndarray
    T_r: np.ndarray
    Ycal: np.ndarray
    Y: np.ndarray
    W: float
    W_r: np.ndarray
    residual: np.ndarray


def transfer_decomposition(p, spec, lam, eps, m, n, potential_slice, channels=None, w_samples=200_000, seed=0):
    """Split the conjugated transfer matrix into its deterministic, noise and drift parts.

    ``W = s (E v^z - h_z)`` is exact for discrete laws and a Monte Carlo
    estimate otherwise. The residual is non-random and of order ``(eps/n)^2``.
    """
    z = _check_scaled(p, spec, lam, eps, m, n)
    if channels is None:
        channels = channel_decomposition(spec, lam, p.w, p.r)
    s = p.s
    potential_slice = _check_slice(p, potential_slice)
    vz = np.array([effective_potential_block(b, z) for b in potential_slice.reshape(p.r, s)])
    hz = harmonic_average(spec, z).h
    W = s * (expected_harmonic_mean(spec, z, s, mc_samples=w_samples, seed=seed) - hz)
    Y = np.sqrt(s) * (vz - hz - W / s)
    r = p.r
    t = channels.conjugate(transfer_matrix(p, potential_slice, z).entries)
    ycal = channels.conjugate(la.block_diag(np.diag(Y), np.zeros((r, r))))
    t_r = channels.T_r()
    w_r = channels.W_r()
    resid = t - t_r - ycal / np.sqrt(m * n) - (eps / n + W / (m * n)) * w_r
    return TransferParts(T=t, T_r=t_r, Ycal=ycal, Y=Y, W=W, W_r=w_r, residual=resid)

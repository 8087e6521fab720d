"""Point-process utilities: rescaling, unit-mean gaps, KS distances to the
Wigner surmise / exponential references and counting statistics."""
from dataclasses import dataclass

import numpy as np
from scipy import stats as sst

from ._io import write_csv, write_json
from .errors import ConfigurationError, DomainError

REFERENCES = ("wigner_surmise_beta1", "poisson_exp")


class InsufficientPointsError(DomainError):
    pass


@dataclass(frozen=True)
class RescaledProcess:
    center: float
    normalization: float
    points: np.ndarray

    def __post_init__(self):
        if not self.normalization > 0:
            raise ConfigurationError("normalization must be positive")
        object.__setattr__(self, "points", np.sort(np.asarray(self.points, dtype=float)))

    def count(self, lo, hi):
        return int(np.searchsorted(self.points, hi, "right") - np.searchsorted(self.points, lo, "left"))


def rescale_spectrum(eigenvalues, lam, normalization):
    """``normalization * (eigenvalues - lam)``, sorted."""
    return RescaledProcess(float(lam), float(normalization), normalization * (np.asarray(eigenvalues, dtype=float) - lam))


def theorem_normalization(stats, n, s, r, r_e):
    """``(h^2 sigma^2 + 1) sqrt(n s (r+1) r_e) / (h^2 sigma)``."""
    return (stats.h ** 2 * stats.sigma2 + 1) * np.sqrt(n * s * (r + 1) * r_e) / (stats.h ** 2 * np.sqrt(stats.sigma2))


def transfer_normalization(stats, n):
    """``n (h^2 sigma^2 + 1)``: the energy scale of the scaled transfer matrices."""
    return n * (stats.h ** 2 * stats.sigma2 + 1)


def ids_normalization(ensemble_eigenvalues, lam, half_width):
    """Mean number of eigenvalues per unit energy in ``[lam - half_width, lam + half_width]``.

    Rescaling by this value gives unit mean density near ``lam`` (integrated
    density of states unfolding).
    """
    counts = [np.sum(np.abs(np.asarray(e) - lam) <= half_width) for e in ensemble_eigenvalues]
    density = np.mean(counts) / (2 * half_width)
    if density <= 0:
        raise InsufficientPointsError(f"no eigenvalues within {half_width} of {lam}")
    return float(density)


def _unit_mean(gaps):
    gaps = np.asarray(gaps, dtype=float)
    return gaps / gaps.mean()


def nearest_neighbor_gaps(proc, window):
    """Consecutive gaps of the points in ``[-window, window]``, unit mean."""
    pts = proc.points if isinstance(proc, RescaledProcess) else np.sort(np.asarray(proc, dtype=float))
    pts = pts[np.abs(pts) <= window]
    if pts.size < 2:
        raise InsufficientPointsError(f"{pts.size} points in [-{window}, {window}]; need at least 2")
    return _unit_mean(np.diff(pts))


def bulk_gaps(points, fraction=0.5, normalize=True):
    """Gaps among the central ``fraction`` of the sorted points (unit mean if ``normalize``)."""
    pts = np.sort(np.asarray(points, dtype=float))
    k = pts.size
    cut = int(round(k * (1 - fraction) / 2))
    core = pts[cut:k - cut]
    if core.size < 2:
        raise InsufficientPointsError(f"{core.size} bulk points; need at least 2")
    g = np.diff(core)
    return _unit_mean(g) if normalize else g


def pooled_gaps(gap_lists):
    """Concatenate per-realization unit-mean gaps and renormalize to unit mean."""
    return _unit_mean(np.concatenate([np.asarray(g, dtype=float) for g in gap_lists]))


def wigner_surmise_cdf(g):
    g = np.clip(np.asarray(g, dtype=float), 0, None)
    return 1.0 - np.exp(-np.pi * g * g / 4)


def wigner_surmise_pdf(g):
    g = np.clip(np.asarray(g, dtype=float), 0, None)
    return np.pi / 2 * g * np.exp(-np.pi * g * g / 4)


def sample_wigner_surmise(count, seed):
    u = np.random.default_rng(seed).random(count)
    return np.sqrt(-4 * np.log1p(-u) / np.pi)


def ks_distance(sample, reference):
    """Sup-distance between the empirical CDF of ``sample`` and ``reference``.

    ``reference`` is ``"wigner_surmise_beta1"``, ``"poisson_exp"`` (Exp(1)) or
    another sample (two-sample statistic).
    """
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise ConfigurationError("sample must be nonempty")
    if isinstance(reference, str):
        if reference == "wigner_surmise_beta1":
            cdf = wigner_surmise_cdf
        elif reference == "poisson_exp":
            cdf = sst.expon.cdf
        else:
            raise ConfigurationError(f"unknown reference {reference!r}; expected one of {REFERENCES}")
        return float(sst.kstest(sample, cdf).statistic)
    other = np.asarray(reference, dtype=float)
    if other.size == 0:
        raise ConfigurationError("reference sample must be nonempty")
    return float(sst.ks_2samp(sample, other).statistic)


def gap_density_at_zero(gaps, width=0.25):
    """Fraction of gaps below ``width`` divided by ``width``."""
    gaps = np.asarray(gaps, dtype=float)
    return float(np.mean(gaps < width) / width)


@dataclass(frozen=True)
class CountStats:
    interval: tuple
    mean: float
    var: float
    mean_se: float
    var_se: float
    observed: int


def counting_statistics(proc, intervals, ensemble):
    """Mean and variance (with SEs) of the number of points per interval over ``ensemble``.

    ``observed`` is the count of ``proc`` itself in each interval.
    """
    if len(ensemble) < 30:
        raise ConfigurationError(f"ensemble size {len(ensemble)} < 30")
    out = []
    for lo, hi in intervals:
        c = np.array([e.count(lo, hi) for e in ensemble], dtype=float)
        k = c.size
        mean = c.mean()
        var = c.var(ddof=1)
        dev2 = (c - mean) ** 2
        out.append(CountStats((float(lo), float(hi)), float(mean), float(var), float(np.sqrt(var / k)),
                              float(dev2.std(ddof=1) / np.sqrt(k)), proc.count(lo, hi) if proc is not None else 0))
    return out


def bootstrap(statistic, groups, reps, seed):
    """Bootstrap replicates of ``statistic(list_of_groups)`` resampling whole groups."""
    rng = np.random.default_rng(seed)
    k = len(groups)
    return np.array([statistic([groups[i] for i in rng.integers(0, k, k)]) for _ in range(reps)])


def gap_histogram(gaps, bins=40, upper=4.0):
    """Rows ``(bin_left, bin_right, count, density)``."""
    counts, edges = np.histogram(gaps, bins=bins, range=(0.0, upper))
    dens = counts / (max(len(gaps), 1) * np.diff(edges))
    return [(float(edges[i]), float(edges[i + 1]), int(counts[i]), float(dens[i])) for i in range(len(counts))]


def write_gap_histogram(path, gaps, bins=40, upper=4.0):
    write_csv(path, ["bin_left", "bin_right", "count", "density"], gap_histogram(gaps, bins, upper))


def ks_report(sample, reference, pass_threshold, mode="le"):
    """``{reference, ks, n, pass_threshold, pass}``; ``mode`` ``le`` passes when ``ks <= threshold``;
    without a threshold ``pass`` is ``None``."""
    ks = ks_distance(sample, reference)
    if pass_threshold is None:
        ok = None
    else:
        ok = bool(ks <= pass_threshold if mode == "le" else ks >= pass_threshold)
    name = reference if isinstance(reference, str) else "empirical"
    return {"reference": name, "ks": ks, "n": int(np.size(sample)), "pass_threshold": pass_threshold, "pass": ok}


def write_ks_report(path, report):
    write_json(path, report)

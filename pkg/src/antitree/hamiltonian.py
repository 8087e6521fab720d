"""Anderson Hamiltonian on the antitree, dense eigensolver oracle and the split
of the spectrum into its mean-field and trivial parts.
"""
import json
import os
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import __version__
from ._io import write_csv, write_json
from .disorder import DisorderSpec, sample_potential
from .errors import CapacityError, ConfigurationError
from .graph import AntitreeParams, SymmetricOperator, build_antitree_adjacency, build_strip

DENSE_CAP = 8192


@dataclass(frozen=True)
class SpectralSample:
    params: AntitreeParams
    spec: DisorderSpec
    seed: int
    eigenvalues: np.ndarray
    trivial_part: np.ndarray
    wall_time: float = 0.0

    def manifest(self):
        return {
            "params": self.params.to_dict(),
            "spec": self.spec.to_dict(),
            "seed": self.seed,
            "wall_time": self.wall_time,
        }


def hamiltonian_from_potential(p, potential):
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (p.dimension,):
        raise ConfigurationError(f"potential must have length n*r*s = {p.dimension}")
    adj = build_antitree_adjacency(p)
    return SymmetricOperator(adj.matrix + sp.diags(potential))


def assemble_hamiltonian(p, spec, seed):
    """``A^w + diag(v)`` with ``v`` drawn by :func:`sample_potential` in site order."""
    return hamiltonian_from_potential(p, sample_potential(spec, p.dimension, seed))


def full_spectrum(H, cap=DENSE_CAP):
    """All eigenvalues, ascending, from a dense symmetric solver."""
    if isinstance(H, SymmetricOperator):
        dim = H.dimension
        dense = None
    else:
        dense = np.asarray(H, dtype=float)
        dim = dense.shape[0]
    if dim > cap:
        raise CapacityError(f"dense diagonalization of dimension {dim} exceeds cap {cap}")
    if dense is None:
        dense = H.to_dense()
    return la.eigh(dense, eigvals_only=True, check_finite=False)


def _value_groups(block, tol):
    """Group equal values of one block; returns (values, multiplicities) in order of first appearance."""
    order = np.argsort(block, kind="stable")
    sorted_vals = block[order]
    starts = np.concatenate(([0], np.nonzero(np.diff(sorted_vals) > tol)[0] + 1))
    counts = np.diff(np.concatenate((starts, [len(block)])))
    firsts = [order[st:st + c].min() for st, c in zip(starts, counts)]
    rank = np.argsort(firsts)
    return sorted_vals[starts][rank], counts[rank]


def trivial_spectrum_report(p, potential, tol=1e-12):
    """Eigenvalues of ``H`` carried by the complement of the mean-field subspace.

    Each value occurring ``mu >= 2`` times within one ``(slice, row)`` block of
    ``s`` potential values contributes ``mu - 1`` copies.
    """
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (p.dimension,):
        raise ConfigurationError(f"potential must have length n*r*s = {p.dimension}")
    out = []
    for block in potential.reshape(p.n * p.r, p.s):
        vals, counts = _value_groups(block, tol)
        for v, c in zip(vals, counts):
            out.extend([v] * (c - 1))
    return np.array(out)


def meanfield_compression(p, potential, tol=1e-12):
    """Restriction of ``H`` to the invariant subspace generated by the mean-field vectors.

    Within each ``(slice, row)`` block the normalized indicator vectors of
    the distinct potential values span an invariant subspace containing the
    mean-field vector; on its complement ``H`` acts as the potential. The
    returned matrix has one row per (block, distinct value):
    ``H_red[a, b] = W(x_a, x_b) c_a c_b + delta_ab v_a`` where ``W`` is the
    strip weight matrix and ``c_a = sqrt(mu_a / s)``.

    ``spec(H)`` equals ``spec(H_red)`` together with
    :func:`trivial_spectrum_report`. For continuous laws ``H_red`` has full
    size; for the two-point law it has at most ``2 n r`` rows.
    """
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (p.dimension,):
        raise ConfigurationError(f"potential must have length n*r*s = {p.dimension}")
    sites, vals, weights = [], [], []
    for x, block in enumerate(potential.reshape(p.n * p.r, p.s)):
        v, c = _value_groups(block, tol)
        sites.extend([x] * len(v))
        vals.extend(v)
        weights.extend(np.sqrt(c / p.s))
    sites = np.array(sites)
    weights = np.array(weights)
    strip = build_strip(p.n, p.r, p.w).to_dense()
    return strip[np.ix_(sites, sites)] * np.outer(weights, weights) + np.diag(vals)


def spectrum(p, potential, cap=DENSE_CAP):
    """Full spectrum via the mean-field compression plus the trivial part."""
    red = meanfield_compression(p, potential)
    eigs = np.concatenate((full_spectrum(red, cap=cap), trivial_spectrum_report(p, potential)))
    return np.sort(eigs)


def sample_spectrum(p, spec, seed, method="dense", cap=DENSE_CAP):
    """One realization: sorted eigenvalues and the trivial part.

    ``method="dense"`` diagonalizes the full ``nrs x nrs`` matrix;
    ``method="compressed"`` diagonalizes the mean-field compression, which is
    exact and much smaller for discrete laws.
    """
    t0 = time.perf_counter()
    v = sample_potential(spec, p.dimension, seed)
    if method == "dense":
        eigs = full_spectrum(hamiltonian_from_potential(p, v), cap=cap)
    elif method == "compressed":
        eigs = spectrum(p, v, cap=cap)
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    return SpectralSample(p, spec, seed, eigs, trivial_spectrum_report(p, v), time.perf_counter() - t0)


def _stem(sample):
    p = sample.params
    return f"eig_n{p.n}_r{p.r}_s{p.s}_w{p.w:g}_seed{sample.seed}"


def write_spectrum(sample, directory):
    """``<stem>.csv`` with ``index,eigenvalue`` and ``<stem>.json`` manifest."""
    stem = os.path.join(directory, _stem(sample))
    write_csv(stem + ".csv", ["index", "eigenvalue"], ((i, float(e)) for i, e in enumerate(sample.eigenvalues)))
    manifest = sample.manifest()
    manifest["version"] = __version__
    write_json(stem + ".json", manifest)
    return stem + ".csv", stem + ".json"


def read_spectrum(csv_path):
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    json_path = os.path.splitext(csv_path)[0] + ".json"
    with open(json_path) as fh:
        manifest = json.load(fh)
    return data[:, 1], manifest

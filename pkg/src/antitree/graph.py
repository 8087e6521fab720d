"""Weighted graphs: strips, tensor products with the normalized complete graph,
antitree adjacency matrices, the periodic Laplacian and the mean-field projection.

Site order is lexicographic in ``(x1, x2, x3)`` with ``1 <= x1 <= n`` (slice),
``1 <= x2 <= r`` (strip row) and ``1 <= x3 <= s`` (antitree copy), i.e. the
0-based flat index of a site is ``((x1-1)*r + (x2-1))*s + (x3-1)``.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConfigurationError

# Largest total dimension accepted at construction.
MAX_DIMENSION = 50_000_000


@dataclass(frozen=True)
class AntitreeParams:
    n: int
    r: int
    s: int
    w: float = 0.0

    def __post_init__(self):
        for name in ("n", "r", "s"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {val!r}")
        if self.dimension > MAX_DIMENSION:
            raise CapacityError(f"dimension n*r*s = {self.dimension} exceeds {MAX_DIMENSION}")

    @property
    def dimension(self):
        return self.n * self.r * self.s

    def to_dict(self):
        return {"n": self.n, "r": self.r, "s": self.s, "w": self.w}


@dataclass(frozen=True)
class BlockTridiagonal:
    """Block-tridiagonal descriptor with square blocks of equal size.

    ``diagonal`` has one block per block-row; ``offdiagonal[i]`` couples rows
    ``i+1`` (below) and ``i`` and its transpose sits above the diagonal.
    """

    diagonal: tuple
    offdiagonal: tuple

    @property
    def block_size(self):
        return self.diagonal[0].shape[0]

    def to_sparse(self):
        k = len(self.diagonal)
        grid = [[None] * k for _ in range(k)]
        for i, d in enumerate(self.diagonal):
            grid[i][i] = sp.csr_matrix(d)
        for i, o in enumerate(self.offdiagonal):
            grid[i + 1][i] = sp.csr_matrix(o)
            grid[i][i + 1] = sp.csr_matrix(o.T)
        return sp.bmat(grid, format="csr")


class SymmetricOperator:
    """Real symmetric matrix held as sparse CSR, optionally with its block form."""

    def __init__(self, matrix, blocks=None):
        self.matrix = sp.csr_matrix(matrix)
        self.matrix.sum_duplicates()
        self.matrix.sort_indices()
        self.blocks = blocks
        self.matrix.data.setflags(write=False)

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def to_dense(self):
        return self.matrix.toarray()

    def is_symmetric(self):
        diff = self.matrix - self.matrix.T
        return diff.nnz == 0 or np.max(np.abs(diff.data)) == 0

    def __add__(self, other):
        other = other.matrix if isinstance(other, SymmetricOperator) else other
        return SymmetricOperator(self.matrix + other)

    def __repr__(self):
        return f"SymmetricOperator(dimension={self.dimension}, nnz={self.matrix.nnz})"


def path_adjacency(length, periodic=False):
    """Adjacency matrix of the path (or cycle) on ``length`` points.

    For the cycle, ``length == 1`` gives ``[0]`` (no self-loop) and
    ``length == 2`` gives ``[[0, 2], [2, 0]]`` so that every row sums to 2.
    """
    a = np.zeros((length, length))
    idx = np.arange(length - 1)
    a[idx, idx + 1] = 1.0
    a[idx + 1, idx] = 1.0
    if periodic:
        if length == 2:
            a[0, 1] = a[1, 0] = 2.0
        elif length > 2:
            a[0, -1] = a[-1, 0] = 1.0
    return a


def build_strip(n, r, w):
    """Weight matrix of the ``n x r`` strip: 1 on l1-neighbours, ``w`` on the diagonal."""
    if n < 1 or r < 1:
        raise ConfigurationError("n and r must be >= 1")
    m = sp.kron(sp.csr_matrix(path_adjacency(n)), sp.identity(r)) + sp.kron(
        sp.identity(n), sp.csr_matrix(path_adjacency(r))
    )
    m = m + w * sp.identity(n * r)
    return SymmetricOperator(m)


def tensor_antitree(base, s):
    """Tensor product with the complete graph on ``s`` points, edge weights ``1/s``."""
    if s < 1:
        raise ConfigurationError("s must be >= 1")
    base = base.matrix if isinstance(base, SymmetricOperator) else sp.csr_matrix(base)
    # sparse `/ s` multiplies by 1/s; dividing the data keeps entries equal to base(x, y) / s exactly
    m = sp.kron(base, np.ones((s, s)), format="csr")
    m.data = m.data / s
    return SymmetricOperator(m)


def mean_field_block(s):
    """``P_s``: the ``s x s`` matrix with all entries ``1/s``."""
    return np.ones((s, s)) / s


def build_antitree_adjacency(p):
    op = tensor_antitree(build_strip(p.n, p.r, p.w), p.s)
    ps = mean_field_block(p.s)
    strip_r = path_adjacency(p.r) + p.w * np.eye(p.r)
    a_rs = np.kron(strip_r, np.ones((p.s, p.s))) / p.s
    p_rs = np.kron(np.eye(p.r), ps)
    op.blocks = BlockTridiagonal(diagonal=(a_rs,) * p.n, offdiagonal=(p_rs,) * (p.n - 1))
    return op


def build_periodic_laplacian(p, periodic=True):
    """Graph Laplacian (adjacency) of the ``n x r x s`` box.

    Dirichlet in the first two coordinates; periodic in the third unless
    ``periodic=False``. Point weights are zero.
    """
    nr = p.n * p.r
    strip = build_strip(p.n, p.r, 0.0).matrix
    cyc = sp.csr_matrix(path_adjacency(p.s, periodic=periodic))
    return SymmetricOperator(sp.kron(strip, sp.identity(p.s)) + sp.kron(sp.identity(nr), cyc))


def build_meanfield_projection(p):
    """Projection onto functions constant along the third coordinate."""
    m = sp.kron(sp.identity(p.n * p.r), np.ones((p.s, p.s)), format="csr")
    m.data = m.data / p.s
    return SymmetricOperator(m)


def _max_abs(m):
    m = sp.csr_matrix(m)
    m.eliminate_zeros()
    return float(np.max(np.abs(m.data))) if m.nnz else 0.0


def projection_identity_errors(p, dirichlet=False):
    """Max-norm deviations for the projection identity.

    Periodic case: ``P D``, ``D P`` and ``P D P`` against the antitree adjacency
    with point weight 2, plus the commutator ``[P, D]``. Dirichlet case:
    ``P D P`` against point weight ``2 - 2/s`` (the commutator is not zero there).
    """
    lap = build_periodic_laplacian(p, periodic=not dirichlet).matrix
    proj = build_meanfield_projection(p).matrix
    if dirichlet:
        target = build_antitree_adjacency(AntitreeParams(p.n, p.r, p.s, 2.0 - 2.0 / p.s)).matrix
        return {"PDP": _max_abs(proj @ lap @ proj - target)}
    target = build_antitree_adjacency(AntitreeParams(p.n, p.r, p.s, 2.0)).matrix
    return {
        "PD": _max_abs(proj @ lap - target),
        "DP": _max_abs(lap @ proj - target),
        "PDP": _max_abs(proj @ lap @ proj - target),
        "commutator": _max_abs(proj @ lap - lap @ proj),
    }


def verify_projection_identity(p, tol=1e-12, dirichlet=False):
    errs = projection_identity_errors(p, dirichlet=dirichlet)
    return all(v <= tol for v in errs.values())


def write_triplets(op, path):
    """Sparse triplet text: header ``dim nnz`` then ``i j value`` rows, 0-based, sorted."""
    m = sp.coo_matrix(op.matrix if isinstance(op, SymmetricOperator) else op)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.nnz}\n")
        for i, j, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")


def read_triplets(path):
    with open(path) as fh:
        dim, nnz = (int(t) for t in fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    if data.shape[0] != nnz:
        raise ValueError(f"expected {nnz} entries, found {data.shape[0]}")
    return SymmetricOperator(sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim)))

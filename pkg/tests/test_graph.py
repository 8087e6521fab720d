import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antitree.errors import CapacityError, ConfigurationError
from antitree.graph import (
    AntitreeParams,
    build_antitree_adjacency,
    build_meanfield_projection,
    build_periodic_laplacian,
    build_strip,
    path_adjacency,
    projection_identity_errors,
    read_triplets,
    tensor_antitree,
    verify_projection_identity,
    write_triplets,
)


def dense(op):
    return op.to_dense()


def test_params_validation():
    with pytest.raises(ConfigurationError):
        AntitreeParams(0, 1, 1)
    with pytest.raises(CapacityError):
        AntitreeParams(10 ** 4, 10 ** 2, 10 ** 3)


def test_strip_examples():
    assert np.array_equal(dense(build_strip(1, 1, 5)), [[5.0]])
    assert np.array_equal(dense(build_strip(2, 1, 0)), [[0, 1], [1, 0]])
    ev = np.linalg.eigvalsh(dense(build_strip(3, 1, 0)))
    assert np.allclose(ev, [-np.sqrt(2), 0, np.sqrt(2)], atol=1e-14)


def test_strip_neighbours():
    n, r, w = 4, 3, 0.5
    m = dense(build_strip(n, r, w))
    for a in range(n * r):
        for b in range(n * r):
            xa, ya = divmod(a, r)
            xb, yb = divmod(b, r)
            d = abs(xa - xb) + abs(ya - yb)
            assert m[a, b] == (w if d == 0 else 1.0 if d == 1 else 0.0)


def test_tensor_examples():
    assert np.allclose(dense(tensor_antitree(np.array([[5.0]]), 2)), 0.5 * np.array([[5, 5], [5, 5]]), rtol=0, atol=0)
    base = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(dense(tensor_antitree(base, 1)), base)


def test_tensor_entries_exact():
    base = np.random.default_rng(0).normal(size=(4, 4))
    base = base + base.T
    t = dense(tensor_antitree(base, 3))
    for x in range(4):
        for y in range(4):
            assert np.all(t[3 * x:3 * x + 3, 3 * y:3 * y + 3] == base[x, y] / 3)


def test_tensor_spectrum_s3():
    base = np.random.default_rng(1).normal(size=(5, 5))
    base = base + base.T
    got = np.linalg.eigvalsh(dense(tensor_antitree(base, 3)))
    expected = np.sort(np.concatenate((np.linalg.eigvalsh(base), np.zeros(10))))
    assert np.allclose(got, expected, atol=1e-12)


def test_antitree_examples():
    assert np.array_equal(dense(build_antitree_adjacency(AntitreeParams(1, 1, 1, 2.0))), [[2.0]])
    op = build_antitree_adjacency(AntitreeParams(2, 2, 2, 0.0))
    p22 = np.kron(np.eye(2), np.full((2, 2), 0.5))
    assert np.array_equal(op.blocks.offdiagonal[0], p22)
    assert np.array_equal(op.blocks.to_sparse().toarray(), dense(op))
    ev = np.linalg.eigvalsh(dense(build_antitree_adjacency(AntitreeParams(3, 2, 4, 1.0))))
    i, j = np.meshgrid(np.arange(1, 4), np.arange(1, 3))
    strip = (1 + 2 * np.cos(np.pi * i / 4) + 2 * np.cos(np.pi * j / 3)).ravel()
    assert np.allclose(ev, np.sort(np.concatenate((strip, np.zeros(18)))), atol=1e-12)


def test_periodic_laplacian_examples():
    assert np.array_equal(path_adjacency(3, periodic=True), np.ones((3, 3)) - np.eye(3))
    assert np.array_equal(path_adjacency(1, periodic=True), [[0.0]])
    assert np.array_equal(path_adjacency(2, periodic=True), [[0, 2], [2, 0]])
    ev = np.linalg.eigvalsh(dense(build_periodic_laplacian(AntitreeParams(1, 1, 4))))
    assert np.allclose(ev, [-2, 0, 0, 2], atol=1e-14)
    lap = dense(build_periodic_laplacian(AntitreeParams(2, 2, 3)))
    assert np.max(np.abs(np.linalg.eigvalsh(lap))) <= 6
    # each (x1, x2) has 2 cycle neighbours and one strip neighbour in each of the 2 directions (corner sites)
    assert np.array_equal(lap @ np.ones(12), np.full(12, 4.0))


def test_projection_examples():
    assert np.array_equal(dense(build_meanfield_projection(AntitreeParams(2, 2, 1))), np.eye(4))
    assert np.array_equal(dense(build_meanfield_projection(AntitreeParams(1, 1, 2))), 0.5 * np.ones((2, 2)))
    for s in (2, 3, 4, 5, 7):
        p = dense(build_meanfield_projection(AntitreeParams(2, 1, s)))
        assert np.max(np.abs(p @ p - p)) <= 1e-15


@pytest.mark.parametrize("nrs", [(2, 2, 3), (1, 1, 5), (3, 2, 4)])
def test_projection_identity(nrs):
    p = AntitreeParams(*nrs)
    assert verify_projection_identity(p)
    assert verify_projection_identity(p, dirichlet=True)
    assert projection_identity_errors(p)["commutator"] == 0.0


def test_triplet_roundtrip(tmp_path):
    op = build_antitree_adjacency(AntitreeParams(2, 2, 3, 0.7))
    path = tmp_path / "a.txt"
    write_triplets(op, path)
    head = path.read_text().splitlines()[0].split()
    assert int(head[0]) == 12 and int(head[1]) == op.matrix.nnz
    back = read_triplets(path)
    assert np.array_equal(back.to_dense(), op.to_dense())


def test_operator_read_only():
    op = build_strip(3, 2, 0.0)
    with pytest.raises(ValueError):
        op.matrix.data[0] = 3.0


params = st.builds(AntitreeParams, st.integers(1, 4), st.integers(1, 4), st.integers(1, 6), st.floats(-3, 3))


@settings(max_examples=40, deadline=None)
@given(p=params)
def test_operator_properties(p):
    a = build_antitree_adjacency(p)
    assert a.is_symmetric()
    ev = np.linalg.eigvalsh(a.to_dense())
    assert np.max(np.abs(ev)) <= abs(p.w) + 4 + 1e-12
    assert np.array_equal(a.blocks.to_sparse().toarray(), a.to_dense())
    assert build_periodic_laplacian(p).is_symmetric()
    assert projection_identity_errors(p)["commutator"] == 0.0

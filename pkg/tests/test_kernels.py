import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advedit import kernels as K
from advedit.ted import pairwise_ted
from advedit.trees import parse
from conftest import trees
from oracles import (
    label_shape,
    profile_dot,
    pt_oracle,
    pt_profile,
    random_tree,
    shapes,
    sst_oracle,
    sst_profile,
    st_oracle,
    st_profile,
    to_tuple,
)

KERNELS = [(K.st_kernel, st_oracle), (K.sst_kernel, sst_oracle), (K.pt_kernel, pt_oracle)]


def small_trees(rng, random_labelings=2):
    """Every labelled tree up to 3 nodes, plus random labelings of every 4- and 5-node shape."""
    out = []
    for n in range(1, 6):
        for s in shapes(n):
            if n <= 3:
                for labs in itertools.product("abc", repeat=n):
                    out.append(label_shape(s, iter(labs)))
            else:
                for _ in range(random_labelings):
                    out.append(label_shape(s, iter(rng.choice(list("abc"), size=n))))
    return out


def rel_err(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


# --- distance-based kernels --------------------------------------------------

def test_linear_examples():
    assert K.linear_kernel([[0]]).entries.tolist() == [[0.0]]
    G = K.linear_kernel([[0, 1], [1, 0]]).entries
    assert np.allclose(G, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-15)


@pytest.mark.parametrize("D", [
    [[0, 1], [2, 0]],
    [[1, 1], [1, 0]],
    [[0, -1], [-1, 0]],
    [[0, 1, 2], [1, 0, 1]],
])
def test_linear_rejects_bad_distances(D):
    with pytest.raises(ValueError):
        K.linear_kernel(D)


def test_linear_rows_reproduce_training_rows():
    rng = np.random.default_rng(0)
    ts = [random_tree(rng, int(rng.integers(1, 8))) for _ in range(12)]
    D = pairwise_ted(ts)
    G = K.linear_kernel(D).entries
    assert np.allclose(K.linear_kernel_rows(D, D), G, atol=1e-12)
    assert np.allclose(G.sum(axis=1), 0, atol=1e-9)


@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_linear_centering(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(0, 20, size=(n, n))
    D = np.triu(A, 1) + np.triu(A, 1).T
    G = K.linear_kernel(D).entries
    assert np.abs(G.sum(axis=1)).max() <= 1e-9 * max(1.0, np.abs(G).max())


def test_rbf_examples():
    G = K.rbf_kernel([[0, 2], [2, 0]], 2.0).entries
    assert G[0, 0] == 1.0
    assert math.isclose(G[0, 1], math.exp(-0.5), rel_tol=1e-15)
    assert math.isclose(G[0, 1], 0.60653, rel_tol=1e-5)
    vals = K.rbf_rows(np.arange(0, 50), 3.0)
    assert np.all(np.diff(vals) <= 0) and vals[-1] < 1e-50
    with pytest.raises(ValueError):
        K.rbf_kernel([[0]], 0.0)


# --- tree kernels ---------------------------------------------------------------

def test_tree_kernel_examples():
    lam = 0.3
    a, b = parse("a"), parse("b")
    assert K.st_kernel(a, a, lam) == pytest.approx(lam)
    assert K.st_kernel(a, b, lam) == 0
    assert K.st_kernel(parse("a(b)"), parse("a(b)"), lam) == pytest.approx(lam + lam ** 2)
    assert K.sst_kernel(a, a, lam) == pytest.approx(lam)
    abc = parse("a(b,c)")
    assert K.sst_kernel(abc, abc, lam) == pytest.approx(2 * lam + lam * (1 + lam) ** 2)
    assert K.sst_kernel(abc, parse("x(y,z)"), lam) == 0
    assert K.pt_kernel(a, a, lam) == pytest.approx(lam ** 3)
    assert K.pt_kernel(a, b, lam) == 0


@pytest.mark.parametrize("kern,oracle", KERNELS, ids=["st", "sst", "pt"])
def test_fragment_oracle(kern, oracle):
    rng = np.random.default_rng(5)
    ts = small_trees(rng, random_labelings=1)
    sample = ts[::3]
    for lam in (0.25, 1.0):
        for x in sample:
            for y in sample:
                ref = oracle(to_tuple(x), to_tuple(y), lam)
                assert rel_err(kern(x, y, lam), ref) < 1e-10


@pytest.mark.parametrize("lam", [0.2, 1.0, 1.6])
def test_fragment_profiles_match_direct_oracles(lam):
    rng = np.random.default_rng(6)
    ts = [to_tuple(t) for t in small_trees(rng, random_labelings=1)][::4]
    pairs = [(st_profile, st_oracle), (sst_profile, sst_oracle), (pt_profile, pt_oracle)]
    for profile, oracle in pairs:
        prof = [profile(t, lam) for t in ts]
        for i, x in enumerate(ts):
            for j, y in enumerate(ts):
                assert rel_err(profile_dot(prof[i], prof[j]), oracle(x, y, lam)) < 1e-12


def test_pt_with_separate_depth_decay():
    x, y = parse("a(b,c(b),b)"), parse("a(b,b,c)")
    for lam, mu in ((0.5, 0.2), (0.9, 1.0)):
        assert rel_err(K.pt_kernel(x, y, lam, mu), pt_oracle(to_tuple(x), to_tuple(y), lam, mu)) < 1e-12


@pytest.mark.parametrize("kind", ["st", "sst", "pt"])
@given(x=trees, y=trees)
def test_tree_kernel_symmetry_and_positivity(kind, x, y):
    fn = K.TREE_KERNELS[kind]
    assert fn(x, y, 0.4) == pytest.approx(fn(y, x, 0.4), rel=1e-12)
    assert fn(x, x, 0.4) > 0


def test_tree_gram_and_normalisation():
    rng = np.random.default_rng(2)
    ts = [random_tree(rng, int(rng.integers(1, 7))) for _ in range(8)]
    G = K.tree_gram("sst", ts, 0.5)
    assert np.array_equal(G, G.T)
    N = K.normalize_gram(G)
    assert np.allclose(np.diag(N), 1.0)
    R = K.tree_gram("sst", ts[:3], 0.5, ts)
    assert np.allclose(R, G[:3])
    with pytest.raises(ValueError):
        K.tree_kernel("xyz", ts[0], ts[1], 0.5)
    with pytest.raises(ValueError):
        K.pt_kernel(ts[0], ts[1], 0.0)


# --- clip correction -------------------------------------------------------------

def test_clip_examples():
    assert np.allclose(K.clip_psd(np.eye(3)).entries, np.eye(3))
    out = K.clip_psd(np.array([[0.0, 1.0], [1.0, 0.0]])).entries
    assert np.allclose(out, 0.5, atol=1e-12)


def test_clip_leaves_psd_rbf_unchanged():
    rng = np.random.default_rng(4)
    ts = [random_tree(rng, int(rng.integers(1, 8))) for _ in range(15)]
    G = K.rbf_kernel(pairwise_ted(ts), 2.0).entries
    if np.linalg.eigvalsh(G).min() >= 0:
        assert np.allclose(K.clip_psd(G).entries, G, atol=1e-8)
    assert np.linalg.eigvalsh(K.clip_psd(G).entries).min() >= -1e-9 * np.linalg.norm(G, 2)


sym = arrays(float, (6, 6), elements=st.floats(-10, 10, allow_nan=False)).map(lambda A: A + A.T)


@given(sym)
def test_clip_psd_and_idempotent(A):
    C = K.clip_psd(A).entries
    norm = max(np.linalg.norm(A, 2), 1e-300)
    assert np.linalg.eigvalsh(C).min() >= -1e-9 * norm
    assert np.abs(K.clip_psd(C).entries - C).max() <= 1e-8 * max(norm, 1.0)


def test_clip_projection_corrects_rows():
    A = np.array([[2.0, 1.0, 0.0], [1.0, -1.0, 0.5], [0.0, 0.5, 1.0]])
    Kc, P = K.clip_projection(A)
    assert np.allclose(A @ P, Kc)
    assert np.allclose(P @ P, P)


def test_clip_rejects_asymmetric_and_nonfinite():
    with pytest.raises(ValueError):
        K.clip_psd(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(np.linalg.LinAlgError):
        K.clip_projection(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_gram_matrix_validation():
    with pytest.raises(ValueError):
        K.GramMatrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        K.GramMatrix(np.array([[1.0, np.inf], [np.inf, 1.0]]))


def test_gram_persistence(tmp_path):
    G = K.rbf_kernel([[0, 1, 3], [1, 0, 2], [3, 2, 0]], 1.7)
    path = tmp_path / "g.txt"
    K.save_gram(path, G)
    assert path.read_text().splitlines()[0] == "3"
    H = K.load_gram(path)
    assert np.array_equal(H.entries, G.entries)
    assert H.provenance == {"kernel": "rbf", "sigma": 1.7}
    path.write_text("3\n1 2\n")
    with pytest.raises(ValueError):
        K.load_gram(path)

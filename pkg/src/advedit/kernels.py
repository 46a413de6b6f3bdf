"""Kernels on trees and the clip eigenvalue correction.

Distance-based kernels (double centering, RBF) take a pairwise TED matrix.
Tree kernels (ST, SST, PT) take two trees and a decay ``lam``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .trees import Tree

__all__ = [
    "GramMatrix",
    "linear_kernel",
    "rbf_kernel",
    "st_kernel",
    "sst_kernel",
    "pt_kernel",
    "tree_kernel",
    "tree_gram",
    "normalize_gram",
    "clip_psd",
    "clip_projection",
    "save_gram",
    "load_gram",
    "TREE_KERNELS",
]


@dataclass
class GramMatrix:
    """A kernel matrix plus the configuration that produced it."""

    entries: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        K = np.asarray(self.entries, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"Gram matrix must be square, got shape {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValueError("Gram matrix has non-finite entries")
        scale = max(np.abs(K).max(initial=0.0), 1.0)
        if np.abs(K - K.T).max(initial=0.0) > 1e-9 * scale:
            raise ValueError("Gram matrix is not symmetric")
        self.entries = K

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _check_distances(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(D < 0):
        raise ValueError("distances must be non-negative")
    return D


def linear_kernel(D) -> GramMatrix:
    """Double centering ``-1/2 J D**2 J`` with ``J = I - 11^T/n``."""
    D = _check_distances(D)
    n = D.shape[0]
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    K = -0.5 * J @ (D * D) @ J
    K = 0.5 * (K + K.T)
    return GramMatrix(K, {"kernel": "linear"})


def linear_kernel_rows(D_query, D_basis) -> np.ndarray:
    """Out-of-sample rows of the double-centered kernel.

    ``D_query`` holds distances from query trees to the basis trees that
    ``D_basis`` was computed on. For a basis tree as query this reproduces
    the corresponding row of :func:`linear_kernel`.
    """
    Q = np.atleast_2d(np.asarray(D_query, dtype=float)) ** 2
    B = np.asarray(D_basis, dtype=float) ** 2
    col_means = B.mean(axis=0)
    grand = B.mean()
    return -0.5 * (Q - Q.mean(axis=1, keepdims=True) - col_means[None, :] + grand)


def rbf_kernel(D, sigma: float) -> GramMatrix:
    """``exp(-d**2 / (2 sigma**2))`` applied entrywise."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    D = np.asarray(D, dtype=float)
    K = rbf_rows(D, sigma)
    return GramMatrix(K, {"kernel": "rbf", "sigma": float(sigma)})


def rbf_rows(D, sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    D = np.asarray(D, dtype=float)
    return np.exp(-0.5 * (D / sigma) ** 2)


# --- tree kernels ----------------------------------------------------------

_subtree_ids: dict = {}


class _TreeView:
    """Postorder node table: labels, children, subtree ids, productions."""

    __slots__ = ("label", "children", "sid", "size", "prod")

    def __init__(self, t: Tree):
        label, children, sid, size, prod = [], [], [], [], []
        stack = [(t, False)]
        while stack:
            node, done = stack.pop()
            if not done:
                stack.append((node, True))
                for c in reversed(node.children):
                    stack.append((c, False))
                continue
            k = len(label)
            # children are the most recent completed siblings
            kids = []
            off = k
            for c in reversed(node.children):
                off -= c.size
                kids.append(off + c.size - 1)
            kids.reverse()
            label.append(node.label)
            children.append(tuple(kids))
            key = (node.label, tuple(sid[c] for c in kids))
            sid.append(_subtree_ids.setdefault(key, len(_subtree_ids)))
            size.append(node.size)
            prod.append((node.label, tuple(label[c] for c in kids)))
        self.label, self.children, self.sid = label, children, sid
        self.size, self.prod = size, prod


def _view(t: Tree) -> _TreeView:
    v = t._cache.get("kview")
    if v is None:
        v = _TreeView(t)
        t._cache["kview"] = v
    return v


def st_kernel(x: Tree, y: Tree, lam: float) -> float:
    """Subtree kernel: shared complete subtrees weighted by ``lam**size``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    vx, vy = _view(x), _view(y)
    counts: dict[int, int] = {}
    for s in vy.sid:
        counts[s] = counts.get(s, 0) + 1
    total = 0.0
    for s, sz in zip(vx.sid, vx.size):
        c = counts.get(s)
        if c:
            total += c * lam ** sz
    return total


def sst_kernel(x: Tree, y: Tree, lam: float) -> float:
    """Subset-tree kernel (production-matching recursion)."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    vx, vy = _view(x), _view(y)
    by_prod: dict = {}
    for q, pr in enumerate(vy.prod):
        by_prod.setdefault(pr, []).append(q)
    delta: dict[tuple[int, int], float] = {}
    total = 0.0
    # postorder guarantees children are filled first
    for p, pr in enumerate(vx.prod):
        for q in by_prod.get(pr, ()):
            d = lam
            for cp, cq in zip(vx.children[p], vy.children[q]):
                d *= 1.0 + delta.get((cp, cq), 0.0)
            delta[(p, q)] = d
            total += d
    return total


def pt_kernel(x: Tree, y: Tree, lam: float, mu: Optional[float] = None) -> float:
    """Partial-tree kernel; the depth decay ``mu`` defaults to ``lam``."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    mu = lam if mu is None else mu
    vx, vy = _view(x), _view(y)
    by_label: dict = {}
    for q, lab in enumerate(vy.label):
        by_label.setdefault(lab, []).append(q)
    lam2 = lam * lam
    delta: dict[tuple[int, int], float] = {}
    total = 0.0
    for p, lab in enumerate(vx.label):
        for q in by_label.get(lab, ()):
            cx, cy = vx.children[p], vy.children[q]
            acc = lam2
            if cx and cy:
                n1, n2 = len(cx), len(cy)
                # Q[i][j]: decayed sum of child-sequence pairs ending at or
                # before (i, j); S(i, j) = delta * (lam^2 + lam^2 Q[i-1][j-1])
                Q = [[0.0] * (n2 + 1) for _ in range(n1 + 1)]
                for i in range(1, n1 + 1):
                    ci = cx[i - 1]
                    Qi, Qp = Q[i], Q[i - 1]
                    for j in range(1, n2 + 1):
                        dc = delta.get((ci, cy[j - 1]), 0.0)
                        s = dc * lam2 * (1.0 + Qp[j - 1]) if dc else 0.0
                        acc += s
                        Qi[j] = s + lam * Qp[j] + lam * Qi[j - 1] - lam2 * Qp[j - 1]
            d = mu * acc
            delta[(p, q)] = d
            total += d
    return total


TREE_KERNELS: dict[str, Callable[[Tree, Tree, float], float]] = {
    "st": st_kernel,
    "sst": sst_kernel,
    "pt": pt_kernel,
}


def tree_kernel(kind: str, x: Tree, y: Tree, lam: float) -> float:
    try:
        fn = TREE_KERNELS[kind]
    except KeyError:
        raise ValueError(f"unknown tree kernel {kind!r}") from None
    return fn(x, y, lam)


def tree_gram(kind: str, xs: Sequence[Tree], lam: float, ys: Optional[Sequence[Tree]] = None) -> np.ndarray:
    """Kernel matrix between ``xs`` and ``ys`` (``xs`` itself when omitted).

    The square case computes one triangle and mirrors it.
    """
    fn = TREE_KERNELS[kind]
    if ys is None:
        n = len(xs)
        K = np.zeros((n, n))
        for i in range(n):
            for j in range(i, n):
                K[i, j] = K[j, i] = fn(xs[i], xs[j], lam)
        return K
    K = np.zeros((len(xs), len(ys)))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            K[i, j] = fn(x, y, lam)
    return K


def normalize_gram(K, diag_rows=None, diag_cols=None) -> np.ndarray:
    """``k(x,y) / sqrt(k(x,x) k(y,y))``; square input uses its own diagonal."""
    K = np.asarray(K, dtype=float)
    if diag_rows is None:
        diag_rows = diag_cols = np.diag(K)
    dr = np.sqrt(np.asarray(diag_rows, dtype=float))
    dc = np.sqrt(np.asarray(diag_cols, dtype=float))
    return K / np.outer(dr, dc)


# --- PSD correction --------------------------------------------------------

def clip_projection(K) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecompose ``K`` and return ``(clipped K, projection P)``.

    ``P`` projects onto the span of non-negative eigenvectors, so that
    ``K @ P`` equals the clipped matrix and out-of-sample kernel rows can be
    corrected consistently as ``k_row @ P``.
    """
    K = np.asarray(K, dtype=float)
    if not np.all(np.isfinite(K)):
        raise np.linalg.LinAlgError("cannot eigendecompose a non-finite matrix")
    K = 0.5 * (K + K.T)
    w, U = np.linalg.eigh(K)
    norm = np.abs(w).max(initial=0.0)
    w = np.where((w < 0) & (w >= -1e-12 * norm), 0.0, w)
    keep = w >= 0
    Kc = (U * np.maximum(w, 0.0)) @ U.T
    Kc = 0.5 * (Kc + Kc.T)
    if keep.all():
        P = np.eye(K.shape[0])
    else:
        Uk = U[:, keep]
        P = Uk @ Uk.T
    return Kc, P


def clip_psd(K) -> GramMatrix:
    """Zero the negative eigenvalues of a symmetric matrix."""
    prov = dict(K.provenance) if isinstance(K, GramMatrix) else {}
    K = np.asarray(K, dtype=float)
    if not np.allclose(K, K.T, rtol=0, atol=1e-9 * max(np.abs(K).max(initial=0.0), 1.0)):
        raise ValueError("clip_psd requires a symmetric matrix")
    Kc, _ = clip_projection(K)
    prov["clipped"] = True
    return GramMatrix(Kc, prov)


# --- persistence -----------------------------------------------------------

def save_gram(path, K: GramMatrix) -> None:
    """Write ``n`` then ``n`` rows of decimals; provenance goes to ``<path>.meta.json``."""
    path = Path(path)
    E = np.asarray(K.entries if isinstance(K, GramMatrix) else K, dtype=float)
    lines = [str(E.shape[0])]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in E)
    path.write_text("\n".join(lines) + "\n")
    prov = K.provenance if isinstance(K, GramMatrix) else {}
    Path(str(path) + ".meta.json").write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n")


def load_gram(path) -> GramMatrix:
    path = Path(path)
    rows = path.read_text().split("\n")
    try:
        n = int(rows[0].strip())
    except (IndexError, ValueError):
        raise ValueError(f"{path}: first line must be the matrix size") from None
    data = [r.split() for r in rows[1:] if r.strip()]
    if len(data) != n or any(len(r) != n for r in data):
        raise ValueError(f"{path}: expected {n} rows of {n} values")
    E = np.array([[float(v) for v in r] for r in data]).reshape(n, n)
    meta = Path(str(path) + ".meta.json")
    prov = json.loads(meta.read_text()) if meta.exists() else {}
    return GramMatrix(E, prov)

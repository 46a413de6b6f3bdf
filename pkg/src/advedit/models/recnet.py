"""Recursive neural networks and tree echo state networks.

Both embed a tree bottom-up with per-symbol parameters,
``G(x(T1..Tm)) = sigm(W[x] @ sum_i G(Ti) + b[x])``, and classify with a
linear layer ``argmax(V @ G + c)``. The recursive net trains everything by
full-batch Adam on the crossentropy; the echo state net keeps ``W`` and
``b`` at their random initialisation and fits ``(V, c)`` by ridge
regression.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..trees import Tree

__all__ = [
    "RecNetParams",
    "TESParams",
    "UnknownSymbolError",
    "recnet_embed",
    "recnet_loss_and_grad",
    "recnet_train",
    "tes_init",
    "tes_train",
    "embed_batch",
    "predict_batch",
]

log = logging.getLogger(__name__)


class UnknownSymbolError(KeyError):
    def __init__(self, symbol: str):
        super().__init__(symbol)
        self.symbol = symbol

    def __str__(self):
        return f"symbol {self.symbol!r} has no parameters in this model"


@dataclass
class RecNetParams:
    alphabet: list  # symbol order for the first axis of W and b
    W: np.ndarray  # (A, n, n)
    b: np.ndarray  # (A, n)
    V: np.ndarray  # (L, n)
    c: np.ndarray  # (L,)

    @property
    def n(self) -> int:
        return self.W.shape[1]

    @property
    def n_classes(self) -> int:
        return self.V.shape[0]

    def index(self) -> dict:
        return {s: k for k, s in enumerate(self.alphabet)}


@dataclass
class TESParams(RecNetParams):
    scale: float = 1.0
    ridge: float = 1e-8


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


class _Batch:
    """Flattened node table for a list of trees, grouped by height."""

    def __init__(self, trees: Sequence[Tree], index: dict):
        lab, parent, roots = [], [], []
        for t in trees:
            roots.append(len(lab))
            stack = [(t, -1)]
            while stack:
                node, par = stack.pop()
                k = len(lab)
                try:
                    lab.append(index[node.label])
                except KeyError:
                    raise UnknownSymbolError(node.label) from None
                parent.append(par)
                stack.extend((ch, k) for ch in reversed(node.children))
        # preorder: children follow parents, so a reverse sweep sees leaves first
        height = [0] * len(lab)
        for k in range(len(lab) - 1, -1, -1):
            par = parent[k]
            if par >= 0 and height[k] + 1 > height[par]:
                height[par] = height[k] + 1
        self.lab = np.array(lab, dtype=np.intp)
        self.parent = np.array(parent, dtype=np.intp)
        height = np.array(height, dtype=np.intp)
        self.roots = np.array(roots, dtype=np.intp)
        self.levels = [np.flatnonzero(height == h) for h in range(int(height.max()) + 1)]
        self.size = len(lab)


def _forward(W, b, batch: _Batch):
    N, n = batch.size, W.shape[1]
    S = np.zeros((N, n))
    H = np.zeros((N, n))
    for idx in batch.levels:
        lab = batch.lab[idx]
        pre = np.einsum("kij,kj->ki", W[lab], S[idx]) + b[lab]
        H[idx] = _sigmoid(pre)
        par = batch.parent[idx]
        has = par >= 0
        np.add.at(S, par[has], H[idx[has]])
    return S, H


def embed_batch(p: RecNetParams, trees: Sequence[Tree]) -> np.ndarray:
    """Root embeddings, one row per tree."""
    batch = _Batch(trees, p.index())
    _, H = _forward(p.W, p.b, batch)
    return H[batch.roots]


def recnet_embed(p: RecNetParams, t: Tree) -> np.ndarray:
    return embed_batch(p, [t])[0]


def predict_batch(p: RecNetParams, trees: Sequence[Tree]) -> np.ndarray:
    """Predicted labels (1-based) for each tree."""
    G = embed_batch(p, trees)
    return np.argmax(G @ p.V.T + p.c, axis=1) + 1


def _loss_grad(W, b, V, c, batch: _Batch, y: np.ndarray, want_grad: bool = True):
    S, H = _forward(W, b, batch)
    G = H[batch.roots]
    logits = G @ V.T + c
    logits -= logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    T = len(y)
    loss = -float(logp[np.arange(T), y].mean())
    if not want_grad:
        return loss, None
    dlog = np.exp(logp)
    dlog[np.arange(T), y] -= 1.0
    dlog /= T
    gV = dlog.T @ G
    gc = dlog.sum(axis=0)
    dH_root = dlog @ V
    N, n = H.shape
    dHext = np.zeros((N, n))
    dHext[batch.roots] = dH_root
    dS = np.zeros((N, n))
    gW = np.zeros_like(W)
    gb = np.zeros_like(b)
    for idx in reversed(batch.levels):
        lab = batch.lab[idx]
        par = batch.parent[idx]
        dH = dHext[idx]
        has = par >= 0
        dH[has] += dS[par[has]]
        h = H[idx]
        dpre = dH * h * (1.0 - h)
        np.add.at(gW, lab, np.einsum("ki,kj->kij", dpre, S[idx]))
        np.add.at(gb, lab, dpre)
        dS[idx] = np.einsum("kij,ki->kj", W[lab], dpre)
    return loss, (gW, gb, gV, gc)


def recnet_loss_and_grad(p: RecNetParams, trees: Sequence[Tree], labels: Sequence[int]):
    """Mean crossentropy over ``(trees, labels)`` and its gradient.

    Labels are 1-based. The gradient is a tuple ``(dW, db, dV, dc)``.
    """
    batch = _Batch(trees, p.index())
    y = np.asarray(labels, dtype=np.intp) - 1
    return _loss_grad(p.W, p.b, p.V, p.c, batch, y)


def _alphabet_of(trees: Sequence[Tree]) -> list:
    syms = set()
    for t in trees:
        stack = [t]
        while stack:
            node = stack.pop()
            syms.add(node.label)
            stack.extend(node.children)
    return sorted(syms)


def recnet_train(
    trees: Sequence[Tree],
    labels: Sequence[int],
    n: int = 10,
    rng: np.random.Generator | None = None,
    alphabet: Sequence[str] | None = None,
    n_classes: int | None = None,
    lr: float = 1e-3,
    target_loss: float = 0.01,
    max_iter: int = 20_000,
    history: list | None = None,
) -> RecNetParams:
    """Train a recursive net by full-batch Adam until the loss drops below ``target_loss``."""
    rng = np.random.default_rng() if rng is None else rng
    labels = np.asarray(labels, dtype=np.intp)
    alphabet = sorted(set(alphabet) | set(_alphabet_of(trees))) if alphabet else _alphabet_of(trees)
    L = int(n_classes or labels.max())
    A = len(alphabet)
    s = 1.0 / np.sqrt(n)
    params = [
        rng.uniform(-s, s, size=(A, n, n)),
        np.zeros((A, n)),
        rng.uniform(-s, s, size=(L, n)),
        np.zeros(L),
    ]
    batch = _Batch(trees, {sym: k for k, sym in enumerate(alphabet)})
    y = labels - 1
    m1 = [np.zeros_like(x) for x in params]
    m2 = [np.zeros_like(x) for x in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    loss = np.inf
    for it in range(1, max_iter + 1):
        loss, grads = _loss_grad(*params, batch, y)
        if not np.isfinite(loss):
            raise FloatingPointError(f"recursive net training diverged at iteration {it} (loss={loss})")
        if history is not None:
            history.append(loss)
        if loss < target_loss:
            break
        for k, g in enumerate(grads):
            m1[k] = beta1 * m1[k] + (1 - beta1) * g
            m2[k] = beta2 * m2[k] + (1 - beta2) * g * g
            mhat = m1[k] / (1 - beta1 ** it)
            vhat = m2[k] / (1 - beta2 ** it)
            params[k] = params[k] - lr * mhat / (np.sqrt(vhat) + eps)
    else:
        loss, _ = _loss_grad(*params, batch, y, want_grad=False)
        if loss >= target_loss:
            warnings.warn(
                f"recursive net stopped after {max_iter} iterations with loss {loss:.4g}",
                RuntimeWarning,
                stacklevel=2,
            )
    log.debug("recnet: final loss %.4g", loss)
    return RecNetParams(list(alphabet), *params)


def tes_init(alphabet: Sequence[str], n: int, scale: float, n_classes: int, rng: np.random.Generator) -> TESParams:
    """Random reservoir; each ``W[x]`` is rescaled to spectral norm ``scale``."""
    if n < 1:
        raise ValueError("reservoir dimension must be >= 1")
    if not scale > 0:
        raise ValueError("scale must be positive")
    A = len(alphabet)
    W = rng.uniform(-1.0, 1.0, size=(A, n, n))
    for k in range(A):
        W[k] *= scale / np.linalg.norm(W[k], 2)
    b = rng.uniform(-1.0, 1.0, size=(A, n))
    return TESParams(list(alphabet), W, b, np.zeros((n_classes, n)), np.zeros(n_classes), scale=float(scale))


def tes_train(
    trees: Sequence[Tree],
    labels: Sequence[int],
    n: int,
    scale: float,
    ridge: float = 1e-8,
    rng: np.random.Generator | None = None,
    alphabet: Sequence[str] | None = None,
    n_classes: int | None = None,
    reservoir: TESParams | None = None,
) -> TESParams:
    """Fit the linear readout of a tree echo state network.

    ``reservoir`` reuses existing recursive parameters instead of drawing
    new ones; they are never modified.
    """
    labels = np.asarray(labels, dtype=np.intp)
    L = int(n_classes or labels.max())
    if reservoir is None:
        rng = np.random.default_rng() if rng is None else rng
        alphabet = sorted(set(alphabet) | set(_alphabet_of(trees))) if alphabet else _alphabet_of(trees)
        reservoir = tes_init(alphabet, n, scale, L, rng)
    H = embed_batch(reservoir, trees)
    Y = np.zeros((len(labels), L))
    Y[np.arange(len(labels)), labels - 1] = 1.0
    hm, ym = H.mean(axis=0), Y.mean(axis=0)
    Hc, Yc = H - hm, Y - ym
    A = Hc.T @ Hc + ridge * np.eye(H.shape[1])
    try:
        V = np.linalg.solve(A, Hc.T @ Yc).T
    except np.linalg.LinAlgError:
        V = (np.linalg.pinv(A) @ (Hc.T @ Yc)).T
    c = ym - V @ hm
    return TESParams(
        list(reservoir.alphabet), reservoir.W.copy(), reservoir.b.copy(), V, c,
        scale=reservoir.scale, ridge=float(ridge),
    )

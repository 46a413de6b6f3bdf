"""Tree edit distance (Zhang-Shasha) and backtracing to an edit script.

The dynamic-programming kernels come from the compiled ``_ted_core``
extension when it is importable and from ``_ted_py`` otherwise. Set
``ADVEDIT_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os
from typing import Optional, Sequence

import numpy as np

from . import _ted_py
from .edits import Deletion, Insertion, Replacement, TreeEdit
from .trees import Tree

__all__ = [
    "ted",
    "backtrace",
    "mapping",
    "pairwise_ted",
    "cross_ted",
    "BACKEND",
    "available_backends",
]

_BACKENDS = {"python": _ted_py}
if not os.environ.get("ADVEDIT_PURE_PYTHON"):
    try:
        from . import _ted_core

        _BACKENDS["cython"] = _ted_core
    except ImportError:  # extension not built
        pass

BACKEND = "cython" if "cython" in _BACKENDS else "python"

_label_ids: dict[str, int] = {}


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _kernels(backend: Optional[str]):
    try:
        return _BACKENDS[backend or BACKEND]
    except KeyError:
        raise ValueError(
            f"backend {backend!r} not available; have {available_backends()}"
        ) from None


class _Arrays:
    """Postorder arrays for the DP plus preorder bookkeeping for scripts.

    Preorder lists are 1-based (slot 0 unused); postorder arrays 0-based.
    """

    __slots__ = ("lab", "lml", "kr", "post2pre", "parent", "label", "size")

    def __init__(self, t: Tree):
        n = t.size
        parent = [None] * (n + 1)
        label = [None] * (n + 1)
        size = [0] * (n + 1)
        depth = [0] * (n + 1)
        stack = [(t, 1, None, 0)]
        while stack:
            node, i, par, d = stack.pop()
            parent[i], label[i], size[i], depth[i] = par, node.label, node.size, d
            start = i + 1
            kids = []
            for c in node.children:
                kids.append((c, start, i, d + 1))
                start += c.size
            stack.extend(reversed(kids))
        post2pre = [0] * n
        lab = np.empty(n, dtype=np.int64)
        lml = np.empty(n, dtype=np.int64)
        for i in range(1, n + 1):
            p = i + size[i] - depth[i] - 2
            post2pre[p] = i
            lab[p] = _label_ids.setdefault(label[i], len(_label_ids))
            lml[p] = p - size[i] + 1
        last = {}
        for p in range(n):
            last[int(lml[p])] = p
        self.kr = np.array(sorted(last.values()), dtype=np.int64)
        self.lab, self.lml, self.post2pre = lab, lml, post2pre
        self.parent, self.label, self.size = parent, label, size


def _arrays(t: Tree) -> _Arrays:
    arr = t._cache.get("ted")
    if arr is None:
        arr = _Arrays(t)
        t._cache["ted"] = arr
    return arr


def _treedist(ax: _Arrays, ay: _Arrays, backend: Optional[str]) -> np.ndarray:
    return _kernels(backend).treedist(ax.lab, ax.lml, ax.kr, ay.lab, ay.lml, ay.kr)


def ted(x: Tree, y: Tree, backend: Optional[str] = None) -> int:
    """Unit-cost tree edit distance between ``x`` and ``y``."""
    if x is y:
        return 0
    ax, ay = _arrays(x), _arrays(y)
    td = _treedist(ax, ay, backend)
    return int(td[-1, -1])


def mapping(x: Tree, y: Tree, backend: Optional[str] = None) -> list[tuple[int, int]]:
    """A co-optimal edit mapping as sorted 1-based preorder pairs ``(i, j)``.

    At each table cell the walk prefers a diagonal step (match or
    relabeling, including whole-subtree matches) over deletion over
    insertion.
    """
    ax, ay = _arrays(x), _arrays(y)
    kern = _kernels(backend)
    td = _treedist(ax, ay, backend)
    lml_x, lml_y = ax.lml, ay.lml
    lab_x, lab_y = ax.lab, ay.lab
    pairs: list[tuple[int, int]] = []
    todo = [(x.size - 1, y.size - 1)]
    while todo:
        i, j = todo.pop()
        fd = kern.forest_table(i, j, lab_x, lml_x, lab_y, lml_y, td)
        li, lj = int(lml_x[i]), int(lml_y[j])
        a, b = i - li + 1, j - lj + 1
        while a > 0 and b > 0:
            p, q = li + a - 1, lj + b - 1
            v = fd[a, b]
            lp, lq = int(lml_x[p]), int(lml_y[q])
            if lp == li and lq == lj:
                if v == fd[a - 1, b - 1] + (lab_x[p] != lab_y[q]):
                    pairs.append((ax.post2pre[p], ay.post2pre[q]))
                    a, b = a - 1, b - 1
                    continue
            elif v == fd[lp - li, lq - lj] + td[p, q]:
                todo.append((p, q))
                a, b = lp - li, lq - lj
                continue
            if v == fd[a - 1, b] + 1:
                a -= 1
            else:
                b -= 1
    pairs.sort()
    return pairs


def backtrace(x: Tree, y: Tree, backend: Optional[str] = None) -> list[TreeEdit]:
    """A shortest edit script from ``x`` to ``y`` whose edits apply in order.

    Deletions come first (decreasing preorder index of ``x``), then
    relabelings, then insertions in increasing preorder index of ``y``.
    """
    pairs = mapping(x, y, backend)
    ax, ay = _arrays(x), _arrays(y)
    n, m = x.size, y.size
    mapped_x = {i for i, _ in pairs}
    mapped_y = {j for _, j in pairs}
    script: list[TreeEdit] = []
    for i in range(n, 0, -1):
        if i not in mapped_x:
            script.append(Deletion(i))
    for rank, (i, j) in enumerate(pairs, start=1):
        if ax.label[i] != ay.label[j]:
            script.append(Replacement(rank, ay.label[j]))
    present = [False] * (m + 1)
    for j in mapped_y:
        present[j] = True
    for j in range(1, m + 1):
        if present[j]:
            continue
        end = j + ay.size[j]
        p = ay.parent[j]
        # nodes currently hanging under p (or forming the top level when j
        # is the root), in preorder
        tops = []
        for u in range(1, m + 1):
            if not present[u]:
                continue
            anc = ay.parent[u]
            while anc is not None and not present[anc]:
                anc = ay.parent[anc]
            if anc == p:
                tops.append(u)
        adopted = [u for u in tops if j < u < end]
        if p is None:
            if len(tops) != 1 or len(adopted) != 1:
                raise AssertionError("mapping is not a valid tree mapping")
            script.append(Insertion(0, 1, 1, ay.label[j]))
        else:
            # every node before j is present, so p's current index is p
            c = 1 + sum(1 for u in tops if u < j)
            script.append(Insertion(p, c, len(adopted), ay.label[j]))
        present[j] = True
    return script


def pairwise_ted(ts: Sequence[Tree], backend: Optional[str] = None) -> np.ndarray:
    """Symmetric matrix of pairwise distances (upper triangle computed)."""
    n = len(ts)
    D = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = ted(ts[i], ts[j], backend)
    return D


def cross_ted(xs: Sequence[Tree], ys: Sequence[Tree], backend: Optional[str] = None) -> np.ndarray:
    D = np.zeros((len(xs), len(ys)), dtype=np.int64)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            D[i, j] = ted(x, y, backend)
    return D

"""Adversarial edit attacks against black-box tree classifiers.

Attacks talk to a model only through :class:`~advedit.models.ClassifierHandle`
(``predict`` plus a query counter).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .edits import TreeEdit, apply_edit, format_script, random_edit
from .ted import backtrace, ted
from .trees import Tree, serialize

__all__ = [
    "AttackResult",
    "ReferencePool",
    "NoReferenceError",
    "select_reference",
    "backtracing_attack",
    "random_attack",
    "evaluate_success",
]


class NoReferenceError(LookupError):
    """No pool member qualifies as a reference tree."""


@dataclass
class AttackResult:
    origin: Tree
    method: str
    adversarial: Optional[Tree] = None  # None marks failure to flip the label
    prefix: list = field(default_factory=list)
    queries: int = 0
    label_changed: bool = False
    target: Optional[int] = None
    reference: Optional[Tree] = None
    script_length: Optional[int] = None
    d_zx: Optional[int] = None
    d_zy: Optional[int] = None
    ratio: Optional[float] = None
    success: bool = False
    note: str = ""

    @property
    def prefix_length(self) -> int:
        return len(self.prefix)

    def record(self, origin_index: Optional[int] = None) -> dict:
        """Flat, JSON-serialisable summary."""
        return {
            "origin": origin_index,
            "method": self.method,
            "success": self.success,
            "prefix_length": self.prefix_length if self.adversarial is not None else None,
            "queries": self.queries,
            "d_zx": self.d_zx,
            "d_zy": self.d_zy,
            "ratio": self.ratio,
            "z": serialize(self.adversarial) if self.adversarial is not None else None,
            "script": format_script(self.prefix),
            "note": self.note,
        }


class ReferencePool:
    """Correctly classified trees with their labels.

    Distances to pool members are computed on demand and memoised.
    """

    def __init__(self, trees: Sequence[Tree], labels: Sequence[int]):
        if len(trees) != len(labels):
            raise ValueError("trees and labels differ in length")
        self.trees = list(trees)
        self.labels = [int(v) for v in labels]
        self._dist: dict[tuple[Tree, int], int] = {}

    @classmethod
    def from_predictions(cls, trees, labels, predicted) -> "ReferencePool":
        keep = [k for k, (y, p) in enumerate(zip(labels, predicted)) if int(y) == int(p)]
        return cls([trees[k] for k in keep], [labels[k] for k in keep])

    def __len__(self) -> int:
        return len(self.trees)

    def distance(self, t: Tree, k: int) -> int:
        key = (t, k)
        d = self._dist.get(key)
        if d is None:
            d = ted(t, self.trees[k])
            self._dist[key] = d
        return d

    def nearest(self, t: Tree, exclude_label: Optional[int] = None,
                only_label: Optional[int] = None) -> Optional[int]:
        """Index of the closest eligible member (ties to the smallest index)."""
        best, best_d = None, None
        for k, lab in enumerate(self.labels):
            if exclude_label is not None and lab == exclude_label:
                continue
            if only_label is not None and lab != only_label:
                continue
            d = self.distance(t, k)
            if best_d is None or d < best_d:
                best, best_d = k, d
        return best


def select_reference(x: Tree, true_label: int, pool: ReferencePool,
                     target: Optional[int] = None) -> int:
    """Pool index of the reference tree for attacking ``x``.

    Untargeted: the closest member with a label other than ``true_label``.
    Targeted: the closest member of class ``target``.
    """
    if target is not None:
        k = pool.nearest(x, only_label=target)
    else:
        k = pool.nearest(x, exclude_label=true_label)
    if k is None:
        raise NoReferenceError(
            f"no pool member with label {target}" if target is not None
            else f"no pool member with a label other than {true_label}"
        )
    return k


def backtracing_attack(x: Tree, f, y: Tree, target: Optional[int] = None) -> AttackResult:
    """Walk the shortest script from ``x`` to ``y`` and keep the shortest prefix labelled ``target``.

    ``target`` is the label of ``y`` (queried once when omitted). Bisection
    keeps ``hi`` at a prefix known to carry the target label, so the result
    always does.
    """
    q0 = f.query_count
    if target is None:
        target = f.predict(y)
    script = backtrace(x, y)
    n = len(script)
    if n == 0:
        raise ValueError("x equals the reference tree; nothing to attack")
    # memoised prefix trees; prefix j is trees[j]
    trees = [x]
    for e in script:
        trees.append(apply_edit(trees[-1], e))
    lo, hi = 1, n
    while lo < hi:
        j = (lo + hi) // 2
        if f.predict(trees[j]) != target:
            lo = j + 1
        else:
            hi = j
    return AttackResult(
        origin=x,
        method="backtrace",
        adversarial=trees[hi],
        prefix=list(script[:hi]),
        queries=f.query_count - q0,
        label_changed=True,
        target=target,
        reference=y,
        script_length=n,
    )


def _probe_lengths(cap: int) -> list[int]:
    out, m = [], 1
    while m < cap:
        out.append(m)
        m *= 2
    out.append(cap)
    return out


def random_attack(x: Tree, f, alphabet: Sequence[str], rng: np.random.Generator,
                  cap: int = 100, label: Optional[int] = None) -> AttackResult:
    """Random edits, doubling the script length until the label changes.

    The script grows to lengths 1, 2, 4, ... and finally ``cap``; after the
    first label change, bisection between the last unchanged and the first
    changed length finds the shortest changing prefix. ``label`` is f(x)
    (queried once when omitted).
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    q0 = f.query_count
    if label is None:
        label = f.predict(x)
    trees = [x]
    script: list[TreeEdit] = []
    prev, flipped = 0, None
    for m in _probe_lengths(cap):
        while len(script) < m:
            e = random_edit(trees[-1], alphabet, rng)
            script.append(e)
            trees.append(apply_edit(trees[-1], e))
        if f.predict(trees[m]) != label:
            flipped = m
            break
        prev = m
    if flipped is None:
        return AttackResult(origin=x, method="random", queries=f.query_count - q0,
                            script_length=len(script), note="aborted")
    # invariant: prefix lo-1 keeps the label (or is x), prefix hi changes it
    lo, hi = prev + 1, flipped
    while lo < hi:
        j = (lo + hi) // 2
        if f.predict(trees[j]) != label:
            hi = j
        else:
            lo = j + 1
    return AttackResult(
        origin=x,
        method="random",
        adversarial=trees[hi],
        prefix=list(script[:hi]),
        queries=f.query_count - q0,
        label_changed=True,
        script_length=len(script),
    )


def evaluate_success(x: Tree, z: Tree, pool: ReferencePool, x_label: int):
    """Check whether ``z`` stays closer to ``x`` than to any other-label pool tree.

    Returns ``(success, ratio, d_zx, d_zy)``. ``ratio`` is ``d_zx / d_zy``
    and is ``None`` when no other-label member exists (then success is
    reported as true) or when ``d_zy == 0``.
    """
    d_zx = ted(z, x)
    k = pool.nearest(z, exclude_label=x_label)
    if k is None:
        return True, None, d_zx, None
    d_zy = pool.distance(z, k)
    ratio = d_zx / d_zy if d_zy > 0 else None
    return d_zx < d_zy, ratio, d_zx, d_zy


def evaluate(result: AttackResult, pool: ReferencePool, x_label: int) -> AttackResult:
    """Fill the distance and success fields of ``result`` in place."""
    if result.adversarial is None:
        result.success = False
        return result
    ok, ratio, d_zx, d_zy = evaluate_success(result.origin, result.adversarial, pool, x_label)
    result.success = bool(ok and result.label_changed)
    result.ratio, result.d_zx, result.d_zy = ratio, d_zx, d_zy
    if d_zy is None:
        result.note = "no-disqualifying-reference"
    elif d_zy == 0:
        result.note = "z-equals-reference"
    return result


def backtrace_query_bound(x: Tree, y: Tree) -> int:
    return math.ceil(math.log2(x.size + y.size)) + 1


def random_query_bound(cap: int, m: int) -> int:
    return math.ceil(math.log2(cap)) + math.ceil(math.log2(max(m, 1))) + 2

"""Tree edits (deletion, replacement, insertion) and edit scripts.

Node indices are 1-based preorder positions in the tree the edit is applied
to. Text notation is ``del(i)``, ``rep(i,a)``, ``ins(i,c,C,a)``; scripts are
``;``-separated.

``ins(0,1,1,a)`` inserts ``a`` above the current root. It is the inverse of
deleting a root that has a single child, and keeps the edit graph symmetric.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .trees import Tree

__all__ = [
    "Deletion",
    "Replacement",
    "Insertion",
    "TreeEdit",
    "EditError",
    "ScriptError",
    "apply_edit",
    "apply_script",
    "random_edit",
    "format_script",
    "parse_edit",
    "parse_script",
]


class EditError(ValueError):
    """An edit whose preconditions do not hold on the given tree."""


class ScriptError(EditError):
    """Raised by :func:`apply_script`; ``position`` is the 0-based edit index."""

    def __init__(self, position: int, cause: EditError):
        super().__init__(f"edit {position} ({cause})")
        self.position = position
        self.cause = cause


@dataclass(frozen=True)
class Deletion:
    index: int

    def __str__(self):
        return f"del({self.index})"


@dataclass(frozen=True)
class Replacement:
    index: int
    label: str

    def __str__(self):
        return f"rep({self.index},{self.label})"


@dataclass(frozen=True)
class Insertion:
    index: int
    child: int
    count: int
    label: str

    def __str__(self):
        return f"ins({self.index},{self.child},{self.count},{self.label})"


TreeEdit = Union[Deletion, Replacement, Insertion]


def _splice(t: Tree, i: int, fn: Callable[[Tree], tuple]) -> Tree:
    # path-copy from the root down to node i; fn returns the replacement
    # sibling run for node i
    if i < 1 or i > t.size:
        raise EditError(f"node index {i} out of range 1..{t.size}")
    path = []
    node, offset = t, 1
    while offset != i:
        start = offset + 1
        for k, child in enumerate(node.children):
            if i < start + child.size:
                path.append((node, k))
                node, offset = child, start
                break
            start += child.size
    repl = fn(node)
    if not path:
        if len(repl) != 1:
            raise EditError("the root can only be deleted when it has exactly one child")
        return repl[0]
    for parent, k in reversed(path):
        kids = parent.children
        repl = (Tree(parent.label, kids[:k] + tuple(repl) + kids[k + 1:]),)
    return repl[0]


def apply_edit(t: Tree, e: TreeEdit) -> Tree:
    """Apply one edit, returning a new tree. Raises :class:`EditError`."""
    if isinstance(e, Replacement):
        Tree(e.label)  # validates the label
        return _splice(t, e.index, lambda n: (Tree(e.label, n.children),))
    if isinstance(e, Deletion):
        return _splice(t, e.index, lambda n: n.children)
    if isinstance(e, Insertion):
        Tree(e.label)
        if e.index == 0:
            if e.child != 1 or e.count != 1:
                raise EditError("insertion above the root requires c = 1 and C = 1")
            return Tree(e.label, (t,))

        def ins(n: Tree):
            kids = n.children
            c, C = e.child, e.count
            if c < 1 or c > len(kids) + 1:
                raise EditError(f"child position {c} out of range 1..{len(kids) + 1}")
            if C < 0 or c - 1 + C > len(kids):
                raise EditError(f"cannot adopt {C} children from position {c} of {len(kids)}")
            new = Tree(e.label, kids[c - 1:c - 1 + C])
            return (Tree(n.label, kids[:c - 1] + (new,) + kids[c - 1 + C:]),)

        return _splice(t, e.index, ins)
    raise TypeError(f"not a tree edit: {e!r}")


def apply_script(t: Tree, script: Iterable[TreeEdit]) -> Tree:
    for k, e in enumerate(script):
        try:
            t = apply_edit(t, e)
        except EditError as err:
            raise ScriptError(k, err) from None
    return t


def random_edit(t: Tree, alphabet: Sequence[str], rng: np.random.Generator) -> TreeEdit:
    """Sample an applicable edit.

    The edit type is uniform over the types applicable to ``t``; every further
    parameter (node, child position, adopted count, label) is uniform over its
    valid values given the earlier choices.
    """
    alphabet = sorted(set(alphabet))
    if not alphabet:
        raise ValueError("alphabet must be non-empty")
    n = t.size
    root_deletable = len(t.children) == 1
    kinds = ["rep", "ins"]
    if n > 1:
        kinds.insert(0, "del")
    kind = kinds[int(rng.integers(len(kinds)))]
    if kind == "del":
        lo = 1 if root_deletable else 2
        return Deletion(int(rng.integers(lo, n + 1)))
    label = alphabet[int(rng.integers(len(alphabet)))]
    if kind == "rep":
        return Replacement(int(rng.integers(1, n + 1)), label)
    i = int(rng.integers(0, n + 1))
    if i == 0:
        return Insertion(0, 1, 1, label)
    arity = _arity(t, i)
    c = int(rng.integers(1, arity + 2))
    C = int(rng.integers(0, arity - c + 2))
    return Insertion(i, c, C, label)


def _arity(t: Tree, i: int) -> int:
    node, offset = t, 1
    while offset != i:
        start = offset + 1
        for child in node.children:
            if i < start + child.size:
                node, offset = child, start
                break
            start += child.size
    return len(node.children)


def format_script(script: Iterable[TreeEdit]) -> str:
    return ";".join(str(e) for e in script)


_EDIT_RE = re.compile(
    r"\s*(?:del\(\s*(\d+)\s*\)"
    r"|rep\(\s*(\d+)\s*,\s*([A-Za-z0-9_]+)\s*\)"
    r"|ins\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*([A-Za-z0-9_]+)\s*\))\s*"
)


def parse_edit(text: str) -> TreeEdit:
    m = _EDIT_RE.fullmatch(text)
    if m is None:
        raise ValueError(f"malformed edit {text!r}")
    g = m.groups()
    if g[0] is not None:
        return Deletion(int(g[0]))
    if g[1] is not None:
        return Replacement(int(g[1]), g[2])
    return Insertion(int(g[3]), int(g[4]), int(g[5]), g[6])


def parse_script(text: str) -> list[TreeEdit]:
    if not text.strip():
        return []
    return [parse_edit(part) for part in text.split(";")]

"""Ordered labeled trees, 1-based preorder indexing, and the text grammar.

Trees are immutable. The textual form is::

    Tree := Label | Label '(' Tree (',' Tree)* ')'

with optional ASCII whitespace between tokens, e.g. ``a(b(c,d),e)``.
"""
from __future__ import annotations

import re
from typing import Iterator, NamedTuple, Optional, Sequence

__all__ = [
    "Tree",
    "ParseError",
    "NodeInfo",
    "parse",
    "serialize",
    "size",
    "node_at",
    "preorder",
    "labels",
]

_LABEL_RE = re.compile(r"[A-Za-z0-9_]+")
_WS = " \t\r\n\f\v"


class ParseError(ValueError):
    """Raised for malformed tree text; ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class Tree:
    """An immutable ordered tree ``label(children...)``."""

    __slots__ = ("label", "children", "_size", "_hash", "_cache")

    def __init__(self, label: str, children: Sequence["Tree"] = ()):
        if not isinstance(label, str) or not _LABEL_RE.fullmatch(label):
            raise ValueError(f"invalid label {label!r}")
        children = tuple(children)
        for c in children:
            if not isinstance(c, Tree):
                raise TypeError(f"child must be a Tree, got {type(c).__name__}")
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "_size", 1 + sum(c._size for c in children))
        object.__setattr__(self, "_hash", hash((label, tuple(c._hash for c in children))))
        # per-instance memo for derived array forms (see ted/kernels)
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("Tree is immutable")

    def __len__(self) -> int:
        return self._size

    @property
    def size(self) -> int:
        return self._size

    def is_leaf(self) -> bool:
        return not self.children

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Tree):
            return NotImplemented
        if self._size != other._size or self._hash != other._hash:
            return False
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if a.label != b.label or len(a.children) != len(b.children):
                return False
            stack.extend(zip(a.children, b.children))
        return True

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Tree({serialize(self)!r})"

    def __str__(self) -> str:
        return serialize(self)

    def __reduce__(self):
        return (parse, (serialize(self),))


class NodeInfo(NamedTuple):
    label: str
    parent: Optional[int]
    position: Optional[int]


def parse(text: str) -> Tree:
    """Parse the grammar form of a tree.

    >>> serialize(parse("a( b(c, d), e )"))
    'a(b(c,d),e)'
    """
    n = len(text)

    def skip(p):
        while p < n and text[p] in _WS:
            p += 1
        return p

    def label_at(p):
        m = _LABEL_RE.match(text, p)
        if m is None:
            if p >= n:
                raise ParseError("unexpected end of input, expected a label", p)
            raise ParseError(f"expected a label, found {text[p]!r}", p)
        return m.group(0), m.end()

    # iterative descent so deep trees do not hit the recursion limit
    pos = skip(0)
    pending_label, pos = label_at(pos)
    stack: list[tuple[str, list]] = []
    result = None
    while True:
        pos = skip(pos)
        if pos < n and text[pos] == "(":
            stack.append((pending_label, []))
            pos = skip(pos + 1)
            pending_label, pos = label_at(pos)
            continue
        node = Tree(pending_label)
        # close as many nodes as the input says
        while True:
            if not stack:
                result = node
                break
            stack[-1][1].append(node)
            pos = skip(pos)
            if pos >= n:
                raise ParseError("unbalanced parentheses, expected ',' or ')'", pos)
            ch = text[pos]
            if ch == ",":
                pos = skip(pos + 1)
                pending_label, pos = label_at(pos)
                break
            if ch == ")":
                lab, kids = stack.pop()
                node = Tree(lab, kids)
                pos += 1
                continue
            raise ParseError(f"expected ',' or ')', found {ch!r}", pos)
        if result is not None:
            break
    pos = skip(pos)
    if pos != n:
        raise ParseError(f"trailing input {text[pos]!r}", pos)
    return result


def serialize(t: Tree) -> str:
    """Inverse of :func:`parse`; leaves are written without parentheses."""
    cached = t._cache.get("text")
    if cached is not None:
        return cached
    out: list[str] = []
    stack: list = [t]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        out.append(item.label)
        if item.children:
            out.append("(")
            stack.append(")")
            for k in range(len(item.children) - 1, -1, -1):
                stack.append(item.children[k])
                if k:
                    stack.append(",")
    text = "".join(out)
    t._cache["text"] = text
    return text


def size(t: Tree) -> int:
    return t._size


def preorder(t: Tree) -> Iterator[Tree]:
    """Yield subtrees in depth-first, left-to-right preorder."""
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def labels(t: Tree) -> list[str]:
    """Node labels in preorder."""
    return [node.label for node in preorder(t)]


def node_at(t: Tree, i: int) -> NodeInfo:
    """Return label, parent index and child position of preorder node ``i``.

    Indices are 1-based; the root (``i == 1``) has no parent.
    """
    if not isinstance(i, int) or i < 1 or i > t._size:
        raise IndexError(f"node index {i} out of range 1..{t._size}")
    node, offset = t, 1
    parent: Optional[int] = None
    position: Optional[int] = None
    while offset != i:
        start = offset + 1
        for k, child in enumerate(node.children):
            if i < start + child._size:
                parent, position = offset, k + 1
                node, offset = child, start
                break
            start += child._size
    return NodeInfo(node.label, parent, position)

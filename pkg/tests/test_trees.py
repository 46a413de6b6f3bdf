import pickle

import pytest
from hypothesis import given

from advedit.trees import NodeInfo, ParseError, Tree, labels, node_at, parse, preorder, serialize, size
from conftest import trees

FIG1 = "a(b(c,d),e)"


def test_leaf():
    t = parse("a")
    assert t.label == "a" and t.children == () and size(t) == 1
    assert serialize(Tree("a")) == "a"


def test_example_tree():
    t = parse(FIG1)
    assert size(t) == 5
    assert labels(t) == ["a", "b", "c", "d", "e"]
    assert serialize(t) == FIG1


def test_whitespace_and_multichar_labels():
    t = parse("  root_1 ( x2 ,\n\tY_3 ( z ) ) ")
    assert serialize(t) == "root_1(x2,Y_3(z))"


@pytest.mark.parametrize("text,pos", [
    ("a(b", 3),
    ("", 0),
    ("a(", 2),
    ("a()", 2),
    ("a(b,)", 4),
    ("a b", 2),
    ("a(b))", 4),
    ("(a)", 0),
    ("a(b;c)", 3),
])
def test_parse_errors(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.position == pos


def test_size_examples():
    assert size(parse("a(b,b,b)")) == 4
    assert len(parse(FIG1)) == 5


@pytest.mark.parametrize("i,expected", [
    (1, NodeInfo("a", None, None)),
    (2, NodeInfo("b", 1, 1)),
    (3, NodeInfo("c", 2, 1)),
    (4, NodeInfo("d", 2, 2)),
    (5, NodeInfo("e", 1, 2)),
])
def test_node_at(i, expected):
    assert node_at(parse(FIG1), i) == expected


@pytest.mark.parametrize("i", [0, 6, -1])
def test_node_at_out_of_range(i):
    with pytest.raises(IndexError):
        node_at(parse(FIG1), i)


def test_invalid_labels():
    for bad in ("", "a b", "a(", "é"):
        with pytest.raises(ValueError):
            Tree(bad)


def test_immutable():
    t = parse(FIG1)
    with pytest.raises(AttributeError):
        t.label = "z"


def test_deep_tree_is_not_recursive():
    depth = 20000
    text = "a(" * depth + "b" + ")" * depth
    t = parse(text)
    assert size(t) == depth + 1
    assert serialize(t) == text
    assert t == parse(text)


@given(trees)
def test_roundtrip(t):
    s = serialize(t)
    u = parse(s)
    assert u == t and hash(u) == hash(t)
    assert serialize(u) == s
    assert pickle.loads(pickle.dumps(t)) == t


@given(trees)
def test_size_additive(t):
    assert size(t) == 1 + sum(size(c) for c in t.children)
    assert size(t) == len(list(preorder(t)))


@given(trees)
def test_preorder_bijection(t):
    infos = [node_at(t, i) for i in range(1, size(t) + 1)]
    assert [n.label for n in infos] == labels(t)
    assert infos[0].parent is None
    seen_children: dict = {}
    for i, info in enumerate(infos[1:], start=2):
        # parents precede children, siblings appear left to right
        assert 1 <= info.parent < i
        seen_children[info.parent] = seen_children.get(info.parent, 0) + 1
        assert info.position == seen_children[info.parent]

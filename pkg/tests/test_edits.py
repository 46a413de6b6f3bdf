import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from advedit.edits import (
    Deletion,
    EditError,
    Insertion,
    Replacement,
    ScriptError,
    apply_edit,
    apply_script,
    format_script,
    parse_edit,
    parse_script,
    random_edit,
)
from advedit.ted import ted
from advedit.trees import node_at, parse, serialize, size
from conftest import trees

EXAMPLE_SCRIPT = [Deletion(2), Replacement(4, "f"), Insertion(1, 2, 1, "g")]


def test_caption_steps():
    t = parse("a(b(c,d),e)")
    steps = []
    for e in EXAMPLE_SCRIPT:
        t = apply_edit(t, e)
        steps.append(serialize(t))
    assert steps == ["a(c,d,e)", "a(c,d,f)", "a(c,g(d),f)"]


def test_apply_script_examples():
    assert serialize(apply_script(parse("a(b(c,d),e)"), EXAMPLE_SCRIPT)) == "a(c,g(d),f)"
    t = parse("a(b)")
    assert apply_script(t, []) is t
    assert apply_script(parse("a"), [Replacement(1, "b"), Replacement(1, "a")]) == parse("a")


def test_root_edits():
    assert apply_edit(parse("a(b(c))"), Deletion(1)) == parse("b(c)")
    assert apply_edit(parse("b(c)"), Insertion(0, 1, 1, "a")) == parse("a(b(c))")
    with pytest.raises(EditError):
        apply_edit(parse("a(b,c)"), Deletion(1))
    with pytest.raises(EditError):
        apply_edit(parse("a"), Deletion(1))
    with pytest.raises(EditError):
        apply_edit(parse("a"), Insertion(0, 1, 0, "b"))


@pytest.mark.parametrize("e", [
    Deletion(6), Deletion(0), Replacement(0, "x"), Replacement(6, "x"),
    Insertion(6, 1, 0, "x"), Insertion(1, 4, 0, "x"), Insertion(1, 0, 0, "x"),
    Insertion(1, 2, 2, "x"), Insertion(2, 1, 3, "x"), Insertion(1, 1, -1, "x"),
])
def test_precondition_errors(e):
    t = parse("a(b(c,d),e)")
    with pytest.raises(EditError):
        apply_edit(t, e)
    assert serialize(t) == "a(b(c,d),e)"


def test_invalid_label_rejected():
    with pytest.raises(ValueError):
        apply_edit(parse("a"), Replacement(1, "no spaces"))


def test_script_error_position():
    with pytest.raises(ScriptError) as info:
        apply_script(parse("a(b)"), [Replacement(1, "c"), Deletion(5), Deletion(2)])
    assert info.value.position == 1


def test_notation_roundtrip():
    text = "del(2);rep(4,f);ins(1,2,1,g)"
    assert format_script(EXAMPLE_SCRIPT) == text
    assert parse_script(text) == EXAMPLE_SCRIPT
    assert parse_script("") == []
    assert parse_edit(" ins( 0 ,1, 1, root ) ") == Insertion(0, 1, 1, "root")
    with pytest.raises(ValueError):
        parse_edit("mov(1,2)")


def test_random_edit_on_leaf_with_single_symbol():
    rng = np.random.default_rng(0)
    t = parse("a")
    for _ in range(200):
        e = random_edit(t, ["a"], rng)
        assert not isinstance(e, Deletion)
        if isinstance(e, Replacement):
            assert e == Replacement(1, "a")
        apply_edit(t, e)


def test_random_edit_covers_every_type():
    rng = np.random.default_rng(7)
    t = parse("a(b(c,d),e)")
    seen = set()
    for _ in range(10_000):
        e = random_edit(t, "abcdefg", rng)
        apply_edit(t, e)
        seen.add(type(e))
    assert seen == {Deletion, Replacement, Insertion}


def _inserted_index(t, e):
    """Preorder index of the node created by insertion ``e`` in the result."""
    if e.index == 0:
        return 1
    if e.child == 1:
        return e.index + 1
    # skip the subtrees of the siblings before the new node
    u = apply_edit(t, e)
    idx = e.index + 1
    for _ in range(e.child - 1):
        idx += _subtree_size(u, idx)
    return idx


def _subtree_size(t, i):
    n = size(t)
    j = i + 1
    while j <= n and _is_descendant(t, j, i):
        j += 1
    return j - i


def _is_descendant(t, j, i):
    while j is not None and j != i:
        j = node_at(t, j).parent
    return j == i


@given(trees, st.integers(0, 2**32 - 1))
def test_random_edit_applicable_and_size_accounting(t, seed):
    rng = np.random.default_rng(seed)
    for _ in range(5):
        e = random_edit(t, "abcd", rng)
        u = apply_edit(t, e)
        delta = {Deletion: -1, Replacement: 0, Insertion: 1}[type(e)]
        assert size(u) == size(t) + delta
        t = u


@given(trees, st.integers(0, 2**32 - 1))
def test_insert_then_delete_is_identity(t, seed):
    rng = np.random.default_rng(seed)
    e = random_edit(t, "abcd", rng)
    while not isinstance(e, Insertion):
        e = random_edit(t, "abcd", rng)
    u = apply_edit(t, e)
    j = _inserted_index(t, e)
    assert node_at(u, j).label == e.label
    assert apply_edit(u, Deletion(j)) == t


@given(trees, st.integers(0, 2**32 - 1), st.integers(0, 6), st.integers(0, 6))
def test_script_concatenation_and_witness(t, seed, n1, n2):
    rng = np.random.default_rng(seed)
    s1, u = [], t
    for _ in range(n1):
        e = random_edit(u, "abcd", rng)
        s1.append(e)
        u = apply_edit(u, e)
    s2 = []
    for _ in range(n2):
        e = random_edit(u, "abcd", rng)
        s2.append(e)
        u = apply_edit(u, e)
    assert apply_script(t, s1 + s2) == apply_script(apply_script(t, s1), s2) == u
    assert ted(t, u) <= len(s1) + len(s2)

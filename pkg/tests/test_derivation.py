"""Annotated rules, local checking, scripts, annotation and unrolling."""

from __future__ import annotations

import json
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from fimall.derivation import (
    Builder, CircularDerivation, Entry, LT, PositionVar, check_local, derivation_from_json,
    derivation_to_json, erase, load, parse_script, restrict, show_script, tree_signature, unroll,
    annotate,
)
from fimall.fixtures import fixture_path, hanoi, load_fixture
from fimall.gen import random_derivation
from fimall.syntax import parse_formula, parse_signature
from fimall.validity import snapshot_compare, Order

NAT = parse_signature("con z/0, s/1\nNat(x) =1 mu (exists y. x = s(y) * Nat(y)) + x = z")


def test_single_id_is_ok():
    b = Builder(NAT)
    r = b.root([parse_formula("Nat(x)", NAT)], parse_formula("Nat(x)", NAT))
    b.apply(r, "Id")
    d = b.done()
    assert check_local(d) == []
    assert d[r].seq.succ[0] == PositionVar("z", 0)


def test_mu_left_without_strict_entry_is_rejected():
    b = Builder(NAT)
    r = b.root([parse_formula("Nat(x)", NAT)], parse_formula("Nat(x)", NAT))
    (g,) = b.apply(r, "muL", "Nat")
    b.apply(g, "+L", b.find(g, pred=None))
    d = b.done(check=False)
    d.nodes[g].delta = frozenset(e for e in d.nodes[g].delta if e.rel != LT)
    errs = check_local(d)
    assert any("missing strict-decrease entry" in e.message for e in errs)


def test_wrong_generation_and_stale_fresh_variable_are_rejected():
    b = Builder(NAT)
    r = b.root([parse_formula("Nat(x) * Nat(y)", NAT)], parse_formula("Nat(x) * Nat(y)", NAT))
    (g,) = b.apply(r, "*L", b.find(r, pred=None))
    left, right = b.apply(g, "*R", split=[b.find(g, pred="Nat", index=0)])
    b.apply(left, "Id")
    b.apply(right, "Id")
    d = b.done()
    bad = replace(d.nodes[g].rule, fresh=PositionVar("x0", 0))
    d.nodes[g].rule = bad
    assert any("not fresh" in e.message for e in check_local(d))


def test_hanoi_fixtures_are_locally_correct():
    assert check_local(hanoi()) == []
    assert check_local(hanoi(infinite=True)) == []


def test_fixture_files_match_builders():
    from fimall.fixtures import scripts
    for name, text in scripts().items():
        assert fixture_path(name).read_text() == text


def test_annotate_plain_id():
    text = "con z/0\nNat(x) =1 mu x = z\nproof\nr: [Nat(x)] |- Nat(x) ; Id\n"
    d = load(text)
    assert check_local(d) == []
    assert all(v.gen == 0 for v in d[d.root].seq.posvars())


def test_annotate_two_mu_left_steps():
    text = ("P =1 mu P\nproof\n"
            "r: [P] |- P ; muL(a)\n"
            "a: [P] |- P ; muL(b)\n"
            "b: [P] |- P ; back(r)\n")
    d = load(text)
    assert check_local(d) == []
    strict = [e for e in d.omega("b") if e.rel == LT]
    assert len(strict) == 2 and all(e.prio == 1 for e in strict)
    assert d["b"].seq.ante[0][0] == PositionVar("x0", 2)


def test_annotation_is_faithful():
    for name in ("hanoi.fim", "hanoi_inf.fim"):
        text = fixture_path(name).read_text()
        plain = parse_script(text)
        assert show_script(erase(annotate(plain))) == show_script(plain)


def test_annotated_hanoi_matches_golden():
    golden = json.loads(fixture_path("hanoi.annotated.json").read_text())
    assert derivation_to_json(load_fixture("hanoi.fim")) == golden


def test_json_roundtrip():
    d = hanoi(infinite=True)
    back = derivation_from_json(json.loads(json.dumps(derivation_to_json(d))))
    assert check_local(back) == []
    assert derivation_to_json(back) == derivation_to_json(d)


def test_omega_grows_along_paths():
    d = hanoi()
    for nid in d.nodes:
        parent = d.parent(nid)
        if parent is not None:
            assert d.omega(parent) <= d.omega(nid)


def test_unroll_depth_zero_is_root_only():
    u = unroll(hanoi(), 0)
    assert list(u.nodes) == ["r"] and u["r"].rule.kind == "Open"


def test_unroll_acyclic_gives_whole_tree():
    b = Builder(NAT)
    r = b.root([parse_formula("Nat(x) * Nat(y)", NAT)], parse_formula("Nat(y) * Nat(x)", NAT))
    (g,) = b.apply(r, "*L", b.find(r, pred=None))
    left, right = b.apply(g, "*R", split=[b.find(g, formula=parse_formula("Nat(y)", NAT))])
    b.apply(left, "Id")
    b.apply(right, "Id")
    d = b.done()
    u = unroll(d, 10)
    assert len(u.nodes) == len(d.nodes)
    assert check_local(u) == []


def test_unroll_hanoi_prefix_is_locally_correct_and_decreases():
    d = hanoi()
    u = unroll(d, 40)
    assert check_local(u, allow_open=True) == []
    # along every path, successive copies of the root relate their move thread strictly
    move_pos = 4
    for nid, node in u.nodes.items():
        if node.origin != "†" or nid == "r":
            continue
        path = u.path(nid)
        prev = [p for p in path[:-1] if u[p].origin == "†"][-1]
        new, old = node.seq.ante[move_pos][0], u[prev].seq.ante[move_pos][0]
        assert snapshot_compare(new, old, u.omega(nid), u.n) is Order.LESS


def test_unroll_hanoi_inf_restart_is_incomparable():
    d = hanoi(infinite=True)
    u = unroll(d, 40)
    before_bud = d.parent("†4")
    restarts = [nid for nid, n in u.nodes.items()
                if n.origin == "†" and nid != "r" and u[u.parent(nid)].origin == before_bud]
    assert restarts
    for nid in restarts:
        prev = [p for p in u.path(nid)[:-1] if u[p].origin == "†"][-1]
        new, old = _move_var(u[nid].seq), _move_var(u[prev].seq)
        assert snapshot_compare(new, old, u.omega(nid), u.n) is Order.INCOMPARABLE


def _move_var(seq):
    return next(v for v, f in seq.ante if getattr(f, "name", "") == "move")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 6), st.integers(0, 6))
def test_unroll_is_prefix_stable(seed, k, j):
    d = random_derivation(random.Random(seed))
    assert tree_signature(restrict(unroll(d, k + j), k)) == tree_signature(unroll(d, k))


def test_hanoi_prefix_stable():
    d = hanoi(infinite=True)
    assert tree_signature(restrict(unroll(d, 30), 12)) == tree_signature(unroll(d, 12))


def test_script_parse_errors_have_positions():
    with pytest.raises(Exception) as e:
        parse_script("P =1 mu P\nproof\nr: [P] |- P ; frob(a)\n")
    assert "line 3" in str(e.value)

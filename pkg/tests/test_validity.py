"""Snapshot order, trace validity and the bounded oracle."""

from __future__ import annotations

import random
import time

import pytest

from hypothesis import given, settings, strategies as st

from fimall.derivation import EQ, LT, Entry, PositionVar, check_local, load
from fimall.fixtures import hanoi, load_fixture, zero_derivations
from fimall.gen import random_derivation
from fimall.validity import (
    CounterexamplePath, Invalid, NoViolationFound, OmegaClosure, Order, Valid, check_validity,
    oracle_bounded_check, snapshot_compare,
)

x0, x1 = PositionVar("x", 0), PositionVar("x", 1)


def test_snapshot_lexicographic():
    omega = {Entry(x1, LT, x0, 1), Entry(x1, EQ, x0, 2)}
    assert snapshot_compare(x1, x0, omega, 2) is Order.LESS
    assert snapshot_compare(x0, x1, omega, 2) is Order.GREATER


def test_snapshot_empty_is_incomparable():
    assert snapshot_compare(x1, PositionVar("y", 0), set(), 2) is Order.INCOMPARABLE
    assert snapshot_compare(x1, x1, set(), 2) is Order.EQUAL


def test_snapshot_needs_equality_above():
    # strict at priority 2 does not help when priority 1 is unrelated
    omega = {Entry(x1, LT, x0, 2)}
    assert snapshot_compare(x1, x0, omega, 2) is Order.INCOMPARABLE


VARS = [PositionVar(f"v{i}", 0) for i in range(6)]


@st.composite
def omegas(draw):
    # a forest: every variable relates to one older one, as rule applications produce
    out = set()
    for k in range(1, len(VARS)):
        parent = VARS[draw(st.integers(0, k - 1))]
        for prio in (1, 2):
            rel = draw(st.sampled_from([LT, EQ, None]))
            if rel:
                out.add(Entry(VARS[k], rel, parent, prio))
    return out


@settings(max_examples=200, deadline=None)
@given(omegas())
def test_snapshot_order_is_strict_partial_order(omega):
    c = OmegaClosure(omega, 2)
    less = {(a, b) for a in VARS for b in VARS if c.compare(a, b) is Order.LESS}
    assert all(a != b for a, b in less)
    assert not any((b, a) in less for a, b in less)
    for a, b in less:
        for b2, c2 in less:
            if b == b2:
                assert (a, c2) in less


def test_acyclic_is_valid():
    d = load("P =1 mu 1\nproof\nr: [P] |- P ; Id\n")
    assert check_validity(d) == Valid([])


def test_hanoi_valid_with_move_thread():
    t = time.perf_counter()
    v = check_validity(load_fixture("hanoi.fim"))
    assert time.perf_counter() - t < 1.0
    assert isinstance(v, Valid)
    cycles = {c for c, _, _ in v.threads}
    assert "†1 → † ; †1 → †" in cycles or "†1 → †" in cycles
    assert "†2 → †" in cycles
    d = hanoi()
    move = next(pv for pv, f in d[d.root].seq.ante if getattr(f, "name", "") == "move")
    assert {(str(pv), prio) for _, pv, prio in v.threads} == {(str(move), 1)}


def test_hanoi_inf_invalid_at_restart():
    t = time.perf_counter()
    v = check_validity(load_fixture("hanoi_inf.fim"))
    assert time.perf_counter() - t < 1.0
    assert isinstance(v, Invalid)
    assert v.cycle == "†4 → †"
    assert ("x4^0", (1, None)) in [(str(p), s) for p, s in v.threads]


def test_oracle_on_fixtures():
    assert isinstance(oracle_bounded_check(hanoi(), 4), NoViolationFound)
    cx = oracle_bounded_check(hanoi(infinite=True), 2)
    assert isinstance(cx, CounterexamplePath)
    # frozen: the first counterexample walks the restart branch twice
    assert cx.head == "†" and cx.segment == (0, 30, 60)
    assert cx.path[17] == "†3" and cx.path.count("†3") == 2


def test_oracle_acyclic():
    d = load("P =1 mu 1\nproof\nr: [P] |- P ; Id\n")
    assert isinstance(oracle_bounded_check(d, 5), NoViolationFound)


def test_oracle_agrees_on_random_sample():
    rng = random.Random(7)
    for _ in range(150):
        d = random_derivation(rng)
        if check_validity(d):
            assert oracle_bounded_check(d, 3)
        else:
            assert not oracle_bounded_check(d, 5)


def test_extra_equalities_never_break_validity():
    rng = random.Random(3)
    checked = 0
    while checked < 60:
        d = random_derivation(rng)
        if not check_validity(d):
            continue
        checked += 1
        for nid in list(d.nodes):
            node = d.nodes[nid]
            parent = d.parent(nid)
            if parent is None:
                continue
            born = node.seq.posvars() - d.nodes[parent].seq.posvars()
            olds = sorted(d.nodes[parent].seq.posvars())
            for new in born:
                old = rng.choice(olds)
                taken = {e.prio for e in node.delta if e.new == new}
                free = [i for i in (1, 2) if i not in taken]
                if free:
                    node.delta = node.delta | {Entry(new, EQ, old, rng.choice(free))}
        assert check_validity(d, local=False)


def test_invalid_describes_cycle():
    text = ("P =1 nu P\nproof\n"
            "r: [P] |- P ; nuL(a)\n"
            "a: [P] |- P ; back(r)\n")
    v = check_validity(load(text))
    assert isinstance(v, Invalid) and v.cycle == "a → r"
    assert "no strictly decreasing thread" in v.describe()


@pytest.mark.parametrize("name", sorted(zero_derivations()))
def test_circular_proofs_of_zero_are_rejected(name):
    d = zero_derivations()[name]
    assert check_local(d) == []
    assert isinstance(check_validity(d), Invalid)
    assert isinstance(oracle_bounded_check(d, 10), CounterexamplePath)

"""Terms, formulas, signatures, substitution and unification."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from fimall.syntax import (
    Con, Exists, NO_UNIFIER, Pred, SignatureError, Subst, Tensor, Var, alpha_eq, apply_subst,
    from_json, mgu, parse_formula, parse_signature, parse_term, show, show_signature, to_json,
    unfold_predicate,
)

SIGMA1 = """
con z/0, s/1, cons/2
Stream(x) =1 nu exists y w. x = cons(y, w) * Nat(y) * Stream(w)
Nat(x) =2 mu (exists y. x = s(y) * Nat(y)) + x = z
"""


@pytest.fixture
def sigma1():
    return parse_signature(SIGMA1)


def test_sigma1_priorities(sigma1):
    assert [(d.name, d.priority, d.polarity) for d in sigma1.defs] == [("Stream", 1, "nu"), ("Nat", 2, "mu")]
    assert sigma1.max_priority == 2


def test_unfold_nat_and_stream(sigma1):
    nat = unfold_predicate(sigma1, "Nat", (Var("x"),))
    assert alpha_eq(nat, parse_formula("(exists y. x = s(y) * Nat(y)) + x = z", sigma1))
    t = Con("s", (Var("q"),))
    stream = unfold_predicate(sigma1, "Stream", (t,))
    assert show(stream) == "exists y w. s(q) = cons(y, w) * Nat(y) * Stream(w)"


def test_mgu_examples():
    s = lambda x: Con("s", (x,))
    assert mgu(s(Var("y")), s(Var("w"))) == Subst({"y": Var("w")}) or mgu(s(Var("y")), s(Var("w"))) == Subst({"w": Var("y")})
    assert mgu(s(Var("y")), s(Var("w"))) == Subst({"y": Var("w")})
    assert mgu(Con("z"), s(Var("y"))) is NO_UNIFIER
    cons = Con("cons", (Var("I'"), Var("k")))
    assert mgu(Var("I"), cons) == Subst({"I": cons})


def test_occurs_check():
    assert mgu(Var("x"), Con("s", (Var("x"),))) is NO_UNIFIER


def test_substitution_examples(sigma1):
    f = parse_formula("Nat(x)", sigma1)
    assert apply_subst({"x": Con("s", (Var("y"),))}, f) == Pred("Nat", (Con("s", (Var("y"),)),))
    g = parse_formula("exists y. Nat(x) * Nat(y)", sigma1)
    out = apply_subst({"x": Var("y")}, g)
    assert isinstance(out, Exists) and out.var != "y"
    assert out.body == Tensor(Pred("Nat", (Var("y"),)), Pred("Nat", (Var(out.var),)))
    assert show(out) == "exists y'. Nat(y) * Nat(y')"


def test_print_parse_roundtrip(sigma1):
    for text in ["exists y w. x = cons(y, w) * Nat(y) * Stream(w)",
                 "(Nat(x) -o Nat(y)) -o 1",
                 "Nat(x) * (exists y. Nat(y)) * 1",
                 "+{a: 1, b: Nat(x), c: 0} & top",
                 "(Nat(x) + Nat(y)) + 1"]:
        f = parse_formula(text, sigma1)
        assert parse_formula(show(f), sigma1) == f
    assert parse_signature(show_signature(sigma1)) == sigma1


def test_json_roundtrip(sigma1):
    assert from_json(to_json(sigma1)) == sigma1
    f = parse_formula("forall y. Nat(y) -o x = s(y)", sigma1)
    assert from_json(to_json(f)) == f


@pytest.mark.parametrize("text, fragment", [
    ("Nat(x) =1 mu Nat(x)\nFoo(x) =1 nu Foo(x)", "mixes"),
    ("Nat(x) =1 mu Bar(x)", "unknown predicate"),
    ("Nat(x) =1 mu Nat(y)", "free"),
    ("Nat(x) =1 mu Nat(x)\nNat(x) =2 mu Nat(x)", "twice"),
    ("P =1 mu P * (P -o 1)", "variance"),
])
def test_signature_errors(text, fragment):
    with pytest.raises(SignatureError) as e:
        parse_signature(text)
    assert fragment in str(e.value).lower()


def test_signature_error_position():
    with pytest.raises(SignatureError) as e:
        parse_signature("con z/0\nNat(x) =1 mu x = q(z)")
    assert e.value.line == 2


def test_rewrite_normalization():
    sig = parse_signature("con nil/0, snoc/2, cons/2, ap/2\n"
                          "rule ap(snoc(I, k), L) => ap(I, cons(k, L))\nrule ap(nil, L) => L")
    t = parse_term("ap(snoc(snoc(nil, a), b), L)", sig)
    assert str(sig.normalize(t)) == "cons(a, cons(b, L))"


# random unification soundness

NAMES = ["a", "b", "c", "x", "y"]


def terms(depth=3):
    leaf = st.one_of(st.sampled_from(NAMES).map(Var), st.just(Con("z")))
    return st.recursive(leaf, lambda sub: st.one_of(
        sub.map(lambda t: Con("s", (t,))),
        st.tuples(sub, sub).map(lambda p: Con("p", p))), max_leaves=8)


@settings(max_examples=300, deadline=None)
@given(terms(), terms())
def test_mgu_sound(s, t):
    theta = mgu(s, t)
    if theta is not NO_UNIFIER:
        assert apply_subst(theta, s) == apply_subst(theta, t)
        assert apply_subst(theta, apply_subst(theta, s)) == apply_subst(theta, s)


@settings(max_examples=200, deadline=None)
@given(terms())
def test_mgu_self_and_instances(s):
    assert mgu(s, s) == Subst()
    inst = apply_subst({"x": Con("z")}, s)
    theta = mgu(s, inst)
    assert theta is not NO_UNIFIER

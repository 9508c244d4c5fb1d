import pytest

from fimall.cutelim import eliminate_cuts
from fimall.derivation import check_local
from fimall.encoder import (
    Comp, Emp, Endpoint, build_star_derivation, certify, empty_star, encode_cfg, encode_signature,
    encode_type_pred, inject_fault, lockstep_bisim, strong_progress_formula,
)
from fimall.fixtures import PROGRAMS, load_program
from fimall.session import Call, Case, Close, Fwd, Guarded, Send, Spawn, Wait, guard_check, typecheck
from fimall.syntax import Lolli, One, Plus, Pred, With, parse_signature, show
from fimall.validity import Invalid, Valid, check_validity

X, Y = Endpoint("x", "a"), Endpoint("y", "b")
Q = Call("y", "Q", "x")

CFG_ROWS = [
    (Emp(), X, X, "1"),
    (Comp(Close("z"), "z", One(), Wait("z", Close("y"))), None, Y, "exists z e. Cfg_0(z, e) * Cfg_1(z, e, y, b)"),
    (Fwd("y", "x"), X, Y, "ch(x, a) = ch(y, b)"),
    (Spawn("z", One(), Close("z"), Wait("z", Close("y"))), None, Y, "exists z e. Cfg_0(z, e) * Cfg_1(z, e, y, b)"),
    (Close("y"), None, Y, "Msg(y, b, closed) * 1"),
    (Wait("x", Close("y")), X, Y, "Msg(x, a, closed) -o Cfg_0(y, b)"),
    (Case("R", "y", (("l", Close("y")), ("r", Close("y")))), X, Y,
     "&{l: Msg(y, b, l) -o Cfg_0(x, a, y, succ(b)), r: Msg(y, b, r) -o Cfg_1(x, a, y, succ(b))}"),
    (Send("L", "x", "k", Q), X, Y, "Msg(x, a, k) * Call_Q(x, succ(a), y, b)"),
    (Send("R", "y", "k", Q), X, Y, "Msg(y, b, k) * Call_Q(x, a, y, succ(b))"),
    (Case("L", "x", (("l", Q), ("r", Q))), X, Y,
     "&{l: Msg(x, a, l) -o Call_Q(x, succ(a), y, b), r: Msg(x, a, r) -o Call_Q(x, succ(a), y, b)}"),
    (Case("R", "y", (("nu_t", Q),)), X, Y, "Msg(y, b, nu_t) -o Call_Q(x, a, y, succ(b))"),
    (Send("L", "x", "nu_t", Q), X, Y, "Msg(x, a, nu_t) * Call_Q(x, succ(a), y, b)"),
    (Send("R", "y", "mu_t", Q), X, Y, "Msg(y, b, mu_t) * Call_Q(x, a, y, succ(b))"),
    (Case("L", "x", (("mu_t", Q),)), X, Y, "Msg(x, a, mu_t) -o Call_Q(x, succ(a), y, b)"),
    (Q, X, Y, "Call_Q(x, a, y, b)"),
]

TYPES = parse_signature("t =1 nu &{l: 1, r: t}\ns =2 mu +{l: 1, r: s}\n")
TYPE_ROWS = [
    (One(), "Msg(y, b, closed) * Done"),
    (With((("l", One()), ("r", Pred("t")))), "&{l: Msg(y, b, l) -o P_one(y, succ(b)), r: Msg(y, b, r) -o P_t(y, succ(b))}"),
    (Pred("t"), "Msg(y, b, nu_t) -o P_t_1(y, succ(b))"),
    (Plus((("l", One()), ("r", Pred("s")))), "+{l: Msg(y, b, l) * P_one(y, succ(b)), r: Msg(y, b, r) * P_s(y, succ(b))}"),
    (Pred("s"), "Msg(y, b, mu_s) * P_s_2(y, succ(b))"),
]


def _defs():
    for name in PROGRAMS:
        prog = load_program(name)
        for main in prog.defs:
            yield name, main


GUARD = {(n, m): v for n in PROGRAMS for m, v in guard_check(load_program(n), None).items()}


@pytest.mark.parametrize("c, left, right, want", CFG_ROWS)
def test_cfg_rows(c, left, right, want):
    assert show(encode_cfg(c, left, right)) == want


@pytest.mark.parametrize("typ, want", TYPE_ROWS)
def test_type_rows(typ, want):
    assert show(encode_type_pred(TYPES, typ, Y)) == want


def test_empty_type_context_is_done():
    enc = encode_signature(load_program("closewait.ssn"))
    d = enc.base.lookup("Done")
    assert show(d.body) == "1" and d.params == ()


def test_empty_needs_equal_endpoints():
    with pytest.raises(ValueError):
        encode_cfg(Emp(), X, Y)


def test_priorities():
    prog = load_program("pingpong.ssn")
    enc = encode_signature(prog)
    n = prog.n
    call = enc.base.lookup("Call_Ping")
    assert (call.priority, call.polarity) == (n + 1, "nu")
    for name in ("Cfg_Ping", "Cfg_Pong_0", "Done", "P_one"):
        d = enc.base.lookup(name)
        assert (d.priority, d.polarity) == (n + 2, "mu")
    assert enc.base.lookup("P_astream").priority == 2


def test_progress_formula_closed_and_open():
    prog = load_program("closewait.ssn")
    g = strong_progress_formula(encode_signature(prog), "CloseWait")
    assert show(g.formula) == "Call_CloseWait(y, g_y) -o P_one(y, g_y)"
    g = strong_progress_formula(encode_signature(load_program("pingpong.ssn")), "Pong")
    assert isinstance(g.formula, Lolli)
    assert g.text.startswith("forall X.")


@pytest.mark.parametrize("name, main", list(_defs()))
def test_star_validity_follows_guard(name, main):
    prog = load_program(name)
    td = typecheck(prog, [main])[main]
    star = build_star_derivation(prog, main, td)
    assert check_local(star) == []
    v = check_validity(star, local=False)
    if isinstance(GUARD[name, main], Guarded):
        assert isinstance(v, Valid)
        assert lockstep_bisim(td, star).agree
    else:
        assert isinstance(v, Invalid)


@pytest.mark.parametrize("name, main", [("pingpong.ssn", "Pong"), ("server.ssn", "Server"), ("drain.ssn", "DrainTwo")])
def test_injected_fault_is_detected(name, main):
    prog = load_program(name)
    td = typecheck(prog, [main])[main]
    bad, gid = inject_fault(build_star_derivation(prog, main, td))
    assert bad is not None
    r = lockstep_bisim(td, bad)
    assert not r.agree


def test_empty_star_block():
    enc = encode_signature(load_program("pingpong.ssn"))
    for typ in (One(), Pred("astream")):
        assert check_local(empty_star(enc.types, enc.base, typ)) == []


def test_certify_closewait():
    c = certify(load_program("closewait.ssn"), "CloseWait", run_budget=100)
    assert c.ok
    assert str(c.runtime_outcome) == "Empty"


def test_certify_pong_open():
    c = certify(load_program("pingpong.ssn"), "Pong")
    assert c.ok and c.runtime_outcome is None


def test_certify_loop_reports_guard():
    c = certify(load_program("loop.ssn"), "Loop")
    assert not c.ok
    assert c.summary()["guard"].startswith("Unguarded")


@pytest.mark.parametrize("name, main", [("closewait.ssn", "CloseWait"), ("pingpong.ssn", "Pong"),
                                        ("server.ssn", "Session")])
def test_star_cut_elimination(name, main):
    star = build_star_derivation(load_program(name), main)
    r = eliminate_cuts(star, 8)
    assert r.derivation.is_cut_free()

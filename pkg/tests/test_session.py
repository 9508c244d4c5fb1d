import pytest

from fimall.fixtures import PROGRAMS, load_program
from fimall.session import (
    Guarded, ProgramSyntaxError, SessionTypeError, Unguarded, check_typing, guard_check, parse_program,
    typecheck,
)

NAT = "type nat =1 mu +{z: 1, s: nat}\n"


def verdicts(name):
    return guard_check(load_program(name))


def test_empty_program():
    prog = parse_program("")
    assert prog.defs == {} and typecheck(prog) == {}


@pytest.mark.parametrize("name", PROGRAMS)
def test_fixtures_typecheck_locally(name):
    prog = load_program(name)
    for td in typecheck(prog).values():
        assert check_typing(prog, td) == []


def test_loop_and_ping_unguarded_pong_guarded():
    pp = verdicts("pingpong.ssn")
    assert isinstance(verdicts("loop.ssn")["Loop"], Unguarded)
    assert isinstance(pp["Ping"], Unguarded)
    assert isinstance(pp["Pong"], Guarded)
    assert isinstance(pp["PingPong"], Unguarded)


def test_unguarded_witness_names_a_cycle():
    v = verdicts("loop.ssn")["Loop"]
    assert v.cycle.endswith("→ Loop") and v.cycle in v.describe()


def test_nonrecursive_definition_is_guarded():
    prog = parse_program(NAT + "proc Z : . |- (x : nat) = R x.mu_nat; R x.z; close R x\n")
    v = guard_check(prog)["Z"]
    assert isinstance(v, Guarded)


@pytest.mark.parametrize("name, expect", [
    ("drain.ssn", {"Drain", "Copy", "DrainTwo", "CopyTwo", "Two"}),
    ("server.ssn", {"Server", "Client", "Session"}),
    ("closewait.ssn", {"Unit", "Waiter", "CloseWait", "Relay"}),
])
def test_guarded_fixtures(name, expect):
    v = verdicts(name)
    assert {k for k, g in v.items() if isinstance(g, Guarded)} == expect


def test_label_not_in_type():
    with pytest.raises(SessionTypeError, match="label q not in"):
        typecheck(parse_program(NAT + "proc Bad : . |- (x : nat) = R x.mu_nat; R x.q; close R x\n"))


def test_wrong_unfolding_direction():
    with pytest.raises(SessionTypeError):
        typecheck(parse_program(NAT + "proc Bad : (x : nat) |- (y : 1) = L x.mu_nat; wait L x; close R y\n"))


def test_branches_must_cover_the_type():
    src = NAT + "proc Bad : (x : nat) |- (y : 1) = case L x (mu_nat => case L x (z => wait L x; close R y))\n"
    with pytest.raises(SessionTypeError, match="branches"):
        typecheck(parse_program(src))


def test_syntax_error_position():
    with pytest.raises(ProgramSyntaxError) as e:
        parse_program(NAT + "proc X : . |- (x : nat) = close R ;\n")
    assert (e.value.line, e.value.col) == (2, 35)


def test_linear_use_is_enforced():
    with pytest.raises((SessionTypeError, ProgramSyntaxError)):
        parse_program(NAT + "proc X : (y : 1) |- (x : 1) = close R x\n")


def test_verdict_stable_under_renaming_and_reordering():
    a = NAT + (
        "proc Loop : (y : 1) |- (x : nat) = R x.mu_nat; R x.s; x <- Loop <- y\n"
        "proc Drain : (x : nat) |- (y : 1) = case L x (mu_nat => case L x (z => wait L x; close R y"
        " | s => y <- Drain <- x))\n"
    )
    b = NAT + (
        "proc Eat : (u : nat) |- (v : 1) = case L u (mu_nat => case L u (s => v <- Eat <- u"
        " | z => wait L u; close R v))\n"
        "proc Spin : (p : 1) |- (q : nat) = R q.mu_nat; R q.s; q <- Spin <- p\n"
    )
    va, vb = guard_check(parse_program(a)), guard_check(parse_program(b))
    assert type(va["Loop"]) is type(vb["Spin"]) is Unguarded
    assert type(va["Drain"]) is type(vb["Eat"]) is Guarded


def test_unfolding_labels_are_reserved():
    with pytest.raises(SessionTypeError, match="reserved"):
        parse_program("type t =1 mu +{mu_x: 1}\n")

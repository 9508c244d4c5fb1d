"""Fixture derivations and programs, built with the tactic API and written out as scripts."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..derivation import Builder, CircularDerivation, load
from ..syntax import Signature, Subst, parse_formula, parse_signature, parse_term

HANOI_BASE = """\
con nil/0, cons/2, snoc/2, ap/2, e/2, f/2, zero/0, succ/1, d1/0
atom peg/2, count/1
rule ap(snoc(I, k), L) => ap(I, cons(k, L))
rule ap(nil, L) => L
rule e(snoc(I, k), m) => e(I, f(I, m))
rule e(nil, m) => m
rule f(snoc(I, k), m) => f(I, f(I, m))
rule f(nil, m) => succ(m)
"""

HANOI = HANOI_BASE + """\
move(s, t, a, I, m) =1 mu +{next: exists I' k. I = snoc(I', k) * move(s, a, t, I', m)
    * pop_push(s, t, k, I', m) * move(a, t, s, I', f(I', m)), done: I = nil}
pop_push(s, t, k, I', m) =1 mu forall L L'. count(e(I', m)) * peg(s, cons(k, L')) * peg(t, L)
    -o count(f(I', m)) * peg(s, L') * peg(t, cons(k, L))
"""

HANOI_INF = HANOI_BASE + """\
move(s, t, a, I, m) =2 mu +{next: exists I' k. I = snoc(I', k) * move(s, a, t, I', m)
    * pop_push(s, t, k, I', m) * move(a, t, s, I', f(I', m)) * start(s, t, a, I, m), done: I = nil}
pop_push(s, t, k, I', m) =2 mu forall L L'. count(e(I', m)) * peg(s, cons(k, L')) * peg(t, L)
    -o count(f(I', m)) * peg(s, L') * peg(t, cons(k, L))
start(s, t, a, I, m) =1 nu +{restart: I = snoc(nil, d1) * forall L L'.
    peg(s, L) * peg(t, ap(snoc(nil, d1), L')) * count(e(snoc(nil, d1), m))
    -o peg(s, ap(snoc(nil, d1), L)) * peg(t, L') * count(m) * move(s, t, a, snoc(nil, d1), m), term: 1}
"""

HANOI_ROOT = (["peg(s, ap(I, Ls))", "peg(t, Lt)", "peg(a, La)", "count(m)", "move(s, t, a, I, m)"],
              "peg(s, Ls) * peg(t, ap(I, Lt)) * peg(a, La) * count(e(I, m))")


class Tactics:
    """Small conveniences over Builder for writing fixtures by hand."""

    def __init__(self, sig: Signature):
        self.sig = sig
        self.b = Builder(sig)

    def f(self, text: str):
        return parse_formula(text, self.sig)

    def t(self, text: str):
        return parse_term(text, self.sig)

    def theta(self, **kw) -> Subst:
        return Subst({k.replace("_", "'"): self.t(v) for k, v in kw.items()})

    def pv(self, gid: str, text: str):
        return self.b.find(gid, formula=self.f(text))

    def pvs(self, gid: str, *texts):
        return [self.pv(gid, x) for x in texts]

    def left(self, gid: str, kind: str, text: str, **kw) -> list:
        """Apply a left rule to the antecedent `text` (a formula or a predicate name)."""
        pv = self.b.find(gid, pred=text) if text.isidentifier() else self.pv(gid, text)
        return self.b.apply(gid, kind, pv, **kw)

    def right(self, gid: str, kind: str, **kw) -> list:
        return self.b.apply(gid, kind, **kw)

    def split_tensor(self, gid: str, text: str | None = None, times: int = 1) -> str:
        """*L repeatedly on the same antecedent (the remainder keeps its position variable)."""
        pv = self.pv(gid, text) if text else self.b.find(gid, cls=_tensor())
        for _ in range(times):
            (gid,) = self.b.apply(gid, "*L", pv)
        return gid

    def ids(self, gid: str) -> None:
        """Close x1:A1, ..., xn:An |- A1 * ... * An by *R and Id."""
        seq = self.b.seq(gid)
        goal = seq.succ[1]
        from ..syntax import Tensor
        if not isinstance(goal, Tensor):
            self.b.apply(gid, "Id")
            return
        left, right = self.b.apply(gid, "*R", split=[self.b.find(gid, formula=goal.left)])
        self.b.apply(left, "Id")
        self.ids(right)

    def permute(self, gid: str) -> None:
        """Close w:A1 * ... * An |- (permutation of the Ai) by *L then *R and Id."""
        from ..syntax import Tensor
        while any(isinstance(f, Tensor) for _, f in self.b.seq(gid).ante):
            gid = self.split_tensor(gid)
        self.ids(gid)


def _tensor():
    from ..syntax import Tensor
    return Tensor


def hanoi(infinite: bool = False) -> CircularDerivation:
    """The Tower-of-Hanoi correctness derivation; `infinite` gives the restarting variant."""
    tc = Tactics(parse_signature(HANOI_INF if infinite else HANOI))
    b, f = tc.b, tc.f
    ante, succ = HANOI_ROOT
    root = b.root([f(x) for x in ante], f(succ), id="†")
    (g,) = b.apply(root, "muL", b.find(root, pred="move"))
    nxt, done = b.apply(g, "+L", b.find(g, cls=_plus()))
    # next: move I' from s to a, pop/push k, move I' from a to t
    (g,) = b.apply(nxt, "EL", b.find(nxt, cls=_exists()))
    (g,) = b.apply(g, "EL", b.find(g, cls=_exists()))
    eq = b.find(g, cls=_tensor())
    (g,) = b.apply(g, "*L", eq)
    (g,) = b.apply(g, "=L", b.find(g, formula=f("I = snoc(I', k)")))
    g = tc.split_tensor(g, times=3 if infinite else 2)
    theta1 = tc.theta(t="a", a="t", I="I'", Ls="cons(k, Ls)", Lt="La", La="Lt")
    f1 = _instance_succ(tc, theta1)
    cut1 = tc.pvs(g, "peg(s, ap(I', cons(k, Ls)))", "peg(t, Lt)", "peg(a, La)", "count(m)", "move(s, a, t, I', m)")
    bud1, g = b.apply(g, "Cut", formula=f1, split=cut1, ids=["†1", None])
    b.back(bud1, "†", theta1)
    g = tc.split_tensor(g, "peg(s, cons(k, Ls)) * peg(a, ap(I', La)) * peg(t, Lt) * count(e(I', m))", times=3)
    f2 = f("count(f(I', m)) * peg(s, Ls) * peg(t, cons(k, Lt))")
    cut2 = tc.pvs(g, "pop_push(s, t, k, I', m)", "count(e(I', m))", "peg(s, cons(k, Ls))", "peg(t, Lt)")
    star, g = b.apply(g, "Cut", formula=f2, split=cut2, ids=["★", None])
    _pop_push(tc, star)
    g = tc.split_tensor(g, "count(f(I', m)) * peg(s, Ls) * peg(t, cons(k, Lt))", times=2)
    theta2 = tc.theta(s="a", a="s", I="I'", Ls="La", Lt="cons(k, Lt)", La="Ls", m="f(I', m)")
    f3 = _instance_succ(tc, theta2)
    cut3 = tc.pvs(g, "peg(a, ap(I', La))", "peg(t, cons(k, Lt))", "peg(s, Ls)", "count(f(I', m))",
                  "move(a, t, s, I', f(I', m))")
    bud2, g = b.apply(g, "Cut", formula=f3, split=cut3, ids=["†2", "†3" if infinite else None])
    b.back(bud2, "†", theta2)
    if infinite:
        _restart(tc, g)
    else:
        tc.permute(g)
    # done: nothing to move
    (g,) = b.apply(done, "=L", b.find(done, formula=f("I = nil")))
    tc.ids(g)
    return b.done()


def _plus():
    from ..syntax import Plus
    return Plus


def _exists():
    from ..syntax import Exists
    return Exists


def _instance_succ(tc: Tactics, theta: Subst):
    from ..syntax import apply_subst
    return apply_subst(theta, tc.f(HANOI_ROOT[1]), tc.sig)


def _pop_push(tc: Tactics, gid: str) -> None:
    b = tc.b
    (g,) = b.apply(gid, "muL", b.find(gid, pred="pop_push"))
    (g,) = b.apply(g, "AL", b.find(g, cls=_forall()), term=tc.t("Lt"))
    (g,) = b.apply(g, "AL", b.find(g, cls=_forall()), term=tc.t("Ls"))
    lolli = b.find(g, cls=_lolli())
    rest = [v for v, _ in b.seq(g).ante if v != lolli]
    pre, post = b.apply(g, "-oL", lolli, split=rest)
    tc.ids(pre)
    b.apply(post, "Id")


def _restart(tc: Tactics, gid: str) -> None:
    b, f = tc.b, tc.f
    (g,) = b.apply(gid, "nuL", b.find(gid, pred="start"))
    start = b.find(g, cls=_plus())
    restart, term = b.apply(g, "+L", start)
    (g,) = b.apply(term, "1L", b.find(term, cls=_one()))
    tc.permute(g)
    (g,) = b.apply(restart, "*L", start)
    (g,) = b.apply(g, "=L", b.find(g, formula=f("snoc(I', k) = snoc(nil, d1)")))
    g = tc.split_tensor(g, "peg(a, La) * peg(t, cons(d1, Lt)) * peg(s, Ls) * count(succ(m))", times=3)
    (g,) = b.apply(g, "AL", b.find(g, cls=_forall()), term=tc.t("Ls"))
    (g,) = b.apply(g, "AL", b.find(g, cls=_forall()), term=tc.t("Lt"))
    lolli = b.find(g, cls=_lolli())
    pre, post = b.apply(g, "-oL", lolli, split=tc.pvs(g, "peg(s, Ls)", "peg(t, cons(d1, Lt))", "count(succ(m))"),
                        ids=["†5", None])
    tc.ids(pre)
    g = tc.split_tensor(post, "peg(s, cons(d1, Ls)) * peg(t, Lt) * count(m) * move(s, t, a, snoc(nil, d1), m)",
                        times=3)
    b.nodes["†4"] = b.nodes.pop(g)
    b.nodes["†4"].id = "†4"
    parent = next(n for n in b.nodes.values() if g in n.premises)
    parent.premises = tuple("†4" if p == g else p for p in parent.premises)
    b.back("†4", "†", tc.theta(I="snoc(nil, d1)"))


def _forall():
    from ..syntax import Forall
    return Forall


def _lolli():
    from ..syntax import Lolli
    return Lolli


def _one():
    from ..syntax import One
    return One


def _with():
    from ..syntax import With
    return With


FIXTURE_DIR = Path(__file__).parent


def fixture_path(name: str) -> Path:
    return Path(str(resources.files(__package__) / name))


def load_fixture(name: str) -> CircularDerivation:
    return load(fixture_path(name).read_text())


PROGRAMS = ("closewait.ssn", "drain.ssn", "loop.ssn", "pingpong.ssn", "server.ssn")


def load_program(name: str):
    from ..session import parse_program
    return parse_program(fixture_path(name).read_text())


def unit_cut() -> CircularDerivation:
    """A cut of 1R against 1L under a tensor."""
    tc = Tactics(parse_signature("atom A/0"))
    b = tc.b
    root = b.root([tc.f("A")], tc.f("1 * A"), id="r")
    left, right = b.apply(root, "*R", split=[])
    cl, cr = b.apply(left, "Cut", formula=tc.f("1"), split=[])
    b.apply(cl, "1R")
    (g,) = b.apply(cr, "1L", b.find(cr, cls=_one()))
    b.apply(g, "1R")
    b.apply(right, "Id")
    return b.done()


NAT_STREAM = """\
Stream =1 nu Nat * Stream
Nat =2 mu +{zero: 1, succ: Nat}
"""


def nat_succ_cut() -> CircularDerivation:
    """Nat |- Nat by recursion, rebuilding each successor through a cut with the recursive call."""
    tc = Tactics(parse_signature(NAT_STREAM))
    b = tc.b
    root = b.root([tc.f("Nat")], tc.f("Nat"), id="r")
    (g,) = b.apply(root, "muL", "Nat")
    zero, succ = b.apply(g, "+L", b.find(g, cls=_plus()))
    (g,) = b.apply(zero, "1L", b.find(zero, cls=_one()))
    (g,) = b.apply(g, "muR")
    (g,) = b.apply(g, "+R", label="zero")
    b.apply(g, "1R")
    bud, g = b.apply(succ, "Cut", formula=tc.f("Nat"), split=[b.find(succ, pred="Nat")], ids=["bud", None])
    b.back(bud, "r")
    (g,) = b.apply(g, "muR")
    (g,) = b.apply(g, "+R", label="succ")
    b.apply(g, "Id")
    return b.done()


def nat_double() -> CircularDerivation:
    """Nat |- Nat doubling its input; the recursive call sits under two successors."""
    tc = Tactics(parse_signature(NAT_STREAM))
    b = tc.b
    root = b.root([tc.f("Nat")], tc.f("Nat"), id="r")
    (g,) = b.apply(root, "muL", "Nat")
    zero, succ = b.apply(g, "+L", b.find(g, cls=_plus()))
    (g,) = b.apply(zero, "1L", b.find(zero, cls=_one()))
    (g,) = b.apply(g, "muR")
    (g,) = b.apply(g, "+R", label="zero")
    b.apply(g, "1R")
    (g,) = b.apply(succ, "muR")
    (g,) = b.apply(g, "+R", label="succ")
    (g,) = b.apply(g, "muR")
    (g,) = b.apply(g, "+R", label="succ")
    b.back(g, "r")
    return b.done()


def stream_cut() -> CircularDerivation:
    """Stream |- Stream copying a stream; every round starts with a cut against the identity."""
    tc = Tactics(parse_signature(NAT_STREAM))
    b = tc.b
    root = b.root([tc.f("Stream")], tc.f("Stream"), id="r")
    idl, g = b.apply(root, "Cut", formula=tc.f("Stream"), split=[b.find(root, pred="Stream")])
    b.apply(idl, "Id")
    (g,) = b.apply(g, "nuR")
    (g,) = b.apply(g, "nuL", "Stream")
    (g,) = b.apply(g, "*L", b.find(g, cls=_tensor()))
    left, right = b.apply(g, "*R", split=[b.find(g, pred="Nat")])
    b.apply(left, "Id")
    b.back(right, "r")
    return b.done()


def stream_double_cut() -> CircularDerivation:
    """Two stream copies composed by a cut inside the cycle."""
    tc = Tactics(parse_signature(NAT_STREAM))
    b = tc.b
    root = b.root([tc.f("Stream")], tc.f("Stream"), id="r")
    (g,) = b.apply(root, "nuR")
    (g,) = b.apply(g, "nuL", "Stream")
    (g,) = b.apply(g, "*L", b.find(g, cls=_tensor()))
    cl, cr = b.apply(g, "Cut", formula=tc.f("Nat * Stream"), split=[v for v, _ in b.seq(g).ante])
    tc.ids(cl)
    (g,) = b.apply(cr, "*L", b.find(cr, cls=_tensor()))
    left, right = b.apply(g, "*R", split=[b.find(g, pred="Nat")])
    b.apply(left, "Id")
    b.back(right, "r")
    return b.done()


def proof_fixtures() -> dict:
    """Every hand-built proof fixture by file stem."""
    return {
        "hanoi": hanoi(), "hanoi_inf": hanoi(infinite=True), "unit_cut": unit_cut(),
        "nat_succ_cut": nat_succ_cut(), "nat_double": nat_double(), "stream_cut": stream_cut(),
        "stream_double_cut": stream_double_cut(),
    }


def cut_corpus(seed: int = 7, random_count: int = 16) -> dict:
    """Valid proof fixtures plus random valid derivations glued together by a cut."""
    import random
    from ..gen import random_cut_proof
    from ..validity import check_validity
    corpus = {k: d for k, d in proof_fixtures().items() if check_validity(d)}
    rng = random.Random(seed)
    for i in range(random_count):
        corpus[f"random_cut_{i}"] = random_cut_proof(rng)
    return corpus


def scripts() -> dict:
    """File name -> script text for every generated proof fixture."""
    from ..derivation import show_script
    return {f"{name}.fim": show_script(d) for name, d in proof_fixtures().items()}


def write_fixtures(directory: Path = FIXTURE_DIR) -> list:
    out = []
    for name, text in scripts().items():
        path = Path(directory) / name
        path.write_text(text)
        out.append(path)
    return out



# ---------------------------------------------------------------------------
# locally correct circular "proofs" of . |- 0; the validity check must reject each one

ZERO_SIG = """\
S =1 nu S
N =2 mu N
M =2 mu M * M
X =1 nu Y
Y =2 mu X
Z =3 mu W
W =4 nu Z
Stream =1 nu Nat * Stream
Nat =2 mu +{zero: 1, succ: Nat}
"""


def _zero_goal():
    tc = Tactics(parse_signature(ZERO_SIG))
    return tc, tc.b, tc.b.root([], tc.f("0"), id="r")


def _spin(b: Builder, gid: str, *steps) -> None:
    """Apply each (rule, principal predicate) once, then loop back to `gid`."""
    g = gid
    for kind, pred in steps:
        (g,) = b.apply(g, kind, pred)
    b.back(g, gid)


def zero_self_cut() -> CircularDerivation:
    """Cut 0 against Id; the left premise is the root again."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("0"), split=[])
    b.back(left, "r")
    b.apply(right, "Id")
    return b.done()


def zero_mu_right() -> CircularDerivation:
    """N produced forever by muR, consumed forever by muL."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("N"), split=[])
    _spin(b, left, ("muR", None))
    _spin(b, right, ("muL", "N"))
    return b.done()


def zero_nu_left() -> CircularDerivation:
    """S produced forever by nuR, consumed forever by nuL."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("S"), split=[])
    _spin(b, left, ("nuR", None))
    _spin(b, right, ("nuL", "S"))
    return b.done()


def zero_priority_nu() -> CircularDerivation:
    """X and Y unfold into each other; the outer nu wins on both sides."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("Y"), split=[])
    _spin(b, left, ("muR", None), ("nuR", None))
    _spin(b, right, ("muL", "Y"), ("nuL", "X"))
    return b.done()


def zero_priority_mu() -> CircularDerivation:
    """Z and W unfold into each other; the outer mu wins on both sides."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("Z"), split=[])
    _spin(b, left, ("muR", None), ("nuR", None))
    _spin(b, right, ("muL", "Z"), ("nuL", "W"))
    return b.done()


def zero_tensor_tree() -> CircularDerivation:
    """M = M * M built as an infinite binary tree, then cut away."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("M"), split=[])
    (g,) = b.apply(left, "muR")
    g1, g2 = b.apply(g, "*R", split=[])
    b.back(g1, left)
    b.back(g2, left)
    again, idr = b.apply(right, "Cut", formula=tc.f("0"), split=[b.find(right, pred="M")])
    b.back(again, right)
    b.apply(idr, "Id")
    return b.done()


def zero_unit_detour() -> CircularDerivation:
    """Cut in a 1, discard it by 1L, start over."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("1"), split=[])
    b.apply(left, "1R")
    (g,) = b.apply(right, "1L", b.find(right, cls=_one()))
    b.back(g, "r")
    return b.done()


def zero_tensor_detour() -> CircularDerivation:
    """Cut in 1 * 1, take it apart, start over."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("1 * 1"), split=[])
    l1, l2 = b.apply(left, "*R", split=[])
    b.apply(l1, "1R")
    b.apply(l2, "1R")
    (g,) = b.apply(right, "*L", b.find(right, cls=_tensor()))
    (g,) = b.apply(g, "1L", b.find(g, cls=_one()))
    (g,) = b.apply(g, "1L", b.find(g, cls=_one()))
    b.back(g, "r")
    return b.done()


def zero_lolli_detour() -> CircularDerivation:
    """1 -o 0 proved from the root itself, then applied to 1R."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("1 -o 0"), split=[])
    (g,) = b.apply(left, "-oR")
    (g,) = b.apply(g, "1L", b.find(g, cls=_one()))
    b.back(g, "r")
    arg, g = b.apply(right, "-oL", b.find(right, cls=_lolli()), split=[])
    b.apply(arg, "1R")
    b.apply(g, "Id")
    return b.done()


def zero_with_detour() -> CircularDerivation:
    """Both components of a & are the root; one is projected out."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("&{a: 0, b: 0}"), split=[])
    for g in b.apply(left, "&R"):
        b.back(g, "r")
    (g,) = b.apply(right, "&L", b.find(right, cls=_with()), label="b")
    b.apply(g, "Id")
    return b.done()


def zero_plus_detour() -> CircularDerivation:
    """Inject 1 into a sum, case on it, and start over in the 1 branch."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("+{a: 0, b: 1}"), split=[])
    (g,) = b.apply(left, "+R", label="b")
    b.apply(g, "1R")
    ga, gb = b.apply(right, "+L", b.find(right, cls=_plus()))
    b.apply(ga, "Id")
    (g,) = b.apply(gb, "1L", b.find(gb, cls=_one()))
    b.back(g, "r")
    return b.done()


def zero_infinite_nat() -> CircularDerivation:
    """An infinite successor chain fed to a case analysis that never reaches zero."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("Nat"), split=[])
    (g,) = b.apply(left, "muR")
    (g,) = b.apply(g, "+R", label="succ")
    b.back(g, left)
    (g,) = b.apply(right, "muL", "Nat")
    zero, succ = b.apply(g, "+L", b.find(g, cls=_plus()))
    (g,) = b.apply(zero, "1L", b.find(zero, cls=_one()))
    b.back(g, "r")
    b.back(succ, right)
    return b.done()


def zero_nested() -> CircularDerivation:
    """A stream cut whose consumer cuts in an N built by unfolding the stream on the left."""
    tc, b, r = _zero_goal()
    left, right = b.apply(r, "Cut", formula=tc.f("S"), split=[])
    _spin(b, left, ("nuR", None))
    mid, tail = b.apply(right, "Cut", formula=tc.f("N"), split=[b.find(right, pred="S")])
    _spin(b, mid, ("nuL", "S"), ("muR", None))
    _spin(b, tail, ("muL", "N"))
    return b.done()


def zero_derivations() -> dict:
    """Every adversarial derivation of . |- 0 by name."""
    return {f.__name__: f() for f in (
        zero_self_cut, zero_mu_right, zero_nu_left, zero_priority_nu, zero_priority_mu, zero_tensor_tree,
        zero_unit_detour, zero_tensor_detour, zero_lolli_detour, zero_with_detour, zero_plus_detour,
        zero_infinite_nat, zero_nested)}

"""Branching tapes, the Treat loop, flips, and the productive cut-elimination driver."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .derivation import (
    L_RULES, R_RULES, CircularDerivation, DerivationError, Fresh, Node, PositionVar, Proof, Rule,
    Sequent, expand,
)
from .syntax import NO_UNIFIER, Var, apply_subst, mgu


class FuelExhausted(RuntimeError):
    def __init__(self, address: str, events: int):
        self.address, self.events = address, events
        super().__init__(f"treat ran out of fuel at {address} after {events} events")


class TapeError(DerivationError):
    pass


@dataclass(frozen=True)
class Event:
    kind: str  # PRd | LFlip | RFlip | IdElim | Merge | IdOut
    positions: tuple
    address: str = ""
    detail: str = ""

    def to_json(self) -> dict:
        out = {"address": self.address, "kind": self.kind, "positions": list(self.positions)}
        if self.detail:
            out["connective"] = self.detail
        return out


# ---------------------------------------------------------------------------
# tapes


@dataclass
class Tape:
    """An n-ary cut: items are pending derivations joined on shared position variables."""
    items: list

    def sequents(self) -> list:
        return [p.sequent for p in self.items]

    def links(self, seqs=None) -> list:
        """(i, j, posvar): the succedent of item i is an antecedent of item j."""
        seqs = seqs or self.sequents()
        where = {}
        for j, s in enumerate(seqs):
            for v, _ in s.ante:
                where[v.name] = j
        return [(i, where[s.succ[0].name], s.succ[0]) for i, s in enumerate(seqs) if s.succ[0].name in where]

    def conclusion(self) -> Sequent:
        return tape_conclusion(self.sequents())


def tape_conclusion(seqs: list) -> Sequent:
    """lft(M) |- rgt(M)."""
    inner = {s.succ[0].name for s in seqs}
    outs = [s for s in seqs if not any(s.succ[0].name == v.name for t in seqs for v, _ in t.ante)]
    if len(outs) != 1:
        raise TapeError(f"tape has {len(outs)} rightmost formulas")
    ante = tuple(x for s in seqs for x in s.ante if x[0].name not in inner)
    return Sequent(ante, outs[0].succ)


def check_tape(seqs: list) -> None:
    """Names occur at most twice, links are acyclic, and the tape is connected."""
    count: dict = {}
    for s in seqs:
        for v in [w for w, _ in s.ante] + [s.succ[0]]:
            count[v.name] = count.get(v.name, 0) + 1
    if any(c > 2 for c in count.values()):
        raise TapeError("a position variable occurs more than twice")
    t = Tape([])
    links = t.links(seqs)
    for i, j, v in links:
        if i >= j:
            raise TapeError("tape is not ordered by its links")
        if v != next(w for w, _ in seqs[j].ante if w.name == v.name):
            raise TapeError(f"generation mismatch on {v}")
    if len(seqs) > 1 and len(_components(len(seqs), links)) != 1:
        raise TapeError("tape is not connected")
    tape_conclusion(seqs)


def _components(n: int, links) -> list:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j, _ in links:
        parent[find(i)] = find(j)
    groups: dict = {}
    for x in range(n):
        groups.setdefault(find(x), []).append(x)
    return list(groups.values())


def _toposort(items: list) -> list:
    seqs = [p.sequent for p in items]
    links = Tape(items).links(seqs)
    indeg = [0] * len(items)
    out_edges: dict = {}
    for i, j, _ in links:
        indeg[j] += 1
        out_edges.setdefault(i, []).append(j)
    ready = [i for i in range(len(items)) if indeg[i] == 0]
    order = []
    while ready:
        ready.sort()
        i = ready.pop(0)
        order.append(i)
        for j in out_edges.get(i, ()):
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if len(order) != len(items):
        raise TapeError("cyclic tape")
    return [items[i] for i in order]


# ---------------------------------------------------------------------------
# treat


class Engine:
    def __init__(self, d: CircularDerivation, fuel: int = 100_000, debug: bool = False):
        self.d = d
        self.sig = d.sig
        self.fuel = fuel
        self.debug = debug
        used = set()
        for n in d.nodes.values():
            used |= {v.name for v in n.seq.posvars()}
        self.fresh = Fresh("c", avoid=used)
        self.events: list[Event] = []
        self.treat_events = 0

    def _resolve(self, p: Proof) -> Proof:
        return p.resolve()

    def _step(self, p: Proof, fresh_pv=None):
        rule, kids, _ = p.step(self.fresh, fresh_pv)
        return rule, [self._resolve(k) for k in kids]

    def _emit(self, kind, positions, address, detail=""):
        self.events.append(Event(kind, tuple(positions), address, detail))

    def treat(self, tape: Tape, address: str = "") -> Tape:
        items = list(tape.items)
        events = 0
        while True:
            seqs = [p.sequent for p in items]
            if self.debug:
                check_tape(seqs)
            if self._stopped(items, seqs):
                return Tape(items)
            events += 1
            self.treat_events += 1
            if events > self.fuel:
                raise FuelExhausted(address, events)
            items = self._reduce(items, seqs, address)

    def _stopped(self, items, seqs) -> bool:
        conc = tape_conclusion(seqs)
        lft = {v.name for v, _ in conc.ante}
        for p in items:
            r = p.rule
            if r is None or r.kind == "Open":
                raise TapeError("tape reached an open leaf")
            if r.kind in L_RULES and p.pv(r.principal).name in lft:
                return True
        last = next(i for i, s in enumerate(seqs) if s.succ[0].name == conc.succ[0].name)
        r = items[last].rule
        if r.kind in R_RULES:
            return True
        return len(items) == 1 and r.kind == "Id"

    def _reduce(self, items, seqs, address) -> list:
        # IdElim
        if len(items) > 1:
            for i, p in enumerate(items):
                if p.rule.kind == "Id":
                    self._emit("IdElim", (i,), address)
                    return self._id_elim(items, seqs, i)
        # Merge
        for i, p in enumerate(items):
            if p.rule.kind == "Cut":
                self._emit("Merge", (i,), address)
                _, (left, right) = self._step(p)
                return _toposort(items[:i] + [left, right] + items[i + 1:])
        # PRd, leftmost pair
        for i, j, v in sorted(Tape(items).links(seqs)):
            ri, rj = items[i].rule, items[j].rule
            if ri.kind in R_RULES and rj.kind in L_RULES and items[j].pv(rj.principal).name == v.name:
                if ri.kind[:-1] != rj.kind[:-1]:
                    raise TapeError(f"mismatched principal pair {ri.kind}/{rj.kind}")
                self._emit("PRd", (i, j), address, ri.kind[:-1])
                return self._principal(items, i, j)
        raise TapeError("treat is stuck: no reduction applies")

    def _id_elim(self, items, seqs, i) -> list:
        (x, _), (z, _) = seqs[i].ante[0], seqs[i].succ
        rest = items[:i] + items[i + 1:]
        consumers = [k for k, s in enumerate(seqs) if k != i and any(v.name == z.name for v, _ in s.ante)]
        if consumers:
            # later item uses z: call it x from now on
            k = consumers[0]
            k2 = k if k < i else k - 1
            rest[k2] = rest[k2].renamed(z.name, x.name, x.gen - z.gen)
        else:
            producers = [k for k, s in enumerate(seqs) if k != i and s.succ[0].name == x.name]
            if not producers:
                raise TapeError("identity is not connected")
            k = producers[0]
            k2 = k if k < i else k - 1
            rest[k2] = rest[k2].renamed(x.name, z.name, z.gen - x.gen)
        return _toposort(rest)

    def _principal(self, items, i, j) -> list:
        pi, pj = items[i], items[j]
        kind = pi.rule.kind[:-1]
        ri, kids_i = self._step(pi)
        if kind in ("*", "-o"):
            w = ri.fresh
            rj, kids_j = self._step(pj, fresh_pv=w)
        else:
            rj, kids_j = self._step(pj)
        mid = items[:i] + items[i + 1:j] + items[j + 1:]
        if kind == "1":
            new = kids_j
        elif kind in ("+", "&"):
            label = ri.label if kind == "+" else rj.label
            labels = (pi.sequent.succ[1]).labels
            k = labels.index(label)
            new = [kids_i[0], kids_j[k]] if kind == "+" else [kids_i[k], kids_j[0]]
        elif kind in ("*", "-o", "mu", "nu"):
            new = kids_i + kids_j
        elif kind in ("E", "A"):
            if kind == "E":
                t, eigen = ri.term, rj.eigen
                new = [kids_i[0], kids_j[0].instantiate({eigen: t})]
            else:
                t, eigen = rj.term, ri.eigen
                new = [kids_i[0].instantiate({eigen: t}), kids_j[0]]
        elif kind == "=":
            new = kids_j
        else:
            raise TapeError(f"no principal reduction for {kind}")
        return _toposort(mid + new)

    # flips ----------------------------------------------------------------

    def flip(self, tape: Tape, address: str = "") -> tuple:
        """(emitted rule, conclusion, successor tapes)."""
        items = tape.items
        seqs = tape.sequents()
        conc = tape_conclusion(seqs)
        lft = {v.name for v, _ in conc.ante}
        if len(items) == 1 and items[0].rule.kind == "Id":
            self._emit("IdOut", (0,), address)
            return Rule("Id"), conc, []
        for j, p in enumerate(items):
            r = p.rule
            if r.kind in L_RULES and p.pv(r.principal).name in lft:
                self._emit("LFlip", (j,), address, r.kind)
                return self._lflip(items, seqs, j, conc)
        last = next(i for i, s in enumerate(seqs) if s.succ[0].name == conc.succ[0].name)
        if items[last].rule.kind in R_RULES:
            self._emit("RFlip", (last,), address, items[last].rule.kind)
            return self._rflip(items, seqs, last, conc)
        raise TapeError("no exposed rule to flip")

    def _lflip(self, items, seqs, j, conc):
        p = items[j]
        rule, kids = self._step(p)
        if rule.kind == "=L":
            if rule.subst is None:
                return rule, conc, []
            theta = rule.subst
            others = [q.instantiate(theta) for q in items[:j] + items[j + 1:]]
            out = Tape(_toposort(others[:j] + kids + others[j:]))
            return rule, conc, [out]
        if rule.kind == "-oL":
            left, right = kids
            a, b = self._partition(items, seqs, j, left.sequent)
            t1 = Tape(_toposort([items[k] for k in a] + [left]))
            t2 = Tape(_toposort([items[k] for k in b] + [right]))
            split = tuple(v for v, _ in t1.conclusion().ante)
            return Rule("-oL", rule.principal, rule.fresh, split=split), conc, [t1, t2]
        return rule, conc, [Tape(_toposort(items[:j] + [k] + items[j + 1:])) for k in kids]

    def _rflip(self, items, seqs, last, conc):
        p = items[last]
        rule, kids = self._step(p)
        if rule.kind in ("1R", "=R"):
            if len(items) != 1:
                raise TapeError(f"{rule.kind} below a non-trivial tape")
            return rule, conc, []
        if rule.kind == "*R":
            left, right = kids
            a, b = self._partition(items, seqs, last, left.sequent)
            t1 = Tape(_toposort([items[k] for k in a] + [left]))
            t2 = Tape(_toposort([items[k] for k in b] + [right]))
            split = tuple(v for v, _ in t1.conclusion().ante)
            return Rule("*R", rule.principal, rule.fresh, split=split), conc, [t1, t2]
        return rule, conc, [Tape(items[:last] + [k] + items[last + 1:]) for k in kids]

    def _partition(self, items, seqs, j, left_seq):
        """Items connected (without item j) to the antecedents of the left premise, and the rest."""
        keep = [k for k in range(len(items)) if k != j]
        sub = [seqs[k] for k in keep]
        links = [(keep.index(a), keep.index(b), v) for a, b, v in Tape(items).links(seqs) if j not in (a, b)]
        comps = _components(len(keep), links)
        wanted = {v.name for v, _ in left_seq.ante}
        a, b = [], []
        for comp in comps:
            names = {v.name for k in comp for v in sub[k].posvars()}
            (a if names & wanted else b).extend(keep[k] for k in comp)
        return sorted(a), sorted(b)


# ---------------------------------------------------------------------------
# driver


@dataclass
class CutElimResult:
    derivation: CircularDerivation
    events: list = field(default_factory=list)
    treat_events: int = 0


def eliminate_cuts(d: CircularDerivation, depth: int, fuel: int = 100_000, debug: bool = False) -> CutElimResult:
    """Breadth-first cut elimination producing `depth` layers of a cut-free derivation."""
    eng = Engine(d, fuel, debug)
    nodes: dict[str, Node] = {}
    root = Tape([Proof(d, d.root).resolve()])
    q = deque([("r", root, 0, frozenset())])
    while q:
        addr, tape, layer, delta = q.popleft()
        conc = tape.conclusion()
        node = Node(addr, conc, delta=delta)
        nodes[addr] = node
        if layer >= depth:
            node.rule = Rule("Open")
            continue
        tape = eng.treat(tape, addr)
        rule, conc2, succ = eng.flip(tape, addr)
        if not conc2.same(conc):
            raise TapeError(f"treat changed the conclusion at {addr}")
        node.rule = rule
        expected = expand(d.sig, conc, rule)
        if len(expected) != len(succ):
            raise TapeError(f"{rule.kind} at {addr}: {len(succ)} successor tapes for {len(expected)} premises")
        node.premises = tuple(f"{addr}.{i}" for i in range(len(succ)))
        for i, (t, (_, dl)) in enumerate(zip(succ, expected)):
            q.append((f"{addr}.{i}", t, layer + 1, dl))
    return CutElimResult(CircularDerivation(d.sig, nodes, "r"), eng.events, eng.treat_events)

"""Snapshot order and trace validity of circular derivations, with a bounded-unroll oracle."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .derivation import (
    LT, EQ, CircularDerivation, DerivationError, Fresh, PositionVar, Proof, check_local,
)


class Order(Enum):
    LESS = "Less"
    EQUAL = "Equal"
    GREATER = "Greater"
    INCOMPARABLE = "Incomparable"


class LocalCheckError(DerivationError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(map(str, self.violations[:5])))


# ---------------------------------------------------------------------------
# snapshots


class OmegaClosure:
    """Per-priority closure of an Omega set: '=' is symmetric, `new < old` points upward."""

    def __init__(self, omega, n: int):
        self.n = n
        self.adj = {i: {} for i in range(1, n + 1)}
        for e in omega:
            a = self.adj.setdefault(e.prio, {})
            a.setdefault(e.new, []).append((e.old, e.rel))
            if e.rel == EQ:
                a.setdefault(e.old, []).append((e.new, EQ))
        self._cache = {}

    def relation(self, a: PositionVar, b: PositionVar, i: int) -> Order:
        """How a_i relates to b_i."""
        if a == b:
            return Order.EQUAL
        key = (a, b, i)
        if key not in self._cache:
            self._cache[key] = self._search(a, b, i)
        return self._cache[key]

    def _reach(self, a, b, i):
        # best[x] = True once x is reached through a strict edge
        adj = self.adj.get(i, {})
        best = {a: False}
        q = deque([a])
        while q:
            x = q.popleft()
            for y, rel in adj.get(x, ()):
                s = best[x] or rel == LT
                if y not in best or (s and not best[y]):
                    best[y] = s
                    q.append(y)
        return best.get(b)

    def _search(self, a, b, i) -> Order:
        up = self._reach(a, b, i)
        if up is True:
            return Order.LESS
        down = self._reach(b, a, i)
        if down is True:
            return Order.GREATER
        if up is False or down is False:
            return Order.EQUAL
        return Order.INCOMPARABLE

    def compare(self, a: PositionVar, b: PositionVar) -> Order:
        for i in range(1, self.n + 1):
            r = self.relation(a, b, i)
            if r is not Order.EQUAL:
                return r
        return Order.EQUAL

    def vector(self, a: PositionVar, b: PositionVar) -> tuple:
        """Per-priority '<', '=' or None of a against b (Greater counts as None)."""
        out = []
        for i in range(1, self.n + 1):
            r = self.relation(a, b, i)
            out.append(LT if r is Order.LESS else EQ if r is Order.EQUAL else None)
        return tuple(out)


def snapshot_compare(a: PositionVar, b: PositionVar, omega, n: int) -> Order:
    """Lexicographic comparison of snap(a) and snap(b), priority 1 most significant."""
    return OmegaClosure(omega, n).compare(a, b)


def summarize(vec: tuple) -> tuple:
    """(first non-'=' priority, its value); (n+1, '=') when every component is '='."""
    for i, v in enumerate(vec, start=1):
        if v != EQ:
            return i, v
    return len(vec) + 1, EQ


def compose(s1: tuple, s2: tuple) -> tuple:
    (k1, v1), (k2, v2) = s1, s2
    if k1 != k2:
        return s1 if k1 < k2 else s2
    if v1 == EQ:
        return s1
    return k1, (None if None in (v1, v2) else LT)


def is_strict(s: tuple) -> bool:
    return s[1] == LT


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Valid:
    threads: list = field(default_factory=list)  # (cycle, position variable, priority)

    def __bool__(self) -> bool:
        return True

    def describe(self) -> str:
        if not self.threads:
            return "Valid (no cycles)"
        lines = ["Valid"]
        for cycle, pv, prio in self.threads:
            lines.append(f"  cycle {cycle}: thread {pv} decreases at priority {prio}")
        return "\n".join(lines)


@dataclass
class Invalid:
    cycle: str
    path: list
    threads: list  # (position variable, summary) self-arcs, none strict

    def __bool__(self) -> bool:
        return False

    def describe(self) -> str:
        lines = [f"Invalid: cycle {self.cycle} has no strictly decreasing thread"]
        for pv, (k, v) in self.threads:
            what = "all priorities equal" if v == EQ else f"no relation at priority {k}"
            lines.append(f"  thread {pv}: {what}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# size-change style check over the graph of cycle heads


def _better(a, b):
    if a is None or b is None:
        return a if b is None else b
    return LT if LT in (a, b) else EQ


def _step_relations(rel: dict, premise, n: int) -> dict:
    """Carry {current posvar: {origin posvar: vector}} into `premise`."""
    alive = premise.seq.posvars()
    out = {pv: dict(val) for pv, val in rel.items() if pv in alive}
    for e in premise.delta:
        for origin, vec in rel.get(e.old, {}).items():
            prev = vec[e.prio - 1]
            step = None if prev is None else (LT if LT in (e.rel, prev) else EQ)
            cur = list(out.setdefault(e.new, {}).get(origin, (None,) * n))
            cur[e.prio - 1] = _better(cur[e.prio - 1], step)
            out[e.new][origin] = tuple(cur)
    return out


def head_edges(d: CircularDerivation) -> list:
    """Edges (head, head', graph, label) of the cycle-head graph.

    A graph is a frozenset of (x, y, summary) arcs from position variables of
    the first head to position variables of the second.
    """
    n = d.n
    heads = sorted({node.back.target for node in d.nodes.values() if node.back is not None})
    out = []
    for h in heads:
        start = d.nodes[h]
        rel0 = {pv: {pv: (EQ,) * n} for pv in start.seq.posvars()}
        stack = [(h, rel0)]
        while stack:
            nid, rel = stack.pop()
            node = d.nodes[nid]
            for p in node.premises:
                prem = d.nodes[p]
                r = _step_relations(rel, prem, n)
                if p in heads:
                    out.append((h, p, _graph(r, lambda v: v), p))
                elif prem.back is not None:
                    rho = prem.back.rho_map
                    out.append((h, prem.back.target, _graph(r, rho.get), p))
                else:
                    stack.append((p, r))
    return out


def _graph(rel: dict, rename) -> frozenset:
    arcs = set()
    for pv, origins in rel.items():
        tgt = rename(pv)
        if tgt is None:
            continue
        for origin, vec in origins.items():
            arcs.add((origin, tgt, summarize(vec)))
    return frozenset(arcs)


def compose_graphs(g1: frozenset, g2: frozenset) -> frozenset:
    by_src: dict = {}
    for y, z, s in g2:
        by_src.setdefault(y, []).append((z, s))
    out = set()
    for x, y, s1 in g1:
        for z, s2 in by_src.get(y, ()):
            out.add((x, z, compose(s1, s2)))
    return frozenset(out)


def _cycle_name(labels, d) -> str:
    return " ; ".join(f"{b} → {d.nodes[b].back.target if d.nodes[b].back else b}" for b in labels)


def check_validity(d: CircularDerivation, local: bool = True, max_graphs: int = 200_000):
    """Valid iff every idempotent graph in the composition closure has a strict self-arc."""
    if local:
        errs = check_local(d)
        if errs:
            raise LocalCheckError(errs)
    edges = head_edges(d)
    if not edges:
        return Valid()
    by_src: dict = {}
    for e in edges:
        by_src.setdefault(e[0], []).append(e)
    seen = {}
    q = deque()
    for a, b, g, label in edges:
        key = (a, b, g)
        if key not in seen:
            seen[key] = (label,)
            q.append(key)
    while q:
        a, b, g = q.popleft()
        for _, c, g2, label in by_src.get(b, ()):
            key = (a, c, compose_graphs(g, g2))
            if key not in seen:
                seen[key] = seen[(a, b, g)] + (label,)
                q.append(key)
                if len(seen) > max_graphs:
                    raise RuntimeError("closure too large")
    threads = []
    reported = set()
    for (a, b, g), labels in seen.items():
        if a != b or compose_graphs(g, g) != g:
            continue
        strict = sorted(((s[0], str(x)) for x, y, s in g if x == y and is_strict(s)))
        if not strict:
            selfs = sorted(((x, s) for x, y, s in g if x == y), key=lambda t: str(t[0]))
            return Invalid(_cycle_name(labels, d), list(labels), selfs)
        cyc = _cycle_name(labels, d)
        if cyc not in reported:
            reported.add(cyc)
            prio, pv = strict[0]
            threads.append((cyc, pv, prio))
    threads.sort(key=lambda t: (len(t[0]), t[0]))
    return Valid(threads)


# ---------------------------------------------------------------------------
# bounded oracle over explicit Omega


@dataclass
class NoViolationFound:
    paths: int

    def __bool__(self) -> bool:
        return True


@dataclass
class CounterexamplePath:
    path: list  # graph node ids, root first
    segment: tuple  # (i, j, k) indexes of three visits of the repeated head
    head: str

    def __bool__(self) -> bool:
        return False

    def describe(self) -> str:
        i, j, k = self.segment
        return (f"counterexample: head {self.head} revisited at steps {i}, {j}, {k} with the same "
                f"relations each time and no strictly decreasing thread; path {' → '.join(self.path[: k + 1])}")


def oracle_bounded_check(d: CircularDerivation, depth: int, max_paths: int = 100_000):
    """Walk every branch of the infinite derivation up to `depth` backedge crossings.

    Along each branch Omega is accumulated explicitly. A violation is a head
    visited three times, at i < j < k, where the snapshot relations of i->j,
    j->k and i->k coincide (so the segment repeats forever) and no position
    variable of the head is strictly smaller at j than at i.
    """
    n = d.n
    heads = {node.back.target for node in d.nodes.values() if node.back is not None}
    used = set()
    for node in d.nodes.values():
        used |= {v.name for v in node.seq.posvars()}
    fresh = Fresh("o", avoid=used)
    paths = 0
    stack = [(Proof(d, d.root), 0, frozenset(), (), ())]
    while stack:
        proof, crossings, omega, trail, visits = stack.pop()
        node = d.nodes[proof.node]
        while node.rule is not None and node.rule.kind in ("Back", "Subst"):
            if node.rule.kind == "Back":
                crossings += 1
                if crossings > depth:
                    break
            proof = _jump(proof)
            node = d.nodes[proof.node]
        if crossings > depth:
            paths += 1
            continue
        trail = trail + (proof.node,)
        if proof.node in heads:
            here = {pv: proof.pv(pv) for pv in node.seq.posvars()}
            visits = visits + ((proof.node, len(trail) - 1, here, node.seq.succ[0]),)
            hit = _violation(visits, omega, n)
            if hit is not None:
                i, j, k = hit
                return CounterexamplePath(list(trail), (visits[i][1], visits[j][1], visits[k][1]), proof.node)
        rule, kids, deltas = proof.step(fresh)
        if not kids:
            paths += 1
            if paths > max_paths:
                break
        for kid, dl in zip(kids, deltas):
            stack.append((kid, crossings, omega | dl, trail, visits))
    return NoViolationFound(paths)


def _jump(proof: Proof) -> Proof:
    """Resolve exactly one Back or Subst node."""
    d = proof.d
    node = d.nodes[proof.node]
    if node.rule.kind == "Back":
        b = node.back
        ren = {}
        for bud_pv, tgt_pv in b.rho:
            img = proof.pv(bud_pv)
            ren[tgt_pv.name] = (img.name, img.gen - tgt_pv.gen)
        return Proof(d, b.target, b.theta.then(proof.theta, d.sig.rules), tuple(sorted(ren.items())))
    return Proof(d, node.premises[0], node.rule.subst.then(proof.theta, d.sig.rules), proof.ren)


def _relations(a: dict, b: dict, succ, closure: OmegaClosure) -> frozenset:
    """Arcs u -> v of one head visit to a later one; threads never change side."""
    out = set()
    for u, gu in a.items():
        for v, gv in b.items():
            if (u == succ) != (v == succ):
                continue
            s = summarize(closure.vector(gv, gu))
            if not (s[0] == 1 and s[1] is None):
                out.add((u, v, s))
    return frozenset(out)


def _violation(visits, omega, n):
    k = len(visits) - 1
    head = visits[k][0]
    same = [i for i in range(k) if visits[i][0] == head]
    if len(same) < 2:
        return None
    closure = OmegaClosure(omega, n)
    rel = {}

    def R(x, y):
        if (x, y) not in rel:
            rel[(x, y)] = _relations(visits[x][2], visits[y][2], visits[x][3], closure)
        return rel[(x, y)]

    for j in same:
        for i in same:
            if i >= j:
                continue
            g = R(i, j)
            if g != R(j, k) or g != R(i, k):
                continue
            if not any(u == v and is_strict(s) for u, v, s in g):
                return i, j, k
    return None

"""Proposers: turn a sound multilog into a fully decided, stable proposal.

Two algorithms are provided. ``propose_conservative`` walks a total order and
guarantees each action unless the order makes it unsafe. ``propose_optimizing``
searches for the largest set of actions that can all be guaranteed together,
so fewer actions are killed.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .multilog import INIT, ActionId, Multilog, classify

__all__ = [
    "UnsoundInput",
    "ProposerKind",
    "RequirementReport",
    "check_proposal_requirements",
    "propose_conservative",
    "propose_optimizing",
    "propose",
    "dead_count",
]


class UnsoundInput(ValueError):
    pass


@dataclass(frozen=True)
class ProposerKind:
    """Which proposer a site runs. ``order`` holds action labels or ids for conservative."""

    kind: str = "optimizing"
    order: tuple = ()
    budget: int = 20000

    def __post_init__(self) -> None:
        if self.kind not in ("conservative", "optimizing"):
            raise ValueError(f"unknown proposer kind {self.kind!r}")
        object.__setattr__(self, "order", tuple(self.order))


@dataclass
class RequirementReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def check_proposal_requirements(inp: Multilog, out: Multilog) -> RequirementReport:
    report = RequirementReport()
    v = report.violations
    if not inp <= out:
        v.append("output does not extend its input")
    if out.actions != inp.actions:
        extra = sorted(out.actions - inp.actions)
        missing = sorted(inp.actions - out.actions)
        v.append(f"may not add actions (added {extra}, removed {missing})")
    for a, b in sorted(out.not_after - inp.not_after):
        if a != b and (min(a, b), max(a, b)) not in inp.non_commuting:
            v.append(f"not_after({a},{b}) added without a non_commuting pair or self-loop")
    for a, b in sorted(out.enables - inp.enables):
        if b != INIT:
            v.append(f"enables({a},{b}) added with a target other than INIT")
    if out.non_commuting != inp.non_commuting:
        v.append("non_commuting edges changed")
    c = classify(out)
    if not c.sound:
        v.append("output is unsound")
    elif c.stable != out.actions:
        v.append(f"output not stable: {sorted(out.actions - c.stable)} undecided or unstable")
    return report


def dead_count(m: Multilog) -> int:
    return len(classify(m).dead & m.actions)


def _order(m: Multilog, order: Sequence) -> list:
    """K as a NotAfter-respecting sequence, INIT first, then the non-K universe.

    ``order`` gives priorities (unlisted actions follow in canonical order);
    among actions whose NotAfter predecessors are all placed, the highest
    priority goes next. Inside a NotAfter cycle the highest priority is forced.
    """
    prio = {INIT: (-1, INIT)}
    for a in order:
        if a in m.actions and a not in prio:
            prio[a] = (len(prio), a)
    for a in sorted(m.actions - set(prio)):
        prio[a] = (len(prio), a)
    indeg = {a: 0 for a in m.actions}
    for a, b in m.not_after:
        if a != b and b != INIT and a in indeg and b in indeg:
            indeg[b] += 1
    ready = [prio[a] for a, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    out: list = []
    placed: set = set()
    while len(out) < len(indeg):
        if not ready:
            heapq.heappush(ready, min(prio[a] for a in indeg if a not in placed))
        _, a = heapq.heappop(ready)
        if a in placed:
            continue
        placed.add(a)
        out.append(a)
        for b in m.na_out.get(a, ()):
            if b in indeg and b not in placed and b != INIT:
                indeg[b] -= 1
                if indeg[b] == 0:
                    heapq.heappush(ready, prio[b])
    out.extend(sorted(m.universe - placed))
    return out


def _reaches(m: Multilog, src: ActionId, dst: ActionId, dead: frozenset) -> bool:
    """A NotAfter path from ``src`` to ``dst`` through live actions only."""
    seen = {src}
    stack = [src]
    while stack:
        a = stack.pop()
        for b in m.na_out.get(a, ()):
            if b == dst:
                return True
            if b not in seen and b not in dead:
                seen.add(b)
                stack.append(b)
    return False


def _orient(m: Multilog, a: ActionId, b: ActionId, dead: frozenset, first_of) -> tuple:
    """Order a non-commuting pair, following any NotAfter path already between them."""
    if _reaches(m, b, a, dead):
        return (b, a)
    if _reaches(m, a, b, dead):
        return (a, b)
    return first_of(a, b)


def _serialise_ordered(m: Multilog, first_of) -> Multilog:
    """Orient every still-unserialised non_commuting pair with live ends."""
    c = classify(m)
    for a, b in sorted(m.non_commuting):
        if a in c.dead or b in c.dead:
            continue
        if (a, b) in m.not_after or (b, a) in m.not_after:
            continue
        m = m.add(not_after=[_orient(m, a, b, c.dead, first_of)])
    return m


def propose_conservative(m: Multilog, order: Sequence = ()) -> Multilog:
    """Decide actions one at a time along ``order`` (canonical order when empty)."""
    c0 = classify(m)
    if not c0.sound:
        raise UnsoundInput("conservative proposer needs a sound multilog")
    seq = _order(m, order)
    pos = {a: i for i, a in enumerate(seq)}
    cur = m
    ahead = lambda a, b: (a, b) if pos[a] < pos[b] else (b, a)  # noqa: E731
    for beta in seq:
        # serialise non-commuting partners that come later
        dead = classify(cur).dead
        for g in sorted(cur.nc_adj.get(beta, ())):
            if pos[g] > pos[beta] and (beta, g) not in cur.not_after and (g, beta) not in cur.not_after:
                cur = cur.add(not_after=[_orient(cur, beta, g, dead, ahead)])
        if beta == INIT or beta not in m.actions:
            continue
        c = classify(cur)
        if beta in c.dead:
            continue
        if beta in c.guaranteed:
            cur = cur.add(enables=[(beta, INIT)])
            continue
        kill = any(a in c.guaranteed and pos[a] < pos[beta] for a in cur.na_out.get(beta, ()))
        kill = kill or any(pos[g] > pos[beta] for g in cur.en_in.get(beta, ()))
        if not kill:
            trial = cur.add(enables=[(beta, INIT)])
            if classify(trial).sound:
                cur = trial
                continue
        cur = cur.add(not_after=[(beta, beta)])
    return _serialise_ordered(cur, ahead)


# -- optimizer ------------------------------------------------------------------


class _LiveSetProblem:
    """Choose the largest G ⊆ K that can be guaranteed together.

    G must contain every action already guaranteed, be closed under Enables
    predecessors, and induce an acyclic NotAfter graph (INIT first).
    """

    def __init__(self, m: Multilog):
        c = classify(m)
        self.m = m
        self.base = frozenset(c.guaranteed)
        self.free = sorted(a for a in m.actions - c.guaranteed - c.dead if self._viable(a))
        self.index = {a: i for i, a in enumerate(self.free)}

    def _viable(self, a: ActionId) -> bool:
        m = self.m
        if (a, a) in m.not_after or (a, INIT) in m.not_after:
            return False
        return all(p in m.actions for p in m.en_in.get(a, ()))

    def feasible(self, g: frozenset) -> bool:
        m = self.m
        for a in g:
            for p in m.en_in.get(a, ()):
                if p not in g:
                    return False
        return _acyclic(m, g)

    def exhaustive(self) -> frozenset:
        n = len(self.free)
        best = self.base
        best_key = None
        # bigger sets first; ties go to the lexicographically smallest member list
        masks = sorted(range(1 << n), key=lambda s: -bin(s).count("1"))
        for s in masks:
            size = bin(s).count("1")
            if best_key is not None and size < best_key[0]:
                break
            g = self.base | {self.free[i] for i in range(n) if s >> i & 1}
            if not self.feasible(g):
                continue
            key = (size, sorted(g))
            if best_key is None or (key[0] > best_key[0] or (key[0] == best_key[0] and key[1] < best_key[1])):
                best, best_key = frozenset(g), key
        return best

    def greedy(self) -> frozenset:
        g = set(self.base)
        progress = True
        while progress:
            progress = False
            for a in self.free:
                if a in g:
                    continue
                if any(p not in g for p in self.m.en_in.get(a, ())):
                    continue
                trial = frozenset(g | {a})
                if _acyclic(self.m, trial):
                    g.add(a)
                    progress = True
        return frozenset(g)

    def branch_and_bound(self, budget: int) -> frozenset:
        best = self.greedy()
        free = self.free
        n = len(free)
        expansions = 0

        def walk(i: int, g: frozenset, excluded: frozenset) -> None:
            nonlocal best, expansions
            if expansions >= budget:
                return
            expansions += 1
            if len(g) + (n - i) <= len(best):
                return
            if i == n:
                if self.feasible(g):
                    best = g
                return
            a = free[i]
            preds = self.m.en_in.get(a, ())
            if not any(p in excluded for p in preds):
                trial = g | {a}
                if _acyclic(self.m, trial):
                    walk(i + 1, trial, excluded)
            walk(i + 1, g, excluded | {a})

        walk(0, self.base, frozenset())
        if not self.feasible(best):
            return self.greedy()
        return best


def _acyclic(m: Multilog, g: Iterable[ActionId]) -> bool:
    nodes = set(g)
    indeg = {a: 0 for a in nodes if a != INIT}
    for a, b in m.not_after:
        if a in nodes and b in nodes:
            if b == INIT or a == b:
                return False
            if a != INIT:
                indeg[b] += 1
    queue = [a for a, d in indeg.items() if d == 0]
    done = 0
    while queue:
        a = queue.pop()
        done += 1
        for b in m.na_out.get(a, ()):
            if b in indeg:
                indeg[b] -= 1
                if indeg[b] == 0:
                    queue.append(b)
    return done == len(indeg)


def _topo_rank(m: Multilog, g: frozenset) -> dict:
    nodes = set(g)
    indeg = {a: 0 for a in nodes}
    for a, b in m.not_after:
        if a in nodes and b in nodes and a != b:
            indeg[b] += 1
    heap = [a for a, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    rank = {}
    while heap:
        a = heapq.heappop(heap)
        rank[a] = len(rank)
        for b in m.na_out.get(a, ()):
            if b in indeg:
                indeg[b] -= 1
                if indeg[b] == 0:
                    heapq.heappush(heap, b)
    return rank


def realise_live_set(m: Multilog, live: frozenset) -> Multilog:
    """Guarantee every member of ``live``, kill the rest of K, order the leftovers."""
    guar = sorted(a for a in live if a != INIT)
    kills = sorted(a for a in m.actions - live if a != INIT)
    out = m.add(enables=[(a, INIT) for a in guar], not_after=[(a, a) for a in kills])
    rank = _topo_rank(m, frozenset(live))
    big = len(rank)

    def first_of(a: ActionId, b: ActionId) -> tuple:
        ka, kb = (rank.get(a, big), a), (rank.get(b, big), b)
        return (a, b) if ka < kb else (b, a)

    return _serialise_ordered(out, first_of)


def propose_optimizing(m: Multilog, budget: int = 20000, exhaustive_limit: int = 8) -> Multilog:
    if not classify(m).sound:
        raise UnsoundInput("optimizing proposer needs a sound multilog")
    problem = _LiveSetProblem(m)
    if len(problem.free) <= exhaustive_limit:
        live = problem.exhaustive()
        return realise_live_set(m, live)
    live = problem.branch_and_bound(budget)
    out = realise_live_set(m, live)
    fallback = propose_conservative(m)
    return fallback if dead_count(fallback) < dead_count(out) else out


def propose(m: Multilog, kind: ProposerKind, order: Sequence = ()) -> Multilog:
    if kind.kind == "conservative":
        return propose_conservative(m, order)
    return propose_optimizing(m, kind.budget)

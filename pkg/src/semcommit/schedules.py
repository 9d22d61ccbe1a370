"""Sound-schedule enumeration and deterministic tentative-schedule selection.

The enumerators here do not use the fixpoint code in ``multilog``; tests use
them as the independent reference for guaranteed/dead/sound.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from itertools import permutations
from typing import Iterator, Optional

from .multilog import INIT, Multilog, UnsoundMultilog, classify, is_sound_schedule

__all__ = [
    "UniverseTooLarge",
    "enumerate_sound_schedules",
    "enumerate_sound_schedules_naive",
    "sound_action_sets",
    "SchedulePolicy",
    "choose_site_schedule",
]

Schedule = tuple


class UniverseTooLarge(ValueError):
    pass


def _non_init(m: Multilog) -> list:
    return sorted(a for a in m.universe if a != INIT)


def _guard(m: Multilog, max_actions: int) -> list:
    acts = _non_init(m)
    if max_actions > 10 or len(acts) > max_actions:
        raise UniverseTooLarge(f"{len(acts)} actions, limit {min(max_actions, 10)}")
    return acts


def enumerate_sound_schedules_naive(m: Multilog, max_actions: int = 7) -> set:
    """Every ordered subset of the universe, filtered by ``is_sound_schedule``."""
    acts = _guard(m, max_actions)
    out = set()
    n = len(acts)
    for mask in range(1 << n):
        chosen = [acts[i] for i in range(n) if mask >> i & 1]
        for perm in permutations(chosen):
            s = (INIT,) + perm
            if is_sound_schedule(s, m):
                out.add(s)
    return out


def enumerate_sound_schedules(m: Multilog, max_actions: int = 10) -> set:
    """Exact set of sound schedules, by depth-first extension with pruning.

    A NotAfter violation can never be repaired by appending, so prefixes are
    cut as soon as one appears; Enables is checked on complete schedules.
    """
    acts = [a for a in _guard(m, max_actions) if a in m.actions]
    na = m.not_after
    en_in = m.en_in
    if (INIT, INIT) in na:
        return set()
    out = set()

    def ok(s: tuple) -> bool:
        present = set(s)
        return all(p in present for b in s for p in en_in.get(b, ()))

    def walk(s: tuple, present: set) -> None:
        if ok(s):
            out.add(s)
        for a in acts:
            if a in present or (a, a) in na or (a, INIT) in na:
                continue
            if any((a, b) in na for b in present):
                continue
            present.add(a)
            walk(s + (a,), present)
            present.discard(a)

    walk((INIT,), {INIT})
    return out


def sound_action_sets(m: Multilog, max_actions: int = 16) -> Iterator[tuple]:
    """Yield ``(action_set, witness_schedule)`` for every set some sound schedule contains.

    A set qualifies iff it lies in K, holds INIT, is closed under Enables
    predecessors, and its induced NotAfter graph is acyclic with INIT first.
    """
    acts = _non_init(m)
    if len(acts) > max_actions:
        raise UniverseTooLarge(f"{len(acts)} actions, limit {max_actions}")
    if (INIT, INIT) in m.not_after:
        return
    n = len(acts)
    bit = {a: 1 << i for i, a in enumerate(acts)}
    in_k = 0
    bad = 0
    need = [0] * n
    pred_na = [0] * n
    for i, a in enumerate(acts):
        if a in m.actions:
            in_k |= 1 << i
        if (a, a) in m.not_after or (a, INIT) in m.not_after:
            bad |= 1 << i
    for a, b in m.enables:
        if b == INIT:
            continue
        if a == INIT:
            continue
        need[acts.index(b)] |= bit[a]
    # enables(b, INIT): b must be in every schedule
    forced = 0
    for a, b in m.enables:
        if b == INIT and a != INIT:
            forced |= bit[a]
    for a, b in m.not_after:
        if a == INIT or b == INIT or a == b:
            continue
        pred_na[acts.index(b)] |= bit[a]

    # order[S] = a topological order of S, or None if cyclic
    order: list = [None] * (1 << n)
    order[0] = ()
    for s in range(1, 1 << n):
        # pick the smallest-index member with no NotAfter predecessor inside s
        for i in range(n):
            if s >> i & 1 and not (pred_na[i] & s):
                rest = order[s ^ (1 << i)]
                if rest is not None:
                    order[s] = (acts[i],) + rest
                break
    for s in range(1 << n):
        if s & ~in_k or s & bad or (s & forced) != forced or order[s] is None:
            continue
        if any(s >> i & 1 and (need[i] & ~s) for i in range(n)):
            continue
        members = frozenset(acts[i] for i in range(n) if s >> i & 1) | {INIT}
        yield members, (INIT,) + order[s]


@dataclass(frozen=True)
class SchedulePolicy:
    """How a site picks its tentative schedule among the sound ones."""

    kind: str = "canonical-greedy"
    order: Optional[tuple] = None  # priority list for submission-order

    KINDS = ("canonical-greedy", "maximize-actions", "submission-order")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown schedule policy {self.kind!r}")


def _topo(nodes: set, m: Multilog, rank) -> list:
    indeg = {a: 0 for a in nodes}
    for a, b in m.not_after:
        if a in nodes and b in nodes and a != b:
            indeg[b] += 1
    heap = [(rank(a), a) for a, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        _, a = heapq.heappop(heap)
        out.append(a)
        for b in m.na_out.get(a, ()):
            if b in indeg and b != a:
                indeg[b] -= 1
                if indeg[b] == 0:
                    heapq.heappush(heap, (rank(b), b))
    return out


def _greedy(m: Multilog, rank) -> tuple:
    c = classify(m)
    guar = set(c.guaranteed) - {INIT}
    sched = [INIT] + _topo(guar, m, rank)
    present = set(sched)
    candidates = sorted((a for a in m.actions if a not in present and a not in c.dead), key=rank)
    progress = True
    while progress:
        progress = False
        for a in candidates:
            if a in present:
                continue
            if any(p not in present for p in m.en_in.get(a, ())):
                continue
            if any(b in present for b in m.na_out.get(a, ())):
                continue
            sched.append(a)
            present.add(a)
            progress = True
    return tuple(sched)


def choose_site_schedule(m: Multilog, policy: SchedulePolicy = SchedulePolicy()) -> tuple:
    if not classify(m).sound:
        raise UnsoundMultilog("cannot schedule an unsound multilog")
    if policy.kind == "maximize-actions":
        schedules = enumerate_sound_schedules(m)
        return min(schedules, key=lambda s: (-len(s), s))
    if policy.kind == "submission-order" and policy.order:
        pos = {a: i for i, a in enumerate(policy.order)}
        big = len(pos)
        sched = _greedy(m, lambda a: (pos.get(a, big), a))
    else:
        sched = _greedy(m, lambda a: a)
    assert is_sound_schedule(sched, m), sched
    return sched

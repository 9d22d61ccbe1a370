"""Random scenario generation for sweeps (safety, liveness and cost runs)."""

from __future__ import annotations

import random
from fractions import Fraction

from ..proposer import ProposerKind
from ..semantics import DbPayload
from .scenario import ActionSpec, Fault, GossipPolicy, Scenario, Submission

__all__ = ["random_scenario", "batch_workload"]

_OBJECTS = ("x", "y", "z", "u", "v")


def _weights(rng: random.Random, n: int) -> dict:
    raw = [rng.randint(1, 4) for _ in range(n)]
    total = sum(raw)
    return {k + 1: Fraction(r, total) for k, r in enumerate(raw)}


def _db_payload(rng: random.Random) -> DbPayload:
    objs = _OBJECTS[: rng.randint(2, len(_OBJECTS))]
    reads = {o for o in objs if rng.random() < 0.3}
    writes = {o for o in objs if rng.random() < 0.2}
    incs = {o for o in objs if o not in writes and rng.random() < 0.15}
    return DbPayload(frozenset(reads), frozenset(writes), frozenset(incs))


def _calendar_table(rng: random.Random, placed: list) -> tuple:
    """Random relations; cause and enables only run forward within one site's submissions."""
    table = []
    n = len(placed)
    for i in range(n):
        for j in range(i + 1, n):
            (li, si, ti), (lj, sj, tj) = placed[i], placed[j]
            r = rng.random()
            if r < 0.06:
                table.append(("antagonism", li, lj))
            elif r < 0.14:
                table.append(("not_after", li, lj) if rng.random() < 0.5 else ("not_after", lj, li))
            elif r < 0.2:
                table.append(("non_commuting", li, lj))
            elif r < 0.26 and si == sj and ti < tj:
                table.append(("cause", li, lj) if rng.random() < 0.6 else ("enables", li, lj))
    return tuple(table)


def random_scenario(
    seed: int,
    *,
    oracle: str = None,
    fair: bool = True,
    max_actions: int = 30,
    sites: tuple = (2, 5),
    horizon: int = 60000,
) -> Scenario:
    rng = random.Random(seed)
    n = rng.randint(*sites)
    oracle = oracle or rng.choice(["calendar", "serializable-db"])
    total = rng.randint(1, max_actions)
    subs = []
    placed = []  # (label, site, order) for calendar tables
    count = 0
    while count < total:
        size = min(rng.randint(1, 3), total - count)
        site = rng.randint(1, n)
        at = rng.randint(0, 25)
        acts = []
        for _ in range(size):
            label = f"a{count}"
            payload = _db_payload(rng) if oracle == "serializable-db" else None
            acts.append(ActionSpec(label, payload))
            count += 1
        subs.append(Submission(at, site, tuple(acts)))
    subs.sort(key=lambda s: (s.at, s.site))
    order = 0
    for s in subs:
        for a in s.actions:
            placed.append((a.label, s.site, order))
            order += 1
    table = _calendar_table(rng, placed) if oracle == "calendar" else ()

    faults = []
    for _ in range(rng.randint(0, 2)):
        site = rng.randint(1, n)
        permanent = not fair and rng.random() < 0.3
        faults.append(Fault("crash", site=site, at=rng.randint(0, 30), duration=None if permanent else rng.randint(1, 25)))
    if rng.random() < 0.7:
        faults.append(Fault("drop", probability=round(rng.uniform(0.0, 0.3), 3)))
    if rng.random() < 0.5:
        faults.append(Fault("duplicate", probability=round(rng.uniform(0.0, 0.3), 3)))
    if rng.random() < 0.5:
        faults.append(Fault("reorder", probability=round(rng.uniform(0.0, 0.4), 3), max_extra_delay=rng.randint(1, 6)))
    if not fair and rng.random() < 0.2:
        faults.append(Fault("drop", probability=1.0, start=rng.randint(0, 40)))

    proposers = {}
    for k in range(1, n + 1):
        if rng.random() < 0.4:
            proposers[k] = ProposerKind("conservative", tuple(rng.sample([p[0] for p in placed], len(placed))))
    return Scenario(
        name=f"random-{seed}",
        seed=seed,
        horizon=horizon,
        n=n,
        weights=_weights(rng, n),
        oracle_kind=oracle,
        oracle_table=table,
        submissions=subs,
        gossip=GossipPolicy(period=1, max_delay=rng.randint(1, 4), delta=rng.random() < 0.5),
        faults=faults,
        default_proposer=ProposerKind("optimizing"),
        proposers=proposers,
    )


def batch_workload(n: int, d: int, seed: int = 1, delta: bool = False) -> Scenario:
    """Independent actions: every site submits one batch of ``d`` actions at tick 0."""
    subs = [
        Submission(0, k, tuple(ActionSpec(f"s{k}a{i}") for i in range(d)))
        for k in range(1, n + 1)
    ]
    return Scenario(
        name=f"independent-n{n}-d{d}",
        seed=seed,
        horizon=200000,
        n=n,
        weights={k: Fraction(1, n) for k in range(1, n + 1)},
        oracle_kind="independent",
        submissions=subs,
        gossip=GossipPolicy(period=1, max_delay=2, delta=delta),
    )

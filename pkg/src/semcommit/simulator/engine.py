"""Deterministic discrete-event execution of a scenario.

Logical time advances in ticks. Each live site, once per gossip period, runs
its proposer (when its multilog changed), its acceptor, and sends one gossip
message to a randomly chosen peer. Deliveries also trigger the acceptor.
Every random draw comes from one seeded generator, in a fixed number of draws
per message, so runs are reproducible byte for byte.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Optional

from ..multilog import INIT, Multilog, classify
from ..protocol import (
    Proposal,
    SiteState,
    client_actions_constraints,
    elect,
    make_proposal,
    merge_acks,
    merge_proposals,
    receive_and_compare,
)
from ..schedules import choose_site_schedule
from ..semantics import DbPayload
from .scenario import InvalidScenario, Scenario, validate_scenario
from .trace import Trace

__all__ = ["Simulation", "run", "encode_proposal", "decode_proposal"]

# ordering of simultaneous events within one tick
_CONTROL, _SUBMIT, _DELIVER, _TICK = 0, 1, 2, 3


@dataclass(frozen=True)
class Message:
    id: int
    src: int
    dst: int
    m: Multilog
    catalog: tuple
    proposals: tuple  # (site, ts, proposer, body, delta?)
    ack: tuple
    size: int


def encode_proposal(p: Multilog, m: Multilog) -> tuple:
    """Proposal as its action set plus edge differences against the multilog sent alongside."""
    base = m.restrict(p.actions)
    added = Multilog(frozenset(), p.not_after - base.not_after, p.enables - base.enables)
    removed = Multilog(frozenset(), base.not_after - p.not_after, base.enables - p.enables)
    return (p.actions, added, removed)


def decode_proposal(enc: tuple, m: Multilog) -> Multilog:
    actions, added, removed = enc
    base = m.restrict(actions)
    return Multilog(
        actions,
        (base.not_after - removed.not_after) | added.not_after,
        (base.enables - removed.enables) | added.enables,
        frozenset(),
    )


def _size(m: Multilog) -> int:
    return len(m.actions) - 1 + len(m.not_after) + len(m.enables) + len(m.non_commuting)


def _payload_json(payload):
    if isinstance(payload, DbPayload):
        out = {"reads": sorted(payload.reads), "writes": sorted(payload.writes)}
        if payload.increments:
            out["increments"] = sorted(payload.increments)
        return out
    return payload


def _vote(v) -> list:
    return [str(v.weight), v.site]


class Simulation:
    def __init__(self, sc: Scenario, seed: Optional[int] = None):
        causes = validate_scenario(sc)
        if causes:
            raise InvalidScenario(causes)
        self.sc = sc
        self.seed = sc.seed if seed is None else seed
        self.rng = random.Random(self.seed)
        oracle = sc.oracle()
        self.sites = {k: SiteState(k, sc.weights, oracle, sc.proposer_for(k)) for k in sc.sites}
        for st in self.sites.values():
            st.proposed_for = st.m
        self.policy = sc.schedule_policy()
        self.crashed: set = set()
        self.deferred: dict = {k: [] for k in sc.sites}
        self.queue: list = []
        self.counter = 0
        self.msg_counter = 0
        self.pending_control = 0
        self.pending_recover = 0
        self.submitted: list = []
        self.tick = 0
        self.outcome = "running"
        self.trace = Trace(
            header={
                "scenario": sc.name,
                "seed": self.seed,
                "sites": sc.n,
                "weights": {str(k): str(w) for k, w in sorted(sc.weights.items())},
                "oracle": sc.oracle_kind,
                "fair": sc.fair,
                "horizon": sc.horizon,
                "delta": sc.gossip.delta,
            }
        )
        self.drop_rules = [f for f in sc.faults if f.kind == "drop"]
        self.dup_p = max([f.probability for f in sc.faults if f.kind == "duplicate"], default=0.0)
        reorder = [f for f in sc.faults if f.kind == "reorder"]
        self.reorder_p = max([f.probability for f in reorder], default=0.0)
        self.reorder_extra = max([f.max_extra_delay for f in reorder], default=1)

    # -- queue ------------------------------------------------------------------

    def _push(self, tick: int, prio: int, kind: str, data) -> None:
        self.counter += 1
        heapq.heappush(self.queue, (tick, prio, self.counter, kind, data))
        if prio in (_CONTROL, _SUBMIT):
            self.pending_control += 1
        if kind == "recover":
            self.pending_recover += 1

    def _seed_queue(self) -> None:
        for sub in self.sc.submissions:
            self._push(sub.at, _SUBMIT, "submit", sub)
        for f in self.sc.faults:
            if f.kind == "crash":
                self._push(f.at, _CONTROL, "crash", f)
        for k in self.sc.sites:
            self._push(self.sc.gossip.period, _TICK, "tick", k)

    # -- trace helpers ------------------------------------------------------------

    def _emit(self, kind: str, site: int, payload: dict) -> None:
        self.trace.append(kind, site, self.tick, payload)

    def _schedule_event(self, k: int) -> None:
        st = self.sites[k]
        sched = choose_site_schedule(st.m, self.policy)
        c = classify(st.m)
        self._emit(
            "schedule",
            k,
            {
                "multilog": self.trace.ref(st.m),
                "schedule": [str(a) for a in sched],
                "decided": sorted(str(a) for a in c.decided if a != INIT),
            },
        )

    # -- handlers ------------------------------------------------------------------

    def _submit(self, sub) -> None:
        k = sub.site
        if k in self.crashed:
            self.deferred[k].append(sub)
            return
        st = self.sites[k]
        acts = []
        for spec in sub.actions:
            act = st.new_action(spec.payload, spec.label)
            st.next_seq += 1
            acts.append(act)
        client_actions_constraints(st, acts)
        self.submitted.extend(a.id for a in acts)
        self._emit(
            "submit",
            k,
            {
                "actions": [
                    {
                        "id": str(a.id),
                        "label": a.label,
                        "payload": _payload_json(a.payload),
                        "submit_vv": {str(s): q for s, q in a.submit_vv},
                    }
                    for a in acts
                ]
            },
        )
        self._schedule_event(k)

    def _crash(self, f) -> None:
        self.crashed.add(f.site)
        self._emit("crash", f.site, {"duration": f.duration})
        if f.duration is not None:
            self._push(self.tick + f.duration, _CONTROL, "recover", f.site)

    def _recover(self, k: int) -> None:
        self.pending_recover -= 1
        self.crashed.discard(k)
        self._emit("recover", k, {})
        pending, self.deferred[k] = self.deferred[k], []
        for sub in pending:
            self._submit(sub)

    def _elect(self, k: int) -> None:
        st = self.sites[k]
        records = elect(st)
        for rec in records:
            self._emit(
                "elect",
                k,
                {
                    "candidate": self.trace.ref(rec.candidate),
                    "source": list(rec.source),
                    "tally": _vote(rec.tally),
                    "cotally": _vote(rec.cotally),
                    "opponents": [{"candidate": self.trace.ref(b), "tally": _vote(v)} for b, v in rec.opponents],
                    "evaluated": rec.evaluated,
                },
            )
        if records:
            self._schedule_event(k)

    def _tick(self, k: int) -> None:
        self._push(self.tick + self.sc.gossip.period, _TICK, "tick", k)
        if k in self.crashed:
            return
        st = self.sites[k]
        if st.m != st.proposed_for:
            make_proposal(st)
            p = st.proposals[k]
            self._emit("propose", k, {"ts": p.ts, "proposal": self.trace.ref(p.m)})
        self._elect(k)
        self._send(k)

    def _message(self, k: int, j: int) -> Message:
        st = self.sites[k]
        catalog = tuple(sorted((a, st.catalog[a]) for a in st.m.actions if a in st.catalog))
        props = []
        size = _size(st.m)
        for s in sorted(st.proposals):
            p = st.proposals[s]
            if self.sc.gossip.delta:
                enc = encode_proposal(p.m, st.m)
                props.append((s, p.ts, p.proposer, enc, True))
                size += len(enc[0]) - 1 + _size(enc[1]) + _size(enc[2])
            else:
                props.append((s, p.ts, p.proposer, p.m, False))
                size += _size(p.m)
        ack = tuple((s, tuple(sorted(row.items()))) for s, row in sorted(st.ack.items()))
        self.msg_counter += 1
        return Message(self.msg_counter, k, j, st.m, catalog, tuple(props), ack, size)

    def _send(self, k: int) -> None:
        peers = [j for j in self.sc.sites if j != k]
        if not peers:
            return
        rng = self.rng
        j = peers[rng.randrange(len(peers))]
        delay = rng.randint(1, self.sc.gossip.max_delay)
        r_drop, r_dup, r_reorder, r_extra = rng.random(), rng.random(), rng.random(), rng.random()
        msg = self._message(k, j)
        lost = False
        for f in self.drop_rules:
            if f.message is not None:
                lost = lost or f.message == msg.id
            elif f.start <= self.tick and (f.until is None or self.tick < f.until):
                lost = lost or r_drop < f.probability
        if r_reorder < self.reorder_p:
            delay += 1 + int(r_extra * self.reorder_extra)
        copies = 2 if r_dup < self.dup_p else 1
        at = self.tick + delay
        self._emit("send", k, {"msg": msg.id, "to": j, "deliver_at": at, "size": msg.size, "copies": copies})
        if lost:
            self._emit("drop", k, {"msg": msg.id, "to": j, "reason": "lost"})
            return
        self._push(at, _DELIVER, "deliver", msg)
        if copies == 2:
            self._push(at + 1, _DELIVER, "deliver", msg)

    def _deliver(self, msg: Message) -> None:
        j = msg.dst
        if j in self.crashed:
            self._emit("drop", j, {"msg": msg.id, "from": msg.src, "reason": "crashed"})
            return
        st = self.sites[j]
        before = st.m
        receive_and_compare(st, msg.m, dict(msg.catalog))
        merge_acks(st, {s: dict(row) for s, row in msg.ack})
        incoming = {}
        for s, ts, proposer, body, is_delta in msg.proposals:
            pm = decode_proposal(body, msg.m) if is_delta else body
            incoming[s] = Proposal(pm, ts, proposer)
        merge_proposals(st, incoming)
        self._emit("deliver", j, {"msg": msg.id, "from": msg.src})
        if st.m != before:
            self._schedule_event(j)
        self._elect(j)

    # -- main loop ------------------------------------------------------------------

    def quiescent(self) -> bool:
        if self.pending_control or self.crashed or any(self.deferred.values()):
            return False
        ms = [st.m for st in self.sites.values()]
        first = ms[0]
        if any(m != first for m in ms[1:]):
            return False
        decided = classify(first).decided
        return all(a in decided for a in self.submitted)

    def halted(self) -> bool:
        """Every site is down for good, so no further event can change anything."""
        return len(self.crashed) == len(self.sites) and not self.pending_recover

    def run(self) -> Trace:
        self._seed_queue()
        for k in self.sc.sites:
            self._schedule_event(k)
        horizon = self.sc.horizon
        while self.queue and len(self.trace.events) < horizon:
            tick, prio, _, kind, data = heapq.heappop(self.queue)
            self.tick = tick
            if prio in (_CONTROL, _SUBMIT):
                self.pending_control -= 1
            if kind == "submit":
                self._submit(data)
            elif kind == "crash":
                self._crash(data)
            elif kind == "recover":
                self._recover(data)
            elif kind == "deliver":
                self._deliver(data)
            elif kind == "tick":
                self._tick(data)
                if self.quiescent():
                    self.outcome = "quiescent"
                    break
                if self.halted():
                    self.outcome = "halted"
                    break
        if self.outcome == "running":
            self.outcome = "horizon"
        self.trace.header["outcome"] = self.outcome
        self.trace.header["final_tick"] = self.tick
        self.trace.header["submitted"] = [str(a) for a in self.submitted]
        return self.trace


def run(sc: Scenario, seed: Optional[int] = None) -> Trace:
    return Simulation(sc, seed).run()

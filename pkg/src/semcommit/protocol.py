"""Per-site commitment state machine: submission, gossip merge, proposals and elections.

Each operation mutates one :class:`SiteState` in place and returns it, so a
simulator step is one call. Weighted votes use exact fractions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, total_ordering
from typing import Iterable, Mapping, Optional

from .multilog import (
    EMPTY,
    INIT,
    Action,
    ActionId,
    Multilog,
    UnsoundMultilog,
    classify,
    is_wf_prefix,
    prefix_closures,
)
from .proposer import ProposerKind, propose
from .semantics import EN, NA, NC, ConstraintOracle, IndependentOracle, oracle_constraints

log = logging.getLogger(__name__)

__all__ = [
    "Vote",
    "Proposal",
    "SiteState",
    "Candidate",
    "DuplicateAction",
    "ElectionRecord",
    "client_actions_constraints",
    "receive_and_compare",
    "merge_proposals",
    "merge_acks",
    "update_proposal",
    "make_proposal",
    "eligible",
    "tally",
    "cotally",
    "opponents",
    "extract_candidates",
    "elect",
    "normalize_decisions",
    "prune_decided",
]


class DuplicateAction(ValueError):
    pass


@total_ordering
@dataclass(frozen=True)
class Vote:
    """A weight with the highest contributing site id; ties compare on the site."""

    weight: Fraction = Fraction(0)
    site: int = 0

    def __add__(self, other: "Vote") -> "Vote":
        return Vote(self.weight + other.weight, max(self.site, other.site))

    def __lt__(self, other: "Vote") -> bool:
        return (self.weight, self.site) < (other.weight, other.site)

    def __str__(self) -> str:
        return f"({self.weight},{self.site})"


ZERO = Vote()


@dataclass(frozen=True)
class Proposal:
    m: Multilog = EMPTY
    ts: int = 0
    proposer: int = 0


@dataclass(frozen=True)
class Candidate:
    x: Multilog
    source: tuple  # (proposer id, ts)

    @property
    def key(self) -> tuple:
        return (len(self.x.actions), sorted(self.x.actions), sorted(self.x.edges()))


@dataclass
class ElectionRecord:
    candidate: Multilog
    source: tuple
    tally: Vote
    cotally: Vote
    opponents: list
    evaluated: int


@dataclass
class SiteState:
    id: int
    weights: Mapping[int, Fraction]
    oracle: ConstraintOracle = field(default_factory=IndependentOracle)
    proposer: ProposerKind = field(default_factory=ProposerKind)
    m: Multilog = EMPTY
    catalog: dict = field(default_factory=dict)
    proposals: dict = field(default_factory=dict)
    ack: dict = field(default_factory=dict)
    next_seq: int = 1
    proposed_for: Optional[Multilog] = None
    rejected_unsound: int = 0
    last_election_state: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.weights = {int(k): Fraction(v) for k, v in self.weights.items()}
        if sum(self.weights.values()) != 1:
            raise ValueError("site weights must sum to exactly 1")
        if self.id not in self.weights:
            raise ValueError(f"site {self.id} has no weight")
        for k in self.sites:
            self.proposals.setdefault(k, Proposal(EMPTY, 0, k))
            self.ack.setdefault(k, {})
        self._refresh_ack()

    @property
    def sites(self) -> list:
        return sorted(self.weights)

    def known_vv(self) -> dict:
        """Per site, the longest run of its actions 1..q present in K."""
        by_site: dict = {}
        for a in self.m.actions:
            if a != INIT:
                by_site.setdefault(a.site, set()).add(a.seq)
        out = {}
        for s, seqs in by_site.items():
            q = 0
            while q + 1 in seqs:
                q += 1
            out[s] = q
        return out

    def _refresh_ack(self) -> None:
        mine = self.ack[self.id]
        for s, q in self.known_vv().items():
            if mine.get(s, 0) < q:
                mine[s] = q

    def signature(self) -> tuple:
        """Everything an election depends on; equal signatures give equal outcomes."""
        return (
            self.m,
            tuple((k, self.proposals[k].ts, self.proposals[k].m) for k in self.sites),
            tuple((j, tuple(sorted(row.items()))) for j, row in sorted(self.ack.items())),
        )

    def check(self) -> None:
        if not classify(self.m).sound:
            raise UnsoundMultilog(f"site {self.id} multilog became unsound")

    def new_action(self, payload=None, label: str = "") -> Action:
        vv = self.known_vv()
        aid = ActionId(self.id, self.next_seq)
        vv[self.id] = aid.seq
        return Action(aid, payload, tuple(sorted(vv.items())), label)


# -- submitting and receiving actions ---------------------------------------------


def _compare(st: SiteState, new: Iterable[ActionId], kinds: tuple) -> None:
    new = sorted(set(new))
    if not new:
        return
    na, en, nc = [], [], []
    known = sorted(a for a in st.m.actions if a != INIT and a in st.catalog)
    newset = set(new)
    for a in new:
        act_a = st.catalog.get(a)
        if act_a is None:
            continue
        for b in known:
            if b == a or (b in newset and b < a):
                continue
            for kind, pair in oracle_constraints(st.oracle, act_a, st.catalog[b]):
                if kind not in kinds:
                    continue
                {NA: na, EN: en, NC: nc}[kind].append(pair)
    if na or en or nc:
        st.m = st.m.add(not_after=na, enables=en, non_commuting=nc)


def client_actions_constraints(st: SiteState, actions: Iterable[Action]) -> SiteState:
    actions = list(actions)
    if not actions:
        return st
    for a in actions:
        if a.id in st.m.actions or a.id in st.catalog:
            raise DuplicateAction(str(a.id))
    for a in actions:
        st.catalog[a.id] = a
        if a.id.site == st.id:
            st.next_seq = max(st.next_seq, a.id.seq + 1)
    st.m = st.m.add(actions=[a.id for a in actions])
    _compare(st, [a.id for a in actions], (NA, EN, NC))
    st._refresh_ack()
    st.check()
    return st


def receive_and_compare(
    st: SiteState, m_in: Multilog, catalog: Optional[Mapping[ActionId, Action]] = None
) -> SiteState:
    if catalog:
        for aid, act in catalog.items():
            st.catalog.setdefault(aid, act)
    before = st.m.actions
    merged = st.m | m_in
    if merged == st.m:
        return st
    st.m = merged
    _compare(st, merged.actions - before, (NA, NC))
    st._refresh_ack()
    st.check()
    return st


def merge_acks(st: SiteState, table: Mapping[int, Mapping[int, int]]) -> SiteState:
    for j, vv in table.items():
        row = st.ack.setdefault(int(j), {})
        for s, q in vv.items():
            if row.get(int(s), 0) < q:
                row[int(s)] = q
    return st


# -- proposals ---------------------------------------------------------------------


def merge_proposals(st: SiteState, incoming: Mapping[int, Proposal]) -> SiteState:
    for k, p in incoming.items():
        cur = st.proposals.get(k)
        if cur is None or p.ts > cur.ts:
            st.proposals[k] = p
    return st


@lru_cache(maxsize=8192)
def prune_decided(p: Multilog, m: Multilog) -> Multilog:
    decided = classify(m).decided
    keep = p.actions - decided
    pruned = p.restrict(keep)
    if pruned.non_commuting:
        pruned = Multilog(pruned.actions, pruned.not_after, pruned.enables, frozenset())
    return pruned


def update_proposal(st: SiteState) -> SiteState:
    own = st.proposals[st.id]
    pruned = prune_decided(own.m, st.m)
    if pruned != own.m:
        st.proposals[st.id] = Proposal(pruned, own.ts, st.id)
    return st


def normalize_decisions(p: Multilog) -> Multilog:
    """Make every decision explicit: guarantee edges for guaranteed actions, self-loops for dead ones."""
    c = classify(p)
    guar = [a for a in sorted(c.guaranteed) if a != INIT and a in p.actions and (a, INIT) not in p.enables]
    dead = [a for a in sorted(c.dead) if a in p.actions and (a, a) not in p.not_after]
    if not guar and not dead:
        return p
    return p.add(enables=[(a, INIT) for a in guar], not_after=[(a, a) for a in dead])


def _decision_edges(p: Multilog, m: Multilog) -> list:
    out = [("enables", e) for e in sorted(p.enables - m.enables)]
    out += [("not_after", e) for e in sorted(p.not_after - m.not_after)]
    return out


def _compatible_base(st: SiteState) -> Multilog:
    """M_i joined with the previous proposal; conflicting old decisions are dropped."""
    prev = st.proposals[st.id].m
    base = st.m | prev.restrict(st.m.actions)
    if classify(base).sound:
        return base
    base = st.m
    for kind, e in _decision_edges(prev, st.m):
        if e[0] not in base.actions and e[0] != INIT:
            continue
        trial = base.add(**{kind: [e]})
        if classify(trial).sound:
            base = trial
    log.debug("site %s dropped previous decisions incompatible with its multilog", st.id)
    return base


def proposal_order(st: SiteState) -> list:
    """Map a conservative order given as labels or ids to action ids."""
    by_label = {a.label: a.id for a in st.catalog.values() if a.label}
    out = []
    for item in st.proposer.order:
        if isinstance(item, ActionId):
            out.append(item)
        elif isinstance(item, str) and item in by_label:
            out.append(by_label[item])
        elif isinstance(item, str) and "." in item:
            out.append(ActionId.parse(item))
    return out


def make_proposal(st: SiteState) -> SiteState:
    if not classify(st.m).sound:
        raise UnsoundMultilog(f"site {st.id} cannot propose from an unsound multilog")
    update_proposal(st)
    base = _compatible_base(st)
    fresh = normalize_decisions(propose(base, st.proposer, proposal_order(st)))
    pruned = prune_decided(fresh, st.m)
    own = st.proposals[st.id]
    st.proposals[st.id] = Proposal(pruned, own.ts + 1, st.id)
    st.proposed_for = st.m
    return st


# -- votes --------------------------------------------------------------------------


def view(st: SiteState, k: int) -> Multilog:
    """Site k's proposal as seen here: actions already decided locally are pruned."""
    return prune_decided(st.proposals[k].m, st.m)


def _weight(st: SiteState, k: int) -> Vote:
    return Vote(st.weights[k], k)


def eligible(x: Multilog, st: SiteState) -> bool:
    """Conservative check that no action outside ``x`` can still precede one inside it.

    For each action: every site has acknowledged it, this site knows every
    action those sites had submitted when they acknowledged, every predecessor
    in the site-multilog is in ``x`` or already decided, and for table oracles
    every possible predecessor label is in ``x`` or already decided.
    """
    acts = [a for a in x.actions if a != INIT]
    if not acts:
        return True
    known = st.known_vv()
    for j in st.sites:
        if known.get(j, 0) < st.ack.get(j, {}).get(j, 0):
            return False
    decided = classify(st.m).decided
    labels = None
    for a in acts:
        for j in st.sites:
            if st.ack.get(j, {}).get(a.site, 0) < a.seq:
                return False
        for p in st.m.preds(a):
            if p != INIT and p not in x.actions and p not in decided:
                return False
        act = st.catalog.get(a)
        need = st.oracle.static_predecessors(act) if act is not None else None
        if need:
            if labels is None:
                labels = {st.catalog[b].label for b in x.actions | decided if b in st.catalog}
            if not need <= labels:
                return False
    return True


def tally(x: Multilog, st: SiteState) -> Vote:
    total = ZERO
    for k in st.sites:
        if is_wf_prefix(x, view(st, k)):
            total = total + _weight(st, k)
    return total


def cotally(x: Multilog, st: SiteState) -> Vote:
    total = ZERO
    for k in st.sites:
        if not x.actions <= view(st, k).actions:
            total = total + _weight(st, k)
    return total


def opponents(x: Multilog, st: SiteState) -> list:
    """Competing candidates over the same actions, each with its supporting vote.

    A site whose proposal covers ``x``'s actions but does not contain ``x`` as
    a prefix votes for its own restriction to those actions.
    """
    groups: dict = {}
    for k in st.sites:
        p = view(st, k)
        if not x.actions <= p.actions or is_wf_prefix(x, p):
            continue
        b = p.restrict(x.actions)
        groups[b] = groups.get(b, ZERO) + _weight(st, k)
    return sorted(groups.items(), key=lambda kv: (kv[1], sorted(kv[0].edges())), reverse=True)


def extract_candidates(st: SiteState) -> list:
    """Minimal prefixes of every proposal (one per action), then whole proposals."""
    views = tuple((k, st.proposals[k].ts, view(st, k)) for k in st.sites)
    return list(_extract(views))


@lru_cache(maxsize=4096)
def _extract(views: tuple) -> tuple:
    seen: set = set()
    minimal: list = []
    whole: list = []
    for k, ts, p in views:
        if p.is_empty:
            continue
        for a in sorted(p.actions):
            if a == INIT:
                continue
            for x in prefix_closures(p, [a])[:1]:
                if x not in seen:
                    seen.add(x)
                    minimal.append(Candidate(x, (k, ts)))
        if p not in seen and is_wf_prefix(p, p):
            seen.add(p)
            whole.append(Candidate(p, (k, ts)))
    minimal.sort(key=lambda c: c.key)
    whole.sort(key=lambda c: c.key)
    return tuple(minimal + whole)


def elect(st: SiteState, max_rounds: int = 64) -> list:
    """Elect winning candidates one at a time until none wins; returns the records."""
    sig = st.signature()
    if sig == st.last_election_state:
        return []
    records = []
    for _ in range(max_rounds):
        rec = _elect_once(st)
        if rec is None:
            break
        records.append(rec)
    st.last_election_state = st.signature()
    return records


def _elect_once(st: SiteState) -> Optional[ElectionRecord]:
    evaluated = 0
    for cand in extract_candidates(st):
        x = cand.x
        if x <= st.m:
            continue
        evaluated += 1
        if not eligible(x, st):
            continue
        t = tally(x, st)
        if t == ZERO:
            continue
        opp = opponents(x, st)
        best = opp[0][1] if opp else ZERO
        co = cotally(x, st)
        if not t > best + co:
            continue
        merged = st.m | x
        if not classify(merged).sound:
            st.rejected_unsound += 1
            log.warning("site %s: winning candidate incompatible with its multilog", st.id)
            continue
        st.m = merged
        st._refresh_ack()
        return ElectionRecord(x, cand.source, t, co, [(b, v) for b, v in opp], evaluated)
    return None

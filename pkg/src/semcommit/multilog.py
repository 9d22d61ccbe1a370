"""Multilogs: actions, constraint edges, and the fixpoint classifications over them.

A multilog is a graph whose vertices are actions and whose edges are the three
constraint kinds:

* ``not_after(a, b)``: if both run, ``a`` is scheduled before ``b``;
* ``enables(a, b)``: any schedule containing ``b`` also contains ``a``;
* ``non_commuting{a, b}``: the pair must eventually be ordered, or one killed.

``INIT`` is an implicit member of every multilog. All values here are immutable
and every function is a pure, deterministic function of its arguments.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Any, Iterable, Iterator, Mapping, NamedTuple, Optional, Union

__all__ = [
    "ActionId",
    "INIT",
    "Action",
    "Multilog",
    "ActionClassification",
    "Guarantee",
    "Kill",
    "SerialiseBefore",
    "Decision",
    "UnsoundMultilog",
    "union",
    "guaranteed",
    "dead",
    "serialised",
    "classify",
    "is_sound",
    "is_sound_schedule",
    "is_wf_prefix",
    "is_minimal",
    "pred_closure",
    "smallest_prefix",
    "prefix_closures",
    "apply_decision",
]

NOT_AFTER = "not_after"
ENABLES = "enables"
NON_COMMUTING = "non_commuting"
EDGE_KINDS = (NOT_AFTER, ENABLES, NON_COMMUTING)


class UnsoundMultilog(ValueError):
    """Raised when an operation requires a sound multilog and gets an unsound one."""


class ActionId(NamedTuple):
    """Globally unique action name; tuple order is the canonical order."""

    site: int
    seq: int

    def __str__(self) -> str:
        return f"{self.site}.{self.seq}"

    @classmethod
    def parse(cls, text: str) -> "ActionId":
        site, _, seq = text.partition(".")
        return cls(int(site), int(seq))


INIT = ActionId(0, 0)

Edge = tuple  # (ActionId, ActionId)


@dataclass(frozen=True)
class Action:
    """A client action. ``submit_vv`` is the submitter's knowledge when it was created."""

    id: ActionId
    payload: Any = None
    submit_vv: tuple = ()
    label: str = ""

    def __post_init__(self) -> None:
        if self.id == INIT:
            raise ValueError("INIT cannot be submitted")
        vv = dict(self.submit_vv)
        if vv.get(self.id.site, 0) < self.id.seq:
            raise ValueError(f"submit_vv of {self.id} does not cover the action itself")
        object.__setattr__(self, "submit_vv", tuple(sorted(vv.items())))

    @property
    def vv(self) -> dict:
        return dict(self.submit_vv)

    @property
    def name(self) -> str:
        return self.label or str(self.id)


def _nc(a: ActionId, b: ActionId) -> Edge:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True, eq=True)
class Multilog:
    """The quadruple (K, NotAfter, Enables, NonCommuting).

    ``non_commuting`` pairs are stored canonically (smaller id first), and the
    reflexive ``enables(a, a)`` is implicit and never stored.
    """

    actions: frozenset = frozenset({INIT})
    not_after: frozenset = frozenset()
    enables: frozenset = frozenset()
    non_commuting: frozenset = frozenset()

    def __post_init__(self) -> None:
        acts = self.actions
        if INIT not in acts or not isinstance(acts, frozenset):
            object.__setattr__(self, "actions", frozenset(acts) | {INIT})
        if not isinstance(self.not_after, frozenset):
            object.__setattr__(self, "not_after", frozenset(self.not_after))
        en = self.enables
        if not isinstance(en, frozenset) or any(a == b for a, b in en):
            object.__setattr__(self, "enables", frozenset((a, b) for a, b in en if a != b))
        nc = self.non_commuting
        if not isinstance(nc, frozenset) or any(a > b for a, b in nc):
            object.__setattr__(self, "non_commuting", frozenset(_nc(a, b) for a, b in nc))

    # -- construction ------------------------------------------------------

    @classmethod
    def build(
        cls,
        actions: Iterable[ActionId] = (),
        not_after: Iterable[Edge] = (),
        enables: Iterable[Edge] = (),
        non_commuting: Iterable[Edge] = (),
    ) -> "Multilog":
        return cls(frozenset(actions), frozenset(not_after), frozenset(enables), frozenset(non_commuting))

    def __or__(self, other: "Multilog") -> "Multilog":
        if self is other:
            return self
        return Multilog(
            self.actions | other.actions,
            self.not_after | other.not_after,
            self.enables | other.enables,
            self.non_commuting | other.non_commuting,
        )

    def __sub__(self, other: "Multilog") -> "Multilog":
        return Multilog(
            (self.actions - other.actions) | {INIT},
            self.not_after - other.not_after,
            self.enables - other.enables,
            self.non_commuting - other.non_commuting,
        )

    def __le__(self, other: "Multilog") -> bool:
        return (
            self.actions <= other.actions
            and self.not_after <= other.not_after
            and self.enables <= other.enables
            and self.non_commuting <= other.non_commuting
        )

    def __lt__(self, other: "Multilog") -> bool:
        return self <= other and self != other

    def add(
        self,
        actions: Iterable[ActionId] = (),
        not_after: Iterable[Edge] = (),
        enables: Iterable[Edge] = (),
        non_commuting: Iterable[Edge] = (),
    ) -> "Multilog":
        return Multilog(
            self.actions.union(actions),
            self.not_after.union(not_after),
            self.enables.union(enables),
            self.non_commuting.union(_nc(a, b) for a, b in non_commuting),
        )

    def restrict(self, keep: Iterable[ActionId]) -> "Multilog":
        """Sub-multilog on ``keep`` (plus INIT) holding every edge between kept actions."""
        keep = frozenset(keep) | {INIT}
        return Multilog(
            keep & self.actions,
            frozenset(e for e in self.not_after if e[0] in keep and e[1] in keep),
            frozenset(e for e in self.enables if e[0] in keep and e[1] in keep),
            frozenset(e for e in self.non_commuting if e[0] in keep and e[1] in keep),
        )

    # -- inspection --------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return len(self.actions) == 1 and not (self.not_after or self.enables or self.non_commuting)

    def edges(self) -> Iterator[tuple]:
        for kind in EDGE_KINDS:
            for a, b in sorted(getattr(self, kind)):
                yield kind, a, b

    @cached_property
    def universe(self) -> frozenset:
        u = set(self.actions)
        for edges in (self.not_after, self.enables, self.non_commuting):
            for a, b in edges:
                u.add(a)
                u.add(b)
        return frozenset(u)

    @cached_property
    def na_in(self) -> Mapping[ActionId, frozenset]:
        return _index(self.not_after, 1, 0)

    @cached_property
    def na_out(self) -> Mapping[ActionId, frozenset]:
        return _index(self.not_after, 0, 1)

    @cached_property
    def en_in(self) -> Mapping[ActionId, frozenset]:
        return _index(self.enables, 1, 0)

    @cached_property
    def en_out(self) -> Mapping[ActionId, frozenset]:
        return _index(self.enables, 0, 1)

    @cached_property
    def nc_adj(self) -> Mapping[ActionId, frozenset]:
        adj = defaultdict(set)
        for a, b in self.non_commuting:
            adj[a].add(b)
            adj[b].add(a)
        return {k: frozenset(v) for k, v in adj.items()}

    def preds(self, b: ActionId) -> set:
        """Actions with an edge into ``b``: NotAfter, Enables, and NonCommuting partners."""
        out = set(self.na_in.get(b, ()))
        out.update(self.en_in.get(b, ()))
        out.update(self.nc_adj.get(b, ()))
        return out

    # -- (de)serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "K": [str(a) for a in sorted(self.actions)],
            "not_after": [[str(a), str(b)] for a, b in sorted(self.not_after)],
            "enables": [[str(a), str(b)] for a, b in sorted(self.enables)],
            "non_commuting": [[str(a), str(b)] for a, b in sorted(self.non_commuting)],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Multilog":
        p = ActionId.parse

        def pairs(key: str) -> frozenset:
            return frozenset((p(a), p(b)) for a, b in data.get(key, ()))

        return cls(
            frozenset(p(a) for a in data.get("K", ())),
            pairs("not_after"),
            pairs("enables"),
            pairs("non_commuting"),
        )

    def describe(self, names: Optional[Mapping[ActionId, str]] = None) -> str:
        names = names or {}

        def n(a: ActionId) -> str:
            return "init" if a == INIT else names.get(a, str(a))

        parts = ["K={" + ",".join(n(a) for a in sorted(self.actions)) + "}"]
        for kind, sym in ((NOT_AFTER, "->"), (ENABLES, "|>"), (NON_COMMUTING, "><")):
            edges = sorted(getattr(self, kind))
            if edges:
                parts.append(kind + "{" + ",".join(f"{n(a)}{sym}{n(b)}" for a, b in edges) + "}")
        return " ".join(parts)


def _index(edges: frozenset, key: int, val: int) -> dict:
    out = defaultdict(set)
    for e in edges:
        out[e[key]].add(e[val])
    return {k: frozenset(v) for k, v in out.items()}


EMPTY = Multilog()


def union(a: Multilog, b: Multilog) -> Multilog:
    return a | b


# -- fixpoints ----------------------------------------------------------------


def guaranteed(m: Multilog) -> frozenset:
    """Least set containing INIT and closed under Enables-predecessors."""
    seen = {INIT}
    todo = [INIT]
    en_in = m.en_in
    while todo:
        a = todo.pop()
        for b in en_in.get(a, ()):
            if b not in seen:
                seen.add(b)
                todo.append(b)
    return frozenset(seen)


def _enables_closure(m: Multilog, start: ActionId) -> set:
    seen = {start}
    todo = [start]
    en_in = m.en_in
    while todo:
        a = todo.pop()
        for b in en_in.get(a, ()):
            if b not in seen:
                seen.add(b)
                todo.append(b)
    return seen


def _has_cycle(m: Multilog, nodes: set) -> bool:
    """NotAfter cycle inside ``nodes``, counting the implicit edges INIT -> everything."""
    na_out, na_in = m.na_out, m.na_in
    for a in nodes:
        if INIT in na_out.get(a, ()):
            return True
    indeg = {}
    for a in nodes:
        if a == INIT:
            continue
        indeg[a] = sum(1 for b in na_in.get(a, ()) if b in nodes and b != INIT)
    queue = deque(a for a, d in indeg.items() if d == 0)
    removed = 0
    while queue:
        a = queue.popleft()
        removed += 1
        for b in na_out.get(a, ()):
            if b in indeg:
                indeg[b] -= 1
                if indeg[b] == 0:
                    queue.append(b)
    return removed != len(indeg)


def _cyclic_nodes(m: Multilog) -> set:
    """Nodes lying on some NotAfter cycle of the whole graph (implicit INIT edges included)."""
    out = {a for a, b in m.not_after if b == INIT or a == b}
    graph = m.na_out
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    counter = 0
    for root in sorted(m.universe):
        if root in index:
            continue
        work = [(root, iter(sorted(graph.get(root, ()))))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(graph.get(w, ())))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1:
                    out.update(comp)
    return out


def _dead(m: Multilog, guar: frozenset) -> frozenset:
    # b is dead iff the NotAfter graph induced on guar ∪ {b and its Enables-predecessors}
    # has a cycle: every schedule containing b contains exactly that set at least.
    universe = m.universe
    if _has_cycle(m, set(guar)):
        return universe
    cyclic = _cyclic_nodes(m)
    if not cyclic:
        return frozenset()
    out = set()
    for b in universe:
        if b in guar:
            continue
        closure = _enables_closure(m, b)
        if not (closure - guar) & cyclic:
            continue
        if _has_cycle(m, closure | guar):
            out.add(b)
    return frozenset(out)


def dead(m: Multilog) -> frozenset:
    return classify(m).dead


def serialised(m: Multilog) -> frozenset:
    return classify(m).serialised


@dataclass(frozen=True)
class ActionClassification:
    guaranteed: frozenset
    dead: frozenset
    serialised: frozenset
    decided: frozenset
    stable: frozenset
    sound: bool = field(default=True)


@lru_cache(maxsize=8192)
def classify(m: Multilog) -> ActionClassification:
    guar = guaranteed(m)
    dd = _dead(m, guar)
    sound = not (guar & dd) and guar <= m.actions

    ser = set()
    nc_adj, na = m.nc_adj, m.not_after
    for a in m.actions:
        if a in dd:
            ser.add(a)
            continue
        if all((a, b) in na or (b, a) in na or b in dd for b in nc_adj.get(a, ())):
            ser.add(a)
    ser = frozenset(ser)
    decided = dd | (guar & ser)

    # Greatest set S with S = dead ∪ {a ∈ guar ∩ ser | every NotAfter/Enables predecessor in S}.
    stable = set(decided)
    na_in, en_in = m.na_in, m.en_in
    changed = True
    while changed:
        changed = False
        for a in list(stable):
            if a in dd:
                continue
            if any(b not in stable for b in na_in.get(a, ())) or any(b not in stable for b in en_in.get(a, ())):
                stable.discard(a)
                changed = True
    return ActionClassification(guar, dd, ser, frozenset(decided), frozenset(stable), sound)


def is_sound(m: Multilog) -> bool:
    return classify(m).sound


# -- schedules and prefixes ---------------------------------------------------


def is_sound_schedule(schedule: Iterable[ActionId], m: Multilog) -> bool:
    s = list(schedule)
    if not s or s[0] != INIT:
        return False
    pos = {}
    for i, a in enumerate(s):
        if a in pos or a not in m.actions:
            return False
        pos[a] = i
    for a, b in m.not_after:
        if a in pos and b in pos and not pos[a] < pos[b]:
            return False
    for a, b in m.enables:
        if b in pos and a not in pos:
            return False
    return True


@lru_cache(maxsize=65536)
def is_wf_prefix(x: Multilog, m: Multilog) -> bool:
    """Whether ``x`` is a well-formed prefix of ``m``.

    INIT belongs to every multilog and is exempt from left-closure: edges into
    INIT (guarantee decisions) only enter ``x`` with their source action.
    """
    xk = x.actions
    for edges in (x.not_after, x.enables, x.non_commuting):
        for a, b in edges:
            if a not in xk or b not in xk:
                return False
    if not x <= m:
        return False
    for b in xk:
        if b == INIT:
            continue
        for a in m.na_in.get(b, ()):
            if (a, b) not in x.not_after:
                return False
        for a in m.en_in.get(b, ()):
            if (a, b) not in x.enables:
                return False
        for a in m.nc_adj.get(b, ()):
            if _nc(a, b) not in x.non_commuting:
                return False
    return classify(x).stable == xk


def pred_closure(m: Multilog, seeds: Iterable[ActionId]) -> frozenset:
    """Seeds plus everything reaching them by NotAfter, Enables or NonCommuting edges."""
    seen = set(seeds)
    todo = [a for a in seen if a != INIT]
    while todo:
        b = todo.pop()
        for a in m.preds(b):
            if a not in seen:
                seen.add(a)
                if a != INIT:
                    todo.append(a)
    return frozenset(seen)


def prefix_closures(m: Multilog, seeds: Iterable[ActionId], limit: int = 64) -> list:
    """Well-formed prefixes of ``m`` grown from ``seeds``, smallest first.

    Starts from the predecessor closure. A member guaranteed in ``m`` but not in
    the restriction needs an Enables path to INIT inside the prefix, so the
    search branches over which guaranteed Enables-successor supplies it.
    """
    return list(_prefix_closures(m, frozenset(seeds), limit))


@lru_cache(maxsize=16384)
def _prefix_closures(m: Multilog, seeds: frozenset, limit: int) -> tuple:
    cls_m = classify(m)
    found: dict = {}
    seen: set = set()
    todo = [pred_closure(m, seeds)]
    while todo and len(seen) < limit:
        keep = todo.pop()
        if keep in seen:
            continue
        seen.add(keep)
        x = m.restrict(keep)
        if is_wf_prefix(x, m):
            found[keep] = x
            continue
        gx = classify(x).guaranteed
        lacking = sorted(u for u in keep if u in cls_m.guaranteed and u not in gx)
        if not lacking:
            continue
        u = lacking[0]
        for v in sorted(m.en_out.get(u, ()), reverse=True):
            if v in cls_m.guaranteed and v not in keep:
                todo.append(pred_closure(m, keep | {v}))
    return tuple(found[k] for k in sorted(found, key=lambda k: (len(k), sorted(k))))


def smallest_prefix(m: Multilog, seeds: Iterable[ActionId]) -> Optional[Multilog]:
    """The smallest well-formed prefix of ``m`` containing ``seeds`` that the search finds."""
    found = prefix_closures(m, seeds)
    return found[0] if found else None


def is_minimal(m: Multilog) -> bool:
    """No well-formed prefix of ``m`` besides the empty one and ``m`` itself."""
    full = m.actions
    for a in sorted(full):
        if a == INIT:
            continue
        if any(x.actions != full for x in prefix_closures(m, [a])):
            return False
    return True


# -- decisions ------------------------------------------------------------------


@dataclass(frozen=True)
class Guarantee:
    action: ActionId


@dataclass(frozen=True)
class Kill:
    action: ActionId


@dataclass(frozen=True)
class SerialiseBefore:
    first: ActionId
    second: ActionId


Decision = Union[Guarantee, Kill, SerialiseBefore]


def apply_decision(m: Multilog, d: Decision) -> Multilog:
    if isinstance(d, Guarantee):
        return m.add(enables=[(d.action, INIT)])
    if isinstance(d, Kill):
        return m.add(not_after=[(d.action, d.action)])
    if isinstance(d, SerialiseBefore):
        return m.add(not_after=[(d.first, d.second)])
    raise TypeError(f"not a decision: {d!r}")

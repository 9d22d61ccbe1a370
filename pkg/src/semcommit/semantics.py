"""Client constraint oracles: given two actions, the semantic edges between them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .multilog import Action, ActionId, Multilog, is_sound

__all__ = [
    "ConstraintOracle",
    "IndependentOracle",
    "CalendarOracle",
    "SerializableDbOracle",
    "DbPayload",
    "happens_before",
    "oracle_constraints",
    "induced_multilog",
    "make_oracle",
]

NA, EN, NC = "not_after", "enables", "non_commuting"

# calendar table shorthands that expand to several edges
_COMPOSITE = {
    "cause": ((NA, False), (EN, False)),
    "antagonism": ((NA, False), (NA, True)),
    NA: ((NA, False),),
    EN: ((EN, False),),
    NC: ((NC, False),),
}


def happens_before(a: Action, b: Action) -> bool:
    """True iff ``a`` was known at ``b``'s site when ``b`` was submitted."""
    if a.id == b.id:
        return False
    return dict(b.submit_vv).get(a.id.site, 0) >= a.id.seq


def _norm(kind: str, x: ActionId, y: ActionId) -> tuple:
    if kind == NC and y < x:
        x, y = y, x
    return kind, (x, y)


class ConstraintOracle:
    kind = "abstract"

    def constraints(self, a: Action, b: Action) -> frozenset:
        raise NotImplementedError

    def static_predecessors(self, action: Action) -> Optional[frozenset]:
        """Labels that can ever precede ``action``, or None when unknowable up front."""
        return None


class IndependentOracle(ConstraintOracle):
    kind = "independent"

    def constraints(self, a: Action, b: Action) -> frozenset:
        return frozenset()

    def static_predecessors(self, action: Action) -> Optional[frozenset]:
        return frozenset()


@dataclass
class CalendarOracle(ConstraintOracle):
    """Explicit table of constraints between action labels.

    Each entry is ``(relation, first_label, second_label)`` with relation one
    of not_after, enables, non_commuting, cause (not_after plus enables) or
    antagonism (not_after both ways).
    """

    table: tuple = ()
    kind = "calendar"

    def __post_init__(self) -> None:
        entries = []
        for rel, x, y in self.table:
            if rel not in _COMPOSITE:
                raise ValueError(f"unknown calendar relation {rel!r}")
            if x == y:
                raise ValueError(f"calendar entry relates {x!r} to itself")
            entries.append((rel, x, y))
        self.table = tuple(entries)
        self._by_pair: dict = {}
        for rel, x, y in self.table:
            for kind, flip in _COMPOSITE[rel]:
                src, dst = (y, x) if flip else (x, y)
                self._by_pair.setdefault(frozenset((x, y)), set()).add((kind, src, dst))

    @classmethod
    def parse(cls, lines: Iterable[str]) -> "CalendarOracle":
        entries = []
        for line in lines:
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"calendar entry must read 'a relation b': {line!r}")
            x, rel, y = parts
            entries.append((rel, x, y))
        return cls(tuple(entries))

    def constraints(self, a: Action, b: Action) -> frozenset:
        out = set()
        if a.label == b.label:
            return frozenset()
        by_label = {a.label: a.id, b.label: b.id}
        for kind, src, dst in self._by_pair.get(frozenset((a.label, b.label)), ()):
            out.add(_norm(kind, by_label[src], by_label[dst]))
        return frozenset(out)

    def static_predecessors(self, action: Action) -> Optional[frozenset]:
        preds = set()
        for rel, x, y in self.table:
            for kind, flip in _COMPOSITE[rel]:
                src, dst = (y, x) if flip else (x, y)
                if dst == action.label:
                    preds.add(src)
                if kind == NC and src == action.label:
                    preds.add(dst)
        return frozenset(preds)


@dataclass(frozen=True)
class DbPayload:
    """Read and write sets of a transaction.

    ``increments`` are objects updated by commutative additions; two
    transactions that only increment a shared object do not conflict on it.
    """

    reads: frozenset = frozenset()
    writes: frozenset = frozenset()
    increments: frozenset = frozenset()

    def __post_init__(self) -> None:
        for name in ("reads", "writes", "increments"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))

    @property
    def write_set(self) -> frozenset:
        return self.writes | self.increments

    @classmethod
    def from_mapping(cls, data: Mapping) -> "DbPayload":
        return cls(
            frozenset(data.get("reads", ())),
            frozenset(data.get("writes", ())),
            frozenset(data.get("increments", ())),
        )


class SerializableDbOracle(ConstraintOracle):
    """Conflicts of a serializable database that ships after-values."""

    kind = "serializable-db"

    @staticmethod
    def _payload(a: Action) -> DbPayload:
        p = a.payload
        if isinstance(p, DbPayload):
            return p
        if p is None:
            return DbPayload()
        return DbPayload.from_mapping(p)

    def _read_write(self, t: Action, u: Action, out: set) -> None:
        # t read something u writes
        if not self._payload(t).reads & self._payload(u).write_set:
            return
        if happens_before(u, t):
            out.add(_norm(NA, u.id, t.id))
            out.add(_norm(EN, u.id, t.id))
        else:
            out.add(_norm(NA, t.id, u.id))

    def constraints(self, a: Action, b: Action) -> frozenset:
        out: set = set()
        self._read_write(a, b, out)
        self._read_write(b, a, out)
        pa, pb = self._payload(a), self._payload(b)
        clash = (pa.writes & pb.write_set) | (pa.write_set & pb.writes)
        if clash:
            if happens_before(a, b):
                out.add(_norm(NA, a.id, b.id))
            elif happens_before(b, a):
                out.add(_norm(NA, b.id, a.id))
            else:
                out.add(_norm(NC, a.id, b.id))
        return frozenset(out)


def oracle_constraints(o: ConstraintOracle, a: Action, b: Action) -> frozenset:
    """Set of ``(kind, (x, y))``; the same set whichever way the pair is asked."""
    if a.id == b.id:
        raise ValueError("oracle queried with the same action twice")
    return o.constraints(a, b)


def edges_between(o: ConstraintOracle, a: Action, b: Action, kinds: Iterable[str] = (NA, EN, NC)) -> dict:
    kinds = set(kinds)
    out: dict = {NA: [], EN: [], NC: []}
    for kind, pair in oracle_constraints(o, a, b):
        if kind in kinds:
            out[kind].append(pair)
    return out


def induced_multilog(o: ConstraintOracle, actions: Iterable[Action]) -> Multilog:
    acts = sorted(actions, key=lambda a: a.id)
    na, en, nc = set(), set(), set()
    for i, a in enumerate(acts):
        for b in acts[i + 1 :]:
            e = edges_between(o, a, b)
            na.update(e[NA])
            en.update(e[EN])
            nc.update(e[NC])
    return Multilog.build([a.id for a in acts], na, en, nc)


def make_oracle(kind: str, table: Iterable = ()) -> ConstraintOracle:
    if kind == "independent":
        return IndependentOracle()
    if kind == "calendar":
        entries = list(table)
        if entries and isinstance(entries[0], str):
            return CalendarOracle.parse(entries)
        return CalendarOracle(tuple(tuple(e) for e in entries))
    if kind == "serializable-db":
        return SerializableDbOracle()
    raise ValueError(f"unknown oracle kind {kind!r}")


def oracle_is_sound(o: ConstraintOracle, actions: Iterable[Action]) -> bool:
    return is_sound(induced_multilog(o, actions))

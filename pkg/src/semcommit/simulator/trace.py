"""Run traces: a header line followed by one JSON record per event.

Every record has the fields ``time``, ``tick``, ``site``, ``kind``, ``payload``
in that order. ``time`` is the event index. Multilog snapshots are stored once
per distinct digest, inside the first event that references them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from ..multilog import Multilog

__all__ = ["EVENT_KINDS", "Trace", "digest", "multilog_json"]

EVENT_KINDS = ("submit", "send", "deliver", "drop", "crash", "recover", "propose", "elect", "schedule")
FORMAT_VERSION = 1


def multilog_json(m: Multilog) -> str:
    return json.dumps(m.to_dict(), separators=(",", ":"))


def digest(m: Multilog) -> str:
    return hashlib.sha256(multilog_json(m).encode()).hexdigest()[:16]


@dataclass
class Trace:
    header: dict = field(default_factory=dict)
    events: list = field(default_factory=list)
    _stored: set = field(default_factory=set, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def append(self, kind: str, site: int, tick: int, payload: dict) -> dict:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown trace event kind {kind!r}")
        ev = {"time": len(self.events), "tick": tick, "site": site, "kind": kind, "payload": payload}
        self.events.append(ev)
        return ev

    def ref(self, m: Multilog) -> dict:
        """A reference to ``m``: its digest, plus the full body the first time."""
        d = digest(m)
        self._cache[d] = m
        if d in self._stored:
            return {"digest": d}
        self._stored.add(d)
        return {"digest": d, "body": m.to_dict()}

    def multilog(self, ref: dict) -> Multilog:
        d = ref["digest"]
        if "body" in ref:
            m = Multilog.from_dict(ref["body"])
            self._cache.setdefault(d, m)
            return m
        if d not in self._cache:
            self._index_bodies()
        return self._cache[d]

    def _index_bodies(self) -> None:
        for ev in self.events:
            for ref in _refs(ev["payload"]):
                if "body" in ref and ref["digest"] not in self._cache:
                    self._cache[ref["digest"]] = Multilog.from_dict(ref["body"])

    def of_kind(self, *kinds: str) -> Iterator[dict]:
        return (ev for ev in self.events if ev["kind"] in kinds)

    # -- files ----------------------------------------------------------------

    def lines(self) -> Iterator[str]:
        yield json.dumps({"format": FORMAT_VERSION, **self.header}, separators=(",", ":"), sort_keys=True)
        for ev in self.events:
            yield json.dumps(ev, separators=(",", ":"))

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            return cls()
        header = json.loads(lines[0])
        header.pop("format", None)
        t = cls(header=header)
        for ln in lines[1:]:
            ev = json.loads(ln)
            for key in ("time", "tick", "site", "kind", "payload"):
                if key not in ev:
                    raise ValueError(f"trace record missing {key!r}: {ln[:80]}")
            t.events.append(ev)
        return t

    @classmethod
    def read(cls, path) -> "Trace":
        return cls.loads(Path(path).read_text())


def _refs(payload) -> Iterator[dict]:
    if isinstance(payload, dict):
        if "digest" in payload and ("body" in payload or len(payload) == 1):
            yield payload
        for v in payload.values():
            yield from _refs(v)
    elif isinstance(payload, list):
        for v in payload:
            yield from _refs(v)

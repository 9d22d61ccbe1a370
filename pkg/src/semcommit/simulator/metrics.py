"""Cost and latency figures computed from a trace."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional

from ..multilog import ActionId
from .trace import Trace

__all__ = ["Metrics", "metrics"]


@dataclass
class Metrics:
    sites: int = 0
    messages: int = 0
    message_size: int = 0
    submitted: int = 0
    committed: int = 0
    messages_per_commit: Optional[float] = None
    elections: int = 0
    candidates_evaluated: int = 0
    mean_latency_events: Optional[float] = None
    mean_latency_ticks: Optional[float] = None
    mean_batch: Optional[float] = None
    heuristic_per_commit: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def text(self) -> str:
        def f(x):
            return "-" if x is None else (f"{x:.3f}" if isinstance(x, float) else str(x))

        lines = [
            f"sites                      {self.sites}",
            f"messages sent              {self.messages}",
            f"message payload size       {self.message_size}",
            f"actions submitted          {self.submitted}",
            f"actions committed          {self.committed}",
            f"messages per commit        {f(self.messages_per_commit)}",
            f"elections                  {self.elections}",
            f"candidates evaluated       {self.candidates_evaluated}",
            f"mean decision latency      {f(self.mean_latency_events)} events, {f(self.mean_latency_ticks)} ticks",
            f"mean batch size d          {f(self.mean_batch)}",
        ]
        if self.heuristic_per_commit is not None:
            lines.append(
                f"n/2 * 1/d estimate         {f(self.heuristic_per_commit)} (informational; measured "
                f"{f(self.messages_per_commit)})"
            )
        return "\n".join(lines)


def metrics(t: Trace) -> Metrics:
    n = int(t.header.get("sites", 0))
    out = Metrics(sites=n)
    submit_at: dict = {}
    batches = []
    decided_at: dict = {}
    current: dict = {}
    for ev in t.events:
        kind = ev["kind"]
        p = ev["payload"]
        if kind == "send":
            out.messages += 1
            out.message_size += int(p.get("size", 0))
        elif kind == "submit":
            batches.append(len(p["actions"]))
            for a in p["actions"]:
                submit_at[ActionId.parse(a["id"])] = (ev["time"], ev["tick"])
        elif kind == "elect":
            out.elections += 1
            out.candidates_evaluated += int(p.get("evaluated", 0))
        elif kind == "schedule":
            current[ev["site"]] = {ActionId.parse(s) for s in p.get("decided", ())}
            if len(current) == n:
                everywhere = set.intersection(*current.values())
                for a in everywhere:
                    if a in submit_at and a not in decided_at:
                        decided_at[a] = (ev["time"], ev["tick"])
    out.submitted = len(submit_at)
    out.committed = len(decided_at)
    if out.committed:
        out.messages_per_commit = out.messages / out.committed
        ev_lat = [decided_at[a][0] - submit_at[a][0] for a in decided_at]
        tk_lat = [decided_at[a][1] - submit_at[a][1] for a in decided_at]
        out.mean_latency_events = sum(ev_lat) / len(ev_lat)
        out.mean_latency_ticks = sum(tk_lat) / len(tk_lat)
    if batches:
        out.mean_batch = sum(batches) / len(batches)
        if n:
            out.heuristic_per_commit = float(Fraction(n, 2) / Fraction(out.mean_batch))
    return out

"""Trace checkers for the eventual-consistency conditions.

* local soundness: every recorded site-schedule is sound for the multilog the
  site held at that moment;
* mergeability: the union of every site-multilog ever recorded is sound;
* liveness (fair runs only): every submitted action ends up decided at every
  site, and every recorded multilog is contained in every site's final one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..multilog import EMPTY, INIT, ActionId, classify, is_sound_schedule
from ..schedules import UniverseTooLarge, sound_action_sets
from .trace import Trace

__all__ = [
    "Verdict",
    "check_local_soundness",
    "check_mergeability",
    "check_liveness",
    "run_checks",
    "final_multilogs",
]

PASS, FAIL, NA = "pass", "fail", "not applicable"


@dataclass
class Verdict:
    name: str
    status: str
    detail: str = ""
    counterexample: Optional[dict] = None
    checked: int = 0

    @property
    def ok(self) -> bool:
        return self.status != FAIL

    def line(self) -> str:
        text = f"{self.name}: {self.status}"
        if self.detail:
            text += f" ({self.detail})"
        return text


def _ids(items) -> list:
    return [ActionId.parse(s) for s in items]


def check_local_soundness(t: Trace) -> Verdict:
    n = 0
    for ev in t.of_kind("schedule"):
        n += 1
        p = ev["payload"]
        m = t.multilog(p["multilog"])
        sched = _ids(p["schedule"])
        if not classify(m).sound:
            return Verdict("local-soundness", FAIL, f"site {ev['site']} multilog unsound at event {ev['time']}", ev, n)
        if not is_sound_schedule(sched, m):
            return Verdict(
                "local-soundness",
                FAIL,
                f"site {ev['site']} schedule {' '.join(p['schedule'])} unsound at event {ev['time']}",
                ev,
                n,
            )
    return Verdict("local-soundness", PASS, f"{n} schedules", None, n)


def check_mergeability(t: Trace, brute_force_limit: int = 8) -> Verdict:
    union = EMPTY
    n = 0
    for ev in t.of_kind("schedule"):
        m = t.multilog(ev["payload"]["multilog"])
        if m <= union:
            continue
        union = union | m
        n += 1
        if not classify(union).sound:
            return Verdict(
                "mergeability",
                FAIL,
                f"union of site-multilogs unsound after event {ev['time']} (site {ev['site']})",
                ev,
                n,
            )
    universe = [a for a in union.universe if a != INIT]
    if len(universe) <= brute_force_limit:
        try:
            exists = next(iter(sound_action_sets(union, brute_force_limit)), None) is not None
        except UniverseTooLarge:
            exists = True
        if not exists:
            return Verdict("mergeability", FAIL, "no sound schedule of the final union exists", None, n)
    return Verdict("mergeability", PASS, f"{n} union steps, {len(universe)} actions", None, n)


def final_multilogs(t: Trace) -> dict:
    last = {}
    for ev in t.of_kind("schedule"):
        last[ev["site"]] = ev
    sites = range(1, int(t.header.get("sites", len(last))) + 1)
    return {k: (t.multilog(last[k]["payload"]["multilog"]) if k in last else EMPTY) for k in sites}


def submitted_actions(t: Trace) -> list:
    out = []
    for ev in t.of_kind("submit"):
        out.extend(ActionId.parse(a["id"]) for a in ev["payload"]["actions"])
    return out


def check_liveness(t: Trace, fair: Optional[bool] = None) -> Verdict:
    if fair is None:
        fair = bool(t.header.get("fair", True))
    if not fair:
        return Verdict("liveness", NA, "unfair scenario")
    finals = final_multilogs(t)
    subs = submitted_actions(t)
    for k, m in finals.items():
        decided = classify(m).decided
        missing = [a for a in subs if a not in decided]
        if missing:
            return Verdict(
                "liveness",
                FAIL,
                f"site {k} never decided {' '.join(str(a) for a in sorted(missing)[:8])}",
                {"site": k, "undecided": [str(a) for a in sorted(missing)]},
            )
    n = 0
    for ev in t.of_kind("schedule"):
        n += 1
        m = t.multilog(ev["payload"]["multilog"])
        for k, final in finals.items():
            if not m <= final:
                return Verdict(
                    "liveness",
                    FAIL,
                    f"multilog of site {ev['site']} at event {ev['time']} never reached site {k}",
                    ev,
                    n,
                )
    return Verdict("liveness", PASS, f"{len(subs)} actions decided at {len(finals)} sites", None, n)


def run_checks(t: Trace, which: str = "all", fair: Optional[bool] = None) -> list:
    out = []
    if which in ("all", "safety"):
        out.append(check_local_soundness(t))
        out.append(check_mergeability(t))
    if which in ("all", "liveness"):
        out.append(check_liveness(t, fair))
    return out

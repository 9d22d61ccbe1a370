"""Scenario files: the declarative input of a simulated run.

Scenarios are TOML documents. Top-level keys ``seed``, ``horizon``, ``sites``
and ``weights`` come first, then the tables ``oracle``, ``gossip``,
``proposer`` and the arrays of tables ``submissions`` and ``faults``. See the
README for the full grammar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Optional

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from ..multilog import Action, ActionId, is_sound
from ..proposer import ProposerKind
from ..schedules import SchedulePolicy
from ..semantics import CalendarOracle, ConstraintOracle, DbPayload, induced_multilog, make_oracle

__all__ = [
    "InvalidScenario",
    "ActionSpec",
    "Submission",
    "GossipPolicy",
    "Fault",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "validate_scenario",
]


class InvalidScenario(ValueError):
    def __init__(self, causes):
        self.causes = list(causes)
        super().__init__("; ".join(self.causes))


@dataclass(frozen=True)
class ActionSpec:
    label: str = ""
    payload: Any = None


@dataclass(frozen=True)
class Submission:
    at: int
    site: int
    actions: tuple


@dataclass(frozen=True)
class GossipPolicy:
    period: int = 1
    max_delay: int = 3
    delta: bool = False
    schedule: str = "canonical-greedy"


@dataclass(frozen=True)
class Fault:
    """One fault rule.

    kind is crash (site, at, duration; no duration means permanent), drop
    (probability within [start, until) ticks, or a single message id),
    duplicate (probability) or reorder (probability, max_extra_delay).
    """

    kind: str
    site: int = 0
    at: int = 0
    duration: Optional[int] = None
    probability: float = 0.0
    message: Optional[int] = None
    start: int = 0
    until: Optional[int] = None
    max_extra_delay: int = 5


@dataclass
class Scenario:
    name: str = "scenario"
    seed: int = 0
    horizon: int = 100000
    n: int = 1
    weights: dict = field(default_factory=dict)
    oracle_kind: str = "independent"
    oracle_table: tuple = ()
    submissions: list = field(default_factory=list)
    gossip: GossipPolicy = field(default_factory=GossipPolicy)
    faults: list = field(default_factory=list)
    default_proposer: ProposerKind = field(default_factory=ProposerKind)
    proposers: dict = field(default_factory=dict)

    @property
    def sites(self) -> list:
        return list(range(1, self.n + 1))

    def oracle(self) -> ConstraintOracle:
        return make_oracle(self.oracle_kind, self.oracle_table)

    def proposer_for(self, site: int) -> ProposerKind:
        return self.proposers.get(site, self.default_proposer)

    def schedule_policy(self) -> SchedulePolicy:
        return SchedulePolicy(self.gossip.schedule)

    @property
    def fair(self) -> bool:
        for f in self.faults:
            if f.kind == "crash" and f.duration is None:
                return False
            if f.kind == "drop" and f.message is None and f.probability >= 1 and f.until is None:
                return False
        return True

    @property
    def action_count(self) -> int:
        return sum(len(s.actions) for s in self.submissions)

    def declared_actions(self) -> list:
        """Actions as they would be numbered, each site's submissions seen as concurrent."""
        seq = {s: 0 for s in self.sites}
        out = []
        for sub in sorted(self.submissions, key=lambda s: (s.at, s.site)):
            for spec in sub.actions:
                seq[sub.site] = seq.get(sub.site, 0) + 1
                aid = ActionId(sub.site, seq[sub.site])
                out.append(Action(aid, spec.payload, ((sub.site, aid.seq),), spec.label))
        return out

    def with_seed(self, seed: int) -> "Scenario":
        from dataclasses import replace

        return replace(self, seed=seed)


def _fraction(value) -> Fraction:
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, int):
        return Fraction(value)
    raise ValueError(f"weight {value!r} must be an integer or a p/q string")


def _payload(kind: str, raw: Mapping) -> Any:
    body = {k: v for k, v in raw.items() if k != "label"}
    if kind == "serializable-db":
        return DbPayload.from_mapping(body)
    return body or None


def _proposer(raw: Mapping) -> ProposerKind:
    return ProposerKind(
        raw.get("kind", "optimizing"),
        tuple(raw.get("order", ())),
        int(raw.get("budget", 20000)),
    )


def parse_scenario(data: Mapping, name: str = "scenario") -> Scenario:
    causes = []
    try:
        n = int(data.get("sites", 1))
    except (TypeError, ValueError):
        raise InvalidScenario(["sites must be an integer count"])
    raw_w = data.get("weights")
    weights = {}
    if raw_w is None:
        weights = {k: Fraction(1, n) for k in range(1, n + 1)}
    else:
        items = raw_w.items() if isinstance(raw_w, Mapping) else enumerate(raw_w, start=1)
        for k, v in items:
            try:
                weights[int(k)] = _fraction(v)
            except (ValueError, ZeroDivisionError) as exc:
                causes.append(f"weight for site {k}: {exc}")
    oracle = data.get("oracle", {})
    kind = oracle.get("kind", "independent")
    table = tuple(oracle.get("table", ()))
    subs = []
    for i, raw in enumerate(data.get("submissions", ())):
        try:
            acts = tuple(ActionSpec(str(a.get("label", "")), _payload(kind, a)) for a in raw.get("actions", ()))
            subs.append(Submission(int(raw.get("at", 0)), int(raw["site"]), acts))
        except (KeyError, TypeError, ValueError) as exc:
            causes.append(f"submission {i}: {exc!r}")
    g = data.get("gossip", {})
    gossip = GossipPolicy(
        int(g.get("period", 1)),
        int(g.get("max_delay", 3)),
        bool(g.get("delta", False)),
        str(g.get("schedule", "canonical-greedy")),
    )
    faults = []
    for i, raw in enumerate(data.get("faults", ())):
        try:
            faults.append(
                Fault(
                    kind=str(raw["kind"]),
                    site=int(raw.get("site", 0)),
                    at=int(raw.get("at", 0)),
                    duration=None if raw.get("duration") is None else int(raw["duration"]),
                    probability=float(raw.get("probability", 0.0)),
                    message=None if raw.get("message") is None else int(raw["message"]),
                    start=int(raw.get("from", 0)),
                    until=None if raw.get("until") is None else int(raw["until"]),
                    max_extra_delay=int(raw.get("max_extra_delay", 5)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            causes.append(f"fault {i}: {exc!r}")
    prop = data.get("proposer", {})
    proposers = {}
    try:
        default = _proposer({"kind": prop.get("default", "optimizing"), "budget": prop.get("budget", 20000)})
        for k, raw in prop.get("sites", {}).items():
            proposers[int(k)] = _proposer(raw)
    except ValueError as exc:
        causes.append(f"proposer: {exc}")
        default = ProposerKind()
    if causes:
        raise InvalidScenario(causes)
    return Scenario(
        name=str(data.get("name", name)),
        seed=int(data.get("seed", 0)),
        horizon=int(data.get("horizon", 100000)),
        n=n,
        weights=weights,
        oracle_kind=kind,
        oracle_table=table,
        submissions=subs,
        gossip=gossip,
        faults=faults,
        default_proposer=default,
        proposers=proposers,
    )


def validate_scenario(sc: Scenario) -> list:
    """Itemized problems; empty when the scenario can run."""
    causes = []
    if sc.n < 1:
        causes.append("at least one site is required")
    if sorted(sc.weights) != sc.sites:
        causes.append(f"weights must be given for exactly sites 1..{sc.n}")
    if any(w < 0 for w in sc.weights.values()):
        causes.append("weights must be non-negative")
    if sum(sc.weights.values()) != 1:
        causes.append(f"weights sum to {sum(sc.weights.values())}, not exactly 1")
    if sc.horizon < 1:
        causes.append("horizon must be positive")
    if sc.gossip.period < 1 or sc.gossip.max_delay < 1:
        causes.append("gossip period and max_delay must be at least 1")
    if sc.gossip.schedule not in SchedulePolicy.KINDS:
        causes.append(f"unknown schedule policy {sc.gossip.schedule!r}")
    if sc.oracle_kind not in ("independent", "calendar", "serializable-db"):
        causes.append(f"unknown oracle kind {sc.oracle_kind!r}")
    labels = []
    for i, sub in enumerate(sc.submissions):
        if sub.site not in sc.sites:
            causes.append(f"submission {i} names site {sub.site}, outside 1..{sc.n}")
        if sub.at < 0:
            causes.append(f"submission {i} has a negative time")
        labels.extend(a.label for a in sub.actions if a.label)
    dup = sorted({x for x in labels if labels.count(x) > 1})
    if dup:
        causes.append(f"duplicate action labels: {dup}")
    for i, f in enumerate(sc.faults):
        if f.kind not in ("crash", "drop", "duplicate", "reorder"):
            causes.append(f"fault {i} has unknown kind {f.kind!r}")
        if f.kind == "crash" and f.site not in sc.sites:
            causes.append(f"fault {i} crashes site {f.site}, outside 1..{sc.n}")
        if f.kind == "crash" and f.duration is not None and f.duration < 1:
            causes.append(f"fault {i} has a non-positive crash duration")
        if not 0 <= f.probability <= 1:
            causes.append(f"fault {i} probability outside [0,1]")
    for k, p in sc.proposers.items():
        if k not in sc.sites:
            causes.append(f"proposer given for unknown site {k}")
    if sc.oracle_kind in ("independent", "calendar", "serializable-db"):
        try:
            oracle = sc.oracle()
        except ValueError as exc:
            causes.append(f"oracle: {exc}")
        else:
            if isinstance(oracle, CalendarOracle):
                known = set(labels)
                missing = sorted({x for _, a, b in oracle.table for x in (a, b)} - known)
                if missing:
                    causes.append(f"calendar table names labels never submitted: {missing}")
            if not causes and not is_sound(induced_multilog(oracle, sc.declared_actions())):
                causes.append("oracle constraints over the declared actions are unsound")
    return causes


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise InvalidScenario([f"{path}: {exc}"])
    return parse_scenario(data, name=path.stem)

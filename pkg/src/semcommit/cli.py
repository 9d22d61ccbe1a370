"""Command-line front end: validate, run, check, metrics, explain.

Exit codes: 0 success, 2 usage error, 3 invalid scenario, 4 checker failure,
5 file I/O or trace format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .multilog import INIT, ActionId, Multilog
from .simulator import InvalidScenario, Trace, load_scenario, metrics, run, run_checks, validate_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID = 3
EXIT_CHECK = 4
EXIT_IO = 5

SHIPPED = ("alice-bob-3site", "db-serializable", "independent-actions")


def shipped_path(name: str) -> Path:
    return Path(str(resources.files("semcommit") / "scenarios" / f"{name}.toml"))


def _resolve(arg: str) -> Path:
    p = Path(arg)
    if not p.exists() and arg in SHIPPED:
        return shipped_path(arg)
    return p


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semcommit", description=__doc__.splitlines()[0])
    ap.add_argument("verb", choices=["validate", "run", "check", "metrics", "explain"])
    ap.add_argument("--scenario", help="scenario file, or the name of a shipped scenario")
    ap.add_argument("--trace", help="trace file to write (run) or read (check, metrics, explain)")
    ap.add_argument("--seed", type=int, help="override the scenario seed")
    ap.add_argument("--checks", choices=["all", "safety", "liveness"], default="all")
    ap.add_argument("--format", choices=["text", "records"], default="text")
    return ap


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_scenario(args):
    if not args.scenario:
        raise _Fail(EXIT_USAGE, "--scenario is required")
    path = _resolve(args.scenario)
    try:
        sc = load_scenario(path)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read scenario: {exc}")
    except InvalidScenario as exc:
        raise _Fail(EXIT_INVALID, "invalid scenario:\n" + "\n".join(f"  - {c}" for c in exc.causes))
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    return sc


def _load_trace(args) -> Trace:
    if not args.trace:
        raise _Fail(EXIT_USAGE, "--trace is required")
    try:
        return Trace.read(args.trace)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read trace: {exc}")
    except (ValueError, KeyError) as exc:
        raise _Fail(EXIT_IO, f"malformed trace: {exc}")


def _labels(t: Trace) -> dict:
    out = {}
    for ev in t.of_kind("submit"):
        for a in ev["payload"]["actions"]:
            if a.get("label"):
                out[ActionId.parse(a["id"])] = a["label"]
    return out


def _vote(v) -> str:
    return f"{v[0]} (site {v[1]})"


def _decisions(m: Multilog, names: dict) -> str:
    def n(a):
        return "init" if a == INIT else names.get(a, str(a))

    guar = sorted(a for a, b in m.enables if b == INIT)
    dead = sorted(a for a, b in m.not_after if a == b)
    order = sorted((a, b) for a, b in m.not_after if a != b)
    parts = ["K={" + ", ".join(n(a) for a in sorted(m.actions)) + "}"]
    if guar:
        parts.append("guarantee " + ", ".join(n(a) for a in guar))
    if dead:
        parts.append("kill " + ", ".join(n(a) for a in dead))
    if order:
        parts.append("order " + ", ".join(f"{n(a)}->{n(b)}" for a, b in order))
    return "; ".join(parts)


def explain(t: Trace) -> list:
    names = _labels(t)
    out = []
    for ev in t.of_kind("elect"):
        p = ev["payload"]
        x = t.multilog(p["candidate"])
        src = p["source"]
        lines = [
            f"[event {ev['time']}, tick {ev['tick']}] site {ev['site']} elects X from proposals[{src[0]}] (ts {src[1]})",
            f"  X: {_decisions(x, names)}",
            f"  tally(X) = {_vote(p['tally'])}",
            f"  cotally(X) = {_vote(p['cotally'])}",
        ]
        if p["opponents"]:
            for o in p["opponents"]:
                b = t.multilog(o["candidate"])
                lines.append(f"  opponent: {_decisions(b, names)}; tally = {_vote(o['tally'])}")
        else:
            lines.append("  no opponents")
        lines.append(f"  candidates evaluated: {p['evaluated']}")
        out.append("\n".join(lines))
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out = sys.stdout
    try:
        if args.verb == "validate":
            sc = _load_scenario(args)
            causes = validate_scenario(sc)
            if causes:
                raise _Fail(EXIT_INVALID, "invalid scenario:\n" + "\n".join(f"  - {c}" for c in causes))
            print(f"{sc.name}: ok ({sc.n} sites, {sc.action_count} actions, oracle {sc.oracle_kind})", file=out)
            return EXIT_OK

        if args.verb == "run":
            sc = _load_scenario(args)
            try:
                trace = run(sc)
            except InvalidScenario as exc:
                raise _Fail(EXIT_INVALID, "invalid scenario:\n" + "\n".join(f"  - {c}" for c in exc.causes))
            if args.trace:
                try:
                    trace.write(args.trace)
                except OSError as exc:
                    raise _Fail(EXIT_IO, f"cannot write trace: {exc}")
            if args.format == "records" and not args.trace:
                out.write(trace.dumps())
            else:
                h = trace.header
                print(
                    f"{sc.name}: {h['outcome']} after {len(trace.events)} events (tick {h['final_tick']}, seed {h['seed']})",
                    file=out,
                )
            return EXIT_OK

        if args.verb == "check":
            trace = _load_trace(args)
            fair = None
            if args.scenario:
                fair = _load_scenario(args).fair
            verdicts = run_checks(trace, args.checks, fair)
            for v in verdicts:
                if args.format == "records":
                    print(json.dumps({"check": v.name, "status": v.status, "detail": v.detail, "counterexample": v.counterexample}), file=out)
                else:
                    print(v.line(), file=out)
                    if v.counterexample is not None:
                        print("  counterexample: " + json.dumps(v.counterexample)[:2000], file=out)
            return EXIT_OK if all(v.ok for v in verdicts) else EXIT_CHECK

        if args.verb == "metrics":
            report = metrics(_load_trace(args))
            if args.format == "records":
                print(json.dumps(report.to_dict(), sort_keys=True), file=out)
            else:
                print(report.text(), file=out)
            return EXIT_OK

        if args.verb == "explain":
            trace = _load_trace(args)
            blocks = explain(trace)
            print("\n\n".join(blocks) if blocks else "no elections in trace", file=out)
            return EXIT_OK
    except _Fail as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

import json

import pytest

from semcommit.cli import EXIT_CHECK, EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_USAGE, main


@pytest.fixture
def trace(tmp_path):
    path = tmp_path / "ab.jsonl"
    assert main(["run", "--scenario", "alice-bob-3site", "--trace", str(path)]) == EXIT_OK
    return path


def test_validate_shipped(capsys):
    assert main(["validate", "--scenario", "db-serializable"]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["fly"]) == EXIT_USAGE
    assert main(["validate"]) == EXIT_USAGE
    assert main(["check"]) == EXIT_USAGE


def test_invalid_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('sites = 2\nweights = ["1/2", "1/3"]\n')
    assert main(["validate", "--scenario", str(bad)]) == EXIT_INVALID
    assert "not exactly 1" in capsys.readouterr().err
    assert main(["run", "--scenario", str(bad)]) == EXIT_INVALID


def test_missing_files(tmp_path):
    assert main(["validate", "--scenario", str(tmp_path / "none.toml")]) == EXIT_IO
    assert main(["check", "--trace", str(tmp_path / "none.jsonl")]) == EXIT_IO
    junk = tmp_path / "junk.jsonl"
    junk.write_text("not json\n")
    assert main(["metrics", "--trace", str(junk)]) == EXIT_IO


def test_run_check_metrics_explain(trace, capsys):
    capsys.readouterr()
    assert main(["check", "--trace", str(trace)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "local-soundness: pass" in out and "mergeability: pass" in out and "liveness: pass" in out
    assert main(["metrics", "--trace", str(trace), "--format", "records"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["committed"] == 3
    assert main(["explain", "--trace", str(trace)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "tally(X) = 2/3 (site 3)" in out
    assert "cotally(X) = 0 (site 0)" in out
    assert "opponent: K={init, beta, gamma}; guarantee gamma; kill beta; order beta->gamma, gamma->beta; tally = 1/3 (site 2)" in out


def test_same_seed_same_trace(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["run", "--scenario", "alice-bob-3site", "--seed", "9", "--trace", str(a)])
    main(["run", "--scenario", "alice-bob-3site", "--seed", "9", "--trace", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_records_to_stdout(capsys):
    assert main(["run", "--scenario", "independent-actions", "--format", "records"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert json.loads(lines[0])["format"] == 1
    assert all(json.loads(ln)["kind"] for ln in lines[1:])


def test_check_failure_exit(tmp_path, capsys):
    from semcommit.multilog import INIT, ActionId, Multilog
    from semcommit.simulator import Trace

    a = ActionId(1, 1)
    t = Trace(header={"sites": 1, "fair": True})
    m = Multilog.build([a], not_after=[(a, a)], enables=[(a, INIT)])
    t.append("schedule", 1, 0, {"multilog": t.ref(m), "schedule": ["0.0"], "decided": []})
    path = tmp_path / "bad.jsonl"
    t.write(path)
    assert main(["check", "--trace", str(path), "--checks", "safety", "--format", "records"]) == EXIT_CHECK
    rows = [json.loads(ln) for ln in capsys.readouterr().out.splitlines()]
    assert rows[0]["status"] == "fail"

"""Scenario plumbing, checker self-tests, reproducibility and the command line."""
import copy
import json
import os
import subprocess
import sys
import textwrap

import pytest

from dagbft import Fault, Scenario, analyze, run_scenario
from dagbft.checks import TraceView, check_total_order, check_wave_exclusivity, total_order
from dagbft.cli import main
from dagbft.harness import simulate
from dagbft.report import run_with_trace
from dagbft.trace import Trace


def test_fault_parsing():
    assert Fault.parse("2:crash@150") == Fault(2, "crash", at=150)
    assert Fault.parse("1:delayed+80") == Fault(1, "delayed", delay=80)
    assert Fault.parse("3:equivocate") == Fault(3, "equivocate")


@pytest.mark.parametrize("kwargs", [
    {"protocol": "hotstuff"},
    {"n": 5},
    {"faults": [Fault(0, "crash"), Fault(1, "crash")]},
    {"faults": [Fault(9, "crash")]},
    {"faults": [Fault(0, "gossip")]},
    {"mode": "lossy"},
    {"max_rounds": 0},
])
def test_bad_scenarios_rejected(kwargs):
    with pytest.raises(ValueError):
        Scenario(**kwargs)


def test_scenario_round_trips_through_dict():
    s = Scenario(protocol="fallback", n=7, faults=[Fault(3, "crash", at=40)], policy="leader-starve",
                 policy_params={"timeout": 50}, gc=True)
    assert Scenario.from_dict(json.loads(json.dumps(s.to_dict()))) == s
    assert s.correct == frozenset({0, 1, 2, 4, 5, 6}) and s.byzantine == frozenset()


# -- checker self-tests -----------------------------------------------------------

def test_total_order_reports_first_divergence():
    good = ["a", "b", "c", "d"]
    assert check_total_order({0: good, 1: good[:2], 2: good}).ok
    res = check_total_order({0: good, 1: ["a", "b", "x"]})
    assert not res.ok and res.index == 2
    dup = check_total_order({0: ["a", "b", "a"]})
    assert not dup.ok and dup.index == 2


def _trace(**kw):
    return simulate(Scenario(**kw)).trace


def test_total_order_points_at_the_offending_record():
    trace = _trace(n=4, max_rounds=16, seed=3)
    bad = Trace(copy.copy(r) for r in trace.records)
    delivers = [i for i, r in enumerate(bad.records) if r.kind == "a_deliver" and r.recipient == 1]
    target = delivers[5]
    bad.records[target].digest = "00" * 16
    res = total_order(TraceView(bad))
    assert not res.ok and res.index == 5 and res.record == min(
        target, [i for i, r in enumerate(bad.records) if r.kind == "a_deliver" and r.recipient == 0][5])
    assert total_order(TraceView(trace)).ok


def test_wave_exclusivity_catches_crafted_violation():
    trace = _trace(protocol="fallback", n=4, max_rounds=16, seed=2)
    assert check_wave_exclusivity(TraceView(trace)).ok
    bad = Trace(copy.copy(r) for r in trace.records)
    idx = next(i for i, r in enumerate(bad.records)
               if r.kind == "leader_ordered" and r.recipient == 2 and r.round == 5)
    bad.records[idx].note = {**bad.records[idx].note, "kind": "fallback"}
    res = check_wave_exclusivity(TraceView(bad))
    assert not res.ok and res.data["wave"] == 2 and res.record is not None


def test_peeking_scheduler_is_rejected():
    report = run_scenario(Scenario(protocol="fallback", mode="asynchronous", policy="fallback-peek",
                                   max_rounds=12))
    assert not report.ok and "rejected" in report.error
    assert not report.check("gate_discipline")["ok"]


# -- reproducibility --------------------------------------------------------------

SNIPPET = textwrap.dedent("""
    from dagbft import fuzz_scenario, run_scenario
    print(run_scenario(fuzz_scenario("fallback", 4, rounds=12)).digest)
""")


def test_report_digest_independent_of_hash_seed():
    digests = set()
    for hash_seed in ("0", "1", "12345"):
        env = {**os.environ, "PYTHONHASHSEED": hash_seed}
        out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True,
                             check=True)
        digests.add(out.stdout.strip())
    assert len(digests) == 1


def test_trace_file_reproduces_report(tmp_path):
    s = Scenario(protocol="fallback", n=7, mode="asynchronous", policy="leader-starve",
                 policy_params={"timeout": 50}, max_rounds=16, seed=9)
    report, trace = run_with_trace(s)
    path = tmp_path / "run.jsonl"
    trace.dump(path)
    assert analyze(Trace.load(path)).digest == report.digest
    again, trace2 = run_with_trace(s)
    assert list(trace2.lines()) == list(trace.lines())


# -- command line -----------------------------------------------------------------

def test_cli_run_writes_trace_and_report(tmp_path, capsys):
    trace_path, report_path = tmp_path / "t.jsonl", tmp_path / "r.json"
    code = main(["run", "--protocol", "psync", "--n", "4", "--rounds", "12", "--seed", "1",
                 "--trace-out", str(trace_path), "--report-out", str(report_path)])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert report["ok"] and report["scenario"]["max_rounds"] == 12
    assert main(["check", "--trace", str(trace_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["digest"] == report["digest"]


def test_cli_faults_and_bad_input(capsys):
    assert main(["run", "--n", "4", "--rounds", "12", "--faults", "1:crash@100"]) == 0
    assert main(["run", "--n", "4", "--faults", "1:crash,2:crash"]) == 2
    assert "exceed" in capsys.readouterr().err


def test_cli_replay(capsys):
    assert main(["replay", "--figure", "fig1"]) == 0
    assert json.loads(capsys.readouterr().out)["ok"]


def test_cli_campaign_with_config(tmp_path, capsys):
    cfg = tmp_path / "camp.toml"
    cfg.write_text(textwrap.dedent("""
        [campaign]
        protocols = ["psync"]
        kind = "fixed"
        seed_start = 10

        [scenario]
        n = 7
        max_rounds = 12
        policy = "leader-starve"
        mode = "asynchronous"
    """))
    assert main(["campaign", "--seeds", "3", "--config", str(cfg)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary == {"runs": 3, "failed": 0, "failures": []}


def test_cli_runs_as_module():
    out = subprocess.run([sys.executable, "-m", "dagbft", "replay", "--figure", "appendixA"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stderr.startswith("PASS")


# -- end-to-end behaviour -----------------------------------------------------------

def test_synchronous_psync_commits_every_two_rounds():
    report = run_scenario(Scenario(protocol="psync", n=4, max_rounds=40))
    assert report.ok
    assert set(report.latency["histogram"]) == {"2"}


def test_starved_fallback_stays_live():
    report = run_scenario(Scenario(protocol="fallback", n=4, mode="asynchronous", policy="leader-starve",
                                   policy_params={"timeout": 50}, max_rounds=40, seed=3))
    assert report.ok
    assert any(kind == "fallback" for _r, _s, kind in report.leader_sequence)


@pytest.mark.parametrize("kind", ["equivocate", "malformed", "delayed"])
def test_byzantine_party_cannot_break_safety(kind):
    fault = Fault(3, kind, delay=80 if kind == "delayed" else 0)
    for protocol in ("psync", "fallback"):
        report = run_scenario(Scenario(protocol=protocol, n=4, mode="asynchronous", faults=[fault],
                                       max_rounds=20, seed=5))
        assert report.ok, (protocol, report.failures())

"""Command line front end: run, replay, campaign, check."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .harness import Fault, Scenario, fuzz_scenario
from .replay import SCRIPTS, replay_figure
from .report import analyze, run_with_trace
from .trace import Trace
from .transport import ASYNC, EVENTUALLY_SYNC, POLICIES

log = logging.getLogger("dagbft")


def _policy_params(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        key, _, value = item.partition("=")
        out[key.strip().replace("-", "_")] = int(value)
    return out


def scenario_from_args(a: argparse.Namespace) -> Scenario:
    faults = [Fault.parse(x) for x in (a.faults.split(",") if a.faults else [])]
    return Scenario(protocol=a.protocol, n=a.n, f=a.f, mode=a.mode, gst=a.gst, delta=a.delta,
                    timeout=a.timeout if a.timeout is not None else 5 * a.delta, seed=a.seed,
                    max_rounds=a.rounds, faults=faults, policy=a.policy,
                    policy_params=_policy_params(a.policy_param), gc=a.gc, tx_rate=a.tx_rate,
                    max_delay=a.max_delay)


def _emit_report(report, path: Optional[str]) -> None:
    text = report.to_json()
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _summary_line(report) -> str:
    lat = report.latency
    bad = ", ".join(f"{c['name']}: {c['detail']}" for c in report.failures())
    mean = f"{lat['mean']:.2f}" if lat["mean"] is not None else "-"
    return (f"{'PASS' if report.ok else 'FAIL'} digest={report.digest[:16]} "
            f"leaders={len(report.leader_sequence)} mean_gap={mean}"
            + (f" error={report.error}" if report.error else "") + (f" [{bad}]" if bad else ""))


def cmd_run(a) -> int:
    s = scenario_from_args(a)
    report, trace = run_with_trace(s)
    if a.trace_out:
        trace.dump(a.trace_out)
    _emit_report(report, a.report_out)
    print(_summary_line(report), file=sys.stderr)
    return 0 if report.ok else 1


def cmd_replay(a) -> int:
    report = replay_figure(a.figure)
    _emit_report(report, a.report_out)
    print(_summary_line(report), file=sys.stderr)
    return 0 if report.ok else 1


def cmd_check(a) -> int:
    report = analyze(Trace.load(a.trace))
    _emit_report(report, a.report_out)
    print(_summary_line(report), file=sys.stderr)
    return 0 if report.ok else 1


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def campaign_scenarios(config: dict, seeds: int) -> list[Scenario]:
    camp = config.get("campaign", {})
    protocols = camp.get("protocols", ["fallback", "psync"])
    start = camp.get("seed_start", 0)
    kind = camp.get("kind", "fuzz")
    out = []
    for protocol in protocols:
        for seed in range(start, start + seeds):
            if kind == "fuzz":
                out.append(fuzz_scenario(protocol, seed, rounds=camp.get("rounds", 24)))
            elif kind == "fixed":
                base = dict(config.get("scenario", {}))
                base.update(protocol=protocol, seed=seed)
                out.append(Scenario(**base))
            else:
                raise ValueError(f"unknown campaign kind {kind!r}")
    return out


def _run_one(s: Scenario) -> dict:
    report, _ = run_with_trace(s)
    return {"protocol": s.protocol, "seed": s.seed, "n": s.n, "ok": report.ok, "digest": report.digest,
            "failures": report.failures(), "error": report.error, "latency_mean": report.latency["mean"],
            "fallback": report.fallback}


def cmd_campaign(a) -> int:
    scenarios = campaign_scenarios(load_config(a.config), a.seeds)
    if a.jobs > 1:
        with ProcessPoolExecutor(a.jobs) as pool:
            rows = list(pool.map(_run_one, scenarios, chunksize=8))
    else:
        rows = [_run_one(s) for s in scenarios]
    failed = [r for r in rows if not r["ok"]]
    summary = {"runs": len(rows), "failed": len(failed), "failures": failed[:20]}
    fb = [r["fallback"] for r in rows if r["fallback"]]
    if fb:
        waves = sum(x["all_fallback_waves"] for x in fb)
        hits = sum(x["fallback_commits"] for x in fb)
        summary["fallback"] = {"all_fallback_waves": waves, "fallback_commits": hits,
                               "fraction": hits / waves if waves else None}
    text = json.dumps(summary, indent=2, sort_keys=True)
    if a.report_out:
        with open(a.report_out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"{len(rows) - len(failed)}/{len(rows)} runs passed", file=sys.stderr)
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dagbft", description="Deterministic DAG-BFT consensus simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario")
    run.add_argument("--protocol", choices=("fallback", "psync"), default="psync")
    run.add_argument("--n", type=int, default=4)
    run.add_argument("--f", type=int, default=None)
    run.add_argument("--mode", choices=(ASYNC, EVENTUALLY_SYNC), default=EVENTUALLY_SYNC)
    run.add_argument("--gst", type=int, default=0)
    run.add_argument("--delta", type=int, default=10)
    run.add_argument("--timeout", type=int, default=None, help="ticks (default 5*delta)")
    run.add_argument("--max-delay", type=int, default=None)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--rounds", type=int, default=40)
    run.add_argument("--policy", choices=sorted(POLICIES), default="uniform")
    run.add_argument("--policy-param", action="append", metavar="KEY=INT",
                     help="scheduler policy parameter, repeatable")
    run.add_argument("--gc", action="store_true")
    run.add_argument("--tx-rate", type=int, default=1)
    run.add_argument("--faults", default="",
                     help="comma list: 2:crash@150, 1:delayed+80, 3:equivocate, 0:malformed")
    run.add_argument("--trace-out")
    run.add_argument("--report-out")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("replay", help="replay a scripted figure")
    rep.add_argument("--figure", choices=sorted(SCRIPTS), required=True)
    rep.add_argument("--report-out")
    rep.set_defaults(func=cmd_replay)

    camp = sub.add_parser("campaign", help="run many seeds")
    camp.add_argument("--seeds", type=int, default=100)
    camp.add_argument("--config")
    camp.add_argument("--jobs", type=int, default=1)
    camp.add_argument("--report-out")
    camp.set_defaults(func=cmd_campaign)

    chk = sub.add_parser("check", help="re-run every checker on a saved trace")
    chk.add_argument("--trace", required=True)
    chk.add_argument("--report-out")
    chk.set_defaults(func=cmd_check)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

"""RunReport: everything a run is judged on, derived from its trace alone."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from . import checks
from .coin import Coin, CoinGateError
from .harness import Scenario, World
from .trace import Trace


def _log_digest(entries) -> str:
    h = hashlib.blake2b(digest_size=16)
    for e in entries:
        h.update(str(e).encode())
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class RunReport:
    scenario: dict
    log_digests: dict
    log_lengths: dict
    leader_sequence: list
    latency: dict
    wave_outcomes: dict
    max_retained_rounds: int
    checks: list = field(default_factory=list)
    fallback: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and all(c["ok"] for c in self.checks)

    def check(self, name: str) -> dict:
        for c in self.checks:
            if c["name"] == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c["ok"]]

    def body(self) -> dict:
        return {
            "scenario": self.scenario,
            "ok": self.ok,
            "error": self.error,
            "log_digests": self.log_digests,
            "log_lengths": self.log_lengths,
            "leader_sequence": self.leader_sequence,
            "latency": self.latency,
            "wave_outcomes": self.wave_outcomes,
            "max_retained_rounds": self.max_retained_rounds,
            "fallback": self.fallback,
            "checks": self.checks,
        }

    @property
    def digest(self) -> str:
        raw = json.dumps(self.body(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(raw.encode()).hexdigest()

    def to_dict(self) -> dict:
        return {**self.body(), "digest": self.digest}

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def analyze(trace: Trace, extra: tuple = (), error: Optional[str] = None,
            only: Optional[tuple] = None) -> RunReport:
    """Build the report for a finished (or aborted) run from its trace.

    ``only`` replaces the default check selection; ``extra`` checks are
    appended either way.
    """
    view = checks.TraceView(trace)
    base = checks.run_checks(view) if only is None else [c(view) for c in only]
    results = base + [c(view) for c in extra]
    ref = view.reference_party()
    kept = checks.retained_rounds(view)
    return RunReport(
        scenario=view.scenario.to_dict(),
        log_digests={str(p): _log_digest(view.logs.get(p, [])) for p in view.non_byzantine},
        log_lengths={str(p): len(view.logs.get(p, [])) for p in view.non_byzantine},
        leader_sequence=[list(x[:3]) for x in view.leaders.get(ref, [])],
        latency=checks.measure_commit_latency(view),
        wave_outcomes={str(w): o for w, o in checks.wave_outcomes(view, ref).items()},
        max_retained_rounds=max(kept.values(), default=0),
        checks=[r.to_dict() for r in results],
        fallback=checks.fallback_stats(view, ref) if view.scenario.protocol == "fallback" else {},
        error=error,
    )


def run_with_trace(scenario: Scenario, coin: Optional[Coin] = None, extra: tuple = ()) -> tuple:
    """Simulate and analyse; returns ``(report, trace)``."""
    world = World(scenario, coin)
    error = None
    try:
        world.run()
    except CoinGateError as exc:
        error = f"scheduler policy rejected: {exc}"
    return analyze(world.trace, extra, error), world.trace


def run_scenario(scenario: Scenario, coin: Optional[Coin] = None, extra: tuple = ()) -> RunReport:
    return run_with_trace(scenario, coin, extra)[0]

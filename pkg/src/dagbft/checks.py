"""Property checkers.  Every check reads the trace only, never live party state.

Each check returns a :class:`CheckResult`; on failure ``record`` is the index
of the first offending trace record (when there is one) and ``index`` the
diverging position for sequence comparisons.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Mapping, Optional, Sequence

from .gc import median
from .harness import Scenario
from .model import wave_of
from .trace import Trace

STEADY_KINDS = ("steady1", "steady2")


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""
    record: Optional[int] = None
    index: Optional[int] = None
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"name": self.name, "ok": self.ok, "detail": self.detail}
        if self.record is not None:
            d["record"] = self.record
        if self.index is not None:
            d["index"] = self.index
        if self.data:
            d["data"] = self.data
        return d

    def __bool__(self):
        return self.ok


@dataclass
class Body:
    round: int
    source: int
    ts: int
    strong: tuple
    weak: tuple
    issued_at: int
    record: int


class TraceView:
    """Indexes one trace for the checkers."""

    def __init__(self, trace: Trace):
        self.trace = trace
        self.scenario = Scenario.from_dict(trace.header())
        s = self.scenario
        self.n, self.f = s.n, s.f
        self.quorum = 2 * s.f + 1
        self.byzantine = set(s.byzantine)
        self.non_byzantine = [p for p in range(s.n) if p not in self.byzantine]
        self.correct = sorted(s.correct)
        self.logs: dict[int, list] = defaultdict(list)          # digests, a_deliver order
        self.log_records: dict[int, list] = defaultdict(list)
        self.leaders: dict[int, list] = defaultdict(list)       # (round, source, kind, digest)
        self.leader_records: dict[int, list] = defaultdict(list)
        self.direct: dict[int, list] = defaultdict(list)        # (round, kind, record)
        self.vote_types: dict[tuple, dict] = defaultdict(dict)  # (party, wave) -> observer -> (type, rec)
        self.bodies: dict[str, Body] = {}
        self.kept: dict[tuple, str] = {}                        # (sender, round) -> digest
        self.deliveries: list = []                              # (recipient, sender, round, digest, rec)
        self.admits: dict[int, list] = defaultdict(list)        # (round, sender, digest, rec)
        self.gc: dict[int, list] = defaultdict(list)            # (round, note, rec)
        self.timer_expire: dict[int, list] = defaultdict(list)  # (round, rec)
        self.crashes: dict[int, int] = {}
        self.final: dict[int, dict] = {}
        self.coin_peeks: list = []
        self.broadcasts: list = []                              # (sender, round, digest, time, rec)
        self.round_entries: dict[int, list] = defaultdict(list) # (round, time, via, rec)
        self.events: dict[int, list] = defaultdict(list)        # ordering events per party
        for i, r in enumerate(trace.records):
            k = r.kind
            if k == "a_deliver":
                self.logs[r.recipient].append(r.digest)
                self.log_records[r.recipient].append(i)
                self.events[r.recipient].append(("D", r.digest, i))
            elif k == "leader_ordered":
                self.leaders[r.recipient].append((r.round, r.sender, r.note["kind"], r.digest))
                self.leader_records[r.recipient].append(i)
                self.events[r.recipient].append(("L", r.digest, i))
            elif k == "gc":
                self.gc[r.recipient].append((r.round, r.note, i))
                self.events[r.recipient].append(("G", r.round, i))
            elif k == "direct_commit":
                self.direct[r.recipient].append((r.round, r.note["kind"], i))
            elif k == "vote_type":
                self.vote_types[(r.sender, r.note["wave"])][r.recipient] = (r.note["type"], i)
            elif k == "broadcast":
                nt = r.note
                self.kept[(r.sender, r.round)] = r.digest
                self.broadcasts.append((r.sender, r.round, r.digest, r.time, i))
                self.bodies[r.digest] = Body(r.round, r.sender, nt["ts"],
                                             tuple((a, b, c) for a, b, c in nt["strong"]),
                                             tuple((a, b, c) for a, b, c in nt["weak"]), r.time, i)
            elif k == "deliver":
                self.deliveries.append((r.recipient, r.sender, r.round, r.digest, i))
            elif k == "admit":
                self.admits[r.recipient].append((r.round, r.sender, r.digest, i))
            elif k == "timer_expire":
                self.timer_expire[r.recipient].append((r.round, i))
            elif k == "crash":
                self.crashes[r.recipient] = r.time
            elif k == "final":
                self.final[r.recipient] = r.note
            elif k == "coin_peek":
                self.coin_peeks.append((r.note, i))
            elif k == "round_enter":
                self.round_entries[r.recipient].append((r.round, r.time, r.note["via"], i))

    def reference_party(self) -> int:
        return self.correct[0] if self.correct else self.non_byzantine[0]

    def leader_ts(self, digest: str) -> Optional[int]:
        b = self.bodies[digest]
        if b.round <= 1:
            return None
        return median([self.bodies[d].ts for (_, _, d) in b.strong])


# -- generic sequence comparison ------------------------------------------------

def _first_divergence(a: Sequence, b: Sequence) -> Optional[int]:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return None


def check_total_order(logs: Mapping[Any, Sequence], name: str = "total_order") -> CheckResult:
    """Pairwise prefix consistency (and no repeats) of per-party output logs."""
    for p, log in logs.items():
        seen = set()
        for i, x in enumerate(log):
            if x in seen:
                return CheckResult(name, False, f"party {p} output an entry twice", index=i,
                                   data={"party": p})
            seen.add(x)
    for p, q in combinations(sorted(logs), 2):
        i = _first_divergence(logs[p], logs[q])
        if i is not None:
            return CheckResult(name, False, f"parties {p} and {q} diverge at position {i}", index=i,
                               data={"parties": [p, q]})
    longest = max((len(x) for x in logs.values()), default=0)
    return CheckResult(name, True, f"{len(logs)} logs consistent, longest {longest}")


def _with_record(res: CheckResult, records: Mapping[Any, list]) -> CheckResult:
    if not res.ok and res.index is not None:
        parties = res.data.get("parties") or [res.data.get("party")]
        recs = [records[p][res.index] for p in parties if p in records and res.index < len(records[p])]
        if recs:
            res.record = min(recs)
    return res


def total_order(view: TraceView) -> CheckResult:
    logs = {p: view.logs.get(p, []) for p in view.non_byzantine}
    return _with_record(check_total_order(logs), view.log_records)


def leader_agreement(view: TraceView) -> CheckResult:
    seqs = {p: view.leaders.get(p, []) for p in view.non_byzantine}
    return _with_record(check_total_order(seqs, "leader_agreement"), view.leader_records)


# -- consensus claims -------------------------------------------------------------

def check_wave_exclusivity(view: TraceView) -> CheckResult:
    """No wave has both a steady-state and a fallback leader committed (by anyone)."""
    kinds: dict[int, dict] = defaultdict(dict)
    for p in view.non_byzantine:
        for (rnd, _src, kind, _d), rec in zip(view.leaders.get(p, []), view.leader_records.get(p, [])):
            kinds[wave_of(rnd)].setdefault(kind, rec)
    for w in sorted(kinds):
        ks = kinds[w]
        steady = [k for k in ks if k in STEADY_KINDS]
        if steady and "fallback" in ks:
            return CheckResult("wave_exclusivity", False, f"wave {w} committed {sorted(ks)}",
                               record=max(ks[steady[0]], ks["fallback"]), data={"wave": w})
    return CheckResult("wave_exclusivity", True, f"{len(kinds)} waves with commits")


def vote_type_agreement(view: TraceView) -> CheckResult:
    checked = 0
    for (party, wave), obs in sorted(view.vote_types.items()):
        honest = {o: t for o, t in obs.items() if o not in view.byzantine}
        if len(honest) < 2:
            continue
        checked += 1
        types = {t for t, _ in honest.values()}
        if len(types) > 1:
            return CheckResult("vote_type_agreement", False,
                               f"party {party} wave {wave} classified {sorted(types)}",
                               record=max(r for _, r in honest.values()),
                               data={"party": party, "wave": wave})
    return CheckResult("vote_type_agreement", True, f"{checked} (party, wave) pairs agree",
                       data={"checked": checked})


# -- reliable broadcast -------------------------------------------------------------

def rb_properties(view: TraceView) -> CheckResult:
    """Integrity, agreement and (at quiescence) validity of reliable broadcast."""
    seen = set()
    for recipient, sender, rnd, digest, rec in view.deliveries:
        key = (recipient, sender, rnd)
        if key in seen:
            return CheckResult("reliable_broadcast", False, f"duplicate delivery {key}", record=rec)
        seen.add(key)
        if view.kept.get((sender, rnd)) != digest:
            return CheckResult("reliable_broadcast", False,
                               f"p{recipient} got a different round-{rnd} vertex from p{sender}", record=rec)
    for (sender, rnd), digest in sorted(view.kept.items()):
        if sender in view.byzantine:
            continue
        for p in view.correct:
            if p != sender and (p, sender, rnd) not in seen:
                return CheckResult("reliable_broadcast", False,
                                   f"p{p} never received p{sender}'s round-{rnd} vertex",
                                   record=view.bodies[digest].record)
    return CheckResult("reliable_broadcast", True, f"{len(view.deliveries)} deliveries")


def one_vertex_per_round(view: TraceView) -> CheckResult:
    """No party broadcasts two vertices for one round (and rounds only grow)."""
    seen = set()
    for sender, rnd, _d, _t, rec in view.broadcasts:
        if (sender, rnd) in seen:
            return CheckResult("one_vertex_per_round", False, f"p{sender} broadcast twice in round {rnd}",
                               record=rec)
        seen.add((sender, rnd))
    for p, entries in view.round_entries.items():
        rounds = [rnd for rnd, *_ in entries]
        for a, b, (_r, _t, _v, rec) in zip(rounds, rounds[1:], entries[1:]):
            if b <= a:
                return CheckResult("one_vertex_per_round", False, f"p{p} went from round {a} to {b}",
                                   record=rec)
    return CheckResult("one_vertex_per_round", True, f"{len(seen)} broadcasts")


def post_gst_bound(view: TraceView) -> CheckResult:
    """After GST every delivery lands within delta of issue (honest sender)
    or of the first delivered copy (faulty sender)."""
    s = view.scenario
    if s.mode != "eventually_synchronous":
        return CheckResult("post_gst_bound", True, "asynchronous run")
    issued = {(snd, rnd): t for snd, rnd, _d, t, _i in view.broadcasts}
    first: dict[tuple, int] = {}
    for _rcp, snd, rnd, _d, rec in view.deliveries:
        first.setdefault((snd, rnd), view.trace.records[rec].time)
    checked = 0
    for rcp, snd, rnd, _d, rec in view.deliveries:
        at = view.trace.records[rec].time
        start = issued[(snd, rnd)] if snd not in view.byzantine else first[(snd, rnd)]
        if start < s.gst:
            continue
        checked += 1
        if at > start + s.delta:
            return CheckResult("post_gst_bound", False,
                               f"p{rcp} got p{snd}'s round-{rnd} vertex {at - start} ticks late", record=rec)
    return CheckResult("post_gst_bound", True, f"{checked} post-GST deliveries within delta")


def lockstep(view: TraceView, slack: int = 2) -> CheckResult:
    """Once an honest party enters round r at t >= GST, every correct party
    enters r (or jumps past it) by t + slack * delta.

    Rounds that some party only reached because its timer for r-1 expired
    are skipped: those timers were armed at staggered times before GST.
    """
    s = view.scenario
    if s.mode != "eventually_synchronous":
        return CheckResult("lockstep", True, "asynchronous run")
    timed_out = {rnd + 1 for p in view.correct for rnd, _rec in view.timer_expire.get(p, [])}
    entered: dict[int, dict] = {}
    for p in view.correct:
        entered[p] = {}
        for rnd, t, _via, _rec in view.round_entries.get(p, []):
            entered[p][rnd] = t
    first: dict[int, tuple] = {}
    for p in view.correct:
        for rnd, t in entered[p].items():
            if rnd not in first or t < first[rnd][0]:
                first[rnd] = (t, p)
    for rnd in sorted(first):
        t, leader = first[rnd]
        if t < s.gst or rnd in timed_out:
            continue
        for p in view.correct:
            reached = [tt for rr, tt in entered[p].items() if rr >= rnd]
            if not reached or min(reached) > t + slack * s.delta:
                return CheckResult("lockstep", False,
                                   f"p{leader} entered round {rnd} at {t}; p{p} only at {min(reached, default=None)}")
    return CheckResult("lockstep", True, f"{len(first)} rounds")


def validity(view: TraceView) -> CheckResult:
    """Every vertex a leader's creator held when it built the leader is output
    together with (or before) that leader, at every party that orders it."""
    if view.scenario.gc:
        return CheckResult("validity", True, "not applicable with garbage collection")
    bcast_rec = {d: rec for _s, _r, d, _t, rec in view.broadcasts}
    admits_by = {p: sorted((i, rnd, d) for rnd, _s, d, i in view.admits.get(p, [])) for p in range(view.n)}
    checked = 0
    for q in view.correct:
        delivered_at: dict[str, int] = {}
        batch = -1
        order = []
        for kind, x, _rec in view.events[q]:
            if kind == "L":
                batch += 1
                order.append(x)
            elif kind == "D":
                delivered_at[x] = batch
        for k, ld in enumerate(order):
            body = view.bodies[ld]
            cut = bcast_rec[ld]
            for i, rnd, d in admits_by[body.source]:
                if i > cut:
                    break
                if rnd >= body.round or view.bodies[d].source in view.byzantine:
                    continue
                checked += 1
                if delivered_at.get(d, k + 1) > k:
                    return CheckResult("validity", False,
                                       f"p{q} ordered leader r{body.round}p{body.source} without "
                                       f"r{rnd}p{view.bodies[d].source}, which its creator held", record=cut)
    return CheckResult("validity", True, f"{checked} (leader, vertex) obligations met")


# -- DAG structure ---------------------------------------------------------------------

def dag_convergence(view: TraceView) -> CheckResult:
    """At quiescence correct parties hold the same vertices above every gc line."""
    if not view.correct:
        return CheckResult("dag_convergence", True, "no correct parties")
    if any(p not in view.final for p in view.correct):
        return CheckResult("dag_convergence", False, "run stopped before quiescence")
    floor = max(view.final[p]["gc_round"] for p in view.correct)
    sets = {}
    for p in view.correct:
        if view.final[p]["buffered"]:
            return CheckResult("dag_convergence", False, f"p{p} ends with a non-empty buffer")
        sets[p] = {d for (rnd, _s, d, _i) in view.admits[p] if rnd > floor}
    ref = view.correct[0]
    for p in view.correct[1:]:
        if sets[p] != sets[ref]:
            diff = sorted(sets[p] ^ sets[ref])
            return CheckResult("dag_convergence", False, f"p{p} and p{ref} differ on {len(diff)} vertices",
                               record=view.bodies[diff[0]].record if diff[0] in view.bodies else None)
    return CheckResult("dag_convergence", True, f"{len(sets[ref])} vertices above round {floor}")


def common_core(view: TraceView) -> CheckResult:
    """In every full wave of every party's DAG, 2f+1 first-round vertices are
    each strong-reachable from 2f+1 fourth-round vertices."""
    q = view.quorum
    waves_checked = 0
    for p in view.correct:
        gc_floor = max([rnd for rnd, _n, _i in view.gc.get(p, [])], default=0)
        by_round: dict[int, set] = defaultdict(set)
        for rnd, _s, d, _i in view.admits[p]:
            by_round[rnd].add(d)
        top = max(by_round, default=0)
        for w in range(1, top // 4 + 1):
            r = 4 * w - 3
            if r <= gc_floor or any(len(by_round[r + k]) < q for k in range(4)):
                continue
            waves_checked += 1
            # strong-reachable round-r set from each round r+3 vertex, one layer at a time
            reach = {d: {d} for d in by_round[r]}
            for k in (1, 2, 3):
                nxt = {}
                for d in by_round[r + k]:
                    acc = set()
                    for (_rr, _ss, e) in view.bodies[d].strong:
                        acc |= reach.get(e, set())
                    nxt[d] = acc
                reach = nxt
            hits = Counter(x for targets in reach.values() for x in targets)
            core = [d for d in by_round[r] if hits[d] >= q]
            if len(core) < q:
                return CheckResult("common_core", False,
                                   f"p{p} wave {w}: only {len(core)} round-{r} vertices have {q} supporters",
                                   data={"party": p, "wave": w})
    return CheckResult("common_core", True, f"{waves_checked} full waves", data={"waves": waves_checked})


def gate_discipline(view: TraceView) -> CheckResult:
    """Nothing admitted at or below the gc line; the coin never read early."""
    for note, rec in view.coin_peeks:
        if not note["gate_open"]:
            return CheckResult("gate_discipline", False, f"coin for wave {note['wave']} read before its gate",
                               record=rec)
    for p in view.non_byzantine:
        events = sorted([(i, "A", rnd) for rnd, _s, _d, i in view.admits[p]] +
                        [(i, "G", rnd) for rnd, _n, i in view.gc[p]])
        line = 0
        for i, kind, rnd in events:
            if kind == "G":
                line = max(line, rnd)
            elif rnd <= line:
                return CheckResult("gate_discipline", False, f"p{p} admitted round {rnd} below gc line {line}",
                                   record=i)
    return CheckResult("gate_discipline", True, "")


# -- garbage collection ------------------------------------------------------------

def check_validity_after_gst(view: TraceView) -> CheckResult:
    """Post-GST honest vertices are never lost.

    The run is finite, so "eventually ordered" is tested through two
    obligations that hold on any prefix:

    * a vertex in a round a party has collected must already be ordered there;
    * once a party orders a leader whose timestamp exceeds the vertex's by
      more than one network bound (and sits at least three rounds above it),
      the vertex must be ordered no later than that leader's batch.
    """
    s = view.scenario
    gst = s.gst if s.mode == "eventually_synchronous" else None
    if gst is None:
        return CheckResult("validity_after_gst", True, "no GST in this run")
    candidates = [d for d, b in view.bodies.items()
                  if b.issued_at >= gst and b.source not in view.byzantine]
    pending_total = 0
    for p in view.correct:
        batch_of: dict[str, int] = {}
        leader_batches = []   # (round, leader_ts, record)
        cleared = []          # (batch, round, record)
        batch = -1
        for kind, x, rec in view.events[p]:
            if kind == "L":
                batch += 1
                leader_batches.append((view.bodies[x].round, view.leader_ts(x), rec))
            elif kind == "D":
                batch_of[x] = batch
            else:
                cleared.append((batch, x, rec))
        for d in candidates:
            b = view.bodies[d]
            got = batch_of.get(d, math.inf)
            for k, rnd, rec in cleared:
                if rnd >= b.round:
                    if got > k:
                        return CheckResult("validity_after_gst", False,
                                           f"p{p} collected round {rnd} without ordering p{b.source}'s "
                                           f"round-{b.round} vertex", record=rec)
                    break
            for k, (lround, lts, rec) in enumerate(leader_batches):
                if lts is not None and lround >= b.round + 3 and lts > b.ts + s.delta:
                    if got > k:
                        return CheckResult("validity_after_gst", False,
                                           f"p{p} ordered a later leader (round {lround}) but not "
                                           f"p{b.source}'s round-{b.round} vertex", record=rec)
                    break
            else:
                if got == math.inf:
                    pending_total += 1
    return CheckResult("validity_after_gst", True,
                       f"{len(candidates)} post-GST vertices; {pending_total} (party, vertex) pairs still "
                       f"too recent to owe", data={"vertices": len(candidates), "pending": pending_total})


def gc_agreement(view: TraceView) -> CheckResult:
    """Every party collects the same rounds while ordering the same leaders."""
    seqs, recs = {}, {}
    for p in view.non_byzantine:
        seqs[p] = [(rnd, view.trace.records[i].digest) for rnd, _n, i in view.gc.get(p, [])]
        recs[p] = [i for _r, _n, i in view.gc.get(p, [])]
    return _with_record(check_total_order(seqs, "gc_agreement"), recs)


def retained_rounds(view: TraceView) -> dict[int, int]:
    """Per party, the largest (highest admitted round - gc round) ever held."""
    out = {}
    for p in view.non_byzantine:
        events = sorted([(i, "A", rnd) for rnd, _s, _d, i in view.admits[p]] +
                        [(i, "G", rnd) for rnd, _n, i in view.gc[p]])
        top = line = worst = 0
        for _i, kind, rnd in events:
            if kind == "A":
                top = max(top, rnd)
            else:
                line = max(line, rnd)
            worst = max(worst, top - line)
        out[p] = worst
    return out


def min_round_step(view: TraceView) -> int:
    """Smallest increase of the per-round median timestamp (at least 1 tick)."""
    per_round: dict[int, list] = defaultdict(list)
    for b in view.bodies.values():
        if b.source not in view.byzantine:
            per_round[b.round].append(b.ts)
    meds = [median(per_round[r]) for r in sorted(per_round)]
    steps = [b - a for a, b in zip(meds, meds[1:])]
    return max(1, min(steps, default=1))


def memory_bound(view: TraceView) -> int:
    """Rounds a party may hold: the longest commit gap (counting the warm-up
    before the first commit), the rounds spanning 3 network
    bounds of timestamps, and the fixed offset between a leader and the rounds
    its ordering can collect."""
    s = view.scenario
    gaps = [g for p in view.correct for g in commit_gaps(view, p, from_start=True)]
    g_max = max(gaps, default=4 * s.max_rounds)
    return g_max + math.ceil(3 * s.delta / min_round_step(view)) + 5


def bounded_memory(view: TraceView) -> CheckResult:
    kept = retained_rounds(view)
    bound = memory_bound(view)
    worst = max(kept.values(), default=0)
    return CheckResult("bounded_memory", worst <= bound, f"max retained {worst}, bound {bound}",
                       data={"max_retained": worst, "bound": bound})


# -- latency and liveness ------------------------------------------------------------

def commit_gaps(view: TraceView, party: int, from_start: bool = False) -> list[int]:
    rounds = [rnd for rnd, _k, _i in view.direct.get(party, [])]
    if from_start:
        rounds = [0] + rounds
    return [b - a for a, b in zip(rounds, rounds[1:])]


def measure_commit_latency(view: TraceView) -> dict:
    """Rounds between consecutive direct commits, per party and pooled."""
    per_party = {p: commit_gaps(view, p) for p in view.correct}
    pooled = [g for gs in per_party.values() for g in gs]
    hist = Counter(pooled)
    return {
        "histogram": {str(k): hist[k] for k in sorted(hist)},
        "mean": (sum(pooled) / len(pooled)) if pooled else None,
        "max": max(pooled, default=None),
        "per_party": {str(p): g for p, g in per_party.items()},
    }


def psync_cadence(view: TraceView, warmup_rounds: int = 4) -> CheckResult:
    """After warm-up every correct party commits directly every 2 rounds and
    no timer fires below the run horizon."""
    horizon = view.scenario.max_rounds
    for p in view.correct:
        rounds = [rnd for rnd, _k, _i in view.direct.get(p, []) if rnd > warmup_rounds]
        recs = [i for rnd, _k, i in view.direct.get(p, []) if rnd > warmup_rounds]
        if not rounds:
            return CheckResult("cadence", False, f"p{p} never committed after warm-up")
        for a, b, rec in zip(rounds, rounds[1:], recs[1:]):
            if b - a != 2:
                return CheckResult("cadence", False, f"p{p} gap {b - a} between rounds {a} and {b}", record=rec)
        if rounds[-1] < horizon - 3:
            return CheckResult("cadence", False, f"p{p} stopped committing at round {rounds[-1]}")
        for rnd, rec in view.timer_expire.get(p, []):
            if rnd < horizon:
                return CheckResult("cadence", False, f"p{p} timed out in round {rnd}", record=rec)
    return CheckResult("cadence", True, "2-round gaps, no timeouts")


def crash_resilience(view: TraceView, tail: int = 8) -> CheckResult:
    """Commits continue to the horizon, and any gap longer than 2 rounds only
    spans leader slots owned by crashed parties."""
    committee = view.scenario.committee
    crashed = set(view.crashes)
    horizon = view.scenario.max_rounds
    for p in view.correct:
        direct = view.direct.get(p, [])
        if not direct or direct[-1][0] < horizon - tail:
            return CheckResult("crash_resilience", False, f"p{p} stopped committing")
        for (a, _ka, _ia), (b, _kb, rec) in zip(direct, direct[1:]):
            for r in range(a + 2, b, 2):
                if committee.steady_leader_of_round(r) not in crashed:
                    return CheckResult("crash_resilience", False,
                                       f"p{p} skipped round-{r} leader p{committee.steady_leader_of_round(r)}, "
                                       f"which never crashed", record=rec)
    return CheckResult("crash_resilience", True, f"crashed {sorted(crashed)}")


# -- wave-level summaries ----------------------------------------------------------------

def wave_outcomes(view: TraceView, party: Optional[int] = None) -> dict[int, str]:
    party = view.reference_party() if party is None else party
    kinds: dict[int, list] = defaultdict(list)
    for rnd, _s, kind, _d in view.leaders.get(party, []):
        kinds[wave_of(rnd)].append(kind)
    top = max((rnd for rnd, _s, _k, _d in view.leaders.get(party, [])), default=0)
    return {w: "+".join(sorted(kinds[w])) if kinds[w] else "none" for w in range(1, wave_of(top) + 1)}


def fallback_stats(view: TraceView, party: Optional[int] = None) -> dict:
    """All-fallback waves as seen by one correct party, and how many of them
    ended with their fallback leader committed.  A wave only counts once
    the party has ordered a leader beyond the wave's first round."""
    party = view.reference_party() if party is None else party
    q = view.quorum
    ordered = view.leaders.get(party, [])
    top = max((rnd for rnd, *_ in ordered), default=0)
    fb_committed = {wave_of(rnd) for rnd, _s, kind, _d in ordered if kind == "fallback"}
    types: dict[int, list] = defaultdict(list)
    for (who, wave), obs in view.vote_types.items():
        if party in obs:
            types[wave].append(obs[party][0])
    waves = [w for w, ts in types.items()
             if len(ts) >= q and all(t == "fallback" for t in ts) and top > 4 * w - 3]
    hits = sum(1 for w in waves if w in fb_committed)
    return {"all_fallback_waves": len(waves), "fallback_commits": hits,
            "waves": sorted(waves), "committed": sorted(w for w in waves if w in fb_committed)}


SAFETY_CHECKS = (total_order, leader_agreement, check_wave_exclusivity, vote_type_agreement,
                 rb_properties, one_vertex_per_round, post_gst_bound, dag_convergence, common_core,
                 gate_discipline, gc_agreement, validity)


def run_checks(view: TraceView) -> list[CheckResult]:
    out = [c(view) for c in SAFETY_CHECKS]
    s = view.scenario
    if s.mode == "eventually_synchronous" and not s.faults:
        out.append(lockstep(view))
    if s.gc and s.mode == "eventually_synchronous":
        out.append(check_validity_after_gst(view))
        out.append(bounded_memory(view))
    return out

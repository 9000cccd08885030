"""Scripted DAG replays with known commit decisions.

Each script lists, round by round, which previous-round sources every
vertex points to with strong edges.  The whole DAG is fed in round order to
a single observer party; the commit, skip and vote-type records it emits are
then compared to the expected decisions.  Parties are 0-indexed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import checks
from .checks import CheckResult
from .coin import FixedCoin
from .fallback import FallbackConsensus
from .harness import Scenario
from .model import Block, Committee, LocalDag, Vertex, weak_edges_for
from .ordering import CommitState, VertexOrderer
from .psync import PsyncConsensus
from .report import RunReport, analyze
from .trace import Trace
from .transport import vertex_note

ALL4 = (0, 1, 2, 3)


@dataclass
class Script:
    name: str
    protocol: str
    edges: dict                      # round -> {source: strong parent sources}
    observer: int = 0
    coin: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)   # name -> (round, source)
    expect: Callable = None


def _uniform(sources, parents):
    return {s: tuple(parents) for s in sources}


FIG1 = Script(
    name="fig1",
    protocol="fallback",
    coin={1: 3, 2: 1},
    labels={"S1A": (1, 0), "S1B": (3, 1), "S2A": (5, 2), "S2B": (7, 3), "F2": (5, 1)},
    edges={
        1: _uniform(ALL4, ()),
        2: {0: (0, 2, 3), 1: (1, 2, 3), 2: (0, 2, 3), 3: (0, 2, 3)},
        3: _uniform(ALL4, ALL4),
        4: {0: (0, 2, 3), 1: (0, 1, 2), 2: (0, 2, 3), 3: (0, 2, 3)},
        5: _uniform(ALL4, ALL4),
        6: {0: (0, 2, 3), 1: (0, 1, 2), 2: (0, 2, 3), 3: (0, 2, 3)},
        7: {0: (0, 1, 2), 1: (0, 1, 2), 2: (0, 1, 2), 3: (0, 2, 3)},
        8: _uniform((0, 1, 2), (0, 1, 2)),
        9: {0: (0, 1, 2)},
    },
)

APPENDIX_A = Script(
    name="appendixA",
    protocol="psync",
    labels={"L1": (1, 0), "L2": (3, 1), "L3": (5, 2)},
    edges={
        1: _uniform(ALL4, ()),
        2: {0: (0, 1, 2), 1: (1, 2, 3), 2: (1, 2, 3), 3: (1, 2, 3)},
        3: {0: (0, 1, 2), 1: (1, 2, 3), 2: (1, 2, 3), 3: (1, 2, 3)},
        4: {0: (0, 2, 3), 1: (1, 2, 3), 2: (0, 2, 3), 3: (0, 2, 3)},
        5: _uniform(ALL4, (0, 2, 3)),
        6: _uniform(ALL4, (0, 1, 2)),
        7: {0: (0, 1, 2)},
    },
)

SCRIPTS = {s.name: s for s in (FIG1, APPENDIX_A)}


def build_dag(script: Script, committee: Committee) -> list[Vertex]:
    """Materialise the scripted vertices (weak edges computed over the full DAG)."""
    world = LocalDag(committee)
    out = []
    for r in sorted(script.edges):
        made = []
        for src, parents in sorted(script.edges[r].items()):
            if r == 1:
                strong = frozenset(g.ref for g in world.vertices(0))
            else:
                strong = frozenset(world.get_vertex(p, r - 1).ref for p in parents)
            weak = weak_edges_for(world, strong, r)
            made.append(Vertex(r, src, Block.empty(src, r), strong, weak, ts=10 * r))
        for v in made:
            world.insert(v)
        out.extend(made)
    return out


def _decisions(trace: Trace, labels: dict) -> dict:
    names = {rs: name for name, rs in labels.items()}
    out = {"direct": [], "indirect": [], "skipped_rounds": [], "ordered": [], "vote_types": {}}
    for r in trace.records:
        key = (r.round, r.sender)
        if r.kind == "direct_commit":
            out["direct"].append((names.get(key, f"r{r.round}p{r.sender}"), r.note["kind"], r.note["votes"]))
        elif r.kind == "indirect_commit":
            out["indirect"].append((names.get(key, f"r{r.round}p{r.sender}"), r.note["kind"]))
        elif r.kind == "skip":
            out["skipped_rounds"].append((r.round, r.note.get("ss"), r.note.get("fb")))
        elif r.kind == "leader_ordered":
            out["ordered"].append(names.get(key, f"r{r.round}p{r.sender}"))
        elif r.kind == "vote_type":
            out["vote_types"].setdefault(r.note["wave"], {})[r.sender] = r.note["type"]
    return out


def _expect_fig1(d: dict) -> list[str]:
    problems = []
    if ("S1A", "steady1", 3) not in d["direct"]:
        problems.append(f"S1A not directly committed with 3 votes: {d['direct']}")
    if ("F2", "fallback", 3) not in d["direct"]:
        problems.append(f"F2 not directly committed with 3 fallback votes: {d['direct']}")
    if d["vote_types"].get(2) != {p: "fallback" for p in ALL4}:
        problems.append(f"wave-2 vote types {d['vote_types'].get(2)}")
    if (3, 1, 0) not in d["skipped_rounds"]:
        problems.append(f"S1B not skipped with 1 steady vote: {d['skipped_rounds']}")
    if d["ordered"] != ["S1A", "F2"]:
        problems.append(f"ordered leaders {d['ordered']} != ['S1A', 'F2']")
    if d["indirect"]:
        problems.append(f"unexpected indirect commits {d['indirect']}")
    return problems


def _expect_appendix_a(d: dict) -> list[str]:
    problems = []
    if [x for x in d["direct"]] != [("L3", "steady1", 3)]:
        problems.append(f"direct commits {d['direct']} != [L3 with 3 votes]")
    if (3, None, None) not in d["skipped_rounds"]:
        problems.append(f"L2 not skipped: {d['skipped_rounds']}")
    if d["indirect"] != [("L1", "steady1")]:
        problems.append(f"indirect commits {d['indirect']} != [L1]")
    if d["ordered"] != ["L1", "L3"]:
        problems.append(f"ordered leaders {d['ordered']} != ['L1', 'L3']")
    return problems


FIG1.expect = _expect_fig1
APPENDIX_A.expect = _expect_appendix_a


def replay_trace(script: Script) -> Trace:
    committee = Committee.of_size(4)
    scenario = Scenario(protocol=script.protocol, n=4, max_rounds=max(script.edges))
    trace = Trace()
    trace.emit(0, "scenario", note=scenario.to_dict())
    me = script.observer
    clock = iter(range(1, 10**9))
    now = [0]

    def emit(kind, **kw):
        trace.emit(now[0], kind, recipient=me, **kw)

    dag = LocalDag(committee)
    state = CommitState()
    orderer = VertexOrderer(dag, state, emit=emit)
    if script.protocol == "fallback":
        coin = FixedCoin(script.coin, committee)
        consensus = FallbackConsensus(dag, coin, orderer, state, emit=emit)
    else:
        consensus = PsyncConsensus(dag, orderer, state, emit=emit)
    for v in build_dag(script, committee):
        now[0] = next(clock)
        trace.emit(now[0], "broadcast", sender=v.source, round=v.round, digest=v.digest, note=vertex_note(v))
        dag.insert(v)
        emit("admit", sender=v.source, round=v.round, digest=v.digest)
        consensus.try_ordering(v)
    trace.emit(now[0], "final", recipient=me, note={"round": dag.max_round(), "gc_round": 0,
                                                    "buffered": 0, "crashed": False})
    return trace


def figure_check(script: Script, trace: Trace) -> CheckResult:
    d = _decisions(trace, script.labels)
    problems = script.expect(d)
    return CheckResult(f"replay_{script.name}", not problems,
                       "; ".join(problems) or "decisions match",
                       data={"direct": d["direct"], "ordered": d["ordered"],
                             "skipped_rounds": d["skipped_rounds"]})


REPLAY_CHECKS = (checks.total_order, checks.leader_agreement, checks.check_wave_exclusivity,
                 checks.vote_type_agreement, checks.common_core)


def replay_figure(name: str) -> RunReport:
    try:
        script = SCRIPTS[name]
    except KeyError:
        raise ValueError(f"unknown figure {name!r}; choose from {sorted(SCRIPTS)}") from None
    trace = replay_trace(script)
    return analyze(trace, extra=(lambda view: figure_check(script, trace),), only=REPLAY_CHECKS)


def decisions(name: str) -> dict:
    script = SCRIPTS[name]
    return _decisions(replay_trace(script), script.labels)

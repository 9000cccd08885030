"""Commit rules of both variants: scripted replays and order-independence."""
import random
from collections import deque

from hypothesis import given, settings, strategies as st

from dagbft.checks import check_total_order
from dagbft.coin import Coin
from dagbft.fallback import FallbackConsensus
from dagbft.model import Block, Committee, LocalDag, Vertex, canonical_key, weak_edges_for
from dagbft.ordering import CommitState, VertexOrderer
from dagbft.psync import PsyncConsensus
from dagbft.replay import APPENDIX_A, FIG1, build_dag, decisions, replay_figure, replay_trace

C4 = Committee.of_size(4)


def closure(v, by_digest):
    out, todo = set(), deque([v])
    while todo:
        x = todo.popleft()
        if x.digest in out:
            continue
        out.add(x.digest)
        todo.extend(by_digest[r.digest] for r in x.edges if r.digest in by_digest)
    return out


def expected_log(script, leader_labels):
    vs = build_dag(script, C4)
    by_digest = {v.digest: v for v in vs}
    by_label = {name: next(v for v in vs if (v.round, v.source) == rs)
                for name, rs in script.labels.items()}
    log, seen = [], set()
    for name in leader_labels:
        batch = closure(by_label[name], by_digest) - seen
        seen |= batch
        log.extend(sorted((by_digest[d] for d in batch), key=canonical_key))
    return [v.digest.hex() for v in log]


def delivered(trace):
    return [r.digest for r in trace.records if r.kind == "a_deliver"]


def test_fig1_decisions():
    d = decisions("fig1")
    assert ("S1A", "steady1", 3) in d["direct"]
    assert ("F2", "fallback", 3) in d["direct"]
    assert (3, 1, 0) in d["skipped_rounds"]
    assert d["vote_types"][2] == {0: "fallback", 1: "fallback", 2: "fallback", 3: "fallback"}
    assert d["ordered"] == ["S1A", "F2"]


def test_fig1_delivers_histories_in_leader_order():
    assert delivered(replay_trace(FIG1)) == expected_log(FIG1, ["S1A", "F2"])


def test_psync_script_decisions():
    d = decisions("appendixA")
    assert d["direct"] == [("L3", "steady1", 3)]
    assert d["indirect"] == [("L1", "steady1")]
    assert (3, None, None) in d["skipped_rounds"]
    assert d["ordered"] == ["L1", "L3"]


def test_psync_script_delivers_histories_in_leader_order():
    assert delivered(replay_trace(APPENDIX_A)) == expected_log(APPENDIX_A, ["L1", "L3"])


def test_replay_reports_pass():
    for name in ("fig1", "appendixA"):
        report = replay_figure(name)
        assert report.ok, report.failures()


def test_psync_commits_leader_with_f_plus_one_votes():
    dag = LocalDag(C4)
    state = CommitState()
    cons = PsyncConsensus(dag, VertexOrderer(dag, state), state)
    prev = [g.ref for g in dag.vertices(0)]
    for r in (1, 2, 3):
        layer = []
        for s in range(4):
            # round-2 vertices skip p3; all of them still vote for the leader p0
            strong = frozenset(p for p in prev if r != 2 or p.source != 3)
            layer.append(Vertex(r, s, Block.empty(s, r), strong, weak_edges_for(dag, strong, r), 0))
        for v in layer:
            dag.insert(v)
            cons.try_ordering(v)
        prev = [v.ref for v in layer]
    assert state.leader_sequence[0] == (1, 0, "steady1")
    assert state.committed_round == 1


# -- order independence ---------------------------------------------------------

@st.composite
def dag_and_orders(draw, rounds=9):
    """A quorum DAG plus two admission orders that respect causality."""
    n = 4
    c = Committee.of_size(n)
    dag = LocalDag(c)
    vs = []
    for r in range(1, rounds + 1):
        sources = draw(st.lists(st.sampled_from(range(n)), min_size=c.quorum, max_size=n, unique=True))
        prev = dag.vertices(r - 1)
        layer = []
        for s in sorted(sources):
            strong = draw(st.lists(st.sampled_from(prev), min_size=min(c.quorum, len(prev)), unique=True))
            refs = frozenset(u.ref for u in strong)
            layer.append(Vertex(r, s, Block.empty(s, r), refs, weak_edges_for(dag, refs, r), 0))
        for v in layer:
            dag.insert(v)
        vs.extend(layer)
    seeds = draw(st.tuples(st.integers(0, 2**32), st.integers(0, 2**32)))
    return vs, [topological(vs, seed) for seed in seeds]


def topological(vs, seed):
    rng = random.Random(seed)
    done = {v.digest for v in LocalDag(C4).vertices(0)}
    pending, out = list(vs), []
    while pending:
        ready = [v for v in pending if all(r.digest in done or r.round == 0 for r in v.edges)]
        v = rng.choice(ready)
        pending.remove(v)
        done.add(v.digest)
        out.append(v)
    return out


def run_fallback(order, coin):
    dag = LocalDag(C4)
    state = CommitState()
    cons = FallbackConsensus(dag, coin, VertexOrderer(dag, state), state)
    for v in order:
        dag.insert(v)
        cons.try_ordering(v)
    types = {(p, w): cons.vote_type(p, w) for w in range(1, 4) for p in range(4)}
    return [ref.digest for ref in state.ordered_log], types


def run_psync(order):
    dag = LocalDag(C4)
    state = CommitState()
    cons = PsyncConsensus(dag, VertexOrderer(dag, state), state)
    for v in order:
        dag.insert(v)
        cons.try_ordering(v)
    return [ref.digest for ref in state.ordered_log]


@settings(max_examples=60, deadline=None)
@given(dag_and_orders(), st.integers(0, 1000))
def test_fallback_logs_do_not_depend_on_arrival_order(data, coin_seed):
    _vs, (a, b) = data
    coin = Coin(coin_seed, C4)
    log_a, types_a = run_fallback(a, coin)
    log_b, types_b = run_fallback(b, coin)
    assert check_total_order({"a": log_a, "b": log_b}).ok
    for key in types_a:
        if types_a[key] and types_b[key]:
            assert types_a[key] == types_b[key], key


@settings(max_examples=60, deadline=None)
@given(dag_and_orders())
def test_psync_logs_do_not_depend_on_arrival_order(data):
    _vs, (a, b) = data
    assert check_total_order({"a": run_psync(a), "b": run_psync(b)}).ok

"""Timestamp median, the admission gate, and collection during real runs."""
import statistics

import pytest
from hypothesis import given, strategies as st

from dagbft import Scenario
from dagbft.checks import TraceView, retained_rounds
from dagbft.gc import admission_gate, median
from dagbft.model import Block, Committee, LocalDag, Vertex, genesis
from dagbft.report import run_with_trace


@pytest.mark.parametrize("values,expected", [([3], 3), ([1, 5, 9], 5), ([1, 2, 8, 9], 2),
                                             ([9, 1, 8, 2], 2), ([4, 4, 4], 4)])
def test_lower_median(values, expected):
    assert median(values) == expected


@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=40))
def test_median_matches_median_low(values):
    assert median(values) == statistics.median_low(values)


def test_median_of_nothing():
    with pytest.raises(ValueError):
        median([])


def test_gate_rejects_collected_rounds():
    c = Committee.of_size(4)
    dag = LocalDag(c)
    refs = frozenset(g.ref for g in genesis(c))
    v = Vertex(1, 0, Block.empty(0, 1), refs, frozenset(), 0)
    assert admission_gate(dag, v)
    dag.clear_through(1)
    assert not admission_gate(dag, v)


@pytest.mark.parametrize("protocol", ["psync", "fallback"])
def test_synchronous_run_collects_and_stays_bounded(protocol):
    s = Scenario(protocol=protocol, n=4, gc=True, max_rounds=60, seed=4)
    report, trace = run_with_trace(s)
    assert report.ok, report.failures()
    view = TraceView(trace)
    assert view.gc[0], "nothing was collected"
    assert max(retained_rounds(view).values()) <= report.check("bounded_memory")["data"]["bound"]
    # every cleared round really trails its leader by more than 3 delta
    for rnd, note, _ in view.gc[0]:
        assert note["leader_ts"] - note["round_ts"] > 3 * s.delta


def test_collection_is_monotone_and_agreed():
    report, trace = run_with_trace(Scenario(protocol="psync", n=7, gc=True, max_rounds=50, seed=1))
    view = TraceView(trace)
    rounds = [rnd for rnd, _n, _i in view.gc[0]]
    assert rounds == sorted(rounds) and len(set(rounds)) == len(rounds)
    assert report.check("gc_agreement")["ok"]

"""DAG construction for a single party, driven by hand-fed deliveries."""
from types import SimpleNamespace

import pytest

from dagbft import Scenario, fuzz_scenario
from dagbft.dag import DagCore
from dagbft.harness import Fault, simulate
from dagbft.model import Block, Committee, LocalDag, Vertex, genesis

C4 = Committee.of_size(4)


class FakeNet:
    def __init__(self):
        self.now = 0
        self.timers = []
        self.sent = []

    def set_timer(self, party, timer_id, round_, duration):
        ev = SimpleNamespace(party=party, timer_id=timer_id, round=round_, fire_at=self.now + duration)
        self.timers.append(ev)
        return ev

    def r_bcast(self, sender, v, r):
        self.sent.append(v)


class StubConsensus:
    def __init__(self, voters=frozenset(range(4))):
        self.voters = voters
        self.seen = []

    def steady_voters_of(self, wave):
        return self.voters

    def try_ordering(self, v):
        self.seen.append(v)


def party(pid=3, voters=frozenset(range(4)), max_rounds=None):
    net = FakeNet()
    events = []
    core = DagCore(pid, LocalDag(C4), StubConsensus(voters), net, timeout=50, max_rounds=max_rounds,
                   emit=lambda kind, **kw: events.append((kind, kw)))
    core.start()
    return core, net, events


def chain(rounds, sources=(0, 1, 2), skip_parent=None):
    """Vertices from ``sources`` in rounds 1..rounds, each pointing at all of the previous round."""
    out = {}
    prev = frozenset(g.ref for g in genesis(C4))
    for r in range(1, rounds + 1):
        layer = [Vertex(r, s, Block.empty(s, r), prev, frozenset(), 0) for s in sources]
        out[r] = layer
        prev = frozenset(v.ref for v in layer)
    return out


def kinds(events, kind):
    return [kw for k, kw in events if k == kind]


def test_start_broadcasts_round_one_and_arms_timer():
    core, net, events = party()
    assert core.round == 1 and len(net.sent) == 1 and net.sent[0].round == 1
    assert net.timers[0].fire_at == 50
    assert kinds(events, "round_enter")[0]["note"] == {"via": "start"}


def test_too_few_strong_edges_dropped():
    core, net, events = party()
    refs = sorted(g.ref for g in genesis(C4))[:2]
    bad = Vertex(1, 0, Block.empty(0, 1), frozenset(refs), frozenset(), 0)
    core.on_r_deliver(bad, 1, 0)
    assert kinds(events, "malformed") and not core.dag.contains(bad)


def test_source_mismatch_dropped():
    core, _net, events = party()
    v = chain(1)[1][0]
    core.on_r_deliver(v, 1, 2)
    assert kinds(events, "malformed") and not core.dag.contains(v)


def test_reverse_order_chain_is_buffered_then_admitted():
    core, _net, events = party(voters=frozenset())
    layers = chain(3)
    feed = [v for r in (3, 2, 1) for v in layers[r]]
    for v in feed[:6]:
        core.on_r_deliver(v, v.round, v.source)
    assert len(core.dag.buffer) == 6
    for v in feed[6:]:
        core.on_r_deliver(v, v.round, v.source)
    assert not core.dag.buffer
    assert all(core.dag.contains(v) for v in feed)


def test_waits_for_first_leader_then_advances():
    core, net, _ = party()
    layers = chain(1, sources=(1, 2))
    for v in layers[1]:
        core.on_r_deliver(v, 1, v.source)
    assert core.round == 1            # 3 vertices but leader p0 still missing
    leader = chain(1, sources=(0,))[1][0]
    core.on_r_deliver(leader, 1, 0)
    assert core.round == 2


def test_timeout_releases_a_missing_leader():
    core, net, events = party()
    for v in chain(1, sources=(1, 2))[1]:
        core.on_r_deliver(v, 1, v.source)
    core.on_timeout(net.timers[0].timer_id + 99)   # stale id ignored
    assert core.round == 1
    core.on_timeout(net.timers[0].timer_id)
    assert core.round == 2
    assert kinds(events, "round_enter")[-1]["note"] == {"via": "advance"}


def test_jump_on_quorum_of_a_higher_round():
    # no steady voters: the party is stuck in round 2 until a later quorum pulls it up
    core, _net, events = party(voters=frozenset())
    layers = chain(3)
    for r in (1, 2):
        for v in layers[r]:
            core.on_r_deliver(v, r, v.source)
    assert core.round == 2
    for v in layers[3]:
        core.on_r_deliver(v, 3, v.source)
    vias = [(e["round"], e["note"]["via"]) for e in kinds(events, "round_enter")]
    assert (3, "jump") in vias


def test_horizon_stops_round_entry():
    core, _net, _ = party(max_rounds=2)
    layers = chain(4)
    for r in (1, 2, 3, 4):
        for v in layers[r]:
            core.on_r_deliver(v, r, v.source)
    assert core.round == 2


def test_no_steady_voters_means_round_two_needs_the_timer():
    """With every party fallback-typed the vote round only advances on expiry."""
    core, net, _ = party(voters=frozenset())
    leader_round = chain(2)
    for r in (1, 2):
        for v in leader_round[r]:
            core.on_r_deliver(v, r, v.source)
    # round 2 reached through round 1's leader, but never left without a timeout
    assert core.round == 2
    core.on_timeout(net.timers[-1].timer_id)
    assert core.round == 3


def test_crashed_party_ignores_everything():
    core, net, _ = party()
    core.crashed = True
    for v in chain(2)[1]:
        core.on_r_deliver(v, 1, v.source)
    core.on_timeout(net.timers[0].timer_id)
    assert core.round == 1 and len(net.sent) == 1


@pytest.mark.parametrize("protocol", ["psync", "fallback"])
def test_one_broadcast_per_party_per_round(protocol):
    for seed in range(50):
        world = simulate(fuzz_scenario(protocol, seed, rounds=12))
        seen = set()
        for r in world.trace.of_kind("broadcast"):
            key = (r.sender, r.round)
            assert key not in seen, (seed, key)
            seen.add(key)


def test_crashed_party_stops_broadcasting():
    s = Scenario(n=4, faults=[Fault.parse("2:crash@100")], max_rounds=20)
    world = simulate(s)
    late = [r for r in world.trace.of_kind("broadcast") if r.sender == 2 and r.time > 100]
    assert late == []

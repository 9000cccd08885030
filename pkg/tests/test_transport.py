"""Reliable broadcast over the event queue: timing bounds, integrity, policies."""
import pytest

from dagbft.model import Block, Committee, ProtocolError, Vertex, genesis
from dagbft.trace import Trace
from dagbft.transport import (ASYNC, EVENTUALLY_SYNC, DeliveryEvent, LeaderStarve, Network,
                              NetworkMode, UniformDelay, make_policy)

C4 = Committee.of_size(4)
G = frozenset(g.ref for g in genesis(C4))


class Sink:
    def __init__(self):
        self.got = []

    def on_r_deliver(self, v, r, p):
        self.got.append((r, p, v.digest))


def vertex(r, src, payload=b""):
    return Vertex(r, src, Block(src, 0, payload), G, frozenset(), 0)


def make_net(mode=None, policy=None, honest=None, seed=1):
    net = Network(C4, mode or NetworkMode(EVENTUALLY_SYNC, 0, 10, 140), policy or UniformDelay(),
                  seed, Trace(), honest=honest)
    sinks = {p: Sink() for p in C4.party_ids}
    net.handlers.update(sinks)
    return net, sinks


def drain(net):
    out = []
    while (ev := net.next_event()) is not None:
        if isinstance(ev, DeliveryEvent):
            if net.deliver(ev):
                out.append((net.now, ev.recipient, ev.instance.sender))
    return out


@pytest.mark.parametrize("issued,gst,expected", [(10, 0, 20), (0, 100, 110), (95, 100, 110),
                                                 (200, 100, 210)])
def test_latest_delivery_after_gst(issued, gst, expected):
    assert NetworkMode(EVENTUALLY_SYNC, gst, 10, 1000).latest_delivery(issued) == expected


def test_latest_delivery_capped_by_max_delay():
    assert NetworkMode(EVENTUALLY_SYNC, 10_000, 10, 140).latest_delivery(0) == 140
    assert NetworkMode(ASYNC, None, 10, 140).latest_delivery(5) == 145


def test_bad_modes_rejected():
    with pytest.raises(ValueError):
        NetworkMode("lossy")
    with pytest.raises(ValueError):
        NetworkMode(EVENTUALLY_SYNC, None)
    with pytest.raises(ValueError):
        make_policy("nope")


def test_post_gst_deliveries_land_within_delta():
    """Issued at t=10 with delta=1: every copy lands in (10, 11]."""
    net, _ = make_net(NetworkMode(EVENTUALLY_SYNC, 0, 1, 50), UniformDelay(spread=40))
    net.now = 10
    net.r_bcast(0, vertex(1, 0), 1)
    times = [t for t, _r, _s in drain(net)]
    assert len(times) == 3 and all(10 < t <= 11 for t in times)


def test_every_honest_recipient_gets_each_broadcast_once():
    net, sinks = make_net(NetworkMode(ASYNC, None, 10, 140))
    for p in C4.party_ids:
        net.r_bcast(p, vertex(1, p), 1)
    drain(net)
    for p, sink in sinks.items():
        assert sorted(s for _r, s, _d in sink.got) == [q for q in C4.party_ids if q != p]


def test_honest_double_broadcast_is_a_bug():
    net, _ = make_net()
    net.r_bcast(1, vertex(1, 1), 1)
    with pytest.raises(ProtocolError):
        net.r_bcast(1, vertex(1, 1, b"again"), 1)


def test_equivocation_is_recorded_and_first_copy_wins():
    net, sinks = make_net(honest=[0, 1, 2])
    first, twin = vertex(1, 3, b"a"), vertex(1, 3, b"b")
    net.r_bcast(3, first, 1)
    net.r_bcast(3, twin, 1)
    drain(net)
    assert len(net.trace.of_kind("equivocation")) == 1
    for p in (0, 1, 2):
        assert sinks[p].got == [(1, 3, first.digest)]


def test_duplicate_and_crashed_deliveries_are_dropped():
    net, sinks = make_net()
    v = vertex(1, 0)
    net.r_bcast(0, v, 1)
    inst = net.instances[(0, 1)]
    net.crashed.add(2)
    drain(net)
    assert not net.deliver(DeliveryEvent(1, inst, net.now))
    reasons = sorted(r.note["reason"] for r in net.trace.of_kind("drop"))
    assert reasons == ["crashed", "duplicate"]
    assert sinks[2].got == []


def test_faulty_sender_bounded_from_its_first_copy():
    class Skewed:
        name = "skewed"

        def delay(self, net, inst, recipient):
            return {1: 3, 2: 100, 3: 500}[recipient]

    net, _ = make_net(NetworkMode(EVENTUALLY_SYNC, 0, 10, 1000), Skewed(), honest=[1, 2, 3])
    net.r_bcast(0, vertex(1, 0), 1)
    times = {r: t for t, r, _s in drain(net)}
    assert times == {1: 3, 2: 13, 3: 13}


def test_leader_starve_holds_back_leaders_before_gst():
    policy = LeaderStarve(timeout=50, spread=40)
    net, _ = make_net(NetworkMode(ASYNC, None, 10, 140), policy)
    net.r_bcast(0, vertex(1, 0), 1)       # round 1 leader of wave 1 is p0
    net.r_bcast(1, vertex(1, 1), 1)
    got = drain(net)
    leader_times = [t for t, _r, s in got if s == 0]
    other_times = [t for t, _r, s in got if s == 1]
    assert min(leader_times) >= 90 and max(other_times) <= 40


def test_schedule_is_reproducible():
    def run(seed):
        net, _ = make_net(NetworkMode(ASYNC, None, 10, 140), seed=seed)
        for p in C4.party_ids:
            net.r_bcast(p, vertex(1, p), 1)
        return drain(net)
    assert run(7) == run(7)
    assert run(7) != run(8)

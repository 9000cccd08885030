"""Simulated reliable broadcast over a discrete-event queue.

The scheduler policy is the adversary: it picks a delivery delay for every
(broadcast, recipient) pair.  The transport then clamps that choice so the
network model holds -- a finite bound in asynchronous mode, and the
post-GST bound (delivery by max(issue, GST) + delta) in eventually
synchronous mode.  Reliable-broadcast agreement and integrity are enforced
here, not by the policy.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol

from .model import Committee, PartyId, ProtocolError, Vertex

log = logging.getLogger(__name__)

ASYNC = "asynchronous"
EVENTUALLY_SYNC = "eventually_synchronous"


@dataclass(frozen=True)
class NetworkMode:
    kind: str = EVENTUALLY_SYNC
    gst: Optional[int] = 0
    delta: int = 10
    max_delay: int = 140

    def __post_init__(self):
        if self.kind not in (ASYNC, EVENTUALLY_SYNC):
            raise ValueError(f"unknown network mode {self.kind!r}")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.kind == EVENTUALLY_SYNC and (self.gst is None or self.gst < 0):
            raise ValueError("eventually synchronous mode needs gst >= 0")
        if self.max_delay < self.delta:
            raise ValueError("max_delay must be at least delta")

    @property
    def gst_time(self) -> Optional[int]:
        return self.gst if self.kind == EVENTUALLY_SYNC else None

    def synchronous_at(self, t: int) -> bool:
        return self.kind == EVENTUALLY_SYNC and t >= self.gst

    def latest_delivery(self, issued_at: int) -> int:
        if self.kind == EVENTUALLY_SYNC:
            return min(issued_at + self.max_delay, max(issued_at, self.gst) + self.delta)
        return issued_at + self.max_delay


@dataclass(frozen=True)
class BroadcastInstance:
    sender: PartyId
    round: int
    message: Vertex
    issued_at: int


@dataclass(frozen=True)
class DeliveryEvent:
    recipient: PartyId
    instance: BroadcastInstance
    deliver_at: int


@dataclass(frozen=True)
class TimerEvent:
    party: PartyId
    timer_id: int
    round: int
    fire_at: int


@dataclass(frozen=True)
class CrashEvent:
    party: PartyId
    at: int


# -- scheduler policies -------------------------------------------------------

class SchedulerPolicy(Protocol):
    name: str

    def delay(self, net: "Network", inst: BroadcastInstance, recipient: PartyId) -> int:
        ...


@dataclass
class UniformDelay:
    """Independent uniform delay in [1, spread]; [1, delta] once synchronous."""
    spread: int = 40
    name: str = "uniform"

    def delay(self, net, inst, recipient):
        hi = net.mode.delta if net.mode.synchronous_at(net.now) else self.spread
        return net.rng.randint(1, max(1, hi))


@dataclass
class LeaderStarve:
    """Hold back predefined-leader vertices until after the round's timeouts.

    Only steady-state leader slots are targeted; the policy never needs the
    coin.  Once the network is synchronous it behaves like UniformDelay.
    """
    timeout: int = 50
    spread: int = 40
    name: str = "leader-starve"

    def delay(self, net, inst, recipient):
        if net.mode.synchronous_at(net.now):
            return net.rng.randint(1, net.mode.delta)
        leader = net.committee.steady_leader_of_round(inst.round)
        if leader == inst.sender and recipient != inst.sender:
            lo = self.timeout + self.spread
            return net.rng.randint(lo, lo + self.timeout)
        return net.rng.randint(1, self.spread)


@dataclass
class RoundSkew:
    """Everything addressed to one party arrives late (a slow but honest node)."""
    target: PartyId = 0
    lag: int = 60
    spread: int = 40
    name: str = "round-skew"

    def delay(self, net, inst, recipient):
        hi = net.mode.delta if net.mode.synchronous_at(net.now) else self.spread
        base = net.rng.randint(1, max(1, hi))
        if recipient == self.target and not net.mode.synchronous_at(net.now):
            base += self.lag
        return base


@dataclass
class FallbackPeek:
    """Tries to starve the fallback leader by reading the coin early.

    Exists to exercise the coin gate: the harness must reject it.
    """
    spread: int = 40
    name: str = "fallback-peek"

    def delay(self, net, inst, recipient):
        if inst.round % 4 == 1:
            wave = (inst.round + 3) // 4
            if net.coin_peek(wave) == inst.sender:
                return net.mode.max_delay
        return net.rng.randint(1, self.spread)


POLICIES = {
    "uniform": UniformDelay,
    "leader-starve": LeaderStarve,
    "round-skew": RoundSkew,
    "fallback-peek": FallbackPeek,
}


def make_policy(name: str, **params) -> SchedulerPolicy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown scheduler policy {name!r}; choose from {sorted(POLICIES)}") from None
    return cls(**params)


# -- the network ---------------------------------------------------------------

class Network:
    """Event queue plus reliable-broadcast bookkeeping for one simulation run."""

    def __init__(self, committee: Committee, mode: NetworkMode, policy: SchedulerPolicy,
                 seed: int, trace, coin=None, honest=None, extra_delay=None):
        self.committee = committee
        self.mode = mode
        self.policy = policy
        self.rng = random.Random(seed)
        self.trace = trace
        self.coin = coin
        self.honest = set(committee.party_ids if honest is None else honest)
        self.extra_delay = dict(extra_delay or {})
        self.now = 0
        self._queue: list = []
        self._seq = itertools.count()
        self.instances: dict[tuple[PartyId, int], BroadcastInstance] = {}
        self.delivered: set[tuple[PartyId, PartyId, int]] = set()
        self.crashed: set[PartyId] = set()
        self.handlers: dict[PartyId, Any] = {}

    # scheduling

    def _push(self, at: int, event) -> None:
        heapq.heappush(self._queue, (at, next(self._seq), event))

    def pending(self) -> int:
        return len(self._queue)

    def next_event(self):
        """Pop the next event, advancing the clock; ``None`` once quiescent."""
        if not self._queue:
            return None
        at, _, event = heapq.heappop(self._queue)
        self.now = at
        return event

    def set_timer(self, party: PartyId, timer_id: int, round_: int, duration: int) -> TimerEvent:
        ev = TimerEvent(party, timer_id, round_, self.now + duration)
        self._push(ev.fire_at, ev)
        return ev

    def schedule_crash(self, party: PartyId, at: int) -> None:
        self._push(at, CrashEvent(party, at))

    def coin_peek(self, wave: int):
        gate = self.coin.gate_open(wave)
        self.trace.emit(self.now, "coin_peek", round=4 * wave - 3, note={"wave": wave, "gate_open": gate})
        return self.coin.adversary_query(wave)

    # broadcast

    def r_bcast(self, sender: PartyId, v: Vertex, round_: int) -> None:
        key = (sender, round_)
        if key in self.instances:
            kept = self.instances[key]
            if sender in self.honest:
                raise ProtocolError(f"honest p{sender} broadcast twice in round {round_}")
            if kept.message.digest != v.digest:
                self.trace.emit(self.now, "equivocation", sender=sender, round=round_, digest=v.digest,
                                note={"kept": kept.message.digest.hex()})
            return
        inst = BroadcastInstance(sender, round_, v, self.now)
        self.instances[key] = inst
        self.trace.emit(self.now, "broadcast", sender=sender, round=round_, digest=v.digest,
                        note=vertex_note(v))
        if self.coin is not None:
            self.coin.note_vertex(round_, sender, sender in self.honest)
        # local delivery happens inside broadcast_vertex
        self.delivered.add((sender, sender, round_))
        times = {}
        for recipient in self.committee.party_ids:
            if recipient == sender:
                continue
            d = max(1, int(self.policy.delay(self, inst, recipient)))
            times[recipient] = self.now + d + self.extra_delay.get(sender, 0)
        if sender in self.honest:
            bound = self.mode.latest_delivery(self.now)
        else:
            # a faulty sender picks when the first copy lands; the echo phase
            # of reliable broadcast then bounds everybody else from there
            first = min(times.values(), default=self.now)
            bound = max(first, self.mode.latest_delivery(first))
        for recipient, at in times.items():
            at = min(at, bound)
            self._push(at, DeliveryEvent(recipient, inst, at))

    def deliver(self, event: DeliveryEvent) -> bool:
        inst = event.instance
        key = (event.recipient, inst.sender, inst.round)
        if event.recipient in self.crashed:
            self.trace.emit(self.now, "drop", sender=inst.sender, recipient=event.recipient,
                            round=inst.round, digest=inst.message.digest, note={"reason": "crashed"})
            return False
        if key in self.delivered:
            self.trace.emit(self.now, "drop", sender=inst.sender, recipient=event.recipient,
                            round=inst.round, digest=inst.message.digest, note={"reason": "duplicate"})
            log.debug("dropped duplicate delivery %s", key)
            return False
        self.delivered.add(key)
        self.trace.emit(self.now, "deliver", sender=inst.sender, recipient=event.recipient,
                        round=inst.round, digest=inst.message.digest)
        handler = self.handlers.get(event.recipient)
        if handler is not None:
            handler.on_r_deliver(inst.message, inst.round, inst.sender)
        return True


def vertex_note(v: Vertex) -> dict:
    """Vertex body as plain JSON so traces are self-contained."""
    return {
        "ts": v.ts,
        "block": [v.block.origin, v.block.seq, v.block.payload.hex()],
        "strong": [[r.round, r.source, r.digest.hex()] for r in sorted(v.strong_edges)],
        "weak": [[r.round, r.source, r.digest.hex()] for r in sorted(v.weak_edges)],
    }

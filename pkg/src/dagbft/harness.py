"""Scenario description and the simulation loop that turns one into a trace."""
from __future__ import annotations

import logging
import random
from dataclasses import asdict, dataclass, field
from typing import Optional

from .coin import Coin, FixedCoin
from .dag import DagCore
from .fallback import FallbackConsensus
from .gc import GcOrderer
from .model import Block, BlockQueue, Committee, LocalDag, Vertex
from .ordering import CommitState, VertexOrderer
from .psync import PsyncConsensus
from .trace import Trace
from .transport import (ASYNC, EVENTUALLY_SYNC, CrashEvent, DeliveryEvent, Network, NetworkMode,
                        TimerEvent, make_policy)

log = logging.getLogger(__name__)

PROTOCOLS = ("fallback", "psync")
FAULT_KINDS = ("crash", "delayed", "equivocate", "malformed")

DEFAULT_DELTA = 10


@dataclass(frozen=True)
class Fault:
    party: int
    kind: str
    at: int = 0      # crash time
    delay: int = 0   # extra delivery delay for "delayed"

    @classmethod
    def parse(cls, text: str) -> "Fault":
        """``2:crash@150``, ``1:delayed+80``, ``3:equivocate``, ``0:malformed``."""
        party, _, rest = text.partition(":")
        at = delay = 0
        if "@" in rest:
            rest, _, t = rest.partition("@")
            at = int(t)
        if "+" in rest:
            rest, _, d = rest.partition("+")
            delay = int(d)
        return cls(int(party), rest.strip(), at, delay)


@dataclass
class Scenario:
    protocol: str = "psync"
    n: int = 4
    f: Optional[int] = None
    mode: str = EVENTUALLY_SYNC
    gst: int = 0
    delta: int = DEFAULT_DELTA
    timeout: int = 5 * DEFAULT_DELTA
    seed: int = 0
    max_rounds: int = 40
    faults: list = field(default_factory=list)
    policy: str = "uniform"
    policy_params: dict = field(default_factory=dict)
    gc: bool = False
    tx_rate: int = 1
    max_delay: Optional[int] = None
    max_events: int = 5_000_000

    def __post_init__(self):
        self.faults = [Fault(**x) if isinstance(x, dict) else x for x in self.faults]
        if self.f is None:
            self.f = (self.n - 1) // 3
        if self.max_delay is None:
            # long enough that a starved leader really misses both timeouts of its slot
            self.max_delay = 4 * self.delta + 2 * self.timeout
        self.validate()

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        Committee(self.n, self.f)
        if self.mode not in (ASYNC, EVENTUALLY_SYNC):
            raise ValueError(f"unknown network mode {self.mode!r}")
        if len({x.party for x in self.faults}) != len(self.faults):
            raise ValueError("at most one fault per party")
        if len(self.faults) > self.f:
            raise ValueError(f"{len(self.faults)} faulty parties exceed f={self.f}")
        for x in self.faults:
            if not 0 <= x.party < self.n:
                raise ValueError(f"fault names unknown party {x.party}")
            if x.kind not in FAULT_KINDS:
                raise ValueError(f"unknown fault kind {x.kind!r}")
        if self.max_rounds < 1 or self.timeout < 1 or self.tx_rate < 0:
            raise ValueError("max_rounds, timeout must be positive and tx_rate non-negative")

    @property
    def committee(self) -> Committee:
        return Committee(self.n, self.f)

    @property
    def network(self) -> NetworkMode:
        return NetworkMode(self.mode, self.gst if self.mode == EVENTUALLY_SYNC else None,
                           self.delta, self.max_delay)

    def fault_of(self, party: int) -> Optional[Fault]:
        for x in self.faults:
            if x.party == party:
                return x
        return None

    @property
    def byzantine(self) -> frozenset:
        return frozenset(x.party for x in self.faults if x.kind != "crash")

    @property
    def correct(self) -> frozenset:
        """Parties that follow the protocol and never crash."""
        return frozenset(p for p in range(self.n) if self.fault_of(p) is None)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["faults"] = [asdict(x) for x in self.faults]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(**d)


def _sub_seed(seed: int, label: str) -> int:
    return random.Random(f"{seed}/{label}").getrandbits(63)


class Party:
    """One party's protocol stack."""

    def __init__(self, pid: int, world: "World"):
        s = world.scenario
        self.pid = pid
        self.dag = LocalDag(world.committee)
        self.state = CommitState()
        trace, net = world.trace, world.net

        def emit(kind, **kw):
            trace.emit(net.now, kind, recipient=pid, **kw)

        self.emit = emit
        if s.gc:
            self.orderer = GcOrderer(self.dag, self.state, s.delta, emit=emit)
        else:
            self.orderer = VertexOrderer(self.dag, self.state, emit=emit)
        if s.protocol == "fallback":
            self.consensus = FallbackConsensus(self.dag, world.coin, self.orderer, self.state, emit=emit)
        else:
            self.consensus = PsyncConsensus(self.dag, self.orderer, self.state, emit=emit)
        self.blocks = BlockQueue(pid)
        fault = s.fault_of(pid)
        outbox = net.r_bcast
        if fault is not None and fault.kind == "equivocate":
            outbox = self._equivocating(net)
        elif fault is not None and fault.kind == "malformed":
            outbox = self._malformed(net, world.committee.quorum - 1)
        self.core = DagCore(pid, self.dag, self.consensus, net, timeout=s.timeout,
                            max_rounds=s.max_rounds, blocks=self.blocks, emit=emit,
                            supply=self._supply(s.tx_rate), outbox=outbox)

    def _supply(self, rate: int):
        def supply(r: int) -> None:
            for i in range(rate):
                self.blocks.enqueue(f"p{self.pid}/r{r}/{i}".encode())
        return supply

    @staticmethod
    def _equivocating(net: Network):
        def outbox(sender, v: Vertex, r):
            net.r_bcast(sender, v, r)
            twin = Vertex(v.round, v.source, Block(v.block.origin, v.block.seq, v.block.payload + b"~"),
                          v.strong_edges, v.weak_edges, v.ts)
            net.r_bcast(sender, twin, r)
        return outbox

    @staticmethod
    def _malformed(net: Network, keep: int):
        def outbox(sender, v: Vertex, r):
            strong = frozenset(sorted(v.strong_edges)[:keep]) if r > 1 else v.strong_edges
            net.r_bcast(sender, Vertex(v.round, v.source, v.block, strong, v.weak_edges, v.ts), r)
        return outbox


class World:
    """Committee, network, coin and every party's stack for one scenario."""

    def __init__(self, scenario: Scenario, coin: Optional[Coin] = None):
        self.scenario = s = scenario
        self.committee = s.committee
        self.trace = Trace()
        self.coin = coin or Coin(_sub_seed(s.seed, "coin"), self.committee)
        honest = [p for p in range(s.n) if p not in s.byzantine]
        extra = {x.party: x.delay for x in s.faults if x.kind == "delayed"}
        policy = make_policy(s.policy, **s.policy_params)
        self.net = Network(self.committee, s.network, policy, _sub_seed(s.seed, "net"), self.trace,
                           coin=self.coin, honest=honest, extra_delay=extra)
        self.parties = [Party(p, self) for p in range(s.n)]
        for party in self.parties:
            self.net.handlers[party.pid] = party.core
        for x in s.faults:
            if x.kind == "crash":
                self.net.schedule_crash(x.party, x.at)
        self.events = 0

    def run(self) -> Trace:
        s = self.scenario
        self.trace.emit(0, "scenario", note=s.to_dict())
        for party in self.parties:
            party.core.start()
        net = self.net
        while True:
            ev = net.next_event()
            if ev is None:
                break
            self.events += 1
            if self.events > s.max_events:
                raise RuntimeError(f"scenario exceeded {s.max_events} events")
            if isinstance(ev, DeliveryEvent):
                net.deliver(ev)
            elif isinstance(ev, TimerEvent):
                self.parties[ev.party].core.on_timeout(ev.timer_id)
            elif isinstance(ev, CrashEvent):
                if ev.party not in net.crashed:
                    net.crashed.add(ev.party)
                    self.parties[ev.party].core.crashed = True
                    self.trace.emit(net.now, "crash", recipient=ev.party)
        for party in self.parties:
            self.trace.emit(net.now, "final", recipient=party.pid,
                            note={"round": party.core.round, "gc_round": party.dag.gc_round,
                                  "buffered": len(party.dag.buffer), "crashed": party.core.crashed})
        return self.trace


def simulate(scenario: Scenario, coin: Optional[Coin] = None) -> World:
    world = World(scenario, coin)
    world.run()
    return world


def fuzz_scenario(protocol: str, seed: int, rounds: int = 24) -> Scenario:
    """The fuzz-campaign scenario for one seed: async, random size, policy and crashes."""
    rng = random.Random(f"fuzz/{seed}")
    n = (4, 7, 10)[seed % 3]
    f = (n - 1) // 3
    policy = ("uniform", "leader-starve")[(seed // 3) % 2]
    k = rng.randint(0, f)
    victims = sorted(rng.sample(range(n), k))
    faults = [Fault(p, "crash", at=rng.randint(0, 60 * rounds)) for p in victims]
    timeout = 5 * DEFAULT_DELTA
    params = {"timeout": timeout} if policy == "leader-starve" else {}
    return Scenario(protocol=protocol, n=n, mode=ASYNC, seed=seed, max_rounds=rounds,
                    faults=faults, policy=policy, policy_params=params, timeout=timeout)


def fixed_coin(leaders: dict, scenario: Scenario) -> FixedCoin:
    return FixedCoin(leaders, scenario.committee, _sub_seed(scenario.seed, "coin"))

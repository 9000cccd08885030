"""Per-party DAG construction: admission, buffering, round advancement, timeouts.

A party advances out of round r once it holds 2f+1 round-r vertices *and*
the wave-position condition holds (or the round's timer already expired):

    r mod 4 == 1   the wave's first steady leader vertex is in the DAG
    r mod 4 == 3   the wave's second steady leader vertex is in the DAG
    r mod 4 == 2   2f+1 round-r steady voters have a strong path to the first leader
    r mod 4 == 0   same, for the second leader

A party that sees 2f+1 vertices of a round above its own jumps straight
there.  Conditions are re-evaluated after every admission and every
expiry, so a leader that was admitted out of the buffer counts too.
"""
from __future__ import annotations

import logging
from typing import Callable, Optional

from .gc import admission_gate
from .model import BlockQueue, LocalDag, PartyId, ProtocolError, Vertex, create_new_vertex, wave_of

log = logging.getLogger(__name__)


def _noop(*_a, **_k):
    pass


class DagCore:
    def __init__(self, party: PartyId, dag: LocalDag, consensus, net, *, timeout: int,
                 max_rounds: Optional[int] = None, blocks: Optional[BlockQueue] = None,
                 emit=_noop, supply: Optional[Callable[[int], None]] = None, outbox=None):
        self.party = party
        self.dag = dag
        self.committee = dag.committee
        self.consensus = consensus
        self.net = net
        self.timeout = timeout
        self.max_rounds = max_rounds
        self.blocks = blocks or BlockQueue(party)
        self.emit = emit
        self.supply = supply
        self.outbox = outbox or net.r_bcast
        self.round = 0
        self.wait = True
        self.timer_id = 0
        self.crashed = False

    # -- lifecycle ------------------------------------------------------

    def start(self) -> None:
        self._enter_round(1, "start")

    def _enter_round(self, r: int, via: str) -> None:
        if r <= self.round:
            raise ProtocolError(f"p{self.party} moving from round {self.round} to {r}")
        self.round = r
        self.timer_id += 1
        self.wait = True
        ev = self.net.set_timer(self.party, self.timer_id, r, self.timeout)
        self.emit("round_enter", round=r, note={"via": via})
        self.emit("timer_start", round=r, note={"expires": ev.fire_at})
        self.broadcast_vertex(r)

    def _below_horizon(self, r: int) -> bool:
        return self.max_rounds is None or r <= self.max_rounds

    # -- event handlers -------------------------------------------------

    def on_r_deliver(self, v: Vertex, r: int, p: PartyId) -> None:
        if self.crashed:
            return
        if v.source != p or v.round != r or len(v.strong_edges) < self.committee.quorum:
            self.emit("malformed", sender=p, round=r, digest=v.digest,
                      note={"strong": len(v.strong_edges), "source": v.source, "vround": v.round})
            return
        if not admission_gate(self.dag, v):
            self.emit("gate_reject", sender=p, round=r, digest=v.digest,
                      note={"gc_round": self.dag.gc_round})
            return
        if self.dag.contains(v):
            return
        if self.try_add_to_dag(v):
            self._drain_buffer()
        else:
            self.dag.buffer[(v.round, v.source)] = v
            self.emit("buffer", sender=p, round=r, digest=v.digest, note={"size": len(self.dag.buffer)})
        self._progress()

    def on_timeout(self, timer_id: int) -> None:
        if self.crashed or timer_id != self.timer_id:
            return
        self.emit("timer_expire", round=self.round)
        self.wait = False
        self.try_advance_round()
        self._progress()

    # -- admission and broadcast ---------------------------------------

    def try_add_to_dag(self, v: Vertex) -> bool:
        dag = self.dag
        if dag.missing_edges(v):
            return False
        dag.insert(v)
        self.emit("admit", sender=v.source, round=v.round, digest=v.digest)
        if (dag.size(v.round) >= self.committee.quorum and v.round > self.round
                and self._below_horizon(v.round)):
            self._enter_round(v.round, "jump")
        dag.buffer.pop((v.round, v.source), None)
        self.consensus.try_ordering(v)
        return True

    def _drain_buffer(self) -> None:
        progressed = True
        while progressed and self.dag.buffer:
            progressed = False
            for key in sorted(self.dag.buffer):
                u = self.dag.buffer.get(key)
                if u is not None and self.try_add_to_dag(u):
                    progressed = True

    def try_advance_round(self) -> None:
        if self.dag.size(self.round) >= self.committee.quorum and self._below_horizon(self.round + 1):
            self._enter_round(self.round + 1, "advance")

    def broadcast_vertex(self, r: int) -> None:
        if self.supply is not None:
            self.supply(r)
        v = create_new_vertex(self.dag, self.party, r, self.blocks.dequeue(r), self.net.now)
        if not self.try_add_to_dag(v):
            raise ProtocolError(f"p{self.party} could not admit its own round-{r} vertex")
        self.outbox(self.party, v, r)

    # -- advancement gate -----------------------------------------------

    def advancement_condition(self) -> bool:
        """Wave-position gate for leaving the current round (timer aside)."""
        if not self.wait:
            return True
        r = self.round
        dag = self.dag
        w = wave_of(r)
        pos = r % 4
        if pos == 1:
            return dag.first_steady_leader(w) is not None
        if pos == 3:
            return dag.second_steady_leader(w) is not None
        leader = dag.first_steady_leader(w) if pos == 2 else dag.second_steady_leader(w)
        if leader is None:
            return False
        voters = self.consensus.steady_voters_of(w)
        votes = sum(1 for u in dag.vertices(r) if u.source in voters and dag.strong_path(u, leader))
        return votes >= self.committee.quorum

    def _progress(self) -> None:
        while not self.crashed:
            before = self.round
            if self.advancement_condition():
                self.try_advance_round()
            if self.round == before:
                return

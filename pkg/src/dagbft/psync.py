"""Eventually synchronous consensus: steady-state leaders only.

A leader is committed directly with f+1 strong-path votes; older leaders
are ordered during the backward walk iff the current anchor has a strong
path to them.  There is no view change: a missed leader is simply skipped.
"""
from __future__ import annotations

from typing import Optional

from .model import LocalDag, Vertex, wave_of
from .ordering import CommitState, VertexOrderer, _noop


class PsyncConsensus:
    variant = "psync"

    def __init__(self, dag: LocalDag, orderer: Optional[VertexOrderer] = None,
                 state: Optional[CommitState] = None, emit=_noop):
        self.dag = dag
        self.committee = dag.committee
        self.state = state or (orderer.state if orderer else CommitState())
        self.orderer = orderer or VertexOrderer(dag, self.state, emit)
        self.emit = emit
        self._everyone = frozenset(self.committee.party_ids)

    def steady_voters_of(self, wave: int) -> frozenset:
        return self._everyone

    def try_ordering(self, v: Vertex) -> None:
        if v.round < 1:
            return
        w = wave_of(v.round)
        if v.round % 4 == 1:
            self.try_commit(v, self.dag.second_steady_leader(w - 1), "steady2")
        elif v.round % 4 == 3:
            self.try_commit(v, self.dag.first_steady_leader(w), "steady1")

    def try_commit(self, voter: Vertex, leader: Optional[Vertex], kind: str) -> bool:
        if leader is None:
            return False
        dag = self.dag
        n_votes = 0
        for ref in voter.strong_edges:
            u = dag.resolve(ref)
            if u is not None and dag.strong_path(u, leader):
                n_votes += 1
        if n_votes >= self.committee.validity:
            self.commit_leader(leader, kind, n_votes)
            return True
        return False

    def commit_leader(self, v: Vertex, kind: str = "steady1", n_votes: int = 0) -> None:
        state = self.state
        if v.round <= state.committed_round:
            return
        dag = self.dag
        self.emit("direct_commit", sender=v.source, round=v.round, digest=v.digest,
                  note={"wave": wave_of(v.round), "kind": kind, "votes": n_votes})
        state.push(v, kind, direct=True)
        anchor = v
        r = v.round - 2
        while r > state.committed_round:
            w = wave_of(r)
            if r % 4 == 1:
                leader, s_kind = dag.first_steady_leader(w), "steady1"
            else:
                leader, s_kind = dag.second_steady_leader(w), "steady2"
            if leader is not None and dag.strong_path(anchor, leader):
                state.push(leader, s_kind, direct=False)
                self.emit("indirect_commit", sender=leader.source, round=r, digest=leader.digest,
                          note={"wave": w, "kind": s_kind})
                anchor = leader
            else:
                self.emit("skip", round=r, note={"wave": w})
            r -= 2
        state.committed_round = v.round
        self.orderer.order_vertices()

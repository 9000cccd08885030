"""Consensus with steady-state and fallback leaders over the round-based DAG.

Each wave has two predefined steady-state leaders (rounds 4w-3 and 4w-1)
and one fallback leader (round 4w-3, elected by the coin).  A party's vote
type in wave w is read off its first vertex of w: steady if that vertex's
strong edges commit wave w-1's second steady leader or its fallback
leader, fallback otherwise.  Leaders are committed directly with 2f+1
same-type votes, and indirectly during the backward walk with f+1.
"""
from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Optional

from .model import LocalDag, Vertex, wave_of
from .ordering import CommitState, VertexOrderer, _noop


class FallbackConsensus:
    variant = "fallback"

    def __init__(self, dag: LocalDag, coin, orderer: Optional[VertexOrderer] = None,
                 state: Optional[CommitState] = None, emit=_noop):
        self.dag = dag
        self.committee = dag.committee
        self.coin = coin
        self.state = state or (orderer.state if orderer else CommitState())
        self.orderer = orderer or VertexOrderer(dag, self.state, emit)
        self.emit = emit
        self.steady_voters: dict[int, set] = defaultdict(set)
        self.fallback_voters: dict[int, set] = defaultdict(set)
        self.steady_voters[1] = set(self.committee.party_ids)

    def steady_voters_of(self, wave: int) -> set:
        return self.steady_voters.get(wave, set())

    def vote_type(self, party, wave: int) -> Optional[str]:
        if party in self.steady_voters.get(wave, ()):
            return "steady"
        if party in self.fallback_voters.get(wave, ()):
            return "fallback"
        return None

    def _votes(self, v: Vertex) -> list[Vertex]:
        out = []
        for ref in sorted(v.strong_edges):
            u = self.dag.resolve(ref)
            if u is not None:
                out.append(u)
        return out

    # -- triggers -------------------------------------------------------

    def try_ordering(self, v: Vertex) -> None:
        if v.round < 1:
            return
        w = wave_of(v.round)
        votes = self._votes(v)
        if v.round % 4 == 1:
            self.determine_party_vote_type(v.source, votes, w)
        elif v.round % 4 == 3:
            self.try_steady_commit(votes, self.dag.first_steady_leader(w), w, "steady1")

    def determine_party_vote_type(self, party, votes: Iterable[Vertex], wave: int) -> str:
        votes = list(votes)
        if wave <= 1:
            return "steady"
        prev = wave - 1
        leader_s = self.dag.second_steady_leader(prev)
        steady = self.try_steady_commit(votes, leader_s, prev, "steady2")
        if not steady:
            leader_f = self.dag.fallback_leader(prev, self.coin)
            steady = self.try_fallback_commit(votes, leader_f, prev)
        kind = "steady" if steady else "fallback"
        (self.steady_voters if steady else self.fallback_voters)[wave].add(party)
        self.emit("vote_type", sender=party, round=4 * wave - 3, note={"wave": wave, "type": kind})
        return kind

    def _count(self, votes, leader: Vertex, voters: set) -> int:
        return sum(1 for u in votes if u.source in voters and self.dag.strong_path(u, leader))

    def try_steady_commit(self, votes, leader: Optional[Vertex], wave: int, kind: str = "steady1") -> bool:
        if leader is None:
            return False
        n_votes = self._count(votes, leader, self.steady_voters.get(wave, set()))
        if n_votes >= self.committee.quorum:
            self.commit_leader(leader, kind, n_votes)
            return True
        return False

    def try_fallback_commit(self, votes, leader: Optional[Vertex], wave: int) -> bool:
        if leader is None:
            return False
        n_votes = self._count(votes, leader, self.fallback_voters.get(wave, set()))
        if n_votes >= self.committee.quorum:
            self.commit_leader(leader, "fallback", n_votes)
            return True
        return False

    # -- commit ---------------------------------------------------------

    def commit_leader(self, v: Vertex, kind: str, n_votes: int) -> None:
        state = self.state
        if v.round <= state.committed_round:
            # already decided by an earlier direct or indirect commit
            return
        f = self.committee.f
        dag = self.dag
        self.emit("direct_commit", sender=v.source, round=v.round, digest=v.digest,
                  note={"wave": wave_of(v.round), "kind": kind, "votes": n_votes})
        state.push(v, kind, direct=True)
        anchor = v
        r = v.round - 2
        while r > state.committed_round:
            w = wave_of(r)
            ss_potential = [u for u in dag.vertices(r + 1) if dag.strong_path(anchor, u)]
            if r % 4 == 1:
                leader_s = dag.first_steady_leader(w)
                s_kind = "steady1"
                leader_f = None
                fb_votes = []
                if anchor.round != r + 2:
                    leader_f = dag.fallback_leader(w, self.coin)
                    if leader_f is not None:
                        fb_potential = [u for u in dag.vertices(r + 3) if dag.strong_path(anchor, u)]
                        fb_votes = [u for u in fb_potential if u.source in self.fallback_voters.get(w, ())
                                    and dag.strong_path(u, leader_f)]
            else:
                leader_s = dag.second_steady_leader(w)
                s_kind = "steady2"
                leader_f = None
                fb_votes = []
            ss_votes = []
            if leader_s is not None:
                ss_votes = [u for u in ss_potential if u.source in self.steady_voters.get(w, ())
                            and dag.strong_path(u, leader_s)]
            tally = {"wave": w, "ss": len(ss_votes), "fb": len(fb_votes)}
            if len(ss_votes) >= f + 1 and len(fb_votes) < f + 1:
                state.push(leader_s, s_kind, direct=False)
                self.emit("indirect_commit", sender=leader_s.source, round=r, digest=leader_s.digest,
                          note={**tally, "kind": s_kind})
                anchor = leader_s
            elif len(ss_votes) < f + 1 and len(fb_votes) >= f + 1:
                state.push(leader_f, "fallback", direct=False)
                self.emit("indirect_commit", sender=leader_f.source, round=r, digest=leader_f.digest,
                          note={**tally, "kind": "fallback"})
                anchor = leader_f
            else:
                self.emit("skip", round=r, note=tally)
            r -= 2
        state.committed_round = v.round  # the direct commit, not the last anchor
        self.orderer.order_vertices()

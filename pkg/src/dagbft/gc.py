"""Timestamp-driven garbage collection layered on vertex ordering.

Each ordered leader gets a timestamp (median over its round-1 parents);
every older round it walks gets one too (median over the round's vertices
in the leader's history).  A round whose timestamp trails the leader's by
more than three network bounds is cleared, and nothing is admitted at or
below the collected round afterwards.
"""
from __future__ import annotations

from typing import Sequence

from .model import LocalDag, Vertex
from .ordering import VertexOrderer


def median(ts_values: Sequence[int]) -> int:
    """Lower median: element ceil(k/2) (1-indexed) of the sorted values."""
    if not ts_values:
        raise ValueError("median of an empty set of timestamps")
    ordered = sorted(ts_values)
    return ordered[(len(ordered) + 1) // 2 - 1]


def admission_gate(dag: LocalDag, v: Vertex) -> bool:
    """False iff ``v`` belongs to an already collected round."""
    return v.round > dag.gc_round


class GcOrderer(VertexOrderer):
    def __init__(self, dag, state, delta: int, emit=None, on_deliver=None):
        kwargs = {"on_deliver": on_deliver}
        if emit is not None:
            kwargs["emit"] = emit
        super().__init__(dag, state, **kwargs)
        self.delta = delta

    @property
    def gc_round(self) -> int:
        return self.dag.gc_round

    def order_vertices(self) -> None:
        dag = self.dag
        delivered = self.state.delivered
        while self.state.leader_stack:
            entry = self.state.leader_stack.pop()
            v = entry.vertex
            self._leader_popped(entry)
            bits = dag.reach_bits(v)
            to_deliver = [] if v.digest in delivered else [v]
            leader_ts = None
            if v.round > 1:
                parents = [u for u in dag.vertices(v.round - 1) if bits & dag.bit(u)]
                if parents:
                    leader_ts = median([u.ts for u in parents])
                to_deliver.extend(u for u in parents if u.digest not in delivered)
            r = dag.gc_round + 1
            while r < v.round - 1:
                candidates = [u for u in dag.vertices(r) if bits & dag.bit(u)]
                to_deliver.extend(u for u in candidates if u.digest not in delivered)
                if candidates and leader_ts is not None:
                    round_ts = median([u.ts for u in candidates])
                    if leader_ts - round_ts > 3 * self.delta:
                        # bodies of r's history are already queued for delivery
                        dropped = dag.clear_through(r)
                        self.emit("gc", sender=v.source, round=r, digest=v.digest,
                                  note={"leader_round": v.round, "leader_ts": leader_ts,
                                        "round_ts": round_ts, "cleared": dropped})
                r += 1
            self._deliver(to_deliver)

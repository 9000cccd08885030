"""Commit bookkeeping shared by both consensus variants, and causal-history delivery."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .model import LocalDag, Vertex, VertexRef, canonical_key


@dataclass
class StackedLeader:
    vertex: Vertex
    kind: str  # steady1 | steady2 | fallback
    direct: bool


@dataclass
class CommitState:
    committed_round: int = 0
    leader_stack: list = field(default_factory=list)
    delivered: set = field(default_factory=set)
    ordered_log: list = field(default_factory=list)
    leader_sequence: list = field(default_factory=list)

    def push(self, vertex: Vertex, kind: str, direct: bool) -> None:
        self.leader_stack.append(StackedLeader(vertex, kind, direct))


# emit(kind, **fields) -> None ; bound to the owning party by the caller
Emit = Callable[..., None]


def _noop(*_a, **_k):
    pass


class VertexOrderer:
    """Pops committed leaders and a_delivers their undelivered causal history."""

    def __init__(self, dag: LocalDag, state: CommitState, emit: Emit = _noop,
                 on_deliver: Optional[Callable[[Vertex], None]] = None):
        self.dag = dag
        self.state = state
        self.emit = emit
        self.on_deliver = on_deliver

    def order_vertices(self) -> None:
        while self.state.leader_stack:
            entry = self.state.leader_stack.pop()
            self._leader_popped(entry)
            to_deliver = [u for u in self.dag.history(entry.vertex)
                          if u.digest not in self.state.delivered]
            self._deliver(to_deliver)

    def _leader_popped(self, entry: StackedLeader) -> None:
        v = entry.vertex
        self.state.leader_sequence.append((v.round, v.source, entry.kind))
        self.emit("leader_ordered", sender=v.source, round=v.round, digest=v.digest,
                  note={"kind": entry.kind, "direct": entry.direct})

    def _deliver(self, vertices) -> None:
        for u in sorted(vertices, key=canonical_key):
            if u.digest in self.state.delivered:
                continue
            self.state.delivered.add(u.digest)
            self.state.ordered_log.append(u.ref)
            self.emit("a_deliver", sender=u.source, round=u.round, digest=u.digest,
                      note={"seq": u.block.seq})
            if self.on_deliver is not None:
                self.on_deliver(u)

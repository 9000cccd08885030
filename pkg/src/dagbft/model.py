"""DAG domain types and the graph utilities every protocol layer shares.

A vertex is identified by ``(round, source, digest)``.  Reachability is
answered from per-vertex bitsets that are computed once, at insertion time,
because a vertex is only ever inserted after its whole causal history.
"""
from __future__ import annotations

import hashlib
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Optional

PartyId = int

DIGEST_SIZE = 16


class ProtocolError(RuntimeError):
    """An honest party violated a protocol invariant (a bug, not an attack)."""


def wave_of(round_: int) -> int:
    """Wave number of a round: rounds 4w-3 .. 4w belong to wave w."""
    return (round_ + 3) // 4


def first_round_of(wave: int) -> int:
    return 4 * wave - 3


@dataclass(frozen=True)
class Committee:
    n: int
    f: int

    def __post_init__(self):
        if self.f < 0 or self.n != 3 * self.f + 1:
            raise ValueError(f"committee must satisfy n = 3f + 1 (got n={self.n}, f={self.f})")

    @classmethod
    def of_size(cls, n: int) -> "Committee":
        if (n - 1) % 3:
            raise ValueError(f"n={n} is not of the form 3f + 1")
        return cls(n, (n - 1) // 3)

    @property
    def quorum(self) -> int:
        return 2 * self.f + 1

    @property
    def validity(self) -> int:
        return self.f + 1

    @property
    def party_ids(self) -> range:
        return range(self.n)

    def first_leader(self, wave: int) -> PartyId:
        return (2 * (wave - 1)) % self.n

    def second_leader(self, wave: int) -> PartyId:
        return (2 * (wave - 1) + 1) % self.n

    def steady_leader_of_round(self, round_: int) -> Optional[PartyId]:
        """The predefined leader whose vertex sits in ``round_`` (odd rounds only)."""
        w = wave_of(round_)
        if round_ % 4 == 1:
            return self.first_leader(w)
        if round_ % 4 == 3:
            return self.second_leader(w)
        return None


@dataclass(frozen=True)
class Block:
    origin: PartyId
    seq: int
    payload: bytes = b""

    @classmethod
    def empty(cls, origin: PartyId, round_: int) -> "Block":
        # negative seqs never collide with a_bcast sequence numbers
        return cls(origin, -round_, b"")


class VertexRef(NamedTuple):
    round: int
    source: PartyId
    digest: bytes

    def short(self) -> str:
        return f"r{self.round}p{self.source}:{self.digest.hex()[:8]}"


def _encode_refs(refs: Iterable[VertexRef]) -> bytes:
    refs = sorted(refs)
    out = [struct.pack("<q", len(refs))]
    for ref in refs:
        out.append(struct.pack("<qqq", ref.round, ref.source, len(ref.digest)))
        out.append(ref.digest)
    return b"".join(out)


def encode_vertex(round_: int, source: PartyId, block: Block, strong: Iterable[VertexRef],
                  weak: Iterable[VertexRef], ts: int) -> bytes:
    """Canonical byte encoding: fixed field order, length-prefixed, little-endian."""
    return b"".join([
        struct.pack("<qqqqq", round_, source, block.origin, block.seq, len(block.payload)),
        block.payload,
        _encode_refs(strong),
        _encode_refs(weak),
        struct.pack("<q", ts),
    ])


@dataclass(frozen=True, eq=False)
class Vertex:
    round: int
    source: PartyId
    block: Block
    strong_edges: frozenset
    weak_edges: frozenset
    ts: int
    digest: bytes = field(init=False, repr=False)

    def __post_init__(self):
        raw = encode_vertex(self.round, self.source, self.block, self.strong_edges,
                            self.weak_edges, self.ts)
        object.__setattr__(self, "digest", hashlib.blake2b(raw, digest_size=DIGEST_SIZE).digest())

    @property
    def ref(self) -> VertexRef:
        return VertexRef(self.round, self.source, self.digest)

    @property
    def edges(self) -> frozenset:
        return self.strong_edges | self.weak_edges

    def __eq__(self, other):
        return isinstance(other, Vertex) and self.digest == other.digest

    def __hash__(self):
        return hash(self.digest)

    def __repr__(self):
        return (f"Vertex(r{self.round} p{self.source} {self.digest.hex()[:8]} "
                f"strong={len(self.strong_edges)} weak={len(self.weak_edges)} ts={self.ts})")


def genesis(committee: Committee) -> list[Vertex]:
    """The hard-coded round-0 vertices, from parties 0..2f."""
    return [Vertex(0, p, Block(p, 0), frozenset(), frozenset(), 0)
            for p in range(committee.quorum)]


def canonical_key(v) -> tuple:
    """Deterministic delivery order: round, then source, then digest."""
    return (v.round, v.source, v.digest)


class BlockQueue:
    """blocksToPropose: FIFO of blocks waiting to ride in the party's next vertex."""

    def __init__(self, origin: PartyId):
        self.origin = origin
        self._next_seq = 0
        self._queue: deque[Block] = deque()

    def enqueue(self, payload: bytes) -> Block:
        block = Block(self.origin, self._next_seq, payload)
        self._next_seq += 1
        self._queue.append(block)
        return block

    def dequeue(self, round_: int) -> Block:
        if self._queue:
            return self._queue.popleft()
        return Block.empty(self.origin, round_)

    def __len__(self):
        return len(self._queue)


class LocalDag:
    """One party's view of the DAG.

    ``rounds[r]`` maps source -> vertex.  Rounds at or below ``gc_round`` have
    been garbage collected: their bodies are gone, and edges pointing into
    them count as satisfied when checking admissibility.
    """

    def __init__(self, committee: Committee):
        self.committee = committee
        self.rounds: dict[int, dict[PartyId, Vertex]] = {0: {}}
        self.buffer: dict[tuple[int, PartyId], Vertex] = {}
        self.gc_round = 0
        self._reach: dict[bytes, int] = {}
        self._strong_reach: dict[bytes, int] = {}
        for g in genesis(committee):
            self.rounds[0][g.source] = g
            self._reach[g.digest] = 0
            self._strong_reach[g.digest] = 0

    # -- lookup ---------------------------------------------------------

    def bit(self, v) -> int:
        return 1 << (v.round * self.committee.n + v.source)

    def get_vertex(self, source: PartyId, round_: int) -> Optional[Vertex]:
        return self.rounds.get(round_, {}).get(source)

    def resolve(self, ref: VertexRef) -> Optional[Vertex]:
        v = self.get_vertex(ref.source, ref.round)
        if v is not None and v.digest == ref.digest:
            return v
        return None

    def contains(self, v: Vertex) -> bool:
        present = self.get_vertex(v.source, v.round)
        return present is not None and present.digest == v.digest

    def vertices(self, round_: int) -> list[Vertex]:
        return [self.rounds[round_][s] for s in sorted(self.rounds.get(round_, {}))]

    def size(self, round_: int) -> int:
        return len(self.rounds.get(round_, ()))

    def max_round(self) -> int:
        return max((r for r, vs in self.rounds.items() if vs), default=0)

    def all_vertices(self) -> Iterator[Vertex]:
        for r in sorted(self.rounds):
            if r >= 1:
                yield from self.vertices(r)

    def live_rounds(self) -> int:
        """Rounds currently held in memory above the garbage-collection line."""
        return max(0, self.max_round() - self.gc_round)

    # -- insertion ------------------------------------------------------

    def edge_present(self, ref: VertexRef) -> bool:
        if ref.round == 0:
            return self.resolve(ref) is not None
        if ref.round <= self.gc_round:
            return True
        return self.resolve(ref) is not None

    def missing_edges(self, v: Vertex) -> bool:
        return not all(self.edge_present(ref) for ref in v.edges)

    def _reach_of(self, refs: Iterable[VertexRef], strong_only: bool) -> int:
        table = self._strong_reach if strong_only else self._reach
        acc = 0
        for ref in refs:
            if ref.round == 0 or ref.round <= self.gc_round:
                continue
            acc |= table[ref.digest]
        return acc

    def insert(self, v: Vertex) -> None:
        """Add ``v``; its edge targets must already be present."""
        slot = self.rounds.setdefault(v.round, {})
        existing = slot.get(v.source)
        if existing is not None:
            if existing.digest != v.digest:
                raise ProtocolError(f"two vertices from p{v.source} in round {v.round}")
            return
        if self.missing_edges(v):
            raise ProtocolError(f"{v!r} inserted before its causal history")
        slot[v.source] = v
        me = self.bit(v)
        self._reach[v.digest] = me | self._reach_of(v.edges, strong_only=False)
        self._strong_reach[v.digest] = me | self._reach_of(v.strong_edges, strong_only=True)

    def clear_through(self, round_: int) -> int:
        """Garbage collect every round <= ``round_``; returns vertices dropped."""
        dropped = 0
        for r in [r for r in self.rounds if 1 <= r <= round_]:
            for v in self.rounds.pop(r).values():
                self._reach.pop(v.digest, None)
                self._strong_reach.pop(v.digest, None)
                dropped += 1
        self.gc_round = max(self.gc_round, round_)
        for key in [k for k in self.buffer if k[0] <= self.gc_round]:
            del self.buffer[key]
        return dropped

    # -- reachability ---------------------------------------------------

    def path(self, v: Vertex, u: Vertex) -> bool:
        """True iff a sequence of strong or weak edges leads from v to u."""
        if not (self.contains(v) and self.contains(u)):
            return False
        if v.digest == u.digest:
            return True
        return bool(self._reach[v.digest] & self.bit(u)) and u.round >= 1

    def strong_path(self, v: Vertex, u: Vertex) -> bool:
        """Like :meth:`path` but only strong edges may be followed."""
        if not (self.contains(v) and self.contains(u)):
            return False
        if v.digest == u.digest:
            return True
        return bool(self._strong_reach[v.digest] & self.bit(u)) and u.round >= 1

    def reach_bits(self, v: Vertex) -> int:
        return self._reach[v.digest]

    def history(self, v: Vertex) -> list[Vertex]:
        """Live causal history of ``v`` (itself included) in canonical order."""
        bits = self._reach[v.digest]
        out = []
        for r in range(self.gc_round + 1, v.round + 1):
            for u in self.vertices(r):
                if bits & self.bit(u):
                    out.append(u)
        return out

    # -- leader lookup --------------------------------------------------

    def first_steady_leader(self, wave: int) -> Optional[Vertex]:
        if wave < 1:
            return None
        return self.get_vertex(self.committee.first_leader(wave), 4 * wave - 3)

    def second_steady_leader(self, wave: int) -> Optional[Vertex]:
        if wave < 1:
            return None
        return self.get_vertex(self.committee.second_leader(wave), 4 * wave - 1)

    def fallback_leader(self, wave: int, coin) -> Optional[Vertex]:
        if wave < 1:
            return None
        return self.get_vertex(coin.choose_leader(wave), 4 * wave - 3)


def weak_edges_for(dag: LocalDag, strong: Iterable[VertexRef], round_: int) -> frozenset:
    """Edges to every vertex in rounds round-2 .. 1 not yet reachable.

    Walks rounds downward; each added edge extends reachability for the
    rounds below it, exactly as if the new vertex already carried it.
    """
    covered = dag._reach_of(strong, strong_only=False)
    weak = []
    for r in range(round_ - 2, max(dag.gc_round, 0), -1):
        for u in dag.vertices(r):
            if not covered & dag.bit(u):
                weak.append(u.ref)
                covered |= dag.reach_bits(u)
    return frozenset(weak)


def create_new_vertex(dag: LocalDag, source: PartyId, round_: int, block: Block, ts: int) -> Vertex:
    """Build this party's vertex for ``round_`` on top of its current DAG."""
    parents = dag.vertices(round_ - 1)
    if round_ - 1 > dag.gc_round and len(parents) < dag.committee.quorum:
        raise ProtocolError(f"p{source} cannot create round {round_}: only {len(parents)} parents")
    strong = frozenset(u.ref for u in parents)
    weak = weak_edges_for(dag, strong, round_)
    return Vertex(round_, source, block, strong, weak, ts)

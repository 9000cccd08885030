"""Global perfect coin, simulated by a keyed PRF over the wave number.

Parties may evaluate the coin freely; the adversarial scheduler may only
peek once f+1 honest parties have produced their vertex in the wave's last
round, mirroring the threshold-reveal of a real coin.
"""
from __future__ import annotations

import hashlib
import struct
from collections import defaultdict
from typing import Mapping

from .model import Committee, PartyId


class CoinGateError(RuntimeError):
    """The scheduler asked for a leader before the coin could be revealed."""


class Coin:
    def __init__(self, seed: int, committee: Committee):
        self.seed = seed
        self.committee = committee
        self._key = struct.pack("<Q", seed & 0xFFFF_FFFF_FFFF_FFFF)
        self._honest_last_round: dict[int, set[PartyId]] = defaultdict(set)

    def choose_leader(self, wave: int) -> PartyId:
        h = hashlib.blake2b(struct.pack("<q", wave), key=self._key, digest_size=8).digest()
        return int.from_bytes(h, "little") % self.committee.n

    def note_vertex(self, round_: int, source: PartyId, honest: bool) -> None:
        if honest and round_ % 4 == 0 and round_ > 0:
            self._honest_last_round[round_ // 4].add(source)

    def gate_open(self, wave: int) -> bool:
        return len(self._honest_last_round.get(wave, ())) >= self.committee.f + 1

    def adversary_query(self, wave: int) -> PartyId:
        if not self.gate_open(wave):
            raise CoinGateError(f"coin for wave {wave} queried before f+1 honest round-{4 * wave} vertices")
        return self.choose_leader(wave)


class FixedCoin(Coin):
    """Scripted leaders for figure replays; unknown waves fall back to the PRF."""

    def __init__(self, leaders: Mapping[int, PartyId], committee: Committee, seed: int = 0):
        super().__init__(seed, committee)
        self.leaders = dict(leaders)

    def choose_leader(self, wave: int) -> PartyId:
        if wave in self.leaders:
            return self.leaders[wave]
        return super().choose_leader(wave)

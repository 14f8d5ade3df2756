"""Blocks and the binary Merkle commitment over their transaction hashes."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .tx import ZERO32, Transaction, decode, sha256

_HEADER = struct.Struct("<Q32sI32s")


def merkle_root(hashes: Sequence[bytes]) -> bytes:
    """Pairwise SHA-256 tree; an odd node is paired with itself."""
    if not hashes:
        raise ValueError("merkle_root of an empty list")
    level = list(hashes)
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha256(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def block_merkle_root(txs: Sequence[Transaction]) -> bytes:
    # empty blocks commit to the all-zeros root
    if not txs:
        return ZERO32
    return merkle_root([tx.hash for tx in txs])


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    proposer: int
    merkle_root: bytes
    txs: tuple[Transaction, ...]

    @classmethod
    def build(cls, height: int, prev_hash: bytes, proposer: int, txs: Sequence[Transaction]) -> "Block":
        txs = tuple(txs)
        return cls(height, prev_hash, proposer, block_merkle_root(txs), txs)

    @cached_property
    def hash(self) -> bytes:
        """Header hash: height u64 | prev_hash | proposer u32 | merkle_root."""
        return sha256(_HEADER.pack(self.height, self.prev_hash, self.proposer, self.merkle_root))

    def is_consistent(self) -> bool:
        return self.merkle_root == block_merkle_root(self.txs)

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "hash": self.hash.hex(),
            "prev_hash": self.prev_hash.hex(),
            "proposer": self.proposer,
            "merkle_root": self.merkle_root.hex(),
            "txs": [tx.encoded.hex() for tx in self.txs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Block":
        return cls(
            int(obj["height"]),
            bytes.fromhex(obj["prev_hash"]),
            int(obj["proposer"]),
            bytes.fromhex(obj["merkle_root"]),
            tuple(decode(bytes.fromhex(h)) for h in obj["txs"]),
        )

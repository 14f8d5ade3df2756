"""Validators, proposer rotation and quorum voting.

This is the lockstep form of the protocol: every message is delivered
instantly, which is what unit tests and the single-process network want.
``simulation`` runs the same validators over a lossy, delayed network.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .block import Block
from .errors import NotProposer
from .ledger import Genesis
from .node import Application, Response
from .tx import Transaction


def quorum(n: int) -> int:
    """Smallest vote count strictly greater than two thirds of n."""
    return 2 * n // 3 + 1


def proposer_for(height: int, round: int, n: int) -> int:
    return (height + round) % n


class Validator:
    def __init__(self, index: int, genesis: Genesis, validator_count: int):
        self.index = index
        self.genesis = genesis
        self.n = validator_count
        self.app = Application(genesis)

    @property
    def height(self) -> int:
        return self.app.height

    def propose_block(self, height: int, round: int = 0, max_txs: int | None = None) -> Block:
        expected = proposer_for(height, round, self.n)
        if expected != self.index:
            raise NotProposer(f"validator {self.index} is not proposer for height {height} round {round} "
                              f"(validator {expected} is)")
        if height != self.app.height + 1:
            raise ValueError(f"validator {self.index} is at height {self.app.height}, cannot propose {height}")
        txs = self.app.prepare_proposal(max_txs)
        return Block.build(height, self.app.last_block.hash, self.index, txs)

    def check_block(self, block: Block, round: int = 0) -> str | None:
        if block.proposer != proposer_for(block.height, round, self.n):
            return f"block proposer {block.proposer} is not the proposer for round {round}"
        return self.app.validate_block(block)

    def commit_block(self, block: Block) -> bytes:
        root, _ = self.app.finalize_block(block)
        return root

    def restart(self, committed: Sequence[Block] | None = None) -> None:
        """Crash recovery: rebuild from the durable block log, losing anything uncommitted."""
        log = list(self.app.blocks if committed is None else committed)
        self.app = Application.from_blocks(self.genesis, log[1:])

    def sync_from(self, blocks: Sequence[Block]) -> list[Block]:
        applied = []
        for block in blocks:
            if block.height <= self.height:
                continue
            reason = self.app.validate_block(block)
            if reason is not None:
                raise ValueError(f"cannot sync block {block.height}: {reason}")
            self.commit_block(block)
            applied.append(block)
        return applied


@dataclass
class CommitResult:
    committed: bool
    block: Block
    prevotes: list[int] = field(default_factory=list)
    precommits: list[int] = field(default_factory=list)
    nil_votes: dict[int, str] = field(default_factory=dict)
    state_roots: dict[int, bytes] = field(default_factory=dict)


class Network:
    """Validators sharing a perfect, instantaneous network; some may be crashed."""

    def __init__(self, genesis: Genesis, validator_count: int | None = None,
                 max_block_txs: int | None = None):
        n = validator_count if validator_count is not None else max(1, len(genesis.validators))
        if genesis.validators and len(genesis.validators) != n:
            raise ValueError("validator_count disagrees with the genesis validator list")
        self.genesis = genesis
        self.validators = [Validator(i, genesis, n) for i in range(n)]
        self.crashed: set[int] = set()
        self.max_block_txs = max_block_txs

    @property
    def n(self) -> int:
        return len(self.validators)

    def live(self) -> list[Validator]:
        return [v for v in self.validators if v.index not in self.crashed]

    @property
    def height(self) -> int:
        return max(v.height for v in self.live())

    def submit(self, tx: Transaction) -> list[Response]:
        return [v.app.check_tx(tx.encoded) for v in self.live()]

    def propose_block(self, height: int | None = None, round: int = 0) -> Block:
        height = self.height + 1 if height is None else height
        proposer = self.validators[proposer_for(height, round, self.n)]
        if proposer.index in self.crashed:
            raise NotProposer(f"proposer {proposer.index} is crashed")
        return proposer.propose_block(height, round, self.max_block_txs)

    def vote_and_commit(self, block: Block, round: int = 0) -> CommitResult:
        result = CommitResult(False, block)
        q = quorum(self.n)
        for v in self.live():
            reason = v.check_block(block, round)
            if reason is None:
                result.prevotes.append(v.index)
            else:
                result.nil_votes[v.index] = reason
        if len(result.prevotes) < q:
            return result
        # with a prevote quorum every validator that saw it precommits
        result.precommits = list(result.prevotes)
        if len(result.precommits) < q:
            return result
        for v in self.live():
            if v.height == block.height - 1:
                result.state_roots[v.index] = v.commit_block(block)
        result.committed = True
        return result

    def step(self) -> CommitResult:
        """Run one height, rotating past crashed proposers."""
        height = self.height + 1
        last = None
        for round in range(self.n):
            if proposer_for(height, round, self.n) in self.crashed:
                continue
            last = self.vote_and_commit(self.propose_block(height, round), round)
            if last.committed:
                return last
        if last is None:
            raise NotProposer("every validator is crashed")
        return last

    def crash(self, index: int) -> None:
        self.crashed.add(index)

    def restart(self, index: int) -> None:
        v = self.validators[index]
        v.restart()
        self.crashed.discard(index)
        donor = max(self.live(), key=lambda x: x.height)
        v.sync_from(donor.app.blocks)


def propose_block(node: Validator, height: int, round: int = 0) -> Block:
    return node.propose_block(height, round)


def vote_and_commit(network: Network, block: Block, round: int = 0) -> CommitResult:
    return network.vote_and_commit(block, round)

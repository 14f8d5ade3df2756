"""Discrete-tick simulation of a replicated ledger network.

Validators run a round-based two-phase protocol (prevote, precommit) with
value locking, so a block decided in one round cannot be overturned in a
later one even when messages are delayed or dropped. Faults are crash-only.

Every random choice (delays, drops) comes from one ``random.Random(seed)``
consumed in event order, so a (config, workload) pair always produces the
same trace.
"""
from __future__ import annotations

import argparse
import heapq
import itertools
import json
import random
import sys
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .block import Block
from .consensus import proposer_for, quorum
from .ledger import Genesis, LedgerState
from .node import Application
from .tx import Transaction, decode


@dataclass
class SimConfig:
    validator_count: int = 4
    seed: int = 0
    delay_range: tuple[int, int] = (1, 10)
    drop_probability: float = 0.0
    # (validator, crash tick, restart tick or None)
    crash_schedule: list[tuple[int, int, int | None]] = field(default_factory=list)
    block_interval: int = 10
    max_block_txs: int = 200
    blocks: int = 100
    max_ticks: int = 200_000
    timeout_propose: int = 0
    timeout_vote: int = 0
    timeout_delta: int = 0
    gossip_interval: int = 0

    def __post_init__(self):
        self.delay_range = tuple(self.delay_range)
        self.crash_schedule = [tuple(c) for c in self.crash_schedule]
        lo, hi = self.delay_range
        if self.validator_count < 1:
            raise ValueError("validator_count must be >= 1")
        if not 0 <= lo <= hi:
            raise ValueError(f"bad delay_range {self.delay_range}")
        if not 0 <= self.drop_probability < 1:
            raise ValueError("drop_probability must be in [0, 1)")
        # zero means "derive from the delay bound"
        self.timeout_propose = self.timeout_propose or 3 * hi + 5
        self.timeout_vote = self.timeout_vote or 2 * hi + 5
        self.timeout_delta = self.timeout_delta or hi
        self.gossip_interval = self.gossip_interval or 2 * hi + 1

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        return cls(**obj)

    def to_json(self) -> dict:
        d = asdict(self)
        d["delay_range"] = list(self.delay_range)
        d["crash_schedule"] = [list(c) for c in self.crash_schedule]
        return d


@dataclass(frozen=True)
class Command:
    tick: int
    tx: Transaction


@dataclass(frozen=True)
class CommitRecord:
    height: int
    block_hash: bytes
    validator: int
    state_root: bytes
    tick: int

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "block_hash": self.block_hash.hex(),
            "validator": self.validator,
            "state_root": self.state_root.hex(),
            "tick": self.tick,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CommitRecord":
        return cls(obj["height"], bytes.fromhex(obj["block_hash"]), obj["validator"],
                   bytes.fromhex(obj["state_root"]), obj["tick"])


@dataclass
class SimTrace:
    records: list[CommitRecord] = field(default_factory=list)
    blocks: dict[int, Block] = field(default_factory=dict)
    final: dict[int, tuple[int, bytes]] = field(default_factory=dict)
    ticks: int = 0
    deliver_failures: int = 0
    submitted: dict[bytes, int] = field(default_factory=dict)
    messages_sent: int = 0
    messages_dropped: int = 0

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "SimTrace":
        return cls(records=[CommitRecord.from_json(json.loads(line)) for line in text.splitlines() if line])

    def committed_height(self) -> int:
        return max((r.height for r in self.records), default=0)

    def commit_tick(self, height: int) -> int | None:
        ticks = [r.tick for r in self.records if r.height == height]
        return min(ticks) if ticks else None

    def committed_txs(self) -> list[Transaction]:
        return [tx for h in sorted(self.blocks) for tx in self.blocks[h].txs]


def verify_replication(trace: SimTrace) -> bool:
    """All validators agree on block hash and state root at every committed height."""
    by_height: dict[int, set[tuple[bytes, bytes]]] = defaultdict(set)
    seen: set[tuple[int, int]] = set()
    for r in trace.records:
        if (r.validator, r.height) in seen:
            return False
        seen.add((r.validator, r.height))
        by_height[r.height].add((r.block_hash, r.state_root))
    return all(len(v) == 1 for v in by_height.values())


# -- messages -------------------------------------------------------------------

@dataclass(frozen=True)
class Proposal:
    height: int
    round: int
    block: Block
    valid_round: int
    sender: int


@dataclass(frozen=True)
class Vote:
    phase: str  # "prevote" | "precommit"
    height: int
    round: int
    block_hash: bytes | None
    sender: int


@dataclass(frozen=True)
class SyncRequest:
    height: int
    sender: int


@dataclass(frozen=True)
class SyncResponse:
    # (block, round it was decided in, precommitting validators)
    certified: tuple[tuple[Block, int, tuple[int, ...]], ...]
    sender: int


SYNC_BATCH = 25


class SimNode:
    """One validator: its application plus round-protocol state."""

    def __init__(self, index: int, genesis: Genesis, cfg: SimConfig, sim: "Simulation"):
        self.index = index
        self.genesis = genesis
        self.cfg = cfg
        self.sim = sim
        self.n = cfg.validator_count
        self.q = quorum(self.n)
        self.f = (self.n - 1) // 3
        self.app = Application(genesis)
        self.certs: dict[int, tuple[int, tuple[int, ...]]] = {}
        self.alive = True
        self.epoch = 0
        self.proposals: dict[tuple[int, int], Proposal] = {}
        self.prevotes: dict[tuple[int, int], dict[int, bytes | None]] = defaultdict(dict)
        self.precommits: dict[tuple[int, int], dict[int, bytes | None]] = defaultdict(dict)
        self._reset_height()

    # -- bookkeeping ----------------------------------------------------------

    @property
    def height(self) -> int:
        """Height currently being decided."""
        return self.app.height + 1

    def _reset_height(self) -> None:
        self.round = 0
        self.step = "waiting"
        self.locked: tuple[int, Block | None] = (-1, None)
        self.valid: tuple[int, Block | None] = (-1, None)
        for table in (self.proposals, self.prevotes, self.precommits):
            for key in [k for k in table if k[0] < self.height]:
                del table[key]
        self._once: set[tuple] = set()
        self._valid_cache: dict[bytes, bool] = {}
        self._sent: list = []
        self._last_sync_request = -10**9
        self._last_sync_reply: dict[int, int] = {}

    def _is_valid(self, block: Block) -> bool:
        ok = self._valid_cache.get(block.hash)
        if ok is None:
            ok = 0 <= block.proposer < self.n and self.app.validate_block(block) is None
            self._valid_cache[block.hash] = ok
        return ok

    def _broadcast(self, msg) -> None:
        self._sent.append(msg)
        self._record(msg)
        self.sim.broadcast(self.index, msg)

    def _record(self, msg) -> None:
        key = (msg.height, msg.round)
        if isinstance(msg, Proposal):
            if msg.sender == proposer_for(msg.height, msg.round, self.n):
                self.proposals.setdefault(key, msg)
        elif msg.phase == "prevote":
            self.prevotes[key].setdefault(msg.sender, msg.block_hash)
        else:
            self.precommits[key].setdefault(msg.sender, msg.block_hash)

    def _first(self, *key) -> bool:
        if key in self._once:
            return False
        self._once.add(key)
        return True

    @staticmethod
    def _count(votes: dict[int, bytes | None], block_hash) -> int:
        return sum(1 for v in votes.values() if v == block_hash)

    # -- protocol ------------------------------------------------------------

    def start_height(self) -> None:
        if not self.alive or self.app.height >= self.cfg.blocks:
            return
        self._reset_height()
        self.start_round(0)

    def start_round(self, r: int) -> None:
        self.round = r
        self.step = "propose"
        h = self.height
        if proposer_for(h, r, self.n) == self.index:
            vr, block = self.valid
            if block is None:
                txs = self.app.prepare_proposal(self.cfg.max_block_txs)
                block = Block.build(h, self.app.last_block.hash, self.index, txs)
            self._broadcast(Proposal(h, r, block, vr, self.index))
        else:
            self.sim.schedule_timeout(self, "propose", h, r,
                                      self.cfg.timeout_propose + r * self.cfg.timeout_delta)
        self.progress()

    def on_timeout(self, kind: str, h: int, r: int) -> None:
        if h != self.height or r != self.round:
            return
        if kind == "propose" and self.step == "propose":
            self._vote("prevote", None)
            self.step = "prevote"
        elif kind == "prevote" and self.step == "prevote":
            self._vote("precommit", None)
            self.step = "precommit"
        elif kind == "precommit" and self.step != "waiting":
            self.start_round(r + 1)
            return
        self.progress()

    def _vote(self, phase: str, block_hash: bytes | None) -> None:
        self._broadcast(Vote(phase, self.height, self.round, block_hash, self.index))

    def progress(self) -> None:
        """Fire every rule whose guard holds until nothing changes."""
        while self.step != "waiting" and self._fire_one():
            pass

    def _fire_one(self) -> bool:
        h, r = self.height, self.round
        prop = self.proposals.get((h, r))
        prevotes = self.prevotes.get((h, r), {})
        precommits = self.precommits.get((h, r), {})
        locked_round, locked_block = self.locked

        # decide: a proposal with a precommit quorum in any round
        for (ph, pr), p in list(self.proposals.items()):
            if ph == h and self._count(self.precommits.get((h, pr), {}), p.block.hash) >= self.q:
                if self._is_valid(p.block):
                    self.sim.decide(self, p.block, pr, self.precommits[(h, pr)])
                    return False

        if self.step == "propose" and prop is not None:
            b, vr = prop.block, prop.valid_round
            if vr == -1:
                ok = self._is_valid(b) and (locked_round == -1 or locked_block.hash == b.hash)
                self._vote("prevote", b.hash if ok else None)
                self.step = "prevote"
                return True
            if 0 <= vr < r and self._count(self.prevotes.get((h, vr), {}), b.hash) >= self.q:
                ok = self._is_valid(b) and (locked_round <= vr or locked_block.hash == b.hash)
                self._vote("prevote", b.hash if ok else None)
                self.step = "prevote"
                return True

        if self.step == "prevote" and len(prevotes) >= self.q and self._first("tprevote", h, r):
            self.sim.schedule_timeout(self, "prevote", h, r, self.cfg.timeout_vote + r * self.cfg.timeout_delta)
            return True

        if (prop is not None and self.step in ("prevote", "precommit")
                and self._count(prevotes, prop.block.hash) >= self.q
                and self._is_valid(prop.block) and self._first("polka", h, r)):
            if self.step == "prevote":
                self.locked = (r, prop.block)
                self._vote("precommit", prop.block.hash)
                self.step = "precommit"
            self.valid = (r, prop.block)
            return True

        if self.step == "prevote" and self._count(prevotes, None) >= self.q:
            self._vote("precommit", None)
            self.step = "precommit"
            return True

        if len(precommits) >= self.q and self._first("tprecommit", h, r):
            self.sim.schedule_timeout(self, "precommit", h, r, self.cfg.timeout_vote + r * self.cfg.timeout_delta)
            return True

        # catch up with a later round that f+1 validators have moved to
        later = sorted({k[1] for t in (self.proposals, self.prevotes, self.precommits)
                        for k in t if k[0] == h and k[1] > r})
        for lr in reversed(later):
            senders = set(self.prevotes.get((h, lr), {})) | set(self.precommits.get((h, lr), {}))
            if (h, lr) in self.proposals:
                senders.add(self.proposals[(h, lr)].sender)
            if len(senders) >= self.f + 1:
                self.start_round(lr)
                return False
        return False

    def on_message(self, msg, tick: int) -> None:
        if isinstance(msg, SyncRequest):
            self._send_sync(msg.sender, msg.height, tick)
            return
        if isinstance(msg, SyncResponse):
            self._apply_sync(msg, tick)
            return
        if msg.height < self.height:
            # the sender is behind; hand it the blocks it is missing
            self._send_sync(msg.sender, msg.height, tick)
            return
        self._record(msg)
        if msg.height > self.height:
            if tick - self._last_sync_request >= self.cfg.gossip_interval:
                self._last_sync_request = tick
                self.sim.send(self.index, msg.sender, SyncRequest(self.height, self.index))
            return
        self.progress()

    def _send_sync(self, peer: int, from_height: int, tick: int) -> None:
        if tick - self._last_sync_reply.get(peer, -10**9) < self.cfg.gossip_interval:
            return
        last = min(self.app.height, from_height + SYNC_BATCH - 1)
        certified = tuple(
            (self.app.blocks[h], *self.certs[h]) for h in range(from_height, last + 1) if h in self.certs
        )
        if certified:
            self._last_sync_reply[peer] = tick
            self.sim.send(self.index, peer, SyncResponse(certified, self.index))

    def _apply_sync(self, msg: SyncResponse, tick: int) -> None:
        synced = False
        for block, rnd, voters in msg.certified:
            if block.height != self.height:
                continue
            if len(set(voters)) < self.q or not self._is_valid(block):
                break
            self.sim.commit(self, block, rnd, voters, tick)
            synced = True
        if synced:
            self.start_height()

    def restart(self) -> None:
        """Rebuild from the block log; lock, valid block and own votes survive (write-ahead log)."""
        wal = (self.height, self.locked, self.valid, list(self._sent))
        self.app = Application.from_blocks(self.genesis, self.app.blocks[1:])
        self.proposals.clear()
        self.prevotes.clear()
        self.precommits.clear()
        self.alive = True
        self.epoch += 1
        self._reset_height()
        height, locked, valid, sent = wal
        if height != self.height or self.app.height >= self.cfg.blocks:
            self.start_height()
            return
        self.locked, self.valid, self._sent = locked, valid, sent
        for msg in sent:
            self._record(msg)
        # never vote twice in a round we may already have voted in
        self.start_round(max((m.round for m in sent), default=-1) + 1)

    def gossip(self) -> None:
        """Re-send this height's messages; drops are independent per send."""
        if self.step == "waiting":
            return
        resend = [m for m in self._sent if m.height == self.height]
        prop = self.proposals.get((self.height, self.round))
        if prop is not None and prop.sender != self.index:
            resend.append(prop)
        for msg in resend:
            self.sim.broadcast(self.index, msg)


class Simulation:
    def __init__(self, cfg: SimConfig, genesis: Genesis, commands: Sequence[Command] = ()):
        if genesis.validators and len(genesis.validators) != cfg.validator_count:
            raise ValueError("genesis validator list disagrees with validator_count")
        self.cfg = cfg
        self.genesis = genesis
        self.rng = random.Random(cfg.seed)
        self.tick = 0
        self._seq = itertools.count()
        self._events: list = []
        self.trace = SimTrace()
        self.trace.blocks[0] = Application(genesis).last_block
        self.nodes = [SimNode(i, genesis, cfg, self) for i in range(cfg.validator_count)]
        for cmd in commands:
            self._push(cmd.tick, "submit", cmd.tx)
        self._pending_faults = 0
        for v, crash_at, restart_at in cfg.crash_schedule:
            self._push(crash_at, "crash", v)
            self._pending_faults += 1
            if restart_at is not None:
                self._push(restart_at, "restart", v)
                self._pending_faults += 1
        for node in self.nodes:
            self._push(0, "start", node.index, node.epoch)
            self._push(cfg.gossip_interval, "gossip", node.index, node.epoch)

    def _push(self, tick: int, kind: str, *payload) -> None:
        heapq.heappush(self._events, (tick, next(self._seq), kind, payload))

    # -- network --------------------------------------------------------------

    def send(self, src: int, dst: int, msg) -> None:
        self.trace.messages_sent += 1
        if self.rng.random() < self.cfg.drop_probability:
            self.trace.messages_dropped += 1
            return
        lo, hi = self.cfg.delay_range
        self._push(self.tick + self.rng.randint(lo, hi), "deliver", dst, msg)

    def broadcast(self, src: int, msg) -> None:
        for dst in range(self.cfg.validator_count):
            if dst != src:
                self.send(src, dst, msg)

    def schedule_timeout(self, node: SimNode, kind: str, h: int, r: int, delay: int) -> None:
        self._push(self.tick + delay, "timeout", node.index, node.epoch, kind, h, r)

    # -- commits --------------------------------------------------------------

    def decide(self, node: SimNode, block: Block, rnd: int, precommits: dict) -> None:
        voters = tuple(sorted(s for s, bh in precommits.items() if bh == block.hash))
        self.commit(node, block, rnd, voters, self.tick)
        node.step = "waiting"
        self._push(self.tick + self.cfg.block_interval, "start", node.index, node.epoch)

    def commit(self, node: SimNode, block: Block, rnd: int, voters: tuple, tick: int) -> None:
        root, failed = node.app.finalize_block(block)
        node.certs[block.height] = (rnd, voters)
        self.trace.deliver_failures += failed
        self.trace.blocks.setdefault(block.height, block)
        self.trace.records.append(CommitRecord(block.height, block.hash, node.index, root, tick))
        node._reset_height()

    # -- main loop ------------------------------------------------------------

    def _done(self) -> bool:
        live = [n for n in self.nodes if n.alive]
        return bool(live) and not self._pending_faults and all(n.app.height >= self.cfg.blocks for n in live)

    def run(self) -> SimTrace:
        while self._events:
            tick, _, kind, payload = heapq.heappop(self._events)
            if tick > self.cfg.max_ticks:
                break
            self.tick = tick
            self._dispatch(kind, payload)
            if self._done():
                break
        self.trace.ticks = self.tick
        self.trace.final = {n.index: (n.app.height, n.app.state_root()) for n in self.nodes}
        return self.trace

    def _dispatch(self, kind: str, payload: tuple) -> None:
        if kind == "submit":
            (tx,) = payload
            self.trace.submitted.setdefault(tx.hash, self.tick)
            for node in self.nodes:
                if node.alive:
                    node.app.check_tx(tx.encoded)
            return
        if kind == "crash":
            self._pending_faults -= 1
            node = self.nodes[payload[0]]
            node.alive = False
            node.epoch += 1
            return
        if kind == "restart":
            self._pending_faults -= 1
            node = self.nodes[payload[0]]
            if not node.alive:
                node.restart()
                self._push(self.tick + self.cfg.gossip_interval, "gossip", node.index, node.epoch)
            return
        node = self.nodes[payload[0]]
        if not node.alive:
            return
        if kind == "deliver":
            node.on_message(payload[1], self.tick)
            return
        if payload[1] != node.epoch:
            return  # timer from before a crash
        if kind == "start":
            if node.step == "waiting":
                node.start_height()
        elif kind == "timeout":
            node.on_timeout(*payload[2:])
        elif kind == "gossip":
            node.gossip()
            if node.app.height < self.cfg.blocks or node.step != "waiting":
                self._push(self.tick + self.cfg.gossip_interval, "gossip", node.index, node.epoch)


def run_simulation(cfg: SimConfig, workload: Iterable[Command], genesis: Genesis | None = None) -> SimTrace:
    if genesis is None:
        genesis = Genesis()
    return Simulation(cfg, genesis, list(workload)).run()


def replay_oracle(genesis: Genesis, trace: SimTrace) -> bytes:
    """Single-node sequential replay of the committed log; returns the final state root."""
    state = LedgerState.from_genesis(genesis)
    for h in sorted(trace.blocks):
        if h == 0:
            continue
        for tx in trace.blocks[h].txs:
            state.validate(tx)
            state.apply(tx)
        state.height += 1
    return state.state_root()


def load_workload(obj: dict) -> tuple[Genesis, list[Command]]:
    genesis = Genesis.from_json(obj.get("genesis", {}))
    commands = [Command(int(c["tick"]), decode(bytes.fromhex(c["tx"]))) for c in obj.get("commands", [])]
    return genesis, commands


def dump_workload(genesis: Genesis, commands: Sequence[Command]) -> dict:
    return {
        "genesis": genesis.to_json(),
        "commands": [{"tick": c.tick, "tx": c.tx.encoded.hex()} for c in commands],
    }


def main(argv: Sequence[str] | None = None) -> int:
    from .workload import random_workload

    parser = argparse.ArgumentParser(prog="sim", description="Simulate a replicated ledger network.")
    sub = parser.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="run a simulation and print the commit trace as JSON lines")
    p.add_argument("--config", required=True, help="SimConfig JSON file")
    p.add_argument("--workload", required=True, help="workload JSON file (genesis + commands)")
    p.add_argument("--out", help="write the trace here instead of stdout")

    p = sub.add_parser("workload", help="generate a random valid workload")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keys", type=int, default=20)
    p.add_argument("--issuers", type=int, default=3)
    p.add_argument("--txs", type=int, default=200)
    p.add_argument("--validators", type=int, default=4)
    p.add_argument("--spacing", type=int, default=5, help="ticks between submitted transactions")

    args = parser.parse_args(argv)
    if args.cmd == "workload":
        wl = random_workload(args.seed, args.keys, args.issuers, args.txs, validators=args.validators)
        commands = [Command(i * args.spacing, tx) for i, tx in enumerate(wl.txs)]
        json.dump(dump_workload(wl.genesis, commands), sys.stdout)
        print()
        return 0

    try:
        with open(args.config) as fh:
            cfg = SimConfig.from_json(json.load(fh))
        with open(args.workload) as fh:
            genesis, commands = load_workload(json.load(fh))
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    trace = run_simulation(cfg, commands, genesis)
    text = trace.to_jsonl()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    ok = verify_replication(trace)
    print(f"heights committed: {trace.committed_height()}  ticks: {trace.ticks}  "
          f"replication {'ok' if ok else 'DIVERGED'}", file=sys.stderr)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

"""ABCI-style application boundary and the client-facing HTTP surface.

``Application`` is what the consensus layer drives: ``check_tx`` admits
transactions to the mempool without touching committed state, and
``begin_block`` / ``deliver_tx`` / ``commit`` apply a decided block.
Queries always read the last committed state.

Response codes::

    0 ok            3 bad-signature   6 unauthorized-issuer
    1 malformed     4 value-mismatch  7 insufficient-funding
    2 unknown-outpoint  5 replay      8 unknown-debt
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, NamedTuple, Sequence

from .block import Block
from .errors import DuplicateInput, LedgerError, Replay
from .ledger import Genesis, GenesisError, LedgerState
from .mempool import Mempool, order_by_dependency
from .tx import ZERO32, Transaction, decode

log = logging.getLogger(__name__)

QUERY_PATHS = ("/balance", "/debt/aggregate", "/debt/creditor", "/debt/entry", "/block", "/status")


class Response(NamedTuple):
    code: int
    payload: Any = None
    log: str = ""

    @property
    def ok(self) -> bool:
        return self.code == 0

    def to_json(self) -> dict:
        return {"code": self.code, "payload": self.payload, "log": self.log}


def _reject(exc: LedgerError) -> Response:
    return Response(exc.code, None, f"{exc.reason}: {exc}")


def genesis_block(genesis: Genesis) -> Block:
    cb = genesis.coinbase()
    return Block.build(0, ZERO32, 0, [cb] if cb else [])


class Application:
    def __init__(self, genesis: Genesis):
        self.genesis = genesis
        self.state = LedgerState.from_genesis(genesis)
        self.blocks: list[Block] = [genesis_block(genesis)]
        self.mempool = Mempool()
        self._pending = self.state.copy()
        self._working: LedgerState | None = None
        self._block: Block | None = None
        self._delivered: list[Transaction] = []

    @classmethod
    def from_blocks(cls, genesis: Genesis, blocks: Sequence[Block]) -> "Application":
        """Rebuild a node from its committed log (blocks after genesis)."""
        app = cls(genesis)
        for block in blocks:
            if block.height == 0:
                continue
            app.finalize_block(block)
        return app

    @property
    def height(self) -> int:
        return self.state.height

    @property
    def last_block(self) -> Block:
        return self.blocks[-1]

    def state_root(self) -> bytes:
        return self.state.state_root()

    # -- mempool admission ----------------------------------------------------

    def check_tx(self, raw: bytes) -> Response:
        try:
            tx = decode(raw)
            self.admit(tx)
        except LedgerError as exc:
            return _reject(exc)
        return Response(0, tx.hash.hex(), "accepted into mempool")

    def admit(self, tx: Transaction) -> None:
        if tx.hash in self.mempool:
            raise Replay("transaction already in mempool")
        spent = self.mempool.conflict(tx)
        if spent is not None:
            raise DuplicateInput(f"outpoint {spent} already spent by a mempool transaction")
        self._pending.validate(tx)
        self._pending.apply(tx)
        self.mempool.add(tx)

    def prepare_proposal(self, max_txs: int | None = None) -> list[Transaction]:
        txs = order_by_dependency(self.mempool)
        return txs if max_txs is None else txs[:max_txs]

    def validate_block(self, block: Block) -> str | None:
        """Reason the block cannot extend our chain, or None if it can."""
        if block.height != self.height + 1:
            return f"height {block.height} does not follow {self.height}"
        if block.prev_hash != self.last_block.hash:
            return "prev_hash does not link to our last block"
        if not block.is_consistent():
            return "merkle_root does not match transactions"
        scratch = self.state.copy()
        for tx in block.txs:
            try:
                scratch.validate(tx)
            except LedgerError as exc:
                return f"tx {tx.hash.hex()[:16]}: {exc.reason}: {exc}"
            scratch.apply(tx)
        return None

    # -- block application ----------------------------------------------------

    def begin_block(self, block: Block | None = None) -> None:
        self._working = self.state.copy()
        self._block = block
        self._delivered = []

    def deliver_tx(self, raw: bytes) -> Response:
        if self._working is None:
            self.begin_block()
        try:
            tx = decode(raw)
            self._working.validate(tx)
        except LedgerError as exc:
            return _reject(exc)
        self._working.apply(tx)
        self._delivered.append(tx)
        return Response(0, tx.hash.hex(), "delivered")

    def commit(self) -> bytes:
        if self._working is None:
            self.begin_block()
        working = self._working
        working.height += 1
        if self._block is not None:
            block = self._block
            if [t.hash for t in block.txs] != [t.hash for t in self._delivered]:
                log.warning("height %d: delivered txs differ from block", block.height)
        else:
            block = Block.build(working.height, self.last_block.hash, 0, self._delivered)
        self.state = working
        self.blocks.append(block)
        self._working, self._block, self._delivered = None, None, []
        self._recheck_mempool()
        return self.state.state_root()

    def finalize_block(self, block: Block) -> tuple[bytes, int]:
        """begin/deliver/commit for a decided block. Returns (state_root, failed delivers)."""
        self.begin_block(block)
        failed = sum(not self.deliver_tx(tx.encoded).ok for tx in block.txs)
        return self.commit(), failed

    def _recheck_mempool(self) -> None:
        pooled = list(self.mempool)
        self.mempool.clear()
        self._pending = self.state.copy()
        for tx in pooled:
            try:
                self.admit(tx)
            except LedgerError:
                pass

    def reset_mempool(self) -> None:
        self.mempool.clear()
        self._pending = self.state.copy()

    # -- queries --------------------------------------------------------------

    def query(self, path: str, params: dict | None = None) -> Response:
        parts = [p for p in path.split("/") if p]
        try:
            return self._query(parts, params or {})
        except (ValueError, IndexError, LedgerError) as exc:
            return Response(1, None, f"malformed query {path!r}: {exc}")

    def _query(self, parts: list[str], params: dict) -> Response:
        state = self.state
        match parts:
            case ["balance", owner]:
                owner_hash = _hash_param(owner)
                coins = state.coins_of(owner_hash)
                return Response(0, {
                    "balance": sum(c.amount for c in coins),
                    "utxos": [{"outpoint": str(c.outpoint), "amount": c.amount} for c in coins],
                })
            case ["debt", "aggregate"]:
                return Response(0, state.aggregate_debt())
            case ["debt", "creditor", creditor]:
                entries = state.debts_of_creditor(_hash_param(creditor))
                return Response(0, [e.to_json() for e in entries])
            case ["debt", "entry", odt]:
                return Response(0, state.debt_entry(_hash_param(odt)).to_json())
            case ["block", n]:
                height = int(n)
                if not 0 <= height < len(self.blocks):
                    return Response(1, None, f"no block at height {height}")
                return Response(0, self.blocks[height].to_json())
            case ["status"]:
                return Response(0, {
                    "height": state.height,
                    "state_root": state.state_root().hex(),
                    "last_block_hash": self.last_block.hash.hex(),
                    "mempool": len(self.mempool),
                })
        return Response(1, None, f"unknown query path /{'/'.join(parts)}")


def _hash_param(text: str) -> bytes:
    raw = bytes.fromhex(text)
    if len(raw) != 32:
        raise ValueError("expected a 32-byte hex hash")
    return raw


class DevNode:
    """A single-validator node serving clients.

    With ``commit_every_tx`` each accepted transaction is sealed into its own
    block immediately, which makes scripted client sessions deterministic.
    """

    def __init__(self, app: Application, commit_every_tx: bool = True, max_block_txs: int = 500):
        self.app = app
        self.commit_every_tx = commit_every_tx
        self.max_block_txs = max_block_txs
        self.lock = threading.Lock()

    def make_block(self) -> Block:
        with self.lock:
            app = self.app
            txs = app.prepare_proposal(self.max_block_txs)
            block = Block.build(app.height + 1, app.last_block.hash, 0, txs)
            app.finalize_block(block)
            return block

    def handle(self, method: str, path: str, body: bytes = b"") -> tuple[int, dict]:
        if method == "POST" and path.rstrip("/") == "/tx":
            try:
                raw = bytes.fromhex(body.decode().strip())
            except (UnicodeDecodeError, ValueError):
                return 200, Response(1, None, "body must be hex of a canonical transaction").to_json()
            with self.lock:
                resp = self.app.check_tx(raw)
            if resp.ok and self.commit_every_tx:
                self.make_block()
            return 200, resp.to_json()
        if method == "GET" and path.startswith(QUERY_PATHS):
            with self.lock:
                return 200, self.app.query(path).to_json()
        return 404, Response(1, None, f"no route {method} {path}").to_json()


class _Handler(BaseHTTPRequestHandler):
    node: DevNode

    def _send(self, status: int, obj: dict) -> None:
        data = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        self._send(*self.node.handle("GET", self.path))

    def do_POST(self):
        length = int(self.headers.get("Content-Length") or 0)
        self._send(*self.node.handle("POST", self.path, self.rfile.read(length)))

    def log_message(self, fmt, *args):
        log.debug("%s - " + fmt, self.address_string(), *args)


def make_server(node: DevNode, host: str = "127.0.0.1", port: int = 26657) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"node": node})
    return ThreadingHTTPServer((host, port), handler)


def _block_timer(node: DevNode, interval: float, stop: threading.Event) -> None:
    while not stop.wait(interval):
        if len(node.app.mempool):
            node.make_block()


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="debt-node", description="Run a single-validator ledger node.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--genesis", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=26657)
    p.add_argument("--block-interval", type=float, default=0.0,
                   help="seconds between blocks; 0 seals every accepted tx immediately")

    p = sub.add_parser("genesis", help="print a genesis JSON document")
    p.add_argument("--validator", action="append", default=[], metavar="PUBKEY_HEX")
    p.add_argument("--issuer", action="append", default=[], metavar="PUBKEY_HEX")
    p.add_argument("--alloc", action="append", default=[], metavar="HASH:AMOUNT")

    args = parser.parse_args(argv)
    if args.cmd == "genesis":
        doc = {
            "validators": args.validator,
            "issuers": args.issuer,
            "allocations": [
                {"pubkey_hash": h, "amount": int(a)} for h, a in (s.split(":") for s in args.alloc)
            ],
        }
        try:
            Genesis.from_json(doc)
        except GenesisError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(json.dumps(doc, indent=2))
        return 0

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    try:
        genesis = Genesis.load(args.genesis)
    except (OSError, GenesisError) as exc:
        print(f"error: cannot load genesis: {exc}", file=sys.stderr)
        return 1
    node = DevNode(Application(genesis), commit_every_tx=args.block_interval <= 0)
    server = make_server(node, args.host, args.port)
    stop = threading.Event()
    if args.block_interval > 0:
        threading.Thread(target=_block_timer, args=(node, args.block_interval, stop), daemon=True).start()
    log.info("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())

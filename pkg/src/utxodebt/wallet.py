"""Command-line wallet: key management and transaction construction.

The keystore is plaintext JSON. Anyone who can read the file can spend the
funds and issue debt with the keys in it; keep it to prototypes and tests.

Exit codes: 0 success, 1 usage error, 2 transport error, 3 node rejection.
"""
from __future__ import annotations

import argparse
import fcntl
import json
import os
import sys
import urllib.error
import urllib.request
from pathlib import Path
from typing import Sequence

from .debt import Coin, IssuanceRequest, RepaymentRequest, issue_debt, repay_full, repay_partial, select_coins
from .errors import InsufficientFunding, LedgerError
from .ledger import OutstandingDebtEntry
from .tx import KeyPair, OutPoint, Transaction, make_transfer

EXIT_OK, EXIT_USAGE, EXIT_TRANSPORT, EXIT_REJECTED = 0, 1, 2, 3

DEFAULT_NODE = "http://127.0.0.1:26657"
DEFAULT_KEYSTORE = "~/.utxodebt/keystore.json"


class UsageError(Exception):
    pass


class TransportError(Exception):
    pass


class NodeRejected(Exception):
    def __init__(self, response: dict):
        super().__init__(response.get("log", ""))
        self.response = response


class Keystore:
    def __init__(self, path: str | Path):
        self.path = Path(path).expanduser()
        self.keys: dict[str, KeyPair] = {}
        if self.path.exists():
            data = json.loads(self.path.read_text())
            for entry in data.get("keys", []):
                key = KeyPair(bytes.fromhex(entry["secret_hex"]))
                if key.pubkey.hex() != entry["pubkey_hex"]:
                    raise UsageError(f"keystore entry {entry['name']!r} is corrupt")
                self.keys[entry["name"]] = key

    def __contains__(self, name: str) -> bool:
        return name in self.keys

    def get(self, name: str) -> KeyPair:
        try:
            return self.keys[name]
        except KeyError:
            raise UsageError(f"no key named {name!r} in {self.path}") from None

    def add(self, name: str, key: KeyPair) -> None:
        if name in self.keys:
            raise UsageError(f"key {name!r} already exists")
        self.keys[name] = key

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        doc = {
            "warning": "plaintext private keys",
            "keys": [
                {"name": n, "pubkey_hex": k.pubkey.hex(), "secret_hex": k.secret.hex()}
                for n, k in self.keys.items()
            ],
        }
        tmp = self.path.with_suffix(".tmp")
        with open(self.path.with_suffix(".lock"), "w") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
            with os.fdopen(fd, "w") as fh:
                json.dump(doc, fh, indent=2)
            os.replace(tmp, self.path)

    def keygen(self, name: str) -> KeyPair:
        key = KeyPair.generate()
        self.add(name, key)
        self.save()
        return key


class NodeClient:
    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _request(self, path: str, data: bytes | None = None) -> dict:
        req = urllib.request.Request(self.base_url + path, data=data, method="POST" if data else "GET")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read()
        except urllib.error.HTTPError as exc:
            body = exc.read()
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"cannot reach node at {self.base_url}: {exc}") from None
        try:
            return json.loads(body)
        except ValueError:
            raise TransportError("node returned a non-JSON response") from None

    def query(self, path: str) -> dict:
        return self._request(path)

    def payload(self, path: str):
        resp = self.query(path)
        if resp.get("code") != 0:
            raise NodeRejected(resp)
        return resp["payload"]

    def submit(self, tx: Transaction) -> dict:
        return self._request("/tx", tx.encoded.hex().encode())

    def coins(self, owner: bytes) -> list[Coin]:
        payload = self.payload(f"/balance/{owner.hex()}")
        return [Coin(OutPoint.parse(u["outpoint"]), int(u["amount"])) for u in payload["utxos"]]


def _hash_arg(text: str, ks: Keystore) -> bytes:
    if text in ks:
        return ks.get(text).pubkey_hash
    try:
        raw = bytes.fromhex(text)
    except ValueError:
        raw = b""
    if len(raw) != 32:
        raise UsageError(f"{text!r} is neither a key name nor a 64-hex-char hash")
    return raw


def _amount_arg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"amount {text!r} is not an integer") from None
    if value <= 0:
        raise UsageError("amount must be positive")
    return value


def _submitted(resp: dict, tx: Transaction, **extra) -> dict:
    out = {"tx_hash": tx.hash.hex(), **extra, "code": resp.get("code"), "log": resp.get("log", "")}
    if resp.get("code") != 0:
        raise NodeRejected(out)
    return out


def build_transfer(key: KeyPair, coins: Sequence[Coin], to_hash: bytes, amount: int) -> Transaction:
    picked = select_coins(coins, amount)
    change = sum(c.amount for c in picked) - amount
    outputs = [(to_hash, amount)] + ([(key.pubkey_hash, change)] if change else [])
    return make_transfer([c.outpoint for c in picked], outputs, key)


def build_repayment(
    key: KeyPair, coins: Sequence[Coin], entry: OutstandingDebtEntry, amount: int
) -> tuple[Transaction, Transaction | None]:
    if amount > entry.remaining:
        raise UsageError(f"amount {amount} exceeds the remaining debt {entry.remaining}")
    req = RepaymentRequest(entry.odt_hash, key, amount, tuple(select_coins(coins, amount)))
    if amount == entry.remaining:
        return repay_full(entry, req), None
    return repay_partial(entry, req)


def cmd_keygen(args, ks: Keystore, node: NodeClient) -> dict:
    key = ks.keygen(args.name)
    return {"name": args.name, "pubkey": key.pubkey.hex(), "pubkey_hash": key.pubkey_hash.hex()}


def cmd_transfer(args, ks: Keystore, node: NodeClient) -> dict:
    key = ks.get(args.sender)
    to_hash, amount = _hash_arg(args.to, ks), _amount_arg(args.amount)
    tx = build_transfer(key, node.coins(key.pubkey_hash), to_hash, amount)
    return _submitted(node.submit(tx), tx)


def cmd_issue(args, ks: Keystore, node: NodeClient) -> dict:
    key = ks.get(args.issuer)
    recipients = []
    for item in args.recipients.split(","):
        who, sep, amount = item.rpartition(":")
        if not sep:
            raise UsageError(f"recipient {item!r} must look like <hash>:<amount>")
        recipients.append((_hash_arg(who, ks), _amount_arg(amount)))
    if args.loan_type <= 0 or args.loan_type > 0xFFFF:
        raise UsageError("--loan-type must be between 1 and 65535")
    debt_tx, odt = issue_debt(IssuanceRequest(key, tuple(recipients), args.loan_type))
    return _submitted(node.submit(debt_tx), debt_tx, odt_hash=odt.hash.hex())


def cmd_repay(args, ks: Keystore, node: NodeClient) -> dict:
    key = ks.get(args.payer)
    odt_hash, amount = _hash_arg(args.odt_hash, ks), _amount_arg(args.amount)
    entry = OutstandingDebtEntry.from_json(node.payload(f"/debt/entry/{odt_hash.hex()}"))
    payment, successor = build_repayment(key, node.coins(key.pubkey_hash), entry, amount)
    return _submitted(node.submit(payment), payment,
                      odt_hash=successor.hash.hex() if successor is not None else None)


def cmd_query(args, ks: Keystore, node: NodeClient) -> dict:
    what = args.what
    if what in ("balance", "debts"):
        if not args.arg:
            raise UsageError(f"query {what} needs a key name or pubkey hash")
        owner = _hash_arg(args.arg, ks).hex()
        path = f"/balance/{owner}" if what == "balance" else f"/debt/creditor/{owner}"
    elif what == "aggregate":
        path = "/debt/aggregate"
    else:
        path = "/status"
    return node.payload(path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wallet", description=__doc__.splitlines()[0])
    parser.add_argument("--node", default=os.environ.get("UTXODEBT_NODE", DEFAULT_NODE))
    parser.add_argument("--keystore", default=os.environ.get("UTXODEBT_KEYSTORE", DEFAULT_KEYSTORE))
    sub = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="create a new Ed25519 key")
    p.add_argument("name")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("transfer", help="send funds")
    p.add_argument("sender")
    p.add_argument("to", help="recipient pubkey hash (or key name)")
    p.add_argument("amount")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("issue", help="issue debt (issuer keys only)")
    p.add_argument("issuer")
    p.add_argument("recipients", help="<hash:amount>[,<hash:amount>...]")
    p.add_argument("--loan-type", type=int, required=True)
    p.set_defaults(func=cmd_issue)

    p = sub.add_parser("repay", help="repay part or all of an outstanding debt")
    p.add_argument("payer")
    p.add_argument("odt_hash")
    p.add_argument("amount")
    p.set_defaults(func=cmd_repay)

    p = sub.add_parser("query", help="read ledger state")
    p.add_argument("what", choices=["balance", "aggregate", "debts", "status"])
    p.add_argument("arg", nargs="?")
    p.set_defaults(func=cmd_query)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ks = Keystore(args.keystore)
        result = args.func(args, ks, NodeClient(args.node))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientFunding as exc:
        print(f"error: insufficient balance: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except NodeRejected as exc:
        print(json.dumps(exc.response, indent=2))
        return EXIT_REJECTED
    except (LedgerError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(result, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

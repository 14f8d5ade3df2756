"""Write the golden vectors in tests/golden/ without using the package.

Serialization here is written out by hand with int.to_bytes; the Merkle
root is computed recursively over the tree rather than level by level.
Run from the repo root:  python tests/oracles/make_goldens.py
"""
import hashlib
import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "golden"


def le(value, width, signed=False):
    return value.to_bytes(width, "little", signed=signed)


def h(data):
    return hashlib.sha256(data).digest()


def serialize(tx):
    out = bytearray()
    out += le(tx["version"], 2)
    out += le(tx["kind_tag"], 1)
    out += le(len(tx["inputs"]), 4)
    for i in tx["inputs"]:
        out += bytes.fromhex(i["prev_field"])
        out += le(i["output_index"], 4, signed=True)
        out += bytes.fromhex(i["unlock_pubkey"])
        out += bytes.fromhex(i["unlock_sig"])
    out += le(len(tx["outputs"]), 4)
    for o in tx["outputs"]:
        out += le(o["amount"], 8)
        out += bytes.fromhex(o["pubkey_hash"])
    out += le(tx["locktime"], 4)
    out += le(tx["loan_type"], 2)
    out += bytes.fromhex(tx["debt_ref"])
    return bytes(out)


def merkle(leaves):
    if len(leaves) == 1:
        return leaves[0]
    def node(level_nodes):
        if len(level_nodes) == 1:
            return level_nodes[0]
        if len(level_nodes) % 2:
            level_nodes = level_nodes + [level_nodes[-1]]
        return node([h(level_nodes[k] + level_nodes[k + 1]) for k in range(0, len(level_nodes), 2)])

    return node(list(leaves))


TX_VECTOR = {
    "version": 1,
    "kind_tag": 0,
    "inputs": [
        {"prev_field": "11" * 32, "output_index": 0, "unlock_pubkey": "22" * 32, "unlock_sig": "33" * 64},
        {"prev_field": "44" * 32, "output_index": 7, "unlock_pubkey": "55" * 32, "unlock_sig": "66" * 64},
    ],
    "outputs": [
        {"amount": 1000, "pubkey_hash": "77" * 32},
        {"amount": 2**40 + 5, "pubkey_hash": "88" * 32},
    ],
    "locktime": 0,
    "loan_type": 0,
    "debt_ref": "99" * 32,
}

DEBT_VECTOR = {
    "version": 1,
    "kind_tag": 2,
    "inputs": [{"prev_field": "ab" * 32, "output_index": -2, "unlock_pubkey": "ab" * 32, "unlock_sig": "cd" * 64}],
    "outputs": [{"amount": 60, "pubkey_hash": "01" * 32}, {"amount": 40, "pubkey_hash": "02" * 32}],
    "locktime": 0,
    "loan_type": 3,
    "debt_ref": "00" * 32,
}

GENESIS = {
    "validators": [h(b"validator-%d" % i).hex() for i in range(4)],
    "issuers": [h(b"issuer-0").hex()],
    "allocations": [
        {"pubkey_hash": h(b"alice").hex(), "amount": 1000},
        {"pubkey_hash": h(b"bob").hex(), "amount": 250},
        {"pubkey_hash": h(b"carol").hex(), "amount": 2**33},
    ],
}


def genesis_state_root(genesis):
    coinbase = {
        "version": 1,
        "kind_tag": 1,
        "inputs": [{"prev_field": "00" * 32, "output_index": -1, "unlock_pubkey": "00" * 32, "unlock_sig": "00" * 64}],
        "outputs": [{"amount": a["amount"], "pubkey_hash": a["pubkey_hash"]} for a in genesis["allocations"]],
        "locktime": 0,
        "loan_type": 0,
        "debt_ref": "00" * 32,
    }
    cb_hash = h(serialize(coinbase))
    rows = sorted(
        (cb_hash, idx, o["amount"], bytes.fromhex(o["pubkey_hash"])) for idx, o in enumerate(coinbase["outputs"])
    )
    blob = le(len(rows), 4)
    for txh, idx, amount, pkh in rows:
        blob += txh + le(idx, 4) + le(amount, 8) + pkh
    blob += le(0, 4)  # empty debt pool
    blob += le(0, 8)  # height
    return cb_hash, h(blob)


def main():
    OUT.mkdir(exist_ok=True)
    (OUT / "tx_vector.json").write_text(json.dumps(TX_VECTOR, indent=2) + "\n")
    (OUT / "tx_vector.bin").write_bytes(serialize(TX_VECTOR))
    (OUT / "debt_vector.json").write_text(json.dumps(DEBT_VECTOR, indent=2) + "\n")
    (OUT / "debt_vector.bin").write_bytes(serialize(DEBT_VECTOR))

    leaves = [h(b"leaf-%d" % i) for i in range(4)]
    merkle_doc = {
        "leaves": [x.hex() for x in leaves],
        "root": merkle(leaves).hex(),
        "root_of_3": merkle(leaves[:3]).hex(),
    }
    (OUT / "merkle_4.json").write_text(json.dumps(merkle_doc, indent=2) + "\n")

    (OUT / "genesis.json").write_text(json.dumps(GENESIS, indent=2) + "\n")
    cb_hash, root = genesis_state_root(GENESIS)
    (OUT / "genesis_root.json").write_text(
        json.dumps({"coinbase_hash": cb_hash.hex(), "state_root": root.hex()}, indent=2) + "\n"
    )


if __name__ == "__main__":
    main()

import json
import random
from pathlib import Path

import pytest

from utxodebt.block import Block, block_merkle_root, merkle_root
from utxodebt.tx import ZERO32, sha256

GOLDEN = Path(__file__).parent / "golden"


def test_single_leaf_is_root():
    h = sha256(b"x")
    assert merkle_root([h]) == h


def test_pair():
    a, b = sha256(b"a"), sha256(b"b")
    assert merkle_root([a, b]) == sha256(a + b)


def test_odd_node_duplicated():
    a, b, c = (sha256(bytes([i])) for i in range(3))
    assert merkle_root([a, b, c]) == sha256(sha256(a + b) + sha256(c + c))


def test_golden_four_leaves():
    doc = json.loads((GOLDEN / "merkle_4.json").read_text())
    leaves = [bytes.fromhex(x) for x in doc["leaves"]]
    assert merkle_root(leaves).hex() == doc["root"]
    assert merkle_root(leaves[:3]).hex() == doc["root_of_3"]


def test_empty_list_rejected():
    with pytest.raises(ValueError):
        merkle_root([])


def test_empty_block_uses_zero_root():
    assert block_merkle_root([]) == ZERO32
    assert Block.build(1, ZERO32, 0, []).merkle_root == ZERO32


def test_permutation_sensitive():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(2, 9)
        leaves = [sha256(rng.randbytes(8)) for _ in range(n)]
        i, j = rng.sample(range(n), 2)
        swapped = list(leaves)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        assert merkle_root(leaves) != merkle_root(swapped)


def test_block_json_round_trip(app):
    block = app.last_block
    again = Block.from_json(json.loads(json.dumps(block.to_json())))
    assert again == block and again.hash == block.hash and again.is_consistent()

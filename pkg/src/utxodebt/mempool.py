"""Validated transactions awaiting block inclusion."""
from __future__ import annotations

import heapq
from typing import Iterable, Iterator

from .tx import ZERO32, OutPoint, Transaction


class Mempool:
    """Insertion-ordered pool keyed by transaction hash."""

    def __init__(self):
        self._txs: dict[bytes, Transaction] = {}
        self._spent: dict[OutPoint, bytes] = {}

    def __len__(self) -> int:
        return len(self._txs)

    def __contains__(self, tx_hash: bytes) -> bool:
        return tx_hash in self._txs

    def __iter__(self) -> Iterator[Transaction]:
        return iter(list(self._txs.values()))

    def conflict(self, tx: Transaction) -> OutPoint | None:
        """First outpoint `tx` spends that a pooled transaction already spends."""
        for txin in tx.inputs:
            if txin.output_index >= 0 and txin.outpoint in self._spent:
                return txin.outpoint
        return None

    def add(self, tx: Transaction) -> None:
        self._txs[tx.hash] = tx
        for txin in tx.inputs:
            if txin.output_index >= 0:
                self._spent[txin.outpoint] = tx.hash

    def remove(self, tx_hash: bytes) -> Transaction | None:
        tx = self._txs.pop(tx_hash, None)
        if tx is not None:
            for txin in tx.inputs:
                if self._spent.get(txin.outpoint) == tx_hash:
                    del self._spent[txin.outpoint]
        return tx

    def clear(self) -> None:
        self._txs.clear()
        self._spent.clear()


def order_by_dependency(txs: Iterable[Transaction]) -> list[Transaction]:
    """Stable topological order: parents before children, otherwise insertion order.

    A transaction depends on any earlier-listed-or-not pool member whose
    outputs it spends, on the debt transaction it repays, and on earlier
    repayments of the same loan.
    """
    txs = list(txs)
    index = {tx.hash: i for i, tx in enumerate(txs)}
    children: list[list[int]] = [[] for _ in txs]
    indegree = [0] * len(txs)
    last_repayment: dict[bytes, int] = {}

    def edge(parent: int, child: int) -> None:
        if parent != child:
            children[parent].append(child)
            indegree[child] += 1

    for i, tx in enumerate(txs):
        parents = {index[txin.prev_field] for txin in tx.inputs
                   if txin.output_index >= 0 and txin.prev_field in index}
        if tx.debt_ref != ZERO32:
            if tx.debt_ref in index:
                parents.add(index[tx.debt_ref])
            if tx.debt_ref in last_repayment:
                parents.add(last_repayment[tx.debt_ref])
            last_repayment[tx.debt_ref] = i
        for p in parents:
            edge(p, i)

    ready = [i for i, d in enumerate(indegree) if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for c in children[i]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) < len(txs):
        # cyclic constraints cannot all hold; keep the rest in pool order
        placed = set(order)
        order.extend(i for i in range(len(txs)) if i not in placed)
    return [txs[i] for i in order]

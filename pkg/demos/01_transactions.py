"""Keys, transfers and the committed UTXO pool."""
from utxodebt import Genesis, KeyPair, LedgerState
from utxodebt.tx import decode, make_transfer

alice = KeyPair.from_seed("alice")  # deterministic keys, handy for repeatable runs
bob = KeyPair.from_seed("bob")

genesis = Genesis(allocations=[(alice.pubkey_hash, 1000), (bob.pubkey_hash, 500)])
state = LedgerState.from_genesis(genesis)
print("genesis root", state.state_root().hex())

# alice spends her one coin: 400 to bob, 600 back to herself
coin = state.coins_of(alice.pubkey_hash)[0]
tx = make_transfer([coin.outpoint], [(bob.pubkey_hash, 400), (alice.pubkey_hash, 600)], alice)
print("tx", tx.hash.hex(), len(tx.encoded), "bytes")
assert decode(tx.encoded) == tx  # canonical encoding round-trips

state.validate(tx)
state.apply(tx)
print("alice", state.balance_of(alice.pubkey_hash), "bob", state.balance_of(bob.pubkey_hash))

# the spent coin has left the pool, so a second spend names an unknown outpoint
try:
    state.validate(make_transfer([coin.outpoint], [(bob.pubkey_hash, 1000)], alice))
except Exception as exc:
    print("rejected:", type(exc).__name__, "code", exc.code)

"""Blind comparison, selection and ordering on the clear backend.

Run with ``--backend encrypted`` to repeat the walk-through on TFHE
ciphertexts (needs the ``fhe`` extra; each gate takes tens of milliseconds).
"""
import argparse

from blindeval import (
    BackendStats,
    Client,
    Evaluator,
    KeyedTuple,
    SecurityConfig,
    blind_compare,
    blind_order,
    blind_select_word,
    blind_sort,
    keygen,
)

parser = argparse.ArgumentParser()
parser.add_argument("--backend", default="clear", choices=("clear", "encrypted"))
args = parser.parse_args()

pair = keygen(SecurityConfig(backend=args.backend))
stats = BackendStats()
client = Client(pair.client_key, stats)
server = Evaluator(pair.evaluation_key, stats)

# The client encrypts two 4-bit numbers and hands them over.
a, b = client.encrypt_word(11, 4), client.encrypt_word(6, 4)

# The server compares them. It gets back encrypted bits, not an answer.
result = blind_compare(server, a, b)
print("a > b  ->", client.decrypt_bit(result.gt))

# Both branches are always built; the encrypted condition picks one.
picked = blind_select_word(server, result.gt, a, b)
print("max(a, b) via selection ->", client.decrypt_word(picked))

low, high = blind_order(server, a, b)
print("ordered pair ->", client.decrypt_word(low), client.decrypt_word(high))

# Sorting carries a payload along with each key.
keys = [5, 1, 5, 3]
items = [KeyedTuple(client.encrypt_word(k, 3), client.encrypt_word(i, 2)) for i, k in enumerate(keys)]
ranked = blind_sort(server, items)
print("sorted (key, original position) ->",
      [(client.decrypt_word(t.key), client.decrypt_word(t.payload)) for t in ranked])

print("gates evaluated:", stats.total_gates, "| blind ops:", stats.blind_ops)

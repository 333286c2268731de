"""Train a decision tree on data the server cannot read.

The server gets the evaluation key and encrypted rows. It trains, predicts,
and returns ciphertexts; its decrypt counter stays at zero. The clear backend
is the default so the script finishes instantly; pass ``--backend encrypted``
for the real thing (a depth-2 tree on 20 rows takes several minutes).
"""
import argparse

from blindeval import (
    BackendStats,
    Client,
    EncryptedDataset,
    Evaluator,
    SecurityConfig,
    decrypt_tree,
    fit_reference,
    keygen,
    predict_rows,
    train,
)
from blindeval.data import gen_synthetic

parser = argparse.ArgumentParser()
parser.add_argument("--backend", default="clear", choices=("clear", "encrypted"))
parser.add_argument("--depth", type=int, default=2)
args = parser.parse_args()

data = gen_synthetic(20, 4, planted_feature=2, signal=0.85, seed=1)
pair = keygen(SecurityConfig(backend=args.backend))

# Client side: encrypt and send.
owner = Client(pair.client_key)
upload = EncryptedDataset.encrypt(owner, data.X, data.y)

# Server side: only the evaluation key.
server_stats = BackendStats()
server = Evaluator(pair.evaluation_key, server_stats)
model = train(server, upload, args.depth)
predictions = predict_rows(server, model, upload.features)
print("server decryptions:", server_stats.decrypt_calls)
print("server blind ops:", server_stats.blind_ops)

# Back on the client.
tree = decrypt_tree(owner, model)
labels = owner.decrypt_bits(predictions)
print("tree:", tree.to_dict())
print("same as plaintext trainer:", tree == fit_reference(data.X, data.y, args.depth))
print("training accuracy:", sum(int(p == t) for p, t in zip(labels, data.y)) / len(labels))

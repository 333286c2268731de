"""Command-line interface.

The client-side commands (keygen, encrypt-data, encrypt-model, decrypt-result)
take the client key. The server-side commands (train, predict) accept only an
evaluation key and refuse to run if handed a client key.

Exit codes: 0 success, 2 validation error, 3 trust-boundary violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from blindeval import bench
from blindeval.backend import (
    BACKENDS,
    PRESETS,
    BackendError,
    BackendStats,
    Client,
    ClientKey,
    EvaluationKey,
    Evaluator,
    SecurityConfig,
    TrustBoundaryError,
    keygen,
    load_key,
    save_key,
)
from blindeval.containers import (
    DATA_MAGIC,
    MODEL_MAGIC,
    dataset_from_bytes,
    dataset_to_bytes,
    model_from_bytes,
    model_to_bytes,
    results_from_bytes,
    results_to_bytes,
    rows_as_words,
)
from blindeval.data import DataValidationError, export_csv, gen_synthetic, ingest_csv, select_k_best
from blindeval.reference import PlainTree
from blindeval.tree import BINARY, GENERAL, EncryptedDataset, TrainConfig, decrypt_tree, encrypt_tree, predict_rows, train

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_TRUST = 3


def _server_key(path) -> EvaluationKey:
    key = load_key(path)
    if isinstance(key, ClientKey):
        raise TrustBoundaryError(
            f"{path} is a client key; server commands accept only an evaluation key"
        )
    return key


def _client_key(path) -> ClientKey:
    key = load_key(path)
    if not isinstance(key, ClientKey):
        raise TrustBoundaryError(f"{path} is an evaluation key; decryption needs the client key")
    return key


# --------------------------------------------------------------------------
# commands


def cmd_keygen(args) -> int:
    config = SecurityConfig(
        backend=args.backend,
        parameter_preset=args.preset,
        rng_seed=args.seed,
        insecure_test_mode=args.insecure_test_mode,
    )
    pair = keygen(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_key(out / "client.key", pair.client_key)
    save_key(out / "eval.key", pair.evaluation_key)
    print(f"wrote {out / 'client.key'} (keep private) and {out / 'eval.key'} (shareable)")
    return EXIT_OK


def cmd_encrypt_data(args) -> int:
    ck = _client_key(args.client_key)
    client = Client(ck)
    plain = ingest_csv(args.csv, args.label_column, feature_bits=args.word_width)
    if args.select_k_best:
        plain = select_k_best(plain, args.select_k_best)
    rows = [
        [b for v in row for b in client.encrypt_word(int(v), args.word_width)] for row in plain.X
    ]
    labels = [] if args.no_labels else client.encrypt_bits(int(v) for v in plain.y)
    ds = EncryptedDataset(rows, labels, args.count_width or 0)
    Path(args.out).write_bytes(dataset_to_bytes(Evaluator(ck), ds, args.word_width))
    print(f"encrypted {plain.n_rows} rows x {plain.m_features} features ({', '.join(plain.columns)})")
    return EXIT_OK


def cmd_encrypt_model(args) -> int:
    ck = _client_key(args.client_key)
    plain = PlainTree.from_dict(json.loads(Path(args.tree).read_text()))
    tree = encrypt_tree(Client(ck), plain, args.m_features, args.threshold_width or 0)
    Path(args.out).write_bytes(model_to_bytes(Evaluator(ck), tree))
    return EXIT_OK


def cmd_train(args) -> int:
    if args.protocol != BINARY:
        raise ValueError("training grows binary-split trees; use --protocol binary")
    stats = BackendStats()
    ev = Evaluator(_server_key(args.eval_key), stats)
    ds, word_width = dataset_from_bytes(ev, Path(args.data).read_bytes())
    if word_width != 1:
        raise ValueError("training needs a dataset of single-bit features")
    tree = train(ev, ds, TrainConfig(args.max_depth, args.count_width))
    Path(args.out).write_bytes(model_to_bytes(ev, tree))
    stats_path = args.stats or f"{args.out}.stats.json"
    Path(stats_path).write_text(
        stats.to_json(command="train", n_rows=ds.n_rows, m_features=ds.m_features, max_depth=args.max_depth)
    )
    print(f"trained depth-{args.max_depth} tree; stats in {stats_path}")
    return EXIT_OK


def cmd_predict(args) -> int:
    stats = BackendStats()
    ev = Evaluator(_server_key(args.eval_key), stats)
    tree = model_from_bytes(ev, Path(args.model).read_bytes())
    ds, word_width = dataset_from_bytes(ev, Path(args.data).read_bytes())
    if args.protocol != tree.protocol:
        raise ValueError(f"model uses the {tree.protocol} protocol, --protocol says {args.protocol}")
    if tree.protocol == GENERAL:
        if word_width != tree.threshold_width:
            raise ValueError(f"input words are {word_width} bits, model thresholds are {tree.threshold_width}")
        rows = rows_as_words(ds, word_width)
    else:
        if word_width != 1:
            raise ValueError("binary-protocol prediction needs single-bit features")
        rows = ds.features
    preds = predict_rows(ev, tree, rows)
    Path(args.out).write_bytes(results_to_bytes(ev, preds))
    if args.stats:
        Path(args.stats).write_text(stats.to_json(command="predict", n_rows=ds.n_rows))
    print(f"predicted {len(preds)} rows")
    return EXIT_OK


def cmd_decrypt_result(args) -> int:
    ck = _client_key(args.client_key)
    client = Client(ck)
    ev = Evaluator(ck)
    buf = Path(args.input).read_bytes()
    if buf[:4] == MODEL_MAGIC:
        plain = decrypt_tree(client, model_from_bytes(ev, buf))
        text = json.dumps(plain.to_dict(), indent=2, sort_keys=True)
    elif buf[:4] == DATA_MAGIC:
        bits = client.decrypt_bits(results_from_bytes(ev, buf))
        text = "prediction\n" + "".join(f"{b}\n" for b in bits)
    else:
        raise ValueError(f"{args.input} is neither a model nor a result container")
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench_primitives(args) -> int:
    report = bench.bench_primitives(
        args.bits,
        args.backend,
        repeats=args.repeats,
        seed=args.seed,
        insecure_test_mode=args.insecure_test_mode,
    )
    _emit(report, args)
    return EXIT_OK


def cmd_bench_tree(args) -> int:
    report = bench.bench_tree(
        args.depths,
        n=args.rows,
        m=args.features,
        backend=args.backend,
        seed=args.seed,
        insecure_test_mode=args.insecure_test_mode,
        project_depths=args.project,
    )
    _emit(report, args)
    return EXIT_OK


def _emit(report, args):
    report.write(args.json, args.csv)
    if not args.json:
        sys.stdout.write(report.to_json() + "\n")


def cmd_gen_synthetic(args) -> int:
    ds = gen_synthetic(
        args.rows, args.features, planted_feature=args.planted, signal=args.signal, seed=args.seed
    )
    export_csv(ds, args.out)
    print(f"wrote {args.rows} x {args.features} synthetic rows to {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _security_flags(p):
    p.add_argument("--backend", choices=BACKENDS, default="clear")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument(
        "--insecure-test-mode",
        action="store_true",
        help="derive key material from --seed (reproducible, NOT secure)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindeval", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a client key and an evaluation key")
    _security_flags(p)
    p.add_argument("--preset", choices=PRESETS, default="tfhe-128")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt-data", help="encrypt a CSV dataset (client side)")
    p.add_argument("--client-key", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--word-width", type=int, default=1, help="bits per feature cell")
    p.add_argument("--count-width", type=int, default=None)
    p.add_argument("--select-k-best", type=int, default=None, metavar="K",
                   help="keep the K lowest class-loss features before encrypting")
    p.add_argument("--no-labels", action="store_true", help="omit the label column (prediction inputs)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encrypt_data)

    p = sub.add_parser("encrypt-model", help="encrypt a plaintext tree JSON (client side)")
    p.add_argument("--client-key", required=True)
    p.add_argument("--tree", required=True)
    p.add_argument("--m-features", type=int, required=True)
    p.add_argument("--threshold-width", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encrypt_model)

    p = sub.add_parser("train", help="train on encrypted data (server side)")
    p.add_argument("--eval-key", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-depth", type=int, required=True)
    p.add_argument("--count-width", type=int, default=None)
    p.add_argument("--protocol", choices=(BINARY, GENERAL), default=BINARY)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None, help="stats JSON path (default: <out>.stats.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="evaluate an encrypted model on encrypted rows (server side)")
    p.add_argument("--eval-key", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--protocol", choices=(BINARY, GENERAL), default=BINARY)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("decrypt-result", help="decrypt predictions or a model (client side)")
    p.add_argument("--client-key", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_decrypt_result)

    p = sub.add_parser("bench-primitives", help="time compare/select/order")
    _security_flags(p)
    p.add_argument("--bits", type=int, default=4)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--json", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_bench_primitives)

    p = sub.add_parser("bench-tree", help="time training and prediction per depth")
    _security_flags(p)
    p.add_argument("--depths", type=int, nargs="+", default=[1, 2])
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--features", type=int, default=4)
    p.add_argument("--project", type=int, nargs="*", default=[], help="depths to extrapolate to")
    p.add_argument("--json", default=None)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_bench_tree)

    p = sub.add_parser("gen-synthetic", help="write a random binary dataset with a planted feature")
    p.add_argument("--rows", type=int, default=100)
    p.add_argument("--features", type=int, default=4)
    p.add_argument("--planted", type=int, default=0)
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrustBoundaryError as exc:
        print(f"trust boundary violation: {exc}", file=sys.stderr)
        return EXIT_TRUST
    except (DataValidationError, BackendError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

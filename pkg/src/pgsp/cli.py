"""Command-line front end.

Subcommands:

* ``decompose`` - compute the spectral basis for a training file and
  store it in a binary cache;
* ``eval``      - fit on a train file, score against a test file, print
  metrics as JSON;
* ``sweep``     - evaluate a grid of filter-mix weights phi reusing one
  basis, emit CSV;
* ``recommend`` - write per-user top-N recommendations as TSV.

All randomness (eigensolver start vector, validation split) flows from
the single ``--seed``.  Flags win over ``--config`` file entries, which
win over built-in defaults.  Exit codes: 0 success, 1 runtime failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .evaluation import evaluate_model, load_dataset, sweep_phi, write_sweep_csv
from .pipeline import (
    DEFAULT_BATCH_ROWS,
    FilterConfig,
    PgspModel,
    rank_streaming,
    write_recommendations_tsv,
)
from .spectral import save_basis, truncated_eigenbasis

__all__ = ["main", "build_parser"]

_DEFAULTS = {
    "k": 256,
    "phi": 0.3,
    "beta": -0.5,
    "top_n": 20,
    "seed": 0,
    "batch_size": DEFAULT_BATCH_ROWS,
    "tol": 1e-8,
}

_FLOAT_KEYS = {"phi", "beta", "tol", "val_fraction"}
_INT_KEYS = {"k", "top_n", "seed", "batch_size", "threads"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgsp",
        description="Graph-filter collaborative filtering: evaluate, sweep, recommend.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, test=False):
        p.add_argument("--train", required=True, help="training interactions file")
        if test:
            p.add_argument("--test", required=True, help="test interactions file")
        p.add_argument("--k", type=int, help="spectral cut-off rank")
        p.add_argument("--beta", type=float, help="popularity damping exponent (<= 0)")
        p.add_argument("--seed", type=int, help="seed for all randomness")
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--threads", type=int, help="parallelism budget")
        p.add_argument("--basis-cache", dest="basis_cache", help="basis cache file")
        p.add_argument("--config", help="key=value file filling unset flags")

    p_eval = sub.add_parser("eval", help="fit on train, report metrics on test")
    add_common(p_eval, test=True)
    p_eval.add_argument("--phi", type=float, help="linear-filter weight in [0, 1]")
    p_eval.add_argument("--top-n", type=int, dest="top_n", help="metric cut-off K")
    p_eval.add_argument("--out", help="write the JSON report here instead of stdout")
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="evaluate a grid of phi values")
    add_common(p_sweep, test=True)
    p_sweep.add_argument(
        "--phi-grid",
        dest="phi_grid",
        required=True,
        help="grid as start:stop:step (inclusive) or comma-separated values",
    )
    p_sweep.add_argument("--top-n", type=int, dest="top_n", help="metric cut-off K")
    p_sweep.add_argument(
        "--val-fraction",
        type=float,
        dest="val_fraction",
        help="carve this fraction of train as the validation split and evaluate on it",
    )
    p_sweep.add_argument("--out", help="write the CSV here instead of stdout")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_rec = sub.add_parser("recommend", help="export top-N recommendations as TSV")
    add_common(p_rec)
    p_rec.add_argument("--phi", type=float, help="linear-filter weight in [0, 1]")
    p_rec.add_argument("--top-n", type=int, dest="top_n", help="list length per user")
    p_rec.add_argument("--out", help="write the TSV here instead of stdout")
    p_rec.set_defaults(func=_cmd_recommend)

    p_dec = sub.add_parser("decompose", help="compute and cache the spectral basis")
    add_common(p_dec)
    p_dec.add_argument("--tol", type=float, help="eigensolver residual tolerance")
    p_dec.set_defaults(func=_cmd_decompose)

    return parser


def _apply_config(args: argparse.Namespace) -> None:
    """Fill unset flags from the optional config file, then defaults."""
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _read_config(config_path).items():
            attr = key.replace("-", "_")
            if getattr(args, attr, None) is None and hasattr(args, attr):
                if attr in _FLOAT_KEYS:
                    setattr(args, attr, float(raw))
                elif attr in _INT_KEYS:
                    setattr(args, attr, int(raw))
                else:
                    setattr(args, attr, raw)
    for key, value in _DEFAULTS.items():
        if getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, value)
    if getattr(args, "threads", None) is None:
        env = os.environ.get("PGSP_THREADS")
        args.threads = int(env) if env else (os.cpu_count() or 1)


def _read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _parse_phi_grid(spec: str):
    """Parse ``start:stop:step`` (inclusive endpoints) or ``a,b,c``."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad phi grid {spec!r}: expected start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f"bad phi grid {spec!r}: step must be positive")
        count = int(round((stop - start) / step)) + 1
        values = [round(start + i * step, 12) for i in range(count)]
        return [v for v in values if v <= stop + 1e-12]
    return [float(tok) for tok in spec.split(",") if tok.strip()]


def _open_out(path):
    if path is None:
        return sys.stdout, False
    return open(path, "w"), True


def _cmd_eval(args) -> int:
    config = FilterConfig(k=args.k, phi=args.phi, beta=args.beta, top_n=args.top_n)
    t0 = time.perf_counter()
    dataset = load_dataset(args.train, args.test)
    load_ms = (time.perf_counter() - t0) * 1000.0
    report = evaluate_model(
        dataset,
        config,
        seed=args.seed,
        batch_rows=args.batch_size,
        threads=args.threads,
        cache_path=args.basis_cache,
    )
    timings = {"load": load_ms, **report.timings_ms}
    payload = {
        f"recall@{config.top_n}": report.recall,
        f"ndcg@{config.top_n}": report.ndcg,
        "phi": config.phi,
        "k": config.k,
        "beta": config.beta,
        "seed": args.seed,
        "timings_ms": {name: round(v, 3) for name, v in timings.items()},
    }
    fh, close = _open_out(args.out)
    try:
        fh.write(json.dumps(payload) + "\n")
    finally:
        if close:
            fh.close()
    return 0


def _cmd_sweep(args) -> int:
    grid = _parse_phi_grid(args.phi_grid)
    dataset = load_dataset(args.train, args.test)
    split = "test"
    if args.val_fraction is not None:
        dataset = dataset.carve_validation(args.val_fraction, seed=args.seed)
        split = "validation"
    points = sweep_phi(
        dataset,
        grid,
        k=args.k,
        beta=args.beta,
        seed=args.seed,
        metric_k=args.top_n,
        split=split,
        batch_rows=args.batch_size,
        threads=args.threads,
        cache_path=args.basis_cache,
    )
    fh, close = _open_out(args.out)
    try:
        write_sweep_csv(points, fh)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_recommend(args) -> int:
    config = FilterConfig(k=args.k, phi=args.phi, beta=args.beta, top_n=args.top_n)
    dataset = load_dataset(args.train)
    train = dataset.train_matrix()
    model = PgspModel(
        train, config, seed=args.seed, cache_path=args.basis_cache
    )
    recs = rank_streaming(
        model, train, config.top_n, batch_rows=args.batch_size, threads=args.threads
    )
    fh, close = _open_out(args.out)
    try:
        write_recommendations_tsv(recs, fh)
    finally:
        if close:
            fh.close()
    return 0


def _cmd_decompose(args) -> int:
    if not args.basis_cache:
        raise ValueError("decompose requires --basis-cache")
    dataset = load_dataset(args.train)
    train = dataset.train_matrix()
    from .graph import build_augmented_graph, build_normalized_interaction

    graph = build_augmented_graph(build_normalized_interaction(train))
    basis = truncated_eigenbasis(graph, args.k, seed=args.seed, tol=args.tol)
    save_basis(args.basis_cache, basis)
    print(
        f"cached basis: k={basis.k}, dim={basis.dim}, "
        f"top eigenvalue {basis.eigenvalues[0]:.6f} -> {args.basis_cache}"
    )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_config(args)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Each subcommand parses flags, calls into the library and serializes the
result; no numerical work happens here.  JSON outputs are wrapped as
``{"schema_version", "config", "result"}``; CSV outputs start with
``# schema_version=`` and ``# config=`` comment lines.

Exit codes: 0 success, 1 invalid input, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from pathlib import Path
from typing import Sequence

from . import basis, freealg, pathio, regress, signature, stochastic
from .errors import (
    DataError,
    IncompleteSignatureError,
    InvalidInputError,
    InvariantError,
    SingularFitError,
)
from .words import Word, WordSet, prefix_words, suffix_words, words_up_to

SCHEMA_VERSION = 1
SEED_ENV = "SIGBASIS_SEED"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InvalidInputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


# -- output helpers ---------------------------------------------------------------


def _config(args) -> dict:
    skip = {"func", "out", "set"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit_text(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, result) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "config": _config(args), "result": result}
    _emit_text(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _emit_csv(args, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION}\n")
    buf.write(f"# config={json.dumps(_config(args), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    _emit_text(args, buf.getvalue())


def _load_wordset(text: str) -> WordSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"word set is not valid JSON: {exc}") from None
    if isinstance(doc, dict) and "result" in doc and isinstance(doc["result"], dict):
        doc = doc["result"]
    if isinstance(doc, dict) and "word_set" in doc:
        doc = doc["word_set"]
    if not isinstance(doc, dict):
        raise InvalidInputError("word set document must be a JSON object")
    return WordSet.from_json(doc)


def _word_selection(spec: str, N: int, d: int) -> WordSet:
    table = {"all": words_up_to, "prefix": prefix_words, "suffix": suffix_words}
    if spec in table:
        return table[spec](N, d)
    try:
        text = Path(spec).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read word set {spec!r}: {exc}") from None
    B = _load_wordset(text)
    if B.d != d:
        raise InvalidInputError(f"word set has dimension {B.d}, paths have {d}")
    if any(len(w) > N for w in B.words):
        raise InvalidInputError(f"word set exceeds order {N}")
    return B


# -- subcommands ----------------------------------------------------------------------


def cmd_shuffle(args) -> int:
    d = args.dim or max([1] + [int(c) for c in args.w + args.v if c.isdigit()])
    p = freealg.shuffle(Word.parse(args.w, d), Word.parse(args.v, d))
    if args.format == "json":
        _emit_json(args, {"polynomial": str(p), "terms": p.to_json()})
    else:
        _emit_text(args, f"{p}\n")
    return 0


def cmd_basis_gen(args) -> int:
    pad = None
    if args.family.endswith("_padded"):
        pad = basis.random_pad(args.family, args.order, args.dim, random.Random(args.seed))
    B = basis.construct_family(args.family, args.order, args.dim, pad=pad)
    _emit_json(args, B.to_json())
    return 0


def cmd_basis_check(args) -> int:
    if args.set:
        try:
            text = Path(args.set).read_text()
        except OSError as exc:
            raise InvalidInputError(f"cannot read {args.set!r}: {exc}") from None
    else:
        text = sys.stdin.read()
    B = _load_wordset(text)
    N = args.order if args.order is not None else B.N
    cert = basis.is_basis_of_words(B, N)
    filt = basis.necessary_filter(B, N)
    result = cert.to_json()
    result["necessary_filter"] = {"passed": filt.passed, "reason": filt.reason}
    _emit_json(args, result)
    return 0


def cmd_sig_compute(args) -> int:
    paths = pathio.read_paths(args.paths)
    d = paths[0].d
    B = _word_selection(args.words, args.order, d)
    fn = signature.sig_forward if args.direction in ("fwd", "forward") else signature.sig_backward
    results = [fn(p, B) for p in paths]
    words = [str(w) for w in B.ordered()]
    if args.emit == "csv":
        header = ["path"] + words + (["ops"] if args.count_ops else [])
        rows = []
        for i, (sv, ops) in enumerate(results):
            row = [i] + [repr(float(v)) for v in sv.as_array()]
            rows.append(row + ([ops.elementary_ops] if args.count_ops else []))
        _emit_csv(args, header, rows)
    else:
        out = []
        for sv, ops in results:
            item = {"values": sv.to_json()}
            if args.count_ops:
                item["ops"] = ops.elementary_ops
            out.append(item)
        _emit_json(args, {"words": words, "paths": out})
    return 0


def _spec(args) -> stochastic.SdeSpec:
    return stochastic.SdeSpec(args.process, d=args.dim, T=args.horizon)


def cmd_simulate(args) -> int:
    batch = stochastic.simulate(_spec(args), args.steps, args.n, args.seed)
    paths = batch.paths()
    if args.out and not args.out.lower().endswith(".csv"):
        Path(args.out).write_bytes(pathio.encode_paths_binary(paths))
    else:
        _emit_text(args, pathio.format_paths_csv(paths))
    return 0


def cmd_gram(args) -> int:
    batch = stochastic.simulate(_spec(args), args.steps, args.n, args.seed)
    B = _word_selection(args.words, args.order, args.dim)
    report = stochastic.gram_report(batch, B, args.order, workers=args.workers)
    result = report.to_json()
    if args.null_check:
        result["null_direction_residual"] = stochastic.null_direction_residual(report, args.horizon)
    _emit_json(args, result)
    return 0


def cmd_experiment_regression(args) -> int:
    cfg = regress.ExperimentConfig(
        N=args.order, process=args.process, beta=args.beta, n_train=args.n_train,
        n_test=args.n_test, batches=args.batches, seed=args.seed, K=args.steps,
        N_true=args.n_true, d=args.dim, workers=args.workers,
    )
    report = regress.algorithm1(cfg)
    if args.emit == "csv":
        header = ["batch", "mse_all", "mse_suffix", "diff", "lambda_all", "lambda_suffix"]
        rows = [[i, b.mse_all, b.mse_suffix, b.diff, b.lambda_all, b.lambda_suffix]
                for i, b in enumerate(report.batches)]
        _emit_csv(args, header, rows)
    else:
        _emit_json(args, report.to_json(include_timing=not args.no_timing))
    return 0


def cmd_experiment_timing(args) -> int:
    try:
        orders = tuple(int(x) for x in args.orders.split(","))
    except ValueError:
        raise InvalidInputError(f"--orders must be comma-separated integers, got {args.orders!r}") from None
    cfg = regress.TimingConfig(orders=orders, d=args.dim, K=args.steps, n_paths=args.n_paths,
                               n_fit=args.n_fit, repeats=args.repeats, seed=args.seed)
    rows = regress.timing_harness(cfg)
    if args.emit == "csv":
        header = list(rows[0]) if rows else []
        _emit_csv(args, header, [[r[h] for h in header] for r in rows])
    else:
        _emit_json(args, rows)
    return 0


# -- parser -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"random seed (default ${SEED_ENV} or 0)")
    common.add_argument("--workers", type=int, default=None, help="parallel workers for batch work")
    common.add_argument("--out", default=None, help="write output to this file instead of stdout")

    proc = _Parser(add_help=False)
    proc.add_argument("--process", choices=["bm", "ou"], default="bm")
    proc.add_argument("--dim", type=int, default=1)
    proc.add_argument("--steps", type=int, default=100)
    proc.add_argument("--horizon", type=float, default=1.0)

    p = _Parser(prog="sigbasis", description="Bases of signature words: tools and experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("shuffle", parents=[common], help="shuffle product of two words")
    s.add_argument("w")
    s.add_argument("v")
    s.add_argument("--dim", type=int, default=None)
    s.add_argument("--format", choices=["text", "json"], default="text")
    s.set_defaults(func=cmd_shuffle)

    b = sub.add_parser("basis", help="generate or certify bases of words")
    bsub = b.add_subparsers(dest="action", required=True, parser_class=_Parser)
    g = bsub.add_parser("gen", parents=[common])
    g.add_argument("--family", choices=["prefix", "suffix", "prefix_padded", "suffix_padded"], required=True)
    g.add_argument("--order", type=int, required=True)
    g.add_argument("--dim", type=int, default=1)
    g.set_defaults(func=cmd_basis_gen)
    c = bsub.add_parser("check", parents=[common])
    c.add_argument("--order", type=int, default=None)
    c.add_argument("--set", default=None, help="word set JSON file (default: stdin)")
    c.set_defaults(func=cmd_basis_check)

    sg = sub.add_parser("sig", help="signature computation")
    sgsub = sg.add_subparsers(dest="action", required=True, parser_class=_Parser)
    sc = sgsub.add_parser("compute", parents=[common])
    sc.add_argument("--paths", required=True, help="path file (.csv or binary)")
    sc.add_argument("--order", type=int, required=True)
    sc.add_argument("--words", default="all", help="all | prefix | suffix | word-set JSON file")
    sc.add_argument("--direction", choices=["fwd", "bwd", "forward", "backward"], default="fwd")
    sc.add_argument("--emit", choices=["json", "csv"], default="json")
    sc.add_argument("--count-ops", action="store_true")
    sc.set_defaults(func=cmd_sig_compute)

    sm = sub.add_parser("simulate", parents=[common, proc], help="sample SDE paths")
    sm.add_argument("--n", type=int, default=1)
    sm.set_defaults(func=cmd_simulate)

    gr = sub.add_parser("gram", parents=[common, proc], help="Gram matrix of signature features")
    gr.add_argument("--n", type=int, default=5000)
    gr.add_argument("--order", type=int, required=True)
    gr.add_argument("--words", default="suffix", help="all | prefix | suffix | word-set JSON file")
    gr.add_argument("--null-check", action="store_true",
                    help="compare the null direction with the exact time-padding relations")
    gr.set_defaults(func=cmd_gram)

    ex = sub.add_parser("experiment", help="regression and timing experiments")
    exsub = ex.add_subparsers(dest="action", required=True, parser_class=_Parser)
    er = exsub.add_parser("regression", parents=[common, proc])
    er.add_argument("--order", type=int, required=True)
    er.add_argument("--beta", choices=list(regress.BETA_KINDS), default="ones")
    er.add_argument("--n-train", type=int, default=500)
    er.add_argument("--n-test", type=int, default=10_000)
    er.add_argument("--batches", type=int, default=20)
    er.add_argument("--n-true", type=int, default=10)
    er.add_argument("--emit", choices=["json", "csv"], default="json")
    er.add_argument("--no-timing", action="store_true", help="omit wall-clock fields (byte-stable output)")
    er.set_defaults(func=cmd_experiment_regression)
    et = exsub.add_parser("timing", parents=[common])
    et.add_argument("--orders", default="2,3,4,5,6")
    et.add_argument("--dim", type=int, default=1)
    et.add_argument("--steps", type=int, default=100)
    et.add_argument("--n-paths", type=int, default=1000)
    et.add_argument("--n-fit", type=int, default=500)
    et.add_argument("--repeats", type=int, default=5)
    et.add_argument("--emit", choices=["json", "csv"], default="json")
    et.set_defaults(func=cmd_experiment_timing)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "seed", 0) is None:
            args.seed = _default_seed()
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except (InvalidInputError, IncompleteSignatureError, DataError, SingularFitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

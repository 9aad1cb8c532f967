"""Command-line interface: ``spsk <command> [options]``.

Exit status: 0 success, 1 a verification check FAILed, 2 usage error,
3 data error (unreadable or malformed input, mismatched sketches).
Global options may appear before or after the subcommand.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io as _io
import itertools
import json
import os
import sys
import warnings

from . import ann, bcs, harness, rcs
from .errors import DataError, DimensionMismatch, ParameterError, ProvenanceMismatch
from .io import load_sketch_set, parse_sparse_file, save_sketch_set, sketch_set
from .mapping import SEED_MAX, new_bucket_map, new_sign_vector

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
SEED_ENV = "SPSK_SEED"
INDEX_VERSION = 1


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _global_options(parser, suppress: bool):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=_seed, help=f"u64 seed (default ${SEED_ENV} or 0)", **kw)
    g.add_argument("--input", help="input file", **kw)
    g.add_argument("--output", help="output file (default stdout where applicable)", **kw)
    g.add_argument("--trials", type=int, **kw)
    g.add_argument("--runs", type=int, help="repetitions (bench)", **kw)
    g.add_argument("--n", type=int, help="dataset size", **kw)
    g.add_argument("--d", type=int, help="dimension (bench)", **kw)
    g.add_argument("--psi", type=int, help="sparsity bound", **kw)
    g.add_argument("--r", type=float, help="distance / inner-product threshold", **kw)
    g.add_argument("--eps", type=float, **kw)
    g.add_argument("--c", type=float, help="ANN approximation factor", **kw)
    g.add_argument("--k", type=int, help="k for k-way inner products", **kw)
    g.add_argument("--cap-psi", dest="cap_psi", type=float, help="squared-norm bound Psi", **kw)
    g.add_argument("--scheme", type=str.upper, choices=("BIN", "REAL"), **kw)
    g.add_argument("--buckets", type=int, help="sketch length N (overrides the planner)", **kw)
    g.add_argument("--replication", type=int, help="replication R for binary sketches", **kw)
    g.add_argument("--query", help="query sketch-set file (index query)", **kw)
    g.add_argument("--format", choices=("table", "csv"), **kw)
    g.add_argument("--timing", action="store_true", help="add wall-clock column to reports", **kw)


GLOBAL_DEFAULTS = dict(
    input=None,
    output=None,
    trials=None,
    runs=None,
    n=None,
    d=None,
    psi=None,
    r=None,
    eps=None,
    c=None,
    k=None,
    cap_psi=None,
    scheme=None,
    buckets=None,
    replication=None,
    query=None,
    format="table",
    timing=False,
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)

    p = argparse.ArgumentParser(prog="spsk", description="Similarity-preserving sparse sketches.")
    _global_options(p, suppress=True)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    plan = sub.add_parser("plan", parents=[common], help="sketch-length planners")
    plan.add_argument("kind", choices=("binary", "pairwise", "real"))

    sub.add_parser("sketch", parents=[common], help="compress a sparse vector file into a sketch set")

    for name, helptext in (
        ("dist", "rescaled sketch Hamming distance (BIN)"),
        ("ip", "sketch inner product (BIN or REAL)"),
        ("l2", "sketch squared Euclidean distance (REAL)"),
    ):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("ids", nargs="*", help="two record ids; all pairs when omitted")

    kw = sub.add_parser("kway", parents=[common], help="k-way sketch inner product (REAL)")
    kw.add_argument("ids", nargs="+", help="record ids (at least two)")

    index = sub.add_parser("index", parents=[common], help="LSH index over a binary sketch set")
    index.add_argument("action", choices=("build", "query"))

    bench = sub.add_parser("bench", parents=[common], help="run a verification experiment")
    bench.add_argument("tag", choices=harness.TAGS)
    return p


def parse_args(argv=None) -> argparse.Namespace:
    args = build_parser().parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    if not hasattr(args, "seed"):
        env = os.environ.get(SEED_ENV)
        try:
            args.seed = _seed(env) if env not in (None, "") else 0
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"${SEED_ENV}: {exc}") from None
    return args


# ---------------------------------------------------------------- helpers


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + m.replace("_", "-") for m in missing)
        raise UsageError(f"{args.command} needs {flags}")


def _emit(args, rows, header):
    """Print key/value rows as an aligned table or CSV."""
    if args.format == "csv":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        text = buf.getvalue()
    else:
        body = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
        widths = [max(len(line[i]) for line in body) for i in range(len(header))]
        text = "\n".join("  ".join(c.ljust(w) for c, w in zip(line, widths)).rstrip() for line in body) + "\n"
    _write_text(args.output, text)


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _num(x):
    return repr(float(x)) if isinstance(x, float) else str(x)


# ---------------------------------------------------------------- commands


def cmd_plan(args) -> int:
    if args.kind == "binary":
        _require(args, "n", "psi", "r", "eps")
        plan = bcs.plan_binary(args.n, args.psi, _int_r(args), args.eps)
        rows = [
            ("N", plan.n_buckets),
            ("R", plan.replication),
            ("regime", plan.regime.value),
        ]
    elif args.kind == "pairwise":
        _require(args, "r")
        plan = bcs.plan_pairwise_hamming(_int_r(args))
        rows = [("N", plan.n_buckets), ("R", plan.replication), ("regime", plan.regime.value)]
    else:
        _require(args, "cap_psi", "eps")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plan = rcs.plan_real(args.cap_psi, args.eps, 2 if args.k is None else args.k)
        rows = [("N", plan.n_buckets), ("k", plan.k)]
    rows += [("warning", w) for w in plan.warnings]
    _emit(args, rows, ("field", "value"))
    return EXIT_OK


def _int_r(args) -> int:
    if args.r != int(args.r):
        raise ParameterError(f"r must be an integer here, got {args.r}")
    return int(args.r)


def cmd_sketch(args) -> int:
    _require(args, "input", "output", "scheme")
    data = parse_sparse_file(args.input, args.scheme)
    if not data.vectors:
        raise DataError(f"{args.input}: no vectors")
    if args.scheme == "BIN":
        if args.buckets is not None:
            N, R = args.buckets, 1 if args.replication is None else args.replication
        else:
            _require(args, "r", "eps")
            n = args.n if args.n is not None else max(2, len(data.vectors))
            psi = args.psi if args.psi is not None else max(1, int(data.bound))
            if data.bound > psi:
                raise DataError(f"realized sparsity {data.bound} exceeds --psi {psi}")
            plan = bcs.plan_binary(n, psi, _int_r(args), args.eps)
            N, R = plan.n_buckets, plan.replication
        bucket_map = new_bucket_map(data.d, N, R, args.seed)
        sketches = bcs.compress_binary_batch(data.vectors, bucket_map)
    else:
        if args.replication not in (None, 1):
            raise UsageError("real sketches do not take --replication")
        if args.buckets is not None:
            N = args.buckets
        else:
            _require(args, "eps")
            cap = args.cap_psi if args.cap_psi is not None else data.bound
            if data.bound > cap:
                raise DataError(f"realized norm bound {data.bound} exceeds --cap-psi {cap}")
            if not cap > 0:
                raise DataError("all vectors are zero; give --buckets explicitly")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                N = rcs.plan_real(cap, args.eps, 2 if args.k is None else args.k).n_buckets
        bucket_map = new_bucket_map(data.d, N, 1, args.seed)
        signs = new_sign_vector(data.d, args.seed)
        sketches = rcs.compress_real_batch(data.vectors, bucket_map, signs)
    save_sketch_set(args.output, sketch_set(sketches, data.d))
    sys.stderr.write(f"wrote {len(sketches)} {args.scheme} sketches, N={N}, to {args.output}\n")
    return EXIT_OK


def _load(args, scheme=None):
    _require(args, "input")
    fs = load_sketch_set(args.input)
    if scheme is not None and fs.scheme != scheme:
        raise DataError(f"{args.command} needs {scheme} sketches, {args.input} holds {fs.scheme}")
    return fs


def _select(fs, ids):
    lookup = {ident: i for i, ident in enumerate(fs.ids)}
    out = []
    for ident in ids:
        if ident not in lookup:
            raise DataError(f"no record with id {ident!r}")
        out.append(lookup[ident])
    return out


def _pairwise(args, fs, fn, name) -> int:
    if args.ids and len(args.ids) != 2:
        raise UsageError(f"{args.command} takes exactly two ids (or none for all pairs)")
    if args.ids:
        pairs = [tuple(_select(fs, args.ids))]
    else:
        pairs = list(itertools.combinations(range(len(fs.sketches)), 2))
    rows = [(fs.ids[i], fs.ids[j], _num(fn(fs.sketches[i], fs.sketches[j]))) for i, j in pairs]
    _emit(args, rows, ("a", "b", name))
    return EXIT_OK


def cmd_dist(args) -> int:
    return _pairwise(args, _load(args, "BIN"), bcs.hamming_rescaled, "hamming")


def cmd_ip(args) -> int:
    fs = _load(args)
    fn = bcs.inner_product_binary if fs.scheme == "BIN" else rcs.ip
    return _pairwise(args, fs, fn, "ip")


def cmd_l2(args) -> int:
    return _pairwise(args, _load(args, "REAL"), rcs.sq_euclidean, "sq_euclidean")


def cmd_kway(args) -> int:
    fs = _load(args, "REAL")
    if len(args.ids) < 2:
        raise UsageError("kway needs at least two ids")
    idx = _select(fs, args.ids)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value = rcs.kway_ip([fs.sketches[i] for i in idx])
    rows = [("kway_ip", _num(value))] + [("warning", str(w.message)) for w in caught]
    _emit(args, rows, ("field", "value"))
    return EXIT_OK


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cmd_index(args) -> int:
    if args.action == "build":
        _require(args, "input", "output", "r", "c")
        fs = _load(args, "BIN")
        n = args.n if args.n is not None else max(2, len(fs.sketches))
        params = ann.lsh_params(n, args.r, args.c, fs.n_buckets, fs.replication)
        ann.build_index(fs.sketches, params, args.seed)  # validates the set
        doc = {
            "format": "spsk-index",
            "version": INDEX_VERSION,
            "sketches": os.path.abspath(args.input),
            "sha256": _sha256(args.input),
            "seed": args.seed,
            "n": n,
            "r": args.r,
            "c": args.c,
            "K": params.K,
            "L": params.L,
        }
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        sys.stderr.write(f"index over {len(fs.sketches)} sketches: K={params.K}, L={params.L}\n")
        return EXIT_OK

    _require(args, "input", "query")
    try:
        with open(args.input, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{args.input}: not an index file ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict) or doc.get("format") != "spsk-index":
        raise DataError(f"{args.input}: not an index file")
    if doc.get("version") != INDEX_VERSION:
        raise DataError(f"{args.input}: index version {doc.get('version')} is not supported")
    if _sha256(doc["sketches"]) != doc["sha256"]:
        raise DataError(f"sketch set {doc['sketches']} changed since the index was built")
    fs = load_sketch_set(doc["sketches"])
    params = ann.lsh_params(doc["n"], doc["r"], doc["c"], fs.n_buckets, fs.replication)
    index = ann.build_index(fs.sketches, params, doc["seed"])
    queries = load_sketch_set(args.query)
    if queries.scheme != "BIN":
        raise DataError("index queries must be binary sketches")
    rows = []
    for ident, q in zip(queries.ids, queries.sketches):
        hit, checked = ann.query_with_stats(index, q, doc["r"], doc["c"])
        if hit is None:
            rows.append((ident, "", "", checked))
        else:
            rows.append((ident, fs.ids[hit], _num(bcs.hamming_rescaled(q, fs.sketches[hit])), checked))
    _emit(args, rows, ("query", "match", "hamming", "checked"))
    return EXIT_OK


def cmd_bench(args) -> int:
    corpus = None
    if args.input is not None:
        corpus = tuple(parse_sparse_file(args.input, "BIN").vectors)
    cfg = harness.ExperimentConfig(
        args.tag,
        seed=args.seed,
        n=args.n,
        d=args.d,
        psi=args.psi,
        r=None if args.r is None else _int_r(args),
        eps=args.eps,
        k=args.k,
        c=args.c,
        cap_psi=args.cap_psi,
        N=args.buckets,
        trials=args.trials,
        runs=args.runs,
        corpus=corpus,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = harness.run_experiment(cfg)
    if args.format == "csv":
        text = report.to_csv(timing=args.timing)
    else:
        text = report.to_table(timing=args.timing) + "\n"
    _write_text(args.output, text)
    return EXIT_OK if report.passed else EXIT_FAIL


COMMANDS = {
    "plan": cmd_plan,
    "sketch": cmd_sketch,
    "dist": cmd_dist,
    "ip": cmd_ip,
    "l2": cmd_l2,
    "kway": cmd_kway,
    "index": cmd_index,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse: --help exits 0, errors exit 2
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        sys.stderr.write(f"spsk: error: {exc}\n")
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"spsk {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except (DataError, DimensionMismatch, ProvenanceMismatch, OSError, KeyError) as exc:
        sys.stderr.write(f"spsk {args.command}: data error: {exc}\n")
        return EXIT_DATA
    except ParameterError as exc:
        sys.stderr.write(f"spsk {args.command}: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

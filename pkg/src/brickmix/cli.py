"""Command-line front end: ``brickmix <subcommand> [flags]``.

Reports go to ``--out`` (or stdout) as JSON or CSV with a header carrying the
tool version, the configuration, the seed, a timestamp and the quantity
reported. Circuits are written in the bare circuit schema. Errors are one JSON
line on stderr; exit codes are 2 for configuration errors, 3 for capacity
errors and 4 for model violations.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import (B0, TAGS_1D, TAGS_2D, TAGS_WINDOW, collision_witness_stats, escape_probability,
                       kwise_epsilon_exact, mixing_curve, product_bound_check)
from .architectures import (KINDS, ArchDescriptor, all_windows, circuit_stats, derive_rng, nn_windows,
                            recommend_rounds, sample_circuit)
from .bitcore import BitString, CharacterIndex, pack_tuple
from .errors import BrickmixError, CapacityError, ConfigError, ModelError
from .gates import Circuit, circuit_apply, circuit_invert
from .walkops import (DENSE_CAP, EXACT_CAP, character_matrix, descriptor_operator, fourier_image,
                      op_2d, op_brickwork_layer, op_gate_average, op_mix_Q, op_mix_R, op_nachtergaele,
                      op_Q, op_R, operator_norm, spectral_gap)

WALKS = ("rfull", "rmix", "qfull", "qmix", "fullrandom", "nn", "brickwork", "gr", "gc", "g", "grgc",
         "grcgr-minus-g", "q-hybrid", "nachtergaele", "arch")

__all__ = ["main", "run", "recommend_rounds"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--arch", choices=KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--side", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--t-max", type=int)
    p.add_argument("--gate-set", choices=("s8", "des2"), default="des2")
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=("dense", "power"))
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    # architecture details
    p.add_argument("--base", choices=("fullyrandom", "nn1d", "brickwork1d"), default="brickwork1d")
    p.add_argument("--base-t", type=int, default=1)
    p.add_argument("--level-t", help="comma-separated round counts for lattice levels 2..dims")
    # walk and experiment details
    p.add_argument("--walk", choices=WALKS)
    p.add_argument("--m", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--circuit")
    p.add_argument("--input")
    p.add_argument("--start", help="comma-separated bit strings, one per tuple entry")
    p.add_argument("--target", choices=sorted(set(TAGS_1D + TAGS_WINDOW + TAGS_2D + ("D",))))
    p.add_argument("--window", help="comma-separated wires for window regions")
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--trials", type=int)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--exact", action="store_true", help="rational arithmetic where supported")
    p.add_argument("--symmetry", action="store_true", help="sweep symmetry orbit representatives only")
    p.add_argument("--max-N", type=int, default=64)
    p.add_argument("--epsilon", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="brickmix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("sample", "eval", "invert", "stats", "gap", "norm", "fourier-check", "kwise", "mix",
                 "escape", "collision", "bounds", "rounds"):
        _common(sub.add_parser(name))
    return parser


# ---------------------------------------------------------------------------
# Builders from flags


def _need(args, *names):
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name) is None]
    if missing:
        raise ConfigError(f"{args.command} requires {', '.join(missing)}")


def _seed(args) -> int:
    if args.seed is None:
        raise ConfigError(f"{args.command} is randomized and requires --seed")
    return args.seed


def descriptor_from_args(args, t: Optional[int] = None) -> ArchDescriptor:
    _need(args, "arch")
    t = args.t if t is None else t
    if args.arch in ("lattice2d", "latticed"):
        if args.side is None and args.n is None:
            raise ConfigError(f"{args.arch} requires --side or --n")
        dims = 2 if args.arch == "lattice2d" else args.dims
        if args.arch == "latticed" and dims is None:
            raise ConfigError("latticed requires --dims")
        side = args.side if args.side is not None else round(args.n ** (1.0 / dims))
        n = args.n if args.n is not None else side ** dims
        base = ArchDescriptor(args.base, side, args.base_t, args.gate_set)
        level_t = tuple(int(v) for v in args.level_t.split(",")) if args.level_t else None
        if args.arch == "lattice2d" and t is None:
            raise ConfigError("lattice2d requires --t")
        return ArchDescriptor(args.arch, n, t, args.gate_set, side=side,
                              dims=dims if args.arch == "latticed" else None, base=base, level_t=level_t)
    _need(args, "n")
    if t is None:
        raise ConfigError(f"{args.arch} requires --t")
    return ArchDescriptor(args.arch, args.n, t, args.gate_set)


def _grid_side(args) -> int:
    if args.side is not None:
        return args.side
    if args.n is not None:
        side = round(args.n ** 0.5)
        if side * side == args.n:
            return side
    raise ConfigError("grid walks require --side")


def build_walk(args):
    """The operator named by ``--walk`` (or the one-round operator of ``--arch``)."""
    walk = args.walk or ("arch" if args.arch else None)
    if walk is None:
        raise ConfigError(f"{args.command} requires --walk or --arch")
    _need(args, "k")
    k, gs = args.k, args.gate_set
    if walk in ("gr", "gc", "g", "grgc", "grcgr-minus-g"):
        side = _grid_side(args)
        if walk in ("gr", "gc", "g"):
            return op_2d(walk.upper(), side, k)
        gr, gc = op_2d("GR", side, k), op_2d("GC", side, k)
        if walk == "grgc":
            return gr @ gc
        return gr @ gc @ gr - op_2d("G", side, k)
    if walk in ("q-hybrid", "nachtergaele"):
        _need(args, "m")
        if walk == "q-hybrid":
            return op_mix_Q(args.m, args.m - 1, k) - op_Q(args.m, range(1, args.m + 1), k)
        _need(args, "ell")
        return op_nachtergaele(args.m, args.ell, k)
    if walk == "arch":
        desc = descriptor_from_args(args, t=1 if args.arch in ("fullyrandom", "nn1d", "brickwork1d") else None)
        return descriptor_operator(desc, k)
    _need(args, "n")
    n = args.n
    if walk == "rfull":
        return op_R(n, range(1, n + 1), k)
    if walk == "qfull":
        return op_Q(n, range(1, n + 1), k)
    if walk in ("rmix", "qmix"):
        _need(args, "m")
        return (op_mix_R if walk == "rmix" else op_mix_Q)(n, args.m, k)
    if walk == "fullrandom":
        return op_gate_average(gs, all_windows(n), n, k)
    if walk == "nn":
        return op_gate_average(gs, nn_windows(n), n, k)
    return op_brickwork_layer(n, k, gs)


def _start_index(args) -> int:
    _need(args, "start")
    return pack_tuple([BitString.from_str(s) for s in args.start.split(",")])


# ---------------------------------------------------------------------------
# Output


def _timestamp() -> Optional[str]:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _config(args) -> dict:
    return {key: value for key, value in sorted(vars(args).items())}


def _header(args, argv, quantity: str) -> dict:
    return {"tool": "brickmix", "version": __version__, "subcommand": args.command, "quantity": quantity,
            "argv": list(argv), "config": _config(args), "seed": args.seed, "wall_clock": _timestamp()}


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


class Output:
    def __init__(self, args, argv):
        self.args, self.argv = args, argv

    def _write(self, text: str):
        if self.args.out:
            Path(self.args.out).write_text(text)
        else:
            sys.stdout.write(text)

    def report(self, quantity: str, result, rows: Optional[list] = None, fields: Optional[Sequence] = None):
        header = _header(self.args, self.argv, quantity)
        if self.args.format == "csv" and rows is not None:
            buf = io.StringIO()
            buf.write("# " + json.dumps(header, sort_keys=True, default=_jsonable) + "\n")
            writer = csv.DictWriter(buf, fieldnames=list(fields or rows[0].keys()), lineterminator="\n",
                                    extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _cell(v) for key, v in row.items()})
            self._write(buf.getvalue())
        else:
            doc = {"header": header, "result": result}
            if rows is not None and "table" not in (result or {}):
                doc["table"] = rows
            self._write(json.dumps(doc, indent=2, default=_jsonable) + "\n")

    def figure(self, fn, *fargs, **kwargs):
        if self.args.out:
            fn(*fargs, Path(self.args.out).with_suffix(".png"), **kwargs)

    def circuit(self, c: Circuit):
        self._write(c.to_json() + "\n")


def _cell(v):
    if isinstance(v, Fraction):
        return str(v)
    if v is None:
        return ""
    return v


# ---------------------------------------------------------------------------
# Subcommands


def _load_circuit(args) -> Circuit:
    _need(args, "circuit")
    try:
        return Circuit.from_json(Path(args.circuit).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read circuit: {exc}") from exc
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"malformed circuit file: {exc}") from exc


def cmd_sample(args, out: Output):
    desc = descriptor_from_args(args)
    seed = _seed(args)
    out.circuit(sample_circuit(desc, derive_rng(seed, 0), seed=str(seed)))


def cmd_eval(args, out: Output):
    c = _load_circuit(args)
    _need(args, "input")
    y = circuit_apply(c, BitString.from_str(args.input))
    out.report("circuit output", {"input": args.input, "output": str(y)})


def cmd_invert(args, out: Output):
    out.circuit(circuit_invert(_load_circuit(args)))


def cmd_stats(args, out: Output):
    out.report("circuit size, depth and wire coverage", circuit_stats(_load_circuit(args)).to_dict())


def _report_value(report) -> dict:
    d = report.to_dict()
    d["value_raw"] = d["value"]
    d["value"] = round(d["value"], 12)
    return d


def cmd_gap(args, out: Output):
    if args.method == "power":
        _seed(args)
    op = build_walk(args)
    report = spectral_gap(op, method=args.method, tol=args.tol, seed=args.seed or 0)
    out.report("spectral gap of the symmetrized walk off its ground space", _report_value(report),
               rows=[_report_value(report)])


def cmd_norm(args, out: Output):
    if args.method == "power":
        _seed(args)
    op = build_walk(args)
    report = operator_norm(op, method=args.method, tol=args.tol, seed=args.seed or 0)
    out.report("operator norm (largest singular value)", _report_value(report), rows=[_report_value(report)])


def cmd_fourier(args, out: Output):
    _need(args, "m", "k")
    m, k = args.m, args.k
    op = op_mix_Q(m, m - 1, k) - op_Q(m, range(1, m + 1), k)
    N = op.N
    exact = N <= EXACT_CAP
    C = None if exact or N > DENSE_CAP else character_matrix(op)
    rows = []
    for mask in range(N):
        chi = CharacterIndex.from_mask(mask, m, k)
        expected = Fraction(1, m) if len(chi.union()) == 1 else Fraction(0)
        if exact:
            image = fourier_image(op, chi, exact=True)
            value = image.get(chi, Fraction(0))
            off = max((abs(v) for key, v in image.items() if key != chi), default=Fraction(0))
            ok = value == expected and off == 0
        else:
            if C is not None:
                col = C[:, mask]
                value = float(col[mask])
                off = float(np.abs(np.delete(col, mask)).max()) if N > 1 else 0.0
            else:
                image = fourier_image(op, chi, exact=False)
                value = image.get(chi, 0.0)
                off = max((abs(v) for key, v in image.items() if key != chi), default=0.0)
            ok = abs(value - float(expected)) <= 1e-12 and off <= 1e-12
        rows.append({"chi": str(chi), "union_size": len(chi.union()), "eigenvalue": value,
                     "eigenvalue_float": float(value), "expected": expected, "offdiag_max": off, "ok": ok})
    result = {"m": m, "k": k, "mode": "exact" if exact else "float", "all_ok": all(r["ok"] for r in rows),
              "num_characters": N}
    fields = ["chi", "union_size", "eigenvalue", "eigenvalue_float", "expected", "offdiag_max", "ok"]
    out.report("character eigenvalues of Q_{m,m-1,k} - Q_{m,m,k}", result, rows=rows, fields=fields)


def _kwise_operator(args):
    """One-round operator plus the number of rounds to apply."""
    if args.walk:
        return build_walk(args), 1 if args.t is None else args.t
    _need(args, "k")
    desc = descriptor_from_args(args)
    if desc.kind in ("fullyrandom", "nn1d", "brickwork1d"):
        one = descriptor_from_args(args, t=1)
        return descriptor_operator(one, args.k), desc.rounds
    return descriptor_operator(desc, args.k), 1


def cmd_kwise(args, out: Output):
    from .plotting import plot_kwise

    op, t = _kwise_operator(args)
    report = kwise_epsilon_exact(op, t=t, exact=args.exact, symmetry=args.symmetry)
    rows = report.rows()
    out.report("epsilon of approximate k-wise independence", report.to_dict(), rows=rows,
               fields=list(rows[0].keys()))
    out.figure(plot_kwise, report, title=f"n={op.n}, k={op.k}, t={t}")


def cmd_mix(args, out: Output):
    from .plotting import plot_mixing

    _need(args, "t_max")
    if args.walk:
        op = build_walk(args)
    else:
        _need(args, "k")
        kind_1d = args.arch in ("fullyrandom", "nn1d", "brickwork1d")
        op = descriptor_operator(descriptor_from_args(args, t=1 if kind_1d else None), args.k)
    curve = mixing_curve(op, args.t_max, symmetry=args.symmetry)
    result = {"gap": curve.gap, "distinct_size": curve.distinct_size,
              "envelope_holds": all(e <= v for e, v in zip(curve.epsilon, curve.envelope)),
              "non_increasing": all(b <= a for a, b in zip(curve.epsilon, curve.epsilon[1:]))}
    out.report("mixing curve epsilon(t) with spectral envelope", result, rows=curve.rows(),
               fields=["t", "epsilon", "envelope"])
    out.figure(plot_mixing, curve, title=f"n={op.n}, k={op.k}")


def cmd_escape(args, out: Output):
    _need(args, "target")
    op = build_walk(args)
    x = _start_index(args)
    window = [int(a) for a in args.window.split(",")] if args.window else None
    exact = escape_probability(op, x, args.target, mode="exact", window=window,
                               exact_rational=args.exact and op.N <= EXACT_CAP)
    row = {"target": args.target, "start": args.start, "exact": exact}
    if args.mode == "mc":
        _need(args, "trials")
        est = escape_probability(op, x, args.target, mode="mc", trials=args.trials, seed=_seed(args),
                                 confidence=args.confidence, window=window)
        row.update({"estimate": est.estimate, "ci_lo": est.ci_lo, "ci_hi": est.ci_hi,
                    "trials": est.trials, "seed": est.seed})
    fields = ["target", "start", "exact", "estimate", "ci_lo", "ci_hi", "trials", "seed"]
    out.report("one-step escape probability into a region", row, rows=[row], fields=fields)


def cmd_collision(args, out: Output):
    from .plotting import plot_collision

    _need(args, "side", "k", "trials")
    start = _start_index(args) if args.start else None
    stats = collision_witness_stats(args.side, args.k, args.trials, _seed(args), start=start,
                                    confidence=args.confidence)
    fields = ["quantity", "pair", "value", "estimate", "ci_lo", "ci_hi", "trials", "seed", "exact"]
    out.report("row-pass witness distances and collision events", {"side": args.side, "k": args.k,
               "trials": args.trials, "start": stats.start}, rows=stats.rows, fields=fields)
    out.figure(plot_collision, stats)


def cmd_bounds(args, out: Output):
    rows = []
    for N in range(1, args.max_N + 1):
        k = 0
        while k * k <= N:
            chk = product_bound_check(N, k)
            rows.append({"N": N, "k": k, "lhs": chk.lhs, "rhs": chk.rhs, "holds": chk.holds})
            k += 1
    out.report("sampling without versus with replacement product bound",
               {"max_N": args.max_N, "all_hold": all(r["holds"] for r in rows), "checked": len(rows)},
               rows=rows, fields=["N", "k", "lhs", "rhs", "holds"])


def cmd_rounds(args, out: Output):
    _need(args, "k", "epsilon", "side")
    t, terms = recommend_rounds(args.k, args.epsilon, args.side)
    out.report("recommended lattice round count", {"t": t, **terms})


COMMANDS = {"sample": cmd_sample, "eval": cmd_eval, "invert": cmd_invert, "stats": cmd_stats,
            "gap": cmd_gap, "norm": cmd_norm, "fourier-check": cmd_fourier, "kwise": cmd_kwise,
            "mix": cmd_mix, "escape": cmd_escape, "collision": cmd_collision, "bounds": cmd_bounds,
            "rounds": cmd_rounds}


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _thread_limit():
    threads = os.environ.get("BRICKMIX_THREADS")
    if not threads:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(threads)))


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        with _thread_limit():
            COMMANDS[args.command](args, Output(args, argv))
    except CapacityError as exc:
        return _fail("capacity", str(exc), 3)
    except ModelError as exc:
        return _fail("model", str(exc), 4)
    except (ConfigError, BrickmixError, ValueError) as exc:
        return _fail("config", str(exc), 2)
    return 0


def main() -> None:
    sys.exit(run())

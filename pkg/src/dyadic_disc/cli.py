"""Command-line front end: dyadic-disc <command> [options].

Every run writes one JSON report (stdout unless --out is given) whose
"config" block echoes the fully resolved options, so a report can be
reproduced from itself.  Worker counts and output paths are left out of the
echo because they never change results.

Exit codes: 0 success, 1 a checked property was violated, 2 usage or
input errors, 3 a feasibility guard refused the computation.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import serialization
from .decomposition import verify_decomposition
from .discrepancy import INF, local_discrepancy, lq, lq_grid
from .errors import CertificationError, GuardError
from .mean import OBJECTIVES, mean_lq_multi, shift_search
from .pointsets import (
    check_net,
    generate_digital_net,
    log2_exact,
    net_family,
    random_point_set,
    read_matrices,
    read_point_set,
    write_point_set,
)
from .rademacher import RademacherPolynomial, khinchin_check
from .theorems import THEOREMS, verify_theorem

THREADS_ENV = "DYADIC_DISC_THREADS"
NOT_ECHOED = {"threads", "out", "csv", "config", "points", "func", "command"}
FAMILIES = ("bitrev", "sobol", "identity", "grid")


class UsageError(Exception):
    pass


# argument types ----------------------------------------------------------

def parse_q(text: str):
    t = text.strip().lower()
    if t in ("inf", "infinity", "oo"):
        return INF
    v = float(Fraction(t))
    if v <= 0:
        raise argparse.ArgumentTypeError(f"q must be positive, got {text}")
    return int(v) if v.is_integer() else v


def q_list(text: str) -> list:
    try:
        return [parse_q(t) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"malformed q list {text!r}")


def int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer list {text!r}")


def anchor(text: str) -> list[Fraction]:
    try:
        return [Fraction(t) for t in text.split(",")]
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"malformed anchor {text!r}")


def boolean(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# parser --------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--out", help="JSON report path (default stdout)")
    p.add_argument("--csv", help="optional CSV table path")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker cap (default ${THREADS_ENV} or 1); never changes results")


def _input(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("point set (one of --in, --net, --random)")
    g.add_argument("--in", dest="input", help="point-set file: header 'd w N' then mantissa rows")
    g.add_argument("--net", choices=FAMILIES, help="built-in net family")
    g.add_argument("--net-s", type=int, help="level of the built-in net (default --s)")
    g.add_argument("--random", type=int, metavar="N", help="N uniform random points")
    g.add_argument("--d", type=int, default=2, help="dimension for --net / --random")
    g.add_argument("--w", type=int, default=32, help="bits per coordinate for --random")
    g.add_argument("--point-seed", type=int, default=0, help="seed for --random")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadic-disc",
                                     description="Discrepancy of point sets under dyadic shifts.")
    sub = parser.add_subparsers(dest="command", required=True)

    net = sub.add_parser("net", help="generate or check digital nets")
    net_sub = net.add_subparsers(dest="net_command", required=True)
    gen = net_sub.add_parser("gen", help="write a digital net to a point-set file")
    gen.add_argument("--family", choices=FAMILIES, help="built-in family")
    gen.add_argument("--matrices", help="generator-matrix file instead of a family")
    gen.add_argument("--s", type=int, help="net level (2^s points)")
    gen.add_argument("--d", type=int, default=2)
    gen.add_argument("--points", required=True, help="output point-set file")
    _common(gen)
    gen.set_defaults(func=cmd_net_gen)
    chk = net_sub.add_parser("check", help="exhaustive (delta, s, d)-net check")
    _input(chk)
    chk.add_argument("--s", type=int, help="level for --net")
    chk.add_argument("--delta", type=int, help="claimed deficiency (default: report the minimal one)")
    _common(chk)
    chk.set_defaults(func=cmd_net_check)

    disc = sub.add_parser("disc", help="local, L_q and L_inf discrepancies")
    _input(disc)
    disc.add_argument("--s", type=int, help="level for --net")
    disc.add_argument("--q", type=q_list, default=[2], help="comma list, e.g. 1,2,inf")
    disc.add_argument("--anchor", type=anchor, help="also report L[D, Y] at Y = y1,...,yd")
    disc.add_argument("--grid-s", type=int, help="use the grid decomposition at this level")
    _common(disc)
    disc.set_defaults(func=cmd_disc)

    dec = sub.add_parser("decompose", help="check L = L^(s) + E and the residual bound")
    dec.add_argument("action", choices=["verify"])
    _input(dec)
    dec.add_argument("--s", type=int_list, required=False, help="truncation levels, comma list")
    dec.add_argument("--level", type=int, help="anchor level (default: each s)")
    _common(dec)
    dec.set_defaults(func=cmd_decompose)

    mean = sub.add_parser("mean", help="mean L_q discrepancy over dyadic shifts")
    _input(mean)
    _sampling(mean)
    mean.add_argument("--s", type=int_list, help="shift levels, comma list")
    mean.add_argument("--q", type=q_list, default=[2])
    _common(mean)
    mean.set_defaults(func=cmd_mean)

    kh = sub.add_parser("khinchin", help="Khinchin inequality on random Rademacher tables")
    kh.add_argument("--k", type=int, default=2)
    kh.add_argument("--s", type=int, default=4)
    kh.add_argument("--q", type=q_list, default=[1, 2, 4])
    kh.add_argument("--tables", type=int, default=100)
    kh.add_argument("--range", type=int, default=8, help="coefficients are integers in [-range, range]")
    kh.add_argument("--seed", type=int, default=0)
    _common(kh)
    kh.set_defaults(func=cmd_khinchin)

    th = sub.add_parser("theorem", help="compare a mean discrepancy with a theorem bound")
    th.add_argument("which", choices=list(THEOREMS))
    _input(th)
    _sampling(th)
    th.add_argument("--s", type=int, help="shift level (default: log N for 2.1, the threshold otherwise)")
    th.add_argument("--q", type=parse_q, default=None)
    th.add_argument("--delta", type=int, help="claimed net deficiency for 2.1")
    _common(th)
    th.set_defaults(func=cmd_theorem)

    se = sub.add_parser("search", help="search shifts for an extremal discrepancy")
    _input(se)
    se.add_argument("--s", type=int, required=False)
    se.add_argument("--objective", choices=list(OBJECTIVES), default="minimize-Lq")
    se.add_argument("--budget", type=int, default=1024)
    se.add_argument("--q", type=parse_q, default=2)
    se.add_argument("--seed", type=int, default=0)
    _common(se)
    se.set_defaults(func=cmd_search)
    return parser


def _sampling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p.add_argument("--count", type=int, help="number of sampled shifts")
    p.add_argument("--seed", type=int, default=0, help="seed of the shift stream")


# config files ----------------------------------------------------------------

def read_config(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        k, v = (t.strip() for t in line.split("=", 1))
        if not k:
            raise UsageError(f"{path}:{n}: empty key")
        out[k.replace("-", "_")] = v
    return out


def _leaf_parser(parser: argparse.ArgumentParser, args) -> argparse.ArgumentParser:
    p = parser
    for name in ("command", "net_command"):
        key = getattr(args, name, None)
        if key is None:
            continue
        for action in p._actions:
            if isinstance(action, argparse._SubParsersAction) and key in action.choices:
                p = action.choices[key]
                break
    return p


def _apply_config(parser, leaf, cfg: dict[str, str]) -> None:
    actions = {a.dest: a for a in leaf._actions}
    if "in" in cfg:
        cfg["input"] = cfg.pop("in")
    defaults = {}
    for k, v in cfg.items():
        a = actions.get(k)
        if a is None or k in ("help", "config", "which", "action"):
            raise UsageError(f"unknown config key {k!r} for this command")
        try:
            if isinstance(a, argparse._StoreTrueAction):
                val = boolean(v)
            else:
                val = a.type(v) if a.type else v
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"bad value for {k}: {exc}")
        if a.choices is not None and val not in a.choices:
            raise UsageError(f"{k} must be one of {list(a.choices)}")
        defaults[k] = val
    leaf.set_defaults(**defaults)


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        leaf = _leaf_parser(parser, args)
        _apply_config(parser, leaf, read_config(args.config))
        args = parser.parse_args(argv)
    return args


def resolve_threads(args) -> int:
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get(THREADS_ENV, "1")
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer, got {env!r}")
    if n < 1:
        raise UsageError("the thread count must be at least 1")
    return n


def echo_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in NOT_ECHOED}


# inputs --------------------------------------------------------------------------

def load_set(args, s_hint: int | None = None):
    chosen = [x is not None for x in (args.input, args.net, args.random)]
    if sum(chosen) != 1:
        raise UsageError("give exactly one of --in, --net, --random")
    if args.input is not None:
        try:
            return read_point_set(args.input)
        except OSError as exc:
            raise UsageError(f"cannot read {args.input}: {exc}")
        except ValueError as exc:
            raise UsageError(f"malformed point-set file {args.input}: {exc}")
    if args.net is not None:
        level = args.net_s if args.net_s is not None else s_hint
        if level is None:
            raise UsageError("--net needs --net-s or --s")
        return net_family(args.net, level, args.d)
    if args.random < 0:
        raise UsageError("--random needs N >= 0")
    return random_point_set(args.random, args.d, args.w, args.point_seed)


def _first(v):
    return v[0] if isinstance(v, list) else v


# commands ------------------------------------------------------------------------

def cmd_net_gen(args, threads):
    if (args.family is None) == (args.matrices is None):
        raise UsageError("give exactly one of --family and --matrices")
    if args.matrices:
        try:
            G = read_matrices(args.matrices)
        except OSError as exc:
            raise UsageError(f"cannot read {args.matrices}: {exc}")
        D = generate_digital_net(G)
    else:
        if args.s is None:
            raise UsageError("--family needs --s")
        D = net_family(args.family, args.s, args.d)
    write_point_set(D, args.points)
    return {"d": D.d, "w": D.w, "N": D.N}, None, 0


def cmd_net_check(args, threads):
    D = load_set(args, args.s)
    s = log2_exact(D.N)
    rep = check_net(D, s if args.delta is None else args.delta)
    return rep.to_dict(), None, 0


def cmd_disc(args, threads):
    D = load_set(args, args.s)
    out: dict = {"N": D.N, "d": D.d, "w": D.w}
    if args.anchor is not None:
        out["local"] = {"anchor": args.anchor, "value": local_discrepancy(D, args.anchor),
                        "method": "exact-count", "error_radius": 0.0}
    rows = []
    for q in args.q:
        r = lq_grid(D, q, args.grid_s) if args.grid_s is not None else lq(D, q)
        rows.append(r.to_dict())
    out["discrepancies"] = rows
    table = [{"q": r["q"], "value": r["value"], "error_radius": r["error_radius"],
              "method": r["method"], "s_used": r["s_used"]} for r in rows]
    return out, (table, ["q", "value", "error_radius", "method", "s_used"]), 0


def cmd_decompose(args, threads):
    if not args.s:
        raise UsageError("decompose verify needs --s")
    D = load_set(args, _first(args.s))
    reports = [verify_decomposition(D, s, args.level if args.level is not None else s).to_dict()
               for s in args.s]
    ok = all(r["verdict"] == "holds" for r in reports)
    cols = ["s", "level", "anchors", "table_mismatches", "bound_violations", "max_abs_error",
            "max_bound_ratio", "verdict"]
    return ({"verdict": "holds" if ok else "violated", "levels": reports}, (reports, cols),
            0 if ok else 1)


def cmd_mean(args, threads):
    if not args.s:
        raise UsageError("mean needs --s")
    D = load_set(args, _first(args.s))
    rows = []
    for s in args.s:
        res = mean_lq_multi(D, s, args.q, args.mode, args.count, args.seed, threads)
        for q in args.q:
            rows.append(res[q].to_dict())
    cols = ["s", "q", "value", "error_radius", "method", "mode", "count", "seed",
            "lower_confidence", "distinct_sets"]
    return {"N": D.N, "d": D.d, "estimates": rows}, (rows, cols), 0


def cmd_khinchin(args, threads):
    if args.k < 1 or args.s < 0 or args.tables < 1:
        raise UsageError("need k >= 1, s >= 0 and at least one table")
    rng = np.random.Generator(np.random.Philox(args.seed))
    rows = []
    failures = 0
    worst: dict = {}
    for q in args.q:
        if q == INF:
            raise UsageError("the Khinchin check needs finite q")
    for t in range(args.tables):
        c = rng.integers(-args.range, args.range + 1, size=(args.s + 1,) * args.k, dtype=np.int64)
        f = RademacherPolynomial(args.k, args.s, c)
        for q in args.q:
            rep = khinchin_check(f, q)
            if not rep.ok:
                failures += 1
            w = worst.setdefault(q, {"q": q, "min_ratio": None, "max_ratio": None})
            if rep.ratio is not None:
                w["min_ratio"] = rep.ratio if w["min_ratio"] is None else min(w["min_ratio"], rep.ratio)
                w["max_ratio"] = rep.ratio if w["max_ratio"] is None else max(w["max_ratio"], rep.ratio)
            rows.append({"table": t, **rep.to_dict()})
    for q, w in worst.items():
        K = khinchin_check(RademacherPolynomial.monomial((0,) * args.k, args.s), q)
        w["alpha"] = K.lower
        w["beta"] = K.upper
    verdict = "holds" if failures == 0 else "violated"
    return ({"verdict": verdict, "tables": args.tables, "failures": failures,
             "ratios": list(worst.values())},
            (rows, ["table", "q", "k", "lower", "norm", "upper", "lower_ok", "upper_ok", "ratio"]),
            0 if failures == 0 else 1)


def cmd_theorem(args, threads):
    D = load_set(args, args.s)
    q = args.q
    if q is None:
        if args.which == "2.1":
            q = 2
        elif args.which == "2.2":
            q = 1
    if args.mode == "sampled" and not args.count:
        raise UsageError("sampled mode needs --count")
    rep = verify_theorem(D, args.which, q, args.s, args.mode, args.count, args.seed, threads,
                         args.delta)
    return rep.to_dict(), None, 1 if rep.verdict == "violated" else 0


def cmd_search(args, threads):
    if args.s is None:
        raise UsageError("search needs --s")
    D = load_set(args, args.s)
    res = shift_search(D, args.s, args.objective, args.budget, args.q, args.seed, threads)
    return res.to_dict(), None, 0


# entry point -------------------------------------------------------------------

def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}")


def run(argv=None) -> int:
    try:
        args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"dyadic-disc: {exc}", file=sys.stderr)
        return 2
    try:
        threads = resolve_threads(args)
        result, table, code = args.func(args, threads)
        command = args.command if args.command != "net" else f"net {args.net_command}"
        if args.command == "theorem":
            command = f"theorem {args.which}"
        report = {"command": command, "config": echo_config(args), "result": result}
        text = serialization.dumps(report)
        if args.out:
            _write(args.out, text)
        else:
            sys.stdout.write(text)
        if args.csv:
            if table is None:
                raise UsageError("this command has no CSV table")
            rows, cols = table
            plain = [serialization.to_plain(r) for r in rows]
            _write(args.csv, serialization.to_csv(plain, cols))
        return code
    except GuardError as exc:
        print(f"dyadic-disc: {exc}", file=sys.stderr)
        return 3
    except (UsageError, CertificationError, ValueError) as exc:
        print(f"dyadic-disc: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

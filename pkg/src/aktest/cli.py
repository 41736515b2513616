"""Command-line interface: ``akt run|distance|identity|uniformity-l2|gen``.

Exit codes: 0 success or ACCEPT, 1 REJECT, 2 usage or input error,
3 experiment criterion missed (``run --assert``).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

from . import __version__
from .ak_tester import TesterConstants, parse_class, preset_k, test_identity_ak
from .distributions import (
    DistributionError,
    Pmf,
    RationalPmf,
    ak_distance,
    kolmogorov_distance,
    l1_distance,
    l2_distance,
    scale_sensitive_l2,
)
from .harness import ConfigError, default_threads, generate_class, load_config, run_experiment
from .l2 import test_uniformity_l2, test_uniformity_l2_amplified
from .pmfio import pmf_to_json, read_pmf, read_samples
from .samplers import ArraySource, PmfSource, Seed, UnderSampledError

EXIT_ACCEPT, EXIT_REJECT, EXIT_USAGE, EXIT_CRITERION = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _as_float(p) -> Pmf:
    return p.to_pmf() if isinstance(p, RationalPmf) else p


def _fmt12(v) -> str:
    return f"{float(v):.12g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def _print_json(obj) -> None:
    print(json.dumps(_jsonable(obj), indent=2))


# --------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run_experiment(cfg, threads=args.threads)
    csv_path, json_path = report.write(args.out)
    for row in report.rows:
        shown = {k: row.get(k) for k in ("param", "value", "type_i", "type_ii", "min_samples") if row.get(k) is not None}
        if "name" in row:
            shown = {"check": row["name"], "count": row["count"], "violations": row["violations"]}
        print(json.dumps(_jsonable(shown)))
    if report.summary:
        print(json.dumps(_jsonable(report.summary)))
    for line in report.criterion_lines():
        print(line)
    print(f"wrote {csv_path} and {json_path}")
    if args.assert_criteria and not report.passed:
        return EXIT_CRITERION
    return EXIT_ACCEPT


def cmd_distance(args) -> int:
    p, q = read_pmf(args.p), read_pmf(args.q)
    if p.n != q.n:
        raise UsageError(f"domain mismatch: p has {p.n} points, q has {q.n}")
    metric = args.metric
    if metric in ("ak", "ssl2") and args.k is None:
        raise UsageError(f"metric {metric} needs --k")
    witness = None
    if metric == "l1":
        value = l1_distance(p, q)
    elif metric == "l2":
        value = l2_distance(p, q)
    elif metric == "kolmogorov":
        value = kolmogorov_distance(p, q)
    elif metric == "ak":
        rep = ak_distance(p, q, args.k)
        value, witness = rep.value, rep.witness
    else:
        if not _as_float(p).is_uniform(tol=1e-12):
            raise UsageError("ssl2 measures q against the uniform distribution; pass a uniform --p")
        rep = scale_sensitive_l2(q, args.k)
        value, witness = rep.value, rep.witness
    print(_fmt12(value))
    if args.witness:
        if witness is None:
            print(f"metric {metric} has no witness partition", file=sys.stderr)
        else:
            for a, b in witness.intervals():
                print(f"[{a}, {b}]")
    return EXIT_ACCEPT


def _constants(args) -> TesterConstants:
    return TesterConstants().with_overrides(C=args.C, c_ak=args.c_ak, c_l2=args.c_l2, j0_slack=args.j0_slack)


def cmd_identity(args) -> int:
    p = read_pmf(args.p)
    consts = _constants(args)
    if (args.k is None) == (args.cls is None):
        raise UsageError("give exactly one of --k and --class")
    k = args.k if args.k is not None else preset_k(parse_class(args.cls), p.n, args.eps, consts)
    if (args.samples is None) == (args.q is None):
        raise UsageError("give exactly one of --samples and --q")
    m = args.m
    if args.samples is not None:
        source = ArraySource(read_samples(args.samples), p.n)
        if m is None:
            m = source.samples.size
    else:
        q = read_pmf(args.q)
        if q.n != p.n:
            raise UsageError(f"domain mismatch: p has {p.n} points, q has {q.n}")
        source = PmfSource(_as_float(q), Seed(args.seed, (1,)))
    out = test_identity_ak(source, p, k, args.eps, Seed(args.seed, (2,)).rng(), delta=args.delta, constants=consts, m=m)
    _print_json(out.to_dict())
    return EXIT_REJECT if out.rejected else EXIT_ACCEPT


def cmd_uniformity_l2(args) -> int:
    if (args.samples is None) == (args.pmf is None):
        raise UsageError("give exactly one of --pmf and --samples")
    if args.samples is not None:
        source = ArraySource(read_samples(args.samples), args.n)
    else:
        q = read_pmf(args.pmf)
        if q.n != args.n:
            raise UsageError(f"pmf has {q.n} points but --n is {args.n}")
        source = PmfSource(_as_float(q), Seed(args.seed, (1,)))
    rng = Seed(args.seed, (2,)).rng()
    c_l2 = args.c_l2 if args.c_l2 is not None else TesterConstants().c_l2
    if args.delta < 1 / 3 - 1e-12:
        out = test_uniformity_l2_amplified(source, args.n, args.eps, args.delta, rng, c_l2=c_l2, m=args.m)
    else:
        out = test_uniformity_l2(source, args.n, args.eps, rng, c_l2=c_l2, m=args.m)
    d = out.diagnostics
    _print_json(
        {
            "verdict": out.verdict.value,
            "z": d["z"],
            "m": d["m"],
            "m_prime": d["m_prime"],
            "threshold": d["threshold"],
            "repetitions": d.get("repetitions", 1),
        }
    )
    return EXIT_REJECT if out.rejected else EXIT_ACCEPT


def cmd_gen(args) -> int:
    pmf = generate_class(args.cls, args.n, Seed(args.seed))
    text = pmf_to_json(pmf)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_ACCEPT


# --------------------------------------------------------------------------
# parser


def _delta(text: str) -> float:
    try:
        v = float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (0 < v <= 1 / 3 + 1e-12):
        raise argparse.ArgumentTypeError("delta must lie in (0, 1/3]")
    return v


def _eps(text: str) -> float:
    v = float(text)
    if not (0 < v < 1):
        raise argparse.ArgumentTypeError("eps must lie in (0, 1)")
    return v


def _add_constants(sp) -> None:
    g = sp.add_argument_group("tester constants")
    g.add_argument("--C", type=float, help="per-level radius constant")
    g.add_argument("--c-ak", dest="c_ak", type=float, help="shared sample-size constant")
    g.add_argument("--c-l2", dest="c_l2", type=float, help="L2 tester sample-size constant")
    g.add_argument("--j0-slack", dest="j0_slack", type=int, help="extra dyadic levels beyond log2(1/eps)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="akt", description="Identity and uniformity testing under the A_k distance.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run an experiment config")
    sp.add_argument("config")
    sp.add_argument("--out", default="results", help="directory for the CSV and JSON reports")
    sp.add_argument("--threads", type=int, default=None, help="worker processes (default: $AKT_THREADS or 1)")
    sp.add_argument("--assert", dest="assert_criteria", action="store_true", help="exit 3 if a criterion fails")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("distance", help="distance between two pmf files")
    sp.add_argument("--p", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--metric", required=True, choices=["l1", "l2", "ak", "kolmogorov", "ssl2"])
    sp.add_argument("--k", type=int)
    sp.add_argument("--witness", action="store_true", help="also print the optimal partition")
    sp.set_defaults(func=cmd_distance)

    sp = sub.add_parser("identity", help="test q = p against A_k-far")
    sp.add_argument("--p", required=True, help="explicit pmf file")
    sp.add_argument("--k", type=int)
    sp.add_argument("--class", dest="cls", help="class descriptor for a preset k, e.g. t-flat:5")
    sp.add_argument("--eps", type=_eps, required=True)
    sp.add_argument("--delta", type=_delta, default=1 / 3)
    sp.add_argument("--samples", help="file of observed samples from q")
    sp.add_argument("--q", help="pmf file to simulate samples from")
    sp.add_argument("--m", type=int, help="shared sample budget (default: all samples, or the nominal size)")
    sp.add_argument("--seed", type=int, default=0)
    _add_constants(sp)
    sp.set_defaults(func=cmd_identity)

    sp = sub.add_parser("uniformity-l2", help="L2 uniformity test")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--eps", type=_eps, required=True)
    sp.add_argument("--delta", type=_delta, default=1 / 3)
    sp.add_argument("--pmf", help="pmf file to simulate samples from")
    sp.add_argument("--samples", help="file of observed samples")
    sp.add_argument("--m", type=int, help="Poisson mean (default: the nominal sample size)")
    sp.add_argument("--c-l2", dest="c_l2", type=float)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_uniformity_l2)

    sp = sub.add_parser("gen", help="emit a random pmf from a class")
    sp.add_argument("cls", metavar="class", help="e.g. t-flat:5, piecewise-poly:3,2, log-concave, t-modal:1, mhr")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="write here instead of stdout")
    sp.set_defaults(func=cmd_gen)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is None and args.command == "run":
        args.threads = default_threads()
    try:
        return args.func(args)
    except (UsageError, ConfigError, DistributionError, UnderSampledError, ValueError, OSError) as exc:
        print(f"akt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

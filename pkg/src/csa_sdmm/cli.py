"""Command line interface: ``csa-sdmm <command> [options]``.

Commands: costs, tradeoff, run, bench, audit, calibrate, worker.  Every command
accepts ``--config file.json`` whose keys are option names (dashes or
underscores); explicit flags override file values.  The resolved configuration
is echoed as a ``# config:`` line.

Exit codes: 0 success, 2 infeasible parameters, 3 pipeline or verification
failure, 4 protocol error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction

from . import costs as C
from .errors import (InfeasibleSchemeError, PipelineError, ProtocolError, SecurityViolation,
                     StragglerError)
from .ffield import MERSENNE_61, FieldConfig
from .harness import (DEFAULT_TIMEOUT, PORT_BASE_ENV, ScenarioSpec, coordinate_run,
                      default_worker_addresses, run_scenario, scenario, worker_serve)
from .polyeval import CostModelParams, calibrate, enc_gain_scsa
from .schemes import SchemeSpec, make_plan
from .security import DEFAULT_AUDIT_BUDGET, collusion_audit

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_PIPELINE = 3
EXIT_PROTOCOL = 4


def _scheme_args(p: argparse.ArgumentParser, default_kind: str = "scsa"):
    p.add_argument("--scheme", choices=["scsa", "uscsa", "gscsa"], default=default_kind)
    p.add_argument("--N", type=int, default=15, help="number of servers")
    p.add_argument("--l", type=int, default=4, help="collusion parameter ell")
    p.add_argument("--f", type=int, default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--g", type=int, default=None, help="group size, one of f or q (default f)")
    p.add_argument("--b", type=int, choices=[0, 1], default=None,
                   help="orientation bit (default: 1 for SCSA, 0 otherwise)")


def _field_args(p: argparse.ArgumentParser):
    p.add_argument("--modulus", type=int, default=MERSENNE_61, help="prime field modulus")


def build_spec(args) -> SchemeSpec:
    kind = args.scheme.upper()
    if kind == "SCSA":
        return SchemeSpec.scsa(args.N, args.l, 1 if args.b is None else args.b)
    if args.f is None or args.q is None:
        raise ValueError(f"{kind} needs --f and --q")
    g = args.f if args.g is None else args.g
    return SchemeSpec(kind, args.N, args.l, 0 if args.b is None else args.b, args.f, args.q, g)


def _ratio(text) -> Fraction:
    return C.as_fraction(Fraction(text) if isinstance(text, str) else text)


def _steps(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


def _echo(args):
    print(f"# config: {json.dumps(_resolved(args), default=str, sort_keys=True)}", file=sys.stderr)


# -- commands -----------------------------------------------------------------------


def cmd_costs(args) -> int:
    spec = build_spec(args)
    rep = C.cost_report(spec, _ratio(args.mp_ratio))
    d = rep.as_dict()
    if args.format == "json":
        print(json.dumps(d, indent=2))
    elif args.format == "csv":
        print(",".join(d))
        print(",".join(str(v) for v in d.values()))
    else:
        print(f"scheme        {d['scheme']}")
        print(f"Q             {d['q_threshold']}")
        print(f"K_UL          {d['k_ul']:.6f}   (1/K_UL = {d['inv_kul']:.6f}, best b = {d['best_b']})")
        print(f"K_DL          {d['k_dl']:.6f}   (1/K_DL = {d['inv_kdl']:.6f})")
        print(f"UL bound      {d['ul_lower_bound']:.6f}   (1/bound = {1 / d['ul_lower_bound']:.6f})")
        if "gap_bound" in d:
            print(f"gap bound     {d['gap_bound']:.6f}   (envelope {d['gap_envelope']:.6f})")
    return EXIT_OK


def cmd_tradeoff(args) -> int:
    points = C.tradeoff_sweep(args.N, args.l, _ratio(args.mp_ratio), args.frontier_only)
    comment = f"config: {json.dumps(_resolved(args), default=str, sort_keys=True)}"
    text = C.tradeoff_csv(points, args.N, args.l, comment)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {len(points)} points to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _workers(args, N):
    if args.workers == "loopback":
        return "loopback"
    if args.workers == "local":
        return default_worker_addresses(N)
    return [w.strip() for w in args.workers.split(",") if w.strip()]


def cmd_run(args) -> int:
    spec = build_spec(args)
    _echo(args)
    rep = coordinate_run(spec, (args.m, args.n, args.p), _workers(args, spec.N), args.seed,
                         FieldConfig(args.modulus), args.multiplier, args.verify,
                         timeout=args.timeout)
    d = rep.as_dict()
    if args.json:
        print(json.dumps(d, indent=2))
    else:
        for key in ("scheme", "m", "n", "p", "t_ec", "t_ul", "t_c_avg", "t_dl", "t_dc", "t_total",
                    "bytes_up", "bytes_down", "ul_ratio", "dl_ratio", "seed", "output_digest"):
            print(f"{key:14s}{d[key]}")
    if rep.verified:
        print("decode verified")
    elif args.verify:
        print("decode not verified (shape above verify limit)")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.scenario_file:
        with open(args.scenario_file) as fh:
            sc = ScenarioSpec.from_dict(json.load(fh))
    else:
        sc = scenario(int(args.scenario), n0=args.n0)
    if args.steps is not None:
        sc.steps = tuple(_steps(args.steps))
    if args.iters is not None:
        sc.iterations = args.iters
    if args.seed is not None:
        sc.seed = args.seed
    config = {"cli": _resolved(args), "scenario": sc.to_dict()}
    rows = run_scenario(sc, args.out, _workers(args, sc.N), FieldConfig(args.modulus), args.multiplier,
                        args.verify, timeout=args.timeout, config=config)
    print(f"wrote {len(rows)} rows to {args.out}")
    expected = len(sc.steps) * len(sc.schemes)
    return EXIT_OK if len(rows) == expected else EXIT_PIPELINE


def cmd_audit(args) -> int:
    spec = build_spec(args)
    field = FieldConfig(args.modulus)
    plan = make_plan(spec, args.seed, field)
    rep = collusion_audit(spec, plan, args.budget, args.seed, witness=not args.no_witness)
    comment = f"config: {json.dumps(_resolved(args), default=str, sort_keys=True)}"
    text = rep.to_csv(comment)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    status = "PASS" if rep.passed else "FAIL"
    print(f"{status}: {len(rep.rows)} subsets audited "
          f"({'exhaustive' if rep.exhaustive else 'sampled'} of {rep.total_subsets})", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_PIPELINE


def cmd_calibrate(args) -> int:
    params = calibrate(FieldConfig(args.modulus), args.size, args.repeats, args.seed)
    m, n, p = 90, 10, 1000
    gain = enc_gain_scsa(15, 4, 7, m * n, n * p, params)
    out = {"lambda_plus": params.lambda_plus, "lambda_dot": params.lambda_dot,
           "scenario1_scsa_gain": gain}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_worker(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    return worker_serve(args.listen, FieldConfig(args.modulus), args.multiplier)


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csa-sdmm", description=__doc__.split("\n\n")[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", default=None, help="JSON file with option values")
        p.set_defaults(func=func)
        return p

    p = command("costs", cmd_costs, "Analytic uplink/downlink costs of one scheme")
    _scheme_args(p)
    p.add_argument("--mp-ratio", default="1", help="m/p as an integer, decimal or fraction")
    p.add_argument("--format", choices=["text", "json", "csv"], default="text")

    p = command("tradeoff", cmd_tradeoff, "Sweep all feasible schemes and emit (1/K_UL, 1/K_DL)")
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--l", type=int, default=8)
    p.add_argument("--mp-ratio", default="200")
    p.add_argument("--frontier-only", action="store_true", help="drop dominated points")
    p.add_argument("--out", default=None)

    def pipeline_args(p):
        _field_args(p)
        p.add_argument("--workers", default="loopback",
                       help=f"'loopback', 'local' (ports from ${PORT_BASE_ENV}) or host:port,...")
        p.add_argument("--multiplier", choices=["naive", "hybridWS"], default="naive")
        p.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
        p.add_argument("--verify", action=argparse.BooleanOptionalAction, default=True)

    p = command("run", cmd_run, "One timed encode/upload/compute/download/decode run")
    _scheme_args(p)
    pipeline_args(p)
    p.add_argument("--m", type=int, default=90)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")

    p = command("bench", cmd_bench, "Growth-sequence benchmark of a scenario")
    pipeline_args(p)
    p.add_argument("--scenario", choices=["1", "2"], default="1")
    p.add_argument("--scenario-file", default=None, help="JSON scenario definition")
    p.add_argument("--n0", type=int, default=10)
    p.add_argument("--steps", default=None, help="e.g. 0-9 or 0,2,4")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="scenario.csv")

    p = command("audit", cmd_audit, "Collusion secrecy audit over ell-subsets")
    _scheme_args(p)
    _field_args(p)
    p.add_argument("--budget", type=int, default=DEFAULT_AUDIT_BUDGET)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-witness", action="store_true", help="rank checks only")
    p.add_argument("--out", default=None)

    p = command("calibrate", cmd_calibrate, "Measure lambda_plus and lambda_dot")
    _field_args(p)
    p.add_argument("--size", type=int, default=1 << 18)
    p.add_argument("--repeats", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)

    p = command("worker", cmd_worker, "Serve as one worker until SHUTDOWN")
    _field_args(p)
    p.add_argument("--listen", default=None, help=f"host:port (default 127.0.0.1:${PORT_BASE_ENV})")
    p.add_argument("--multiplier", choices=["naive", "hybridWS"], default="naive")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    if args.command == "worker" and args.listen is None:
        args.listen = default_worker_addresses(1)[0]
    try:
        return args.func(args)
    except InfeasibleSchemeError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PipelineError, SecurityViolation) as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except (ProtocolError, StragglerError, ConnectionError) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())

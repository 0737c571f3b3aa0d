"""Command-line front end.

Reports go to stdout as JSON; a short human summary goes to stderr unless
``--json`` is given.  Exit codes: 0 success, 1 usage or config error,
2 an honest negative outcome (no convergence, or a failed verification).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, HKError
from .exprlang import EvalError, ParseError, compile_expr, dim_of, free_vars, parse
from .gauge import DeltaGauge, cousin_partition, fineness_certificate, random_fine_partition
from .integrator import EngineConfig, Integrand, hk_integrate, oracle_integrate
from .timescale import TimeScale, TsInterval

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2

_KEYS = {
    "timescale",
    "expr",
    "interval",
    "space",
    "tolerance",
    "seed",
    "samples_per_level",
    "max_levels",
    "oracle",
    "initial_scale",
    "max_items",
    "gauge",
}


@dataclass(frozen=True)
class JobConfig:
    scale: TimeScale
    interval: TsInterval
    expr: Optional[str]
    dim: int
    tolerance: tuple
    seed: int = 0
    samples_per_level: int = 8
    max_levels: int = 40
    oracle: bool = False
    initial_scale: Optional[float] = None
    max_items: int = EngineConfig.max_items
    gauge: Optional[dict] = None

    def engine(self, seed: Optional[int] = None) -> EngineConfig:
        return EngineConfig(
            seed=self.seed if seed is None else seed,
            samples_per_level=self.samples_per_level,
            max_levels=self.max_levels,
            initial_scale=self.initial_scale,
            max_items=self.max_items,
        )


def _space_dim(space) -> int:
    if space in (None, "scalar"):
        return 1
    if isinstance(space, dict) and set(space) == {"vector"}:
        d = space["vector"]
    elif isinstance(space, str) and space.startswith("vector(") and space.endswith(")"):
        d = space[7:-1]
    else:
        raise ConfigError(f"space must be 'scalar', 'vector(d)' or {{'vector': d}}, got {space!r}")
    try:
        d = int(d)
    except (TypeError, ValueError):
        raise ConfigError(f"bad vector dimension {d!r}") from None
    if d < 1:
        raise ConfigError("vector dimension must be >= 1")
    return d


def _int(obj, key, default, lo=None):
    v = obj.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"{key} must be >= {lo}")
    return v


def parse_job(obj, need_expr: bool = True) -> JobConfig:
    """Validate a decoded JSON job config."""
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(obj) - _KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    if "timescale" not in obj:
        raise ConfigError("config needs 'timescale'")
    try:
        ts = obj["timescale"]
        if isinstance(ts, dict) and "type" in ts:
            ts = {"generator": ts}
        scale = TimeScale.from_json(ts)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"bad timescale: {exc}") from None

    iv = obj.get("interval")
    try:
        if iv is None:
            interval = scale.full_interval()
        else:
            if not (isinstance(iv, list) and len(iv) == 2):
                raise ConfigError("interval must be [a, b]")
            interval = TsInterval(scale, float(iv[0]), float(iv[1]))
    except (HKError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad interval: {exc}") from None

    dim = _space_dim(obj.get("space"))
    expr = obj.get("expr")
    if expr is None:
        if need_expr:
            raise ConfigError("config needs 'expr'")
    else:
        if not isinstance(expr, str):
            raise ConfigError("expr must be a string")
        node = parse(expr)
        if not free_vars(node) <= {"t"}:
            raise ConfigError(f"expr may only use t, found {sorted(free_vars(node))}")
        if "space" in obj and dim_of(node) != dim:
            raise ConfigError(f"expr has dimension {dim_of(node)} but space says {dim}")
        dim = dim_of(node)

    tol = obj.get("tolerance", 1e-5)
    tol = [tol] * dim if isinstance(tol, (int, float)) and not isinstance(tol, bool) else tol
    if not isinstance(tol, list) or len(tol) != dim:
        raise ConfigError(f"tolerance must be a number or a list of {dim} numbers")
    for t in tol:
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not (t > 0 and math.isfinite(t)):
            raise ConfigError("tolerance entries must be positive finite numbers")

    init = obj.get("initial_scale")
    if init is not None and (isinstance(init, bool) or not isinstance(init, (int, float)) or not init > 0):
        raise ConfigError("initial_scale must be a positive number")
    oracle = obj.get("oracle", False)
    if not isinstance(oracle, bool):
        raise ConfigError("oracle must be true or false")
    gauge = obj.get("gauge")
    if gauge is not None and not isinstance(gauge, dict):
        raise ConfigError("gauge must be an object")
    return JobConfig(
        scale=scale,
        interval=interval,
        expr=expr,
        dim=dim,
        tolerance=tuple(float(t) for t in tol),
        seed=_int(obj, "seed", 0),
        samples_per_level=_int(obj, "samples_per_level", 8, 2),
        max_levels=_int(obj, "max_levels", 40, 1),
        oracle=oracle,
        initial_scale=None if init is None else float(init),
        max_items=_int(obj, "max_items", EngineConfig.max_items, 1),
        gauge=gauge,
    )


def load_job(path: str, need_expr: bool = True) -> JobConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_job(obj, need_expr)


def _emit(report: dict):
    sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")


def _note(args, text: str):
    if not args.json:
        print(text, file=sys.stderr)


def cmd_integrate(args) -> int:
    job = load_job(args.config)
    f: Integrand = compile_expr(job.expr)
    res = hk_integrate(f, job.interval, np.array(job.tolerance), job.engine(args.seed))
    report = res.to_json()
    if job.oracle:
        ref = oracle_integrate(f, job.interval)
        report["oracle"] = {"value": ref.to_json(), "gap": abs(res.value - ref).to_json()}
    _emit(report)
    state = "converged" if res.converged else f"NOT converged ({res.reason})"
    _note(args, f"integral = {res.value.to_json()}  spread = {res.spread.to_json()}  {state} at level {res.level}")
    return EXIT_OK if res.converged else EXIT_NEGATIVE


def _gauge_for(job: JobConfig, args) -> DeltaGauge:
    if args.dL is not None or args.dR is not None:
        if args.dL is None or args.dR is None:
            raise ConfigError("give both --dL and --dR")
        spec = {"dL": args.dL, "dR": args.dR}
    elif job.gauge is not None:
        spec = job.gauge
    else:
        raise ConfigError("no gauge: pass --dL and --dR or put 'gauge' in the config")
    try:
        return DeltaGauge.from_json(job.interval, spec)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad gauge spec: {exc}") from None


def cmd_partition(args) -> int:
    job = load_job(args.config, need_expr=False)
    g = _gauge_for(job, args)
    if args.seed is None:
        P = cousin_partition(job.interval, g)
    else:
        P = random_fine_partition(job.interval, g, args.seed)
    report = P.to_json()
    report["certificate"] = fineness_certificate(P, g)
    report["gauge"] = g.to_json()
    _emit(report)
    _note(args, f"{len(P)} items, full={report['full']}, fine={report['certificate']['fine']}")
    return EXIT_OK if report["full"] and report["certificate"]["fine"] else EXIT_NEGATIVE


def cmd_verify(args) -> int:
    from .suites import SUITES, run_suite

    if args.suite not in SUITES + ("all",):
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES + ('all',))}")
    report = run_suite(args.suite, 0 if args.seed is None else args.seed)
    _emit(report)
    if not args.json:
        for c in report["cases"]:
            print(f"{'PASS' if c['ok'] else 'FAIL'}  {c['suite']:<14} {c['case']}", file=sys.stderr)
        print(f"{report['passed']} passed, {report['failed']} failed", file=sys.stderr)
    return EXIT_OK if report["ok"] else EXIT_NEGATIVE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hkts", description="HK delta integration on time scales")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--json", action="store_true", help="JSON on stdout only, no stderr summary")

    sp = sub.add_parser("integrate", help="run the integration engine on a job config")
    sp.add_argument("--config", required=True, metavar="PATH")
    common(sp)
    sp.set_defaults(func=cmd_integrate)

    sp = sub.add_parser("partition", help="build a fine partition for a constant gauge")
    sp.add_argument("--config", required=True, metavar="PATH")
    sp.add_argument("--dL", type=float, default=None)
    sp.add_argument("--dR", type=float, default=None)
    common(sp)
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("verify", help="run a theorem suite over the built-in catalog")
    sp.add_argument("--suite", default="all")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"expr: parse error at offset {exc.offset}: expected {exc.expected}, found {exc.found}", file=sys.stderr)
    except EvalError as exc:
        print(f"expr: evaluation error: {exc}", file=sys.stderr)
    except HKError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ValueError, TypeError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

    baskakov <subcommand> [options]

Subcommands: check-identities, moments, eval, convergence, jackson,
voronovskaya, bernstein, norm, converse, telescope, all.

Options may also come from ``--config FILE`` (plain ``key = value`` lines,
keys as the long option names with dashes or underscores); flags given on
the command line win.

Exit codes: 0 all verdicts pass, 1 at least one asserted verdict fails,
2 usage or configuration error, 3 numeric non-convergence.

Output is CSV (header row, one row per case, RFC-4180 quoting) or JSON (an
array of report objects).  The run configuration is written to stderr and,
with ``--output PATH``, to ``PATH.config.json``.

CSV schema (version 1) -- the columns of a file are the ordered union of
the fields of the records it holds:
    identity rows:    identity, n, k, x, outcome
    sum identities:   identity, n, x, series, closed_form, difference, tail_bound, terms, precision, passed
    eval rows:        function, operator, n, x, value, error
    convergence rows: function, operator, n, error, bound, error_estimate, slope, x_min, x_max, grid_points
    inequality rows:  check, function, n, ell, left, right, slack, verdict, asserted, error, extra (JSON)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction

from . import experiments as ex
from .calculus import REGISTRY, get_function
from .coefficients import QuadratureConfig
from .errors import ConvergenceError, DomainError
from .operators import OperatorImage, TruncationConfig
from .oracle import identity_sweep, sum_identity_cases, verify_sum_identity

log = logging.getLogger("baskakov")

SCHEMA_VERSION = 1
SUBCOMMANDS = ("check-identities", "moments", "eval", "convergence", "jackson", "voronovskaya",
               "bernstein", "norm", "converse", "telescope", "all")
OPS = {"baskakov": "baskakov", "gs": "gs", "modified": "modified", "dtilde": "dtilde-modified",
       "dtilde-modified": "dtilde-modified"}

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    subcommand: str
    n: list[int] | None = None  # None: subcommand default (4,8,16,32 for most)
    func: list[str] = field(default_factory=list)  # empty: subcommand default
    op: str = "both"
    x: list[float] = field(default_factory=list)
    x_max: float = 8.0
    grid_points: int = 801
    trunc_tol: float = 1e-14
    quad_tol: float = 1e-13
    quad_nodes: int = 16
    n_max: int = 20
    k_max: int = 30
    points: int = 5
    precision: int = 30
    ell: int | None = None
    steps: int = 1
    seed: int = 7
    workers: int = 1
    format: str = "csv"
    output: str | None = None

    @property
    def window(self):
        return (0.0, self.x_max)

    @property
    def trunc(self):
        return TruncationConfig(tol=self.trunc_tol)

    @property
    def quad(self):
        return QuadratureConfig(base_nodes=self.quad_nodes, tol=self.quad_tol)


_CONVERTERS = {
    "n": lambda s: [int(v) for v in _split(s)],
    "func": lambda s: list(_split(s)),
    "x": lambda s: [float(Fraction(v)) for v in _split(s)],
    "x_max": float,
    "grid_points": int,
    "trunc_tol": float,
    "quad_tol": float,
    "quad_nodes": int,
    "n_max": int,
    "k_max": int,
    "points": int,
    "precision": int,
    "ell": int,
    "steps": int,
    "seed": int,
    "workers": int,
    "op": str,
    "format": str,
    "output": str,
}


def _split(s: str):
    return [v.strip() for v in str(s).split(",") if v.strip()]


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="baskakov", description="Baskakov-type operator experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="key=value file; command-line flags win")
    p.add_argument("--n", help="comma-separated degrees (default 4,8,16,32)")
    p.add_argument("--func", help=f"comma-separated test functions: {', '.join(REGISTRY)}")
    p.add_argument("--op", help="baskakov | gs | modified | dtilde | both (gs and modified)")
    p.add_argument("--x", help="comma-separated points (fractions allowed)")
    p.add_argument("--x-max", dest="x_max", help="window [0, X_max] (default 8)")
    p.add_argument("--grid-points", dest="grid_points", help="grid size (default 801)")
    p.add_argument("--trunc-tol", dest="trunc_tol", help="series truncation tolerance")
    p.add_argument("--quad-tol", dest="quad_tol", help="coefficient quadrature tolerance")
    p.add_argument("--quad-nodes", dest="quad_nodes", help="starting Gauss node count")
    p.add_argument("--n-max", dest="n_max", help="identity sweep: largest n (default 20)")
    p.add_argument("--k-max", dest="k_max", help="identity sweep: largest k (default 30)")
    p.add_argument("--points", help="identity sweep: rational points per case (default 5)")
    p.add_argument("--precision", help="sum identities: significant digits (default 30)")
    p.add_argument("--ell", help="converse: partner degree (default ceil(L n))")
    p.add_argument("--steps", help="telescope: number of steps k = n..n+steps-1 (default 1)")
    p.add_argument("--seed", help="seed for the rational points (default 7)")
    p.add_argument("--workers", help="worker threads (default 1)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--output", help="output file (default stdout)")
    return p


def _read_config(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def make_config(args: argparse.Namespace) -> RunConfig:
    raw = _read_config(args.config) if args.config else {}
    for key in _CONVERTERS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    cfg = RunConfig(args.subcommand)
    for key, value in raw.items():
        try:
            setattr(cfg, key, _CONVERTERS[key](value))
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"bad value for {key}: {value!r} ({exc})") from None
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    for name in cfg.func:
        if name not in REGISTRY:
            raise UsageError(f"unknown function {name!r}; known: {', '.join(REGISTRY)}")
    if cfg.op != "both" and cfg.op not in OPS:
        raise UsageError(f"unknown operator {cfg.op!r}")
    if cfg.format not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    if cfg.n is not None and any(n < 1 for n in cfg.n):
        raise UsageError("degrees must be positive")
    if not cfg.x_max > 0 or cfg.grid_points < 2:
        raise UsageError("need x_max > 0 and grid_points >= 2")
    if cfg.workers < 1 or cfg.steps < 1 or cfg.steps > 8:
        raise UsageError("need workers >= 1 and 1 <= steps <= 8")
    try:
        cfg.trunc, cfg.quad
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# records


def _num(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _inequality_record(r: ex.InequalityReport) -> dict:
    extra = {k: v for k, v in r.extra.items() if k != "error"}
    return {
        "check": r.check, "function": r.function, "n": r.n, "ell": r.ell, "left": r.left, "right": r.right,
        "slack": r.slack, "verdict": r.verdict, "asserted": r.asserted, "error": r.extra.get("error"),
        "extra": json.dumps(extra, sort_keys=True, default=str),
    }


def _convergence_records(rep: ex.ConvergenceReport) -> list[dict]:
    return [
        {"function": rep.function, "operator": rep.operator, "n": row.n, "error": row.error, "bound": row.bound,
         "error_estimate": row.error_estimate, "slope": rep.slope, **rep.window}
        for row in rep.rows
    ]


class Outcome:
    """Records for output plus the pass/fail tally."""

    def __init__(self):
        self.csv_rows: list[dict] = []
        self.json_items: list[dict] = []
        self.failures = 0

    def add_inequality(self, reports):
        for r in reports:
            self.csv_rows.append(_inequality_record(r))
            self.json_items.append(r.to_dict())
            if not r.passed:
                self.failures += 1


# ---------------------------------------------------------------------------
# subcommands


def _funcs(cfg: RunConfig, default):
    names = cfg.func or default
    return [get_function(name) for name in names]


def _ns(cfg: RunConfig, default=(4, 8, 16, 32)):
    return list(cfg.n) if cfg.n is not None else list(default)


def _ops(cfg: RunConfig, default=("gs", "modified")):
    if cfg.op == "both":
        return list(default)
    return [OPS[cfg.op]]


def cmd_check_identities(cfg: RunConfig, out: Outcome) -> None:
    cases = identity_sweep(range(2, cfg.n_max + 1), range(0, cfg.k_max + 1), cfg.points, cfg.seed)
    for c in cases:
        row = {"identity": c.identity, "n": c.n, "k": c.k, "x": str(c.x), "outcome": c.outcome}
        out.csv_rows.append(row)
        out.json_items.append(row)
        if c.outcome == "fail":
            out.failures += 1


def cmd_moments(cfg: RunConfig, out: Outcome) -> None:
    xs = [Fraction(x).limit_denominator(10**6) for x in cfg.x] or [Fraction(1, 2), Fraction(1), Fraction(3)]
    ns = _ns(cfg, (2, 4, 8))
    for ident in sum_identity_cases():
        for n in ns:
            for x in xs:
                r = verify_sum_identity(ident, n, x, cfg.precision)
                d = asdict(r)
                d.pop("extra")
                out.csv_rows.append(d)
                out.json_items.append(d)
                if not r.passed:
                    out.failures += 1


def cmd_eval(cfg: RunConfig, out: Outcome) -> None:
    xs = cfg.x or [0.0, 1.0]
    for f in _funcs(cfg, ["exp-decay"]):
        for op in _ops(cfg, ("modified",)):
            for n in _ns(cfg, (16,)):
                img = OperatorImage(op, n, f, cfg.trunc, cfg.quad)
                for x in xs:
                    v, e = img.evaluate(x)
                    row = {"function": f.name, "operator": op, "n": n, "x": x, "value": v, "error": e}
                    out.csv_rows.append(row)
                    out.json_items.append(row)


def cmd_convergence(cfg: RunConfig, out: Outcome) -> None:
    cases = [(f, op) for f in _funcs(cfg, ["t2", "exp-decay", "inv-1px"]) for op in _ops(cfg)]
    reports = ex.run_cases(
        lambda f, op: ex.convergence_study(f, op, _ns(cfg), cfg.window, cfg.grid_points, cfg.trunc, cfg.quad),
        cases, cfg.workers)
    for rep in reports:
        out.csv_rows.extend(_convergence_records(rep))
        out.json_items.append(rep.to_dict())


def _inequality_sweep(cfg, out, check, default_funcs, ns=None):
    cases = [(f, n) for f in _funcs(cfg, default_funcs) for n in (ns or _ns(cfg))]
    out.add_inequality(ex.run_cases(
        lambda f, n: check(f, n, window=cfg.window, grid_points=cfg.grid_points, trunc=cfg.trunc, quad=cfg.quad),
        cases, cfg.workers))


def cmd_jackson(cfg, out):
    _inequality_sweep(cfg, out, ex.jackson_check, list(REGISTRY))


def cmd_norm(cfg, out):
    _inequality_sweep(cfg, out, ex.norm_check, list(REGISTRY))


def cmd_voronovskaya(cfg, out):
    _inequality_sweep(cfg, out, ex.voronovskaya_check, list(REGISTRY))


def cmd_bernstein(cfg, out):
    ns = _ns(cfg, (17, 32))
    _inequality_sweep(cfg, out, ex.bernstein_check, ["one", "exp-decay", "inv-1px", "damped-sine"], ns)
    out.add_inequality(ex.run_cases(lambda n: ex.bernstein_basis_sum(n, cfg.window, cfg.grid_points),
                                    [(n,) for n in ns], cfg.workers))
    xs = cfg.x or [0.01, 0.5, 1.0, 2.0]
    for n in sorted(set([4] + list(ns))):
        for x in xs:
            out.add_inequality(ex.decomposition_checks(n, x))


def cmd_converse(cfg, out):
    ns = _ns(cfg, (2, 3))
    cases = [(f, n) for f in _funcs(cfg, ["exp-decay", "inv-1px"]) for n in ns]
    out.add_inequality(ex.run_cases(
        lambda f, n: ex.converse_check(f, n, cfg.ell, cfg.window, cfg.grid_points, trunc=cfg.trunc, quad=cfg.quad),
        cases, cfg.workers))


def cmd_telescope(cfg, out):
    cases = [(f, n) for f in _funcs(cfg, ["affine", "t2", "exp-decay", "inv-1px"]) for n in _ns(cfg)]
    out.add_inequality(ex.run_cases(
        lambda f, n: ex.telescoping_check(f, n, n + cfg.steps, cfg.window, cfg.grid_points, cfg.trunc, cfg.quad),
        cases, cfg.workers))


COMMANDS = {
    "check-identities": cmd_check_identities,
    "moments": cmd_moments,
    "eval": cmd_eval,
    "convergence": cmd_convergence,
    "jackson": cmd_jackson,
    "norm": cmd_norm,
    "voronovskaya": cmd_voronovskaya,
    "bernstein": cmd_bernstein,
    "converse": cmd_converse,
    "telescope": cmd_telescope,
}


def cmd_all(cfg, out):
    for name, fn in COMMANDS.items():
        if name not in ("eval", "all"):
            log.info("running %s", name)
            fn(cfg, out)


COMMANDS["all"] = cmd_all


# ---------------------------------------------------------------------------
# output


def render(out: Outcome, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(out.json_items, indent=1, default=_json_default, allow_nan=True) + "\n"
    names: list[str] = []
    for row in out.csv_rows:
        names.extend(k for k in row if k not in names)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\r\n", restval="")
    writer.writeheader()
    for row in out.csv_rows:
        writer.writerow({k: ("" if v is None else _num(v)) for k, v in row.items()})
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(type(o).__name__)


def _config_dump(cfg: RunConfig) -> str:
    d = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    d["schema_version"] = SCHEMA_VERSION
    return json.dumps(d, sort_keys=True)


def run(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = make_config(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"config: {_config_dump(cfg)}", file=sys.stderr)
    out = Outcome()
    try:
        COMMANDS[cfg.subcommand](cfg, out)
    except ConvergenceError as exc:
        print(f"numeric non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(out, cfg.format)
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
        with open(cfg.output + ".config.json", "w") as fh:
            fh.write(_config_dump(cfg) + "\n")
    else:
        sys.stdout.write(text)
    if out.failures:
        print(f"{out.failures} asserted verdict(s) failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

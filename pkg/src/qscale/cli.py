"""Command line front end.

Usage::

    qscale scale --model model.ini --q 0 --xmax 4 --step 0.0009765625 --out W.csv

The model file has the sections ``[model]`` (``drift``, ``convention``,
``sigma2``), ``[jumps]`` (``family`` plus family parameters) and an optional
``[run]`` section providing defaults for the command line flags.  Exit codes:
0 success, 1 usage or model error, 2 series not converged, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import configparser
import io
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import distributions as dist
from .errors import NotConverged, QScaleError
from .grid import Grid, GridFunction
from .levy import (
    CompoundPoisson,
    LevyModel,
    NoJumps,
    Stable,
    TemperedStable,
)

__all__ = ["main", "build_model", "load_config", "RunConfig", "run"]

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("scale", "ruin", "resolvent", "renewal", "verify")


class UsageError(Exception):
    """Bad flags or an unreadable model file."""


# =============================================================================
# model files
# =============================================================================
def _parse_atoms(text: str):
    atoms = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        loc, _, mass = item.partition(":")
        atoms.append((float(loc), float(mass)))
    return atoms


def _law(sec) -> object:
    kind = sec.get("law", "exponential").strip().lower()
    if kind == "exponential":
        return dist.ExponentialLaw(sec.getfloat("law_rate", 1.0))
    if kind == "atoms":
        return dist.MixedDistribution(_parse_atoms(sec["atoms"]))
    if kind == "geometric":
        return dist.geometric(sec.getfloat("p"))
    if kind == "ztp":
        return dist.zero_truncated_poisson(sec.getfloat("mu"))
    raise UsageError(f"unknown jump law {kind!r}")


def build_model(cfg: configparser.ConfigParser) -> LevyModel:
    """Build a :class:`LevyModel` from a parsed model file."""
    if not cfg.has_section("model"):
        raise UsageError("model file needs a [model] section")
    m = cfg["model"]
    drift = m.getfloat("drift", 0.0)
    convention = m.get("convention", "c").strip()
    sigma2 = m.getfloat("sigma2", 0.0)
    jumps = NoJumps()
    if cfg.has_section("jumps"):
        j = cfg["jumps"]
        family = j.get("family", "none").strip().lower()
        if family == "none":
            jumps = NoJumps()
        elif family == "stable":
            jumps = Stable(j.getfloat("alpha"), j.getfloat("scale", 1.0))
        elif family == "tempered_stable":
            jumps = TemperedStable(j.getfloat("alpha"), j.getfloat("theta"), j.getfloat("scale", 1.0))
        elif family == "compound_poisson":
            jumps = CompoundPoisson(j.getfloat("rate", 1.0), _law(j))
        else:
            raise UsageError(f"unknown jump family {family!r}")
    try:
        return LevyModel(drift, convention, sigma2, jumps)
    except ValueError as exc:
        if isinstance(exc, QScaleError):
            raise
        raise UsageError(str(exc)) from exc


def load_config(path: str) -> tuple[configparser.ConfigParser, str]:
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read model file: {exc}") from exc
    try:
        cfg.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse model file: {exc}") from exc
    return cfg, text


# =============================================================================
# run configuration
# =============================================================================
@dataclass
class RunConfig:
    command: str
    model_path: str
    q: float = 0.0
    step: float = 1 / 1024
    x_max: float = 4.0
    tol: float | None = None
    verify_tol: float = 1e-2
    max_terms: int = 200
    method: str = "auto"
    richardson: bool = False
    out: str | None = None

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not self.step > 0:
            raise UsageError("--step must be positive")
        if not self.x_max >= 10 * self.step:
            raise UsageError("--xmax must be at least ten steps")
        if not self.q >= 0:
            raise UsageError("--q must be non-negative")
        if self.max_terms < 1:
            raise UsageError("--max-terms must be positive")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qscale", description="Scale functions of spectrally negative Levy processes.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--model", required=True, help="model file (INI format)")
        s.add_argument("--q", type=float)
        s.add_argument("--xmax", type=float)
        s.add_argument("--step", type=float)
        s.add_argument("--tol", type=float, help="series tolerance on the weighted term L1 norm")
        s.add_argument("--verify-tol", type=float, help="tolerance of the verification summary")
        s.add_argument("--max-terms", type=int)
        s.add_argument("--method", choices=("auto", "series", "roots", "tilt", "closed"))
        s.add_argument("--richardson", action="store_true", default=None)
        s.add_argument("--out", help="CSV output path (default: standard output)")
    return p


def _run_config(args, cfg: configparser.ConfigParser) -> RunConfig:
    run = cfg["run"] if cfg.has_section("run") else {}

    def pick(flag, key, conv, default):
        if flag is not None:
            return flag
        if key in run:
            return conv(run[key])
        return default

    def as_bool(text):
        return str(text).strip().lower() in ("1", "true", "yes", "on")

    def as_opt_float(text):
        return None if str(text).strip().lower() in ("", "none") else float(text)

    rc = RunConfig(
        command=args.command,
        model_path=args.model,
        q=pick(args.q, "q", float, 0.0),
        step=pick(args.step, "step", float, 1 / 1024),
        x_max=pick(args.xmax, "xmax", float, 4.0),
        tol=pick(args.tol, "tol", as_opt_float, None),
        verify_tol=pick(args.verify_tol, "verify_tol", float, 1e-2),
        max_terms=pick(args.max_terms, "max_terms", int, 200),
        method=pick(args.method, "method", str, "auto"),
        richardson=pick(args.richardson, "richardson", as_bool, False),
        out=args.out,
    )
    rc.validate()
    return rc


# =============================================================================
# commands
# =============================================================================
@dataclass
class Outcome:
    x: np.ndarray
    y: np.ndarray
    column: str
    method: str
    terms: int
    residual: float
    passed: bool
    meta: dict


def _scale_outcome(model, rc: RunConfig, grid: Grid) -> Outcome:
    from .scale import scale_function
    from .verify import verify_scale

    table = scale_function(model, rc.q, grid, method=rc.method, richardson=rc.richardson,
                           tol=rc.tol, max_terms=rc.max_terms)
    check = verify_scale(model, rc.q, table, tol=rc.verify_tol)
    return Outcome(grid.nodes, table.W.samples, "W", table.method, table.report.terms_used,
                   check.max_residual, check.passed, {"phi": check.phi})


def _ruin_outcome(model, rc: RunConfig, grid: Grid) -> Outcome:
    from .scale import scale_function
    from .verify import ruin_probability, verify_scale

    table = scale_function(model, 0.0, grid, method=rc.method, richardson=rc.richardson,
                           tol=rc.tol, max_terms=rc.max_terms)
    check = verify_scale(model, 0.0, table, tol=rc.verify_tol)
    r = ruin_probability(model, grid.nodes, table=table)
    return Outcome(grid.nodes, np.asarray(r), "ruin", table.method, table.report.terms_used,
                   check.max_residual, check.passed, {"psi_prime_0": model.c_double_prime})


def _resolvent_outcome(model, rc: RunConfig, grid: Grid) -> Outcome:
    from .resolvent import solve_resolvent

    j = model.jumps
    res = solve_resolvent(j.integrated_tail_grid(grid), tol=rc.verify_tol, kernel_fn=j.integrated_tail)
    return Outcome(grid.nodes, res.rho.samples, "rho", res.method, 1, res.max_residual,
                   res.max_residual <= rc.verify_tol, {"refinements": res.refinements})


def _renewal_kernel(cfg, model, grid: Grid) -> GridFunction:
    if cfg.has_section("renewal"):
        sec = cfg["renewal"]
        kind = sec.get("kernel", "power").strip().lower()
        if kind != "power":
            raise UsageError(f"unknown renewal kernel {kind!r}")
        return GridFunction.power(grid, sec.getfloat("exponent"), sec.getfloat("coefficient", 1.0))
    cpp = model.c_double_prime
    if cpp == 0:
        raise UsageError("renewal without a [renewal] section needs a model with c'' != 0")
    return model.jumps.integrated_tail_grid(grid) * (-1.0 / cpp)


def _renewal_outcome(model, cfg, rc: RunConfig, grid: Grid) -> Outcome:
    from .resolvent import solve_renewal

    g = _renewal_kernel(cfg, model, grid)
    res = solve_renewal(g, tol=rc.tol, max_terms=rc.max_terms)
    return Outcome(grid.nodes, res.f.samples, "f", res.variant, 1, res.residual,
                   res.residual <= rc.verify_tol, {})


def _write_csv(stream, rc: RunConfig, model, outcome: Outcome, config_text: str):
    lines = [
        f"# command={rc.command}",
        f"# fingerprint={model.fingerprint()}",
        f"# q={rc.q!r}",
        f"# h={rc.step!r}",
        f"# x_max={rc.x_max!r}",
        f"# method={outcome.method}",
        f"# richardson={rc.richardson}",
        f"# terms={outcome.terms}",
        f"# residual={outcome.residual:.6e}",
    ]
    for key, val in outcome.meta.items():
        lines.append(f"# {key}={val!r}")
    for raw in config_text.splitlines():
        raw = raw.rstrip()
        if raw:
            lines.append(f"# config: {raw}")
    lines.append(f"x,{outcome.column}")
    body = "\n".join(lines) + "\n"
    rows = "".join(f"{x:.17g},{y:.17g}\n" for x, y in zip(outcome.x, outcome.y))
    stream.write(body + rows)


def run(rc: RunConfig, cfg: configparser.ConfigParser, config_text: str, stdout=None, stderr=None) -> int:
    """Execute one command; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    start = time.perf_counter()
    model = build_model(cfg)
    grid = Grid.from_xmax(rc.x_max, rc.step)
    if rc.command in ("scale", "verify"):
        outcome = _scale_outcome(model, rc, grid)
    elif rc.command == "ruin":
        outcome = _ruin_outcome(model, rc, grid)
    elif rc.command == "resolvent":
        outcome = _resolvent_outcome(model, rc, grid)
    else:
        outcome = _renewal_outcome(model, cfg, rc, grid)
    elapsed = time.perf_counter() - start
    if rc.command != "verify":
        if rc.out:
            with open(rc.out, "w", encoding="utf-8", newline="\n") as fh:
                _write_csv(fh, rc, model, outcome, config_text)
        else:
            buf = io.StringIO()
            _write_csv(buf, rc, model, outcome, config_text)
            stdout.write(buf.getvalue())
    status = "PASS" if outcome.passed else "FAIL"
    summary = (
        f"{rc.command}: method={outcome.method} terms={outcome.terms} "
        f"max_residual={outcome.residual:.3e} residual<{rc.verify_tol:g} {status} "
        f"runtime={elapsed:.2f}s"
    )
    target = stdout if (rc.out or rc.command == "verify") else stderr
    print(summary, file=target)
    return EXIT_OK if outcome.passed else EXIT_VERIFY


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg, text = load_config(args.model)
        rc = _run_config(args, cfg)
        return run(rc, cfg, text)
    except NotConverged as exc:
        print(f"error: NotConverged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except UsageError as exc:
        print(f"error: UsageError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QScaleError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, configparser.Error) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


"""Command-line front end: ``garkrow check | converge | integrate | stability | export-tableau``.

Exit codes: 0 success, 1 failed order conditions, 2 bad input, 3 runtime
failure. Every subcommand also accepts ``--config run.json`` whose keys are
the long option names (dashes or underscores) and act as defaults.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GarkError, InconsistentState, ShapeMismatch, StructureMismatch, UnknownMethod
from .integrator_dae import DaeProblem, integrate_dae_adaptive, integrate_dae_fixed
from .integrator_ode import OdeProblem, StepController, integrate_adaptive, integrate_fixed
from .methods import METHOD_IDS, MethodCard, as_card, builtin, for_partitions
from .order_conditions import (
    DEFAULT_TOL,
    check_dae_algebraic,
    check_gark_ros,
    check_gark_row,
    check_imex_coupling,
    claimed_conditions,
    is_imex_special_case,
)
from .problems import BrusselatorConfig, brusselator, dahlquist_split, logistic_split, zla
from .stability import scan_region
from .tableau import MethodClass, dumps, loads, validate

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3

PROBLEM_IDS = ("brusselator", "zla", "logistic", "dahlquist")
REFERENCE_METHOD = "imex-ros4-3-6"


class InputError(Exception):
    """Bad command-line input; maps to exit code 2."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# --------------------------------------------------------------------------- #
# method and problem resolution
# --------------------------------------------------------------------------- #


def resolve_method(source: str) -> MethodCard:
    """A built-in name or the path of a tableau JSON file."""
    if source in METHOD_IDS:
        return builtin(source)
    path = Path(source)
    if not path.exists():
        raise InputError(f"{source!r} is neither a built-in method ({', '.join(METHOD_IDS)}) nor a file")
    try:
        t = loads(path.read_text())
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read tableau {source}: {exc}") from None
    report = validate(t)
    if not report.ok:
        raise InputError("invalid tableau: " + "; ".join(report.messages()))
    return as_card(t)


@dataclass(frozen=True)
class Problem:
    kind: str  # "ode" or "dae"
    problem: OdeProblem | DaeProblem
    t_span: tuple[float, float]

    @property
    def n_partitions(self) -> int:
        return 2 if self.kind == "dae" else self.problem.n_partitions

    def method(self, name: str) -> MethodCard:
        if name in METHOD_IDS:
            return for_partitions(name, self.n_partitions)
        card = resolve_method(name)
        if card.tableau.n_partitions != self.n_partitions:
            raise ShapeMismatch(f"tableau has {card.tableau.n_partitions} partitions, problem has {self.n_partitions}")
        return card

    def final_state(self, card: MethodCard, n_steps: int) -> np.ndarray:
        t0, tf = self.t_span
        if self.kind == "dae":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", InconsistentState)
                return integrate_dae_fixed(self.problem, card, t0, tf, n_steps, record=False).final
        return integrate_fixed(self.problem, card, t0, tf, n_steps, record=False).y_final


def _complex_list(text: str) -> list[complex]:
    try:
        return [complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"cannot parse complex values from {text!r}") from None


def make_problem(pid: str, t_final: float | None = None, grid: int | None = None, lambdas: str | None = None) -> Problem:
    if pid == "brusselator":
        cfg = BrusselatorConfig(interior_points=grid or 100)
        if cfg.interior_points < 3:
            raise InputError("the Brusselator needs at least 3 interior points")
        p = brusselator(cfg)
        return Problem("ode", p, (0.0, t_final if t_final is not None else cfg.t_span[1]))
    if pid == "zla":
        p = zla()
        return Problem("dae", p, (0.0, t_final if t_final is not None else p.t_span[1]))
    if pid == "logistic":
        p = logistic_split()
        return Problem("ode", p, (0.0, t_final if t_final is not None else 1.0))
    if pid == "dahlquist":
        p = dahlquist_split(_complex_list(lambdas or "-1,-10"))
        return Problem("ode", p, (0.0, t_final if t_final is not None else 1.0))
    raise InputError(f"unknown problem {pid!r}; choose from {', '.join(PROBLEM_IDS)}")


# --------------------------------------------------------------------------- #
# convergence tables
# --------------------------------------------------------------------------- #


def fitted_order(h: Sequence[float], err: Sequence[float], tail: int = 5) -> float:
    """Least-squares slope of ``log err`` against ``log h`` over the ``tail`` smallest steps."""
    pts = sorted((float(a), float(b)) for a, b in zip(h, err) if b > 0 and math.isfinite(b))
    pts = pts[:tail]
    if len(pts) < 2:
        return math.nan
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass
class ConvergenceTable:
    method: str
    rows: list[tuple[int, float, float]] = field(default_factory=list)  # (n_steps, h, error)

    @property
    def order(self) -> float:
        return fitted_order([r[1] for r in self.rows], [r[2] for r in self.rows])

    def csv_lines(self) -> list[str]:
        return [f"{self.method},{n},{_fmt(h)},{_fmt(e)}" for n, h, e in sorted(self.rows)]


def ladder(start: int, rungs: int, factor: float = 2.0) -> list[int]:
    """Strictly increasing step counts ``round(start * factor**k)``."""
    if start < 1 or rungs < 1 or factor <= 1.0:
        raise InputError("a ladder needs start >= 1, rungs >= 1 and factor > 1")
    out: list[int] = []
    for k in range(rungs):
        n = int(round(start * factor**k))
        out.append(max(n, out[-1] + 1) if out else n)
    return out


def thread_count() -> int:
    env = os.environ.get("GARK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"GARK_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_ladder(
    prob: Problem, card: MethodCard, steps: Sequence[int], reference: np.ndarray, threads: int = 1
) -> tuple[ConvergenceTable, Exception | None]:
    """Errors at each rung; stops recording at the first failing rung."""
    t0, tf = prob.t_span

    def one(n: int):
        try:
            return n, float(np.linalg.norm(prob.final_state(card, n) - reference)), None
        except (GarkError, ArithmeticError, ValueError) as exc:
            return n, math.nan, exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, steps))
    else:
        results = [one(n) for n in steps]
    table = ConvergenceTable(card.name)
    failure = None
    for n, err, exc in results:  # already in rung order
        if exc is not None:
            failure = failure or exc
            continue
        table.rows.append((n, (tf - t0) / n, err))
    return table, failure


# --------------------------------------------------------------------------- #
# subcommands
# --------------------------------------------------------------------------- #


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_check(args) -> int:
    card = resolve_method(args.method)
    t = card.tableau
    if args.order is None and not args.dae and not args.imex and args.method in METHOD_IDS:
        report = claimed_conditions(args.method)
        if args.tol is not None:
            report = report.with_tolerance(args.tol)
    else:
        tol = DEFAULT_TOL if args.tol is None else args.tol
        order = args.order or t.claimed_order or 1
        if not 1 <= order <= 4:
            raise InputError("--order must be between 1 and 4")
        cls = MethodClass(args.cls) if args.cls else t.method_class
        check = check_gark_row if cls is MethodClass.ROW else check_gark_ros
        report = check(t, order, tol)
        try:
            if args.imex:
                report.extend(
                    check_imex_coupling(t, order, cls is MethodClass.ROS, is_imex_special_case(t), tol)
                )
            if args.dae:
                report.extend(check_dae_algebraic(t, 0, 1, order_x=order, order_z=max(2, order - 1), tol=tol))
        except (ShapeMismatch, StructureMismatch) as exc:
            raise InputError(str(exc)) from None
    doc = {"method": card.name, **report.to_dict(), "failing": [e.id for e in report.failing()]}
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def _starts(text: str, names: Sequence[str]) -> dict[str, int]:
    """Parse ``method=N,method=N`` per-method coarsest step counts."""
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in names:
            raise InputError(f"--starts entry {item!r} must be method=N for a method in --methods")
        try:
            out[key] = int(value)
        except ValueError:
            raise InputError(f"--starts entry {item!r} has a non-integer count") from None
    return out


def cmd_converge(args) -> int:
    prob = make_problem(args.problem, args.t_final, args.grid, args.lambdas)
    names = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not names:
        raise InputError("--methods is empty")
    try:
        cards = [prob.method(m) for m in names]
    except (ShapeMismatch, UnknownMethod) as exc:
        raise InputError(str(exc)) from None
    starts = _starts(args.starts, names) if args.starts else {}
    ladders = {m: ladder(starts.get(m, args.start), args.rungs, args.factor) for m in names}
    finest = max(steps[-1] for steps in ladders.values())
    t0, tf = prob.t_span
    n_ref = int(math.ceil(finest * args.ref_divisor))
    threads = thread_count()
    meta = {
        "problem": args.problem,
        "t_span": [t0, tf],
        "reference": {"method": REFERENCE_METHOD, "n_steps": n_ref, "h": (tf - t0) / n_ref, "h_min_divisor": args.ref_divisor},
        "ladders": ladders,
        "orders": {},
    }
    try:
        reference = prob.final_state(prob.method(REFERENCE_METHOD), n_ref)
    except (GarkError, ArithmeticError, ValueError) as exc:
        print(f"reference run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    lines = ["method,n_steps,h,error"]
    status = EXIT_OK
    for name, card in zip(names, cards):
        table, failure = run_ladder(prob, card, ladders[name], reference, threads)
        lines += table.csv_lines()
        meta["orders"][card.name] = table.order
        if failure is not None:
            print(f"{card.name}: integration failed: {failure}", file=sys.stderr)
            status = EXIT_RUNTIME
        print(f"{card.name}: fitted order {table.order:.3f}", file=sys.stderr)
    csv = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(csv)
    if args.meta:
        Path(args.meta).write_text(json.dumps(meta, indent=2) + "\n")
    sys.stdout.write(json.dumps(meta, indent=2) + "\n" if args.out else csv)
    return status


def cmd_integrate(args) -> int:
    prob = make_problem(args.problem, args.t_final, args.grid, args.lambdas)
    try:
        card = prob.method(args.method)
    except (ShapeMismatch, UnknownMethod) as exc:
        raise InputError(str(exc)) from None
    t0, tf = prob.t_span
    adaptive = args.atol is not None or args.rtol is not None
    if adaptive and (args.h is not None or args.steps is not None):
        raise InputError("choose either a fixed step (--h/--steps) or tolerances (--atol/--rtol)")
    if adaptive:
        if not card.tableau.has_embedded:
            raise InputError(f"adaptive stepping needs embedded weights; {card.name} has none")
        ctl = StepController(atol=args.atol or 1e-6, rtol=args.rtol or 1e-6)
        if prob.kind == "dae":
            traj = integrate_dae_adaptive(prob.problem, card, t0, tf, controller=ctl)
        else:
            traj = integrate_adaptive(prob.problem, card, t0, tf, controller=ctl)
    else:
        if args.steps is not None:
            n = args.steps
        elif args.h is not None:
            if args.h <= 0:
                raise InputError("--h must be positive")
            n = max(1, int(math.ceil((tf - t0) / args.h - 1e-9)))
        else:
            raise InputError("give --h, --steps or --atol/--rtol")
        if n < 1:
            raise InputError("--steps must be at least 1")
        if prob.kind == "dae":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", InconsistentState)
                traj = integrate_dae_fixed(prob.problem, card, t0, tf, n)
        else:
            traj = integrate_fixed(prob.problem, card, t0, tf, n)
    _emit(traj.to_csv(), args.out)
    stats = {"method": card.name, "problem": args.problem, "adaptive": adaptive, **traj.stats.as_dict()}
    text = json.dumps(stats, indent=2) + "\n"
    if args.stats:
        Path(args.stats).write_text(text)
    elif args.out:
        sys.stdout.write(text)
    else:
        sys.stderr.write(text)
    return EXIT_OK


def _range(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"range {text!r} must look like lo:hi:count") from None
    if n < 1:
        raise InputError(f"range {text!r} has no points")
    return lo, hi, n


def cmd_stability(args) -> int:
    card = resolve_method(args.method)
    t = card.tableau
    n = t.n_partitions
    sweep = args.sweep - 1
    if not 0 <= sweep < n:
        raise InputError(f"--sweep must be between 1 and {n}")
    pins = None
    if args.pin:
        pins = _complex_list(args.pin)
        if len(pins) == n - 1:
            pins.insert(sweep, 0j)
        if len(pins) != n:
            raise InputError(f"--pin needs {n - 1} or {n} values")
    grid = scan_region(t, sweep, _range(args.re), _range(args.im), pins)
    _emit(grid.to_csv(), args.out)
    return EXIT_OK


def cmd_export(args) -> int:
    card = resolve_method(args.method)
    if args.partitions is not None:
        try:
            card = for_partitions(args.method, args.partitions)
        except (ShapeMismatch, UnknownMethod) as exc:
            raise InputError(str(exc)) from None
    _emit(dumps(card.tableau) + "\n", args.out)
    return EXIT_OK


# --------------------------------------------------------------------------- #
# parser
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="garkrow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run-config JSON whose keys mirror the long options")
        p.add_argument("--out", help="write the main output here instead of stdout")

    p = sub.add_parser("check", help="evaluate order conditions")
    p.add_argument("method", help="built-in method id or tableau JSON file")
    p.add_argument("--order", type=int)
    p.add_argument("--class", dest="cls", choices=[c.value for c in MethodClass])
    p.add_argument("--dae", action="store_true", help="add the index-1 DAE conditions")
    p.add_argument("--imex", action="store_true", help="add the IMEX coupling conditions")
    p.add_argument("--tol", type=float)
    common(p)
    p.set_defaults(func=cmd_check)

    def problem_opts(p):
        p.add_argument("problem", choices=PROBLEM_IDS)
        p.add_argument("--t-final", type=float)
        p.add_argument("--grid", type=int, help="Brusselator interior points (default 100)")
        p.add_argument("--lambdas", help="Dahlquist eigenvalues, comma separated (default -1,-10)")

    p = sub.add_parser("converge", help="fixed-step convergence study")
    problem_opts(p)
    p.add_argument("--methods", required=True, help="comma-separated method ids")
    p.add_argument("--start", type=int, default=10, help="coarsest number of steps")
    p.add_argument("--starts", help="per-method coarsest step counts, e.g. imex-ros22=10400,imex-ros4-3-6=1980")
    p.add_argument("--rungs", type=int, default=10)
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--ref-divisor", type=float, default=100.0, help="reference step = smallest ladder step / this")
    p.add_argument("--meta", help="write run metadata JSON here")
    common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("integrate", help="single integration run")
    problem_opts(p)
    p.add_argument("--method", required=True)
    p.add_argument("--h", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--atol", type=float)
    p.add_argument("--rtol", type=float)
    p.add_argument("--stats", help="write statistics JSON here")
    common(p)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("stability", help="sample |R| on a grid")
    p.add_argument("method")
    p.add_argument("--sweep", type=int, default=1, help="one-based partition whose z is swept")
    p.add_argument("--re", default="-5:1:61")
    p.add_argument("--im", default="-3:3:61")
    p.add_argument("--pin", help="fixed z values for the other partitions, comma separated")
    common(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("export-tableau", help="write a method as tableau JSON")
    p.add_argument("method")
    p.add_argument("--partitions", type=int, help="shape for a problem with this many partitions")
    common(p)
    p.set_defaults(func=cmd_export)
    return parser


def _apply_config(parser: argparse.ArgumentParser, command: str, path: str) -> None:
    """Install a run-config file's values as defaults of ``command``'s parser."""
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("a run config must be a JSON object")
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if command not in sub_action.choices:
        raise InputError(f"unknown command {command!r}")
    sub = sub_action.choices[command]
    actions = {a.dest: a for a in sub._actions}
    actions["class"] = actions["cls"] if "cls" in actions else None
    defaults = {}
    for key, value in cfg.items():
        action = actions.get(key.replace("-", "_"))
        if action is None or action.dest == "help":
            raise InputError(f"unknown config key {key!r}")
        defaults[action.dest] = value
        if not action.option_strings:
            action.nargs = "?"  # a positional given in the config becomes optional
        action.required = False
    sub.set_defaults(**defaults)


#: Options whose values may start with a minus sign (ranges and complex lists).
_SIGNED_OPTIONS = ("--re", "--im", "--pin", "--lambdas")


def _glue_signed_values(argv: list[str]) -> list[str]:
    """Rewrite ``--re -5:1:61`` as ``--re=-5:1:61`` so argparse does not read the value as an option."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _SIGNED_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    argv = _glue_signed_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    try:
        known, _ = pre.parse_known_args(argv)
        if known.config and known.command:
            _apply_config(parser, known.command, known.config)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
        return args.func(args)
    except (InputError, UnknownMethod) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GarkError, ArithmeticError, ValueError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end.

Subcommands: ``interval`` (tail-area interval from CSV data), ``rho-max``
(correlation profile of a design), ``bound`` (minimum-coverage upper
bound), ``curve`` (bound against |rho|_max for several sample sizes) and
``verify`` (named Monte Carlo check suites).

Exit codes: 0 success, 2 validation/input error, 3 numerical failure
(including a failed verify suite).  Summary lines print at 6 significant
digits; CSV payloads are written at full precision so that re-reading
them reproduces the computed values bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import __version__
from .bound import BoundResult, bound_curve, resolve_d, upper_bound
from .coverage import QuadratureConfig
from .errors import MatacoverError
from .interval import MataRequest, solve_interval
from .linreg import ModelSubset, RegressionProblem, correlation_profile, fit_family
from .suites import SUITES
from .weights import WeightSpec, model_weights

CSV_COLUMNS = ("n", "m", "d", "alpha", "rho_max_abs", "gamma_star", "upper_bound")


class CliError(Exception):
    """Input/validation problem; maps to exit code 2."""


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def read_csv_matrix(path: str, header: str = "auto") -> tuple[np.ndarray, list[str] | None]:
    """Read a numeric CSV; returns (matrix, column names or None).

    ``header`` is 'auto' (non-numeric first row means header), 'yes' or
    'no'.  Malformed cells are reported with 1-based row/column.
    """
    try:
        with open(path, newline="") as fh:
            raw = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if not raw:
        raise CliError(f"{path}: empty file")

    def parse_row(cells, rownum):
        out = []
        for j, cell in enumerate(cells):
            try:
                out.append(float(cell))
            except ValueError:
                raise CliError(
                    f"{path}: row {rownum}, column {j + 1}: not a number: {cell!r}"
                ) from None
        return out

    names: list[str] | None = None
    first_numeric = True
    try:
        [float(c) for c in raw[0]]
    except ValueError:
        first_numeric = False
    if header == "yes" or (header == "auto" and not first_numeric):
        names = [c.strip() for c in raw[0]]
        raw = raw[1:]
        if not raw:
            raise CliError(f"{path}: no data rows below the header")
    data = [parse_row(row, i + 1 + (names is not None)) for i, row in enumerate(raw)]
    width = len(data[0])
    for i, row in enumerate(data):
        if len(row) != width:
            raise CliError(f"{path}: row {i + 1 + (names is not None)} has "
                           f"{len(row)} cells, expected {width}")
    return np.asarray(data), names


def _parse_vector(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip() != ""])
    except ValueError as exc:
        raise CliError(f"cannot parse {what} {text!r}: comma-separated numbers expected") from exc


def _load_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        with open(path) as fh:
            for ln, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}: line {ln}: expected key=value")
                key, value = line.split("=", 1)
                out[key.strip().replace("_", "-")] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    return out


def _quadrature_from(args) -> QuadratureConfig | None:
    fields = {}
    if args.nodes_x is not None:
        fields["nodes_x"] = args.nodes_x
    if args.nodes_y is not None:
        fields["nodes_y"] = args.nodes_y
    if args.x_halfwidth is not None:
        fields["x_halfwidth"] = args.x_halfwidth
    if args.gamma_max is not None:
        fields["gamma_grid_max"] = args.gamma_max
    if args.refine_tol is not None:
        fields["gamma_refine_tol"] = args.refine_tol
    return QuadratureConfig(**fields) if fields else None


def _add_quadrature_flags(sp) -> None:
    sp.add_argument("--nodes-x", type=int, help="quadrature nodes on the x axis")
    sp.add_argument("--nodes-y", type=int, help="quadrature nodes on the y axis")
    sp.add_argument("--x-halfwidth", type=float, help="x truncation half width")
    sp.add_argument("--gamma-max", type=float, help="gamma search limit")
    sp.add_argument("--refine-tol", type=float, help="gamma refinement tolerance")


def _add_data_flags(sp) -> None:
    sp.add_argument("--data", required=True, help="CSV file with the design matrix")
    sp.add_argument("--a", required=True, help="interest vector, comma separated")
    sp.add_argument("--q", type=int, required=True,
                    help="number of protected leading columns (never dropped)")
    sp.add_argument("--header", choices=("auto", "yes", "no"), default="auto",
                    help="whether the CSV has a header row (default: auto-detect)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="matabound",
        description="Model-averaged tail-area intervals and coverage bounds",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", help="key=value file supplying default flag values")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("interval", help="tail-area interval from CSV data")
    _add_data_flags(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--d-rule", default="aic",
                    help="aic, bic, or fixed:<value> (also plain number)")
    sp.set_defaults(handler=cmd_interval)

    sp = sub.add_parser("rho-max", help="correlation profile and |rho|_max")
    _add_data_flags(sp)
    sp.add_argument("--response", action="store_true",
                    help="treat the last CSV column as the response and drop it")
    sp.set_defaults(handler=cmd_rho_max)

    sp = sub.add_parser("bound", help="upper bound on minimum coverage")
    sp.add_argument("--rho-max", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--d-rule", default="aic")
    sp.add_argument("--out", help="write the CSV row to this file")
    _add_quadrature_flags(sp)
    sp.set_defaults(handler=cmd_bound)

    sp = sub.add_parser("curve", help="bound against |rho|_max for several n")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", required=True, help="comma-separated sample sizes")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--d-rule", default="aic")
    sp.add_argument("--rho-grid", default="0:0.95:0.05",
                    help="start:stop:step or comma-separated values")
    sp.add_argument("--out", help="write the CSV table to this file")
    _add_quadrature_flags(sp)
    sp.set_defaults(handler=cmd_curve)

    sp = sub.add_parser("verify", help="run a named Monte Carlo check suite")
    sp.add_argument("suite", choices=sorted(SUITES))
    sp.add_argument("--reps", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=20240800)
    sp.set_defaults(handler=cmd_verify)
    return ap


def _resolve_d_rule(text) -> float | str:
    if isinstance(text, str) and text.lower().startswith("fixed:"):
        return float(text.split(":", 1)[1])
    if isinstance(text, str) and text.lower() in ("aic", "bic"):
        return text.lower()
    try:
        return float(text)
    except (TypeError, ValueError):
        raise CliError(f"unknown d rule {text!r} (aic, bic, or fixed:<value>)") from None


def _problem_from_args(args, with_response: bool) -> RegressionProblem:
    data, _ = read_csv_matrix(args.data, args.header)
    if with_response:
        if data.shape[1] < 2:
            raise CliError("need at least one design column plus the response")
        X, y = data[:, :-1], data[:, -1]
    else:
        X, y = data, None
    a = _parse_vector(args.a, "--a")
    try:
        return RegressionProblem(X, a, q=args.q, y=y)
    except (ValueError, MatacoverError) as exc:
        raise CliError(str(exc)) from exc


def cmd_interval(args) -> int:
    prob = _problem_from_args(args, with_response=True)
    d = resolve_d(_resolve_d_rule(args.d_rule), prob.n)
    spec = WeightSpec.gic(prob.n, d)
    try:
        req = MataRequest(prob, spec, alpha=args.alpha)
        family = req.resolved_family()
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    fits = fit_family(prob, family)
    weights = model_weights(fits, fits[ModelSubset(0)].rss, spec)
    iv = solve_interval(req, fits=fits, weights=weights)
    print(f"n={prob.n} p={prob.p} q={prob.q} models={len(family)} "
          f"alpha={_fmt(args.alpha)} d={_fmt(d)}")
    print(f"interval lower = {_fmt(iv.lower)}")
    print(f"interval upper = {_fmt(iv.upper)}")
    print("top model weights (dropped 0-based columns : weight):")
    top = sorted(weights.items(), key=lambda kv: -kv[1])[:10]
    for K, wgt in top:
        label = "{" + ",".join(map(str, K.indices)) + "}" if K.mask else "{} (full)"
        print(f"  {label:24s} {_fmt(wgt)}")
    return 0


def cmd_rho_max(args) -> int:
    if getattr(args, "response", False):
        prob = _problem_from_args(args, with_response=True)
    else:
        prob = _problem_from_args(args, with_response=False)
    rho, rho_max_abs, argmax = correlation_profile(prob)
    print("column  rho")
    for j, r in enumerate(rho, start=prob.q):
        mark = "  <- max |rho|" if j == argmax else ""
        print(f"{j:6d}  {_fmt(r)}{mark}")
    print(f"rho_max_abs = {_fmt(rho_max_abs)} at column {argmax}")
    return 0


def _emit_rows(rows: list[tuple], out_path: str | None) -> None:
    lines = [",".join(CSV_COLUMNS)]
    lines += [",".join(f"{v!r}" if isinstance(v, float) else str(v) for v in row)
              for row in rows]
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_bound(args) -> int:
    if not 0.0 <= args.rho_max < 1.0:
        raise CliError("--rho-max must lie in [0, 1)")
    if args.n <= args.p:
        raise CliError("--n must exceed --p")
    d = resolve_d(_resolve_d_rule(args.d_rule), args.n)
    quad = _quadrature_from(args)
    res: BoundResult = upper_bound(args.rho_max, args.n - args.p, args.n,
                                   d, args.alpha, quad)
    print(f"upper bound on minimum coverage = {_fmt(res.upper_bound)} "
          f"(gamma* = {_fmt(res.gamma_star)})")
    _emit_rows([(args.n, args.n - args.p, d, args.alpha, args.rho_max,
                 res.gamma_star, res.upper_bound)], args.out)
    return 0


def _parse_rho_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliError("--rho-grid range must be start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise CliError(f"cannot parse --rho-grid {text!r}") from None
        if step <= 0:
            raise CliError("--rho-grid step must be positive")
        return [float(r) for r in np.arange(start, stop + step / 2.0, step)]
    return [float(v) for v in _parse_vector(text, "--rho-grid")]


def cmd_curve(args) -> int:
    n_list = [int(v) for v in _parse_vector(args.n, "--n")]
    if any(n <= args.p for n in n_list):
        raise CliError("every --n must exceed --p")
    rho_grid = _parse_rho_grid(args.rho_grid)
    if any(not 0.0 <= r < 1.0 for r in rho_grid):
        raise CliError("--rho-grid values must lie in [0, 1)")
    d_rule = _resolve_d_rule(args.d_rule)
    quad = _quadrature_from(args)
    result = bound_curve(rho_grid, [(n - args.p, n) for n in n_list],
                         d_rule, args.alpha, quad)
    _emit_rows(
        [(r.n, r.m, r.d, r.alpha, r.rho_max_abs, r.gamma_star, r.upper_bound)
         for r in result.rows],
        args.out,
    )
    worst = max(result.max_increase.values())
    print(f"# curves: {len(n_list)}; worst monotonicity violation: {_fmt(worst)}",
          file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    rows = SUITES[args.suite](reps=args.reps, seed=args.seed)
    failed = [r for r in rows if not r.passed]
    for r in rows:
        print(r)
    print(f"{args.suite}: {len(rows) - len(failed)}/{len(rows)} checks passed")
    return 3 if failed else 0


def _apply_config_defaults(argv: list[str]) -> list[str]:
    """Inject values from --config as defaults (explicit flags win)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    try:
        path = argv[i + 1]
    except IndexError:
        raise CliError("--config needs a file path") from None
    conf = _load_config(path)
    head, tail = argv[: i], argv[i + 2:]
    if not tail:
        raise CliError("--config must precede a subcommand")
    cmd, rest = tail[0], tail[1:]
    injected = []
    for key, value in conf.items():
        flag = f"--{key}"
        if flag not in rest:
            injected.extend([flag, value])
    return head + [cmd] + injected + rest


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_defaults(argv)
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MatacoverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

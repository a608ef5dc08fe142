"""Command-line front end: solve, oracle, verify, coupled, mlf-eval.

Configuration is a JSON key-value tree (schema documented in the
README); command-line flags override file values, which override
defaults.  Solution output is CSV with header ``x,t,u`` (or
``x,t,u1..uN`` for coupled runs) at 17 significant digits, plus a JSON
summary report.  Exit codes: 0 success, 2 validation, 3 convergence,
4 numeric/accuracy.
"""

from __future__ import annotations

import argparse
import json
import sys
import time as _time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import verify as verify_mod
from .elliptic import EllipticProblem, Grid1D
from .errors import (AccuracyError, ConvergenceError, SubdiffError,
                     ValidationError)
from .l1 import l1_solve
from .mlf import MlfParams, mlf_eval
from .spectral import (FractionalProblem, SpaceTimeField, TimeGrid,
                       picard_solve, solve_coupled, solve_linear)

_SOLVERS = ("spectral", "picard", "l1", "coupled")
_PRESETS = ("constant", "bump", "random")
_FORMATS = ("csv", "report")


@dataclass
class RunConfig:
    """Validated run description; mirrors the JSON schema."""

    solver: str = "picard"
    alpha: float = 0.5
    length: float = 1.0
    n_interior: int = 100
    horizon: float = 1.0
    n_steps: int = 256
    diffusivity: dict = field(
        default_factory=lambda: {"preset": "constant", "value": 1.0})
    reaction: dict = field(
        default_factory=lambda: {"preset": "constant", "value": -1.0})
    initial: dict = field(
        default_factory=lambda: {"preset": "bump", "center": 0.5,
                                 "width": 0.5, "height": 1.0})
    source: dict = field(
        default_factory=lambda: {"preset": "constant", "value": 0.0})
    tol: float = 1e-10
    max_iter: int = 100
    seed: int = 0
    out: str = "run"
    format: str = "csv"
    species: list | None = None
    coupling: list | None = None


_KEYS = {f.name for f in fields(RunConfig)}


def _check_coeff(spec, name, errors):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return {"preset": "constant", "value": float(spec)}
    if isinstance(spec, list):
        if not all(isinstance(v, (int, float)) for v in spec):
            errors.append(f"{name}: inline array must hold numbers")
        return {"values": spec}
    if not isinstance(spec, dict):
        errors.append(f"{name}: expected number, array, or preset object")
        return spec
    if "values" in spec:
        if not isinstance(spec["values"], list):
            errors.append(f"{name}.values must be an array")
        return spec
    preset = spec.get("preset")
    if preset not in _PRESETS:
        errors.append(f"{name}.preset must be one of {_PRESETS}, got {preset!r}")
        return spec
    required = {"constant": ("value",),
                "bump": ("center", "width", "height"),
                "random": ("seed", "amplitude")}[preset]
    for key in required:
        if key not in spec:
            errors.append(f"{name}: preset '{preset}' requires field '{key}'")
        elif not isinstance(spec[key], (int, float)):
            errors.append(f"{name}.{key} must be a number")
    if preset == "bump" and spec.get("width", 1.0) <= 0.0:
        errors.append(f"{name}: bump width must be > 0")
    if preset == "random" and "modes" in spec and (
            int(spec["modes"]) != spec["modes"] or spec["modes"] < 1):
        errors.append(f"{name}.modes must be a positive integer")
    return spec


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config, reporting every violation."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"config is not valid JSON (line {exc.lineno}, column "
            f"{exc.colno}): {exc.msg}") from None
    if not isinstance(data, dict):
        raise ValidationError("config root must be a JSON object")

    errors = []
    for key in data:
        if key not in _KEYS:
            errors.append(f"unknown config key '{key}'")
    cfg = RunConfig(**{k: v for k, v in data.items() if k in _KEYS})

    if cfg.solver not in _SOLVERS:
        errors.append(f"solver must be one of {_SOLVERS}, got {cfg.solver!r}")
    if not isinstance(cfg.alpha, (int, float)) or not 0.0 < cfg.alpha < 1.0:
        errors.append(f"alpha out of (0,1): {cfg.alpha!r}")
    if not isinstance(cfg.length, (int, float)) or cfg.length <= 0.0:
        errors.append(f"length must be > 0, got {cfg.length!r}")
    if not isinstance(cfg.n_interior, int) or cfg.n_interior < 2:
        errors.append(f"n_interior must be an integer >= 2, got {cfg.n_interior!r}")
    if not isinstance(cfg.horizon, (int, float)) or cfg.horizon <= 0.0:
        errors.append(f"horizon must be > 0, got {cfg.horizon!r}")
    if not isinstance(cfg.n_steps, int) or cfg.n_steps < 1:
        errors.append(f"n_steps must be an integer >= 1, got {cfg.n_steps!r}")
    if not isinstance(cfg.tol, (int, float)) or cfg.tol <= 0.0:
        errors.append(f"tol must be > 0, got {cfg.tol!r}")
    if not isinstance(cfg.max_iter, int) or cfg.max_iter < 1:
        errors.append(f"max_iter must be an integer >= 1, got {cfg.max_iter!r}")
    if cfg.format not in _FORMATS:
        errors.append(f"format must be one of {_FORMATS}, got {cfg.format!r}")

    cfg.diffusivity = _check_coeff(cfg.diffusivity, "diffusivity", errors)
    cfg.reaction = _check_coeff(cfg.reaction, "reaction", errors)
    cfg.initial = _check_coeff(cfg.initial, "initial", errors)
    cfg.source = _check_coeff(cfg.source, "source", errors)
    if (cfg.diffusivity.get("preset") == "constant"
            and isinstance(cfg.diffusivity.get("value"), (int, float))
            and cfg.diffusivity["value"] <= 0.0):
        errors.append("diffusivity violates ellipticity: constant value "
                      f"{cfg.diffusivity['value']} is not > 0")

    n = cfg.n_interior if isinstance(cfg.n_interior, int) else 0
    for name, spec, want in (("diffusivity", cfg.diffusivity, n + 1),
                             ("reaction", cfg.reaction, n),
                             ("initial", cfg.initial, n),
                             ("source", cfg.source, n)):
        if isinstance(spec, dict) and isinstance(spec.get("values"), list):
            if n and len(spec["values"]) != want:
                errors.append(f"{name}: inline array length "
                              f"{len(spec['values'])} != expected {want}")

    if cfg.solver == "coupled":
        if not isinstance(cfg.species, list) or len(cfg.species) < 1:
            errors.append("coupled solver requires a nonempty 'species' list")
        else:
            for k, sp in enumerate(cfg.species):
                if not isinstance(sp, dict):
                    errors.append(f"species[{k}] must be an object")
                    continue
                sp["initial"] = _check_coeff(
                    sp.get("initial", 0.0), f"species[{k}].initial", errors)
                sp["source"] = _check_coeff(
                    sp.get("source", 0.0), f"species[{k}].source", errors)
            ns = len(cfg.species)
            if not isinstance(cfg.coupling, list) or len(cfg.coupling) != ns:
                errors.append(f"coupling must be a {ns}x{ns} array of "
                              "coefficient specs")
            else:
                for a, row in enumerate(cfg.coupling):
                    if not isinstance(row, list) or len(row) != ns:
                        errors.append(f"coupling[{a}] must have {ns} entries")
                        continue
                    for b in range(ns):
                        row[b] = _check_coeff(
                            row[b], f"coupling[{a}][{b}]", errors)

    if errors:
        raise ValidationError(
            "invalid config: " + "; ".join(errors), messages=errors)
    return cfg


def _materialize_coeff(spec, points, length):
    """Sample a validated coefficient spec at the given points."""
    if "values" in spec:
        return np.asarray(spec["values"], dtype=float)
    preset = spec["preset"]
    if preset == "constant":
        return np.full(points.shape, float(spec["value"]))
    if preset == "bump":
        s = 2.0 * (points - spec["center"]) / spec["width"]
        out = np.zeros_like(points)
        inside = np.abs(s) < 1.0
        out[inside] = spec["height"] * np.cos(0.5 * np.pi * s[inside]) ** 2
        return out
    rng = np.random.default_rng(int(spec["seed"]))
    return spec["amplitude"] * verify_mod.trig_field(
        rng, points, length, int(spec.get("modes", 3)))


def _build_problem(cfg: RunConfig) -> FractionalProblem:
    grid = Grid1D(cfg.length, cfg.n_interior)
    time = TimeGrid(cfg.horizon, cfg.n_steps)
    elliptic = EllipticProblem(
        grid,
        _materialize_coeff(cfg.diffusivity, grid.midpoints, cfg.length),
        _materialize_coeff(cfg.reaction, grid.nodes, cfg.length))
    initial = _materialize_coeff(cfg.initial, grid.nodes, cfg.length)
    source = SpaceTimeField.from_profile(
        grid, time, _materialize_coeff(cfg.source, grid.nodes, cfg.length))
    return FractionalProblem(cfg.alpha, elliptic, initial, source, time)


def _write_csv(path, fields_list, labels):
    grid = fields_list[0].grid
    time = fields_list[0].time
    with open(path, "w") as fh:
        fh.write("x,t," + ",".join(labels) + "\n")
        for k, t in enumerate(time.nodes):
            for i, x in enumerate(grid.nodes):
                vals = ",".join(f"{f.values[i, k]:.17g}" for f in fields_list)
                fh.write(f"{x:.17g},{t:.17g},{vals}\n")


def _write_report(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _report_payload(cfg, report, fields_list, wall):
    values = np.concatenate([f.values for f in fields_list])
    return {
        "solver": cfg.solver,
        "alpha": cfg.alpha,
        "grid": {"length": cfg.length, "n_interior": cfg.n_interior},
        "time": {"horizon": cfg.horizon, "n_steps": cfg.n_steps},
        "iterations": None if report is None else report.iterations,
        "residuals": None if report is None else list(report.residuals),
        "converged": None if report is None else report.converged,
        "shift": None if report is None else report.shift,
        "min_u": float(values.min()),
        "max_u": float(values.max()),
        "wall_time": wall,
    }


def _emit(cfg, fields_list, labels, report, wall):
    payload = _report_payload(cfg, report, fields_list, wall)
    if cfg.format == "csv":
        _write_csv(f"{cfg.out}.csv", fields_list, labels)
    _write_report(f"{cfg.out}_report.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_solve(cfg: RunConfig) -> int:
    problem = _build_problem(cfg)
    start = _time.perf_counter()
    report = None
    if cfg.solver == "spectral":
        u = solve_linear(problem)
    elif cfg.solver == "picard":
        u, report = picard_solve(problem, cfg.tol, cfg.max_iter)
    elif cfg.solver == "l1":
        u = l1_solve(problem)
    else:
        raise ValidationError("use the 'coupled' subcommand for coupled runs")
    return _emit(cfg, [u], ["u"], report, _time.perf_counter() - start)


def cmd_oracle(cfg: RunConfig, compare: bool) -> int:
    cfg = replace(cfg, solver="l1")
    problem = _build_problem(cfg)
    start = _time.perf_counter()
    u = l1_solve(problem)
    if not compare:
        return _emit(cfg, [u], ["u"], None, _time.perf_counter() - start)

    grid = problem.elliptic.grid
    print("K        rel_L2_distance   order")
    prev_err = None
    for k_steps in (128, 256, 512, 1024):
        sub = replace(cfg, n_steps=k_steps)
        prob_k = _build_problem(sub)
        ref = (solve_linear(prob_k)
               if prob_k.elliptic.reaction.max() < 0.0
               else picard_solve(prob_k, cfg.tol, cfg.max_iter)[0])
        num = l1_solve(prob_k)
        err = (grid.norm(num.values[:, -1] - ref.values[:, -1])
               / max(grid.norm(ref.values[:, -1]), 1e-300))
        order = ("   -  " if prev_err is None
                 else f"{np.log2(prev_err / err):6.3f}")
        print(f"{k_steps:<8d} {err:.6e}    {order}")
        prev_err = err
    print(f"wall_time {_time.perf_counter() - start:.2f}s")
    return 0


def cmd_coupled(cfg: RunConfig) -> int:
    grid = Grid1D(cfg.length, cfg.n_interior)
    time = TimeGrid(cfg.horizon, cfg.n_steps)
    diffusivity = _materialize_coeff(cfg.diffusivity, grid.midpoints,
                                     cfg.length)
    zero = np.zeros(grid.n_interior)
    problems = []
    for sp in cfg.species:
        ell = EllipticProblem(grid, diffusivity, zero)
        initial = _materialize_coeff(sp["initial"], grid.nodes, cfg.length)
        source = SpaceTimeField.from_profile(
            grid, time,
            _materialize_coeff(sp["source"], grid.nodes, cfg.length))
        problems.append(FractionalProblem(cfg.alpha, ell, initial, source,
                                          time))
    coupling = np.array([
        [_materialize_coeff(cfg.coupling[a][b], grid.nodes, cfg.length)
         for b in range(len(cfg.species))]
        for a in range(len(cfg.species))])
    start = _time.perf_counter()
    fields_list, report = solve_coupled(problems, coupling, cfg.tol,
                                        cfg.max_iter)
    labels = [f"u{i + 1}" for i in range(len(fields_list))]
    return _emit(cfg, fields_list, labels, report,
                 _time.perf_counter() - start)


def cmd_verify(args) -> int:
    kwargs = {}
    for name, attr in (("n_trials", "n_trials"), ("seed", "seed"),
                       ("n_interior", "grid_n"), ("n_steps", "time_steps"),
                       ("horizon", "horizon"), ("c_max", "c_max"),
                       ("picard_tol", "tol"), ("max_iter", "max_iter")):
        value = getattr(args, attr, None)
        if value is not None:
            kwargs[name] = value
    config = verify_mod.TrialConfig(**kwargs)
    reports = verify_mod.run_all(config)
    all_passed = True
    for rep in reports:
        print(rep.summary())
        all_passed &= rep.passed and not rep.solver_failures
    print("OVERALL", "PASS" if all_passed else "FAIL")
    if args.out:
        payload = [{
            "name": r.name, "trials": r.trials,
            "violations": r.violation_count, "worst": r.worst_violation,
            "passed": r.passed, "runtime": r.runtime,
            "offenders": r.offenders, "solver_failures": r.solver_failures,
        } for r in reports]
        _write_report(f"{args.out}_verify.json", payload)
    return 0 if all_passed else 1


def cmd_mlf_eval(args) -> int:
    value = mlf_eval(MlfParams(args.alpha, args.beta), args.z)
    print(f"{value:.17g}")
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="path to a JSON config file")
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--grid-n", type=int, dest="grid_n")
    sub.add_argument("--time-steps", type=int, dest="time_steps")
    sub.add_argument("--horizon", type=float)
    sub.add_argument("--tol", type=float)
    sub.add_argument("--max-iter", type=int, dest="max_iter")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out")
    sub.add_argument("--format", choices=_FORMATS)


def _config_from_args(args) -> RunConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = parse_config("{}")
    overrides = {}
    for attr, key in (("alpha", "alpha"), ("grid_n", "n_interior"),
                      ("time_steps", "n_steps"), ("horizon", "horizon"),
                      ("tol", "tol"), ("max_iter", "max_iter"),
                      ("seed", "seed"), ("out", "out"), ("format", "format")):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "solver", None):
        overrides["solver"] = args.solver
    cfg = replace(cfg, **overrides)
    if overrides:
        # re-validate after flag overrides
        payload = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)
                   if getattr(cfg, f.name) is not None}
        cfg = parse_config(json.dumps(payload))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subdiff",
        description="time-fractional diffusion laboratory")
    subs = parser.add_subparsers(dest="command", required=True)

    solve = subs.add_parser("solve", help="run a single solve")
    _add_common(solve)
    solve.add_argument("--solver", choices=("spectral", "picard", "l1"))

    oracle = subs.add_parser("oracle", help="run the L1 oracle")
    _add_common(oracle)
    oracle.add_argument("--compare", action="store_true",
                        help="compare against the spectral path over a "
                             "ladder of time grids")

    coupled = subs.add_parser("coupled", help="run a coupled-system solve")
    _add_common(coupled)

    ver = subs.add_parser("verify", help="run the property suites")
    ver.add_argument("--n-trials", type=int, dest="n_trials")
    ver.add_argument("--seed", type=int)
    ver.add_argument("--grid-n", type=int, dest="grid_n")
    ver.add_argument("--time-steps", type=int, dest="time_steps")
    ver.add_argument("--horizon", type=float)
    ver.add_argument("--c-max", type=float, dest="c_max")
    ver.add_argument("--tol", type=float)
    ver.add_argument("--max-iter", type=int, dest="max_iter")
    ver.add_argument("--out")

    mlf = subs.add_parser("mlf-eval", help="evaluate E_{alpha,beta}(z)")
    mlf.add_argument("--alpha", type=float, required=True)
    mlf.add_argument("--beta", type=float, required=True)
    mlf.add_argument("--z", type=float, required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "mlf-eval":
            return cmd_mlf_eval(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "coupled":
            args.solver = "coupled"
        cfg = _config_from_args(args)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg, args.compare)
        if args.command == "coupled":
            return cmd_coupled(cfg)
        raise ValidationError(f"unknown command {args.command!r}")
    except ValidationError as exc:
        for msg in exc.messages:
            print(f"error: {msg}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(f"residual history: {list(exc.report.residuals)}",
                  file=sys.stderr)
        return 3
    except AccuracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except SubdiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

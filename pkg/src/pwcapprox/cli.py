"""Command-line front end.

Exit codes: 0 success, 1 an error bound or property check failed,
2 bad configuration or input, 3 the build or an output write failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, dc, separable, univariate
from .core import Box, PwcFunction
from .expr import DEFAULT_GRAD_STEP, DEFAULT_HESS_STEP, DomainError, ParseError, parse, relabel
from .modelfile import ModelFile, ModelFileError, load_model, save_model
from .separable import SumForm

EXIT_OK, EXIT_BOUND, EXIT_CONFIG, EXIT_BUILD = 0, 1, 2, 3
DEFAULT_SEED = 0
DEFAULT_RANDOM_SAMPLES = 1000
# Sample budget for multivariate error checks.
MAX_CHECK_POINTS = 10**6


class ConfigError(Exception):
    pass


class BuildError(Exception):
    pass


_BUILD_ERRORS = (
    univariate.GridTooLarge,
    dc.TooManyPlanes,
    separable.TooManyPieces,
    analysis.TooManySamples,
    DomainError,
)


def _floats(text: str, what: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}")
    if not values or not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{what}: expected finite numbers, got {text!r}")
    return values


def _box(lower: str, upper: str) -> Box:
    lo, hi = _floats(lower, "--lower"), _floats(upper, "--upper")
    try:
        return Box(tuple(lo), tuple(hi))
    except ValueError as exc:
        raise ConfigError(str(exc))


def _positive(value, flag):
    if value is not None and not value > 0:
        raise ConfigError(f"{flag} must be positive")
    return value


def _parse(text: str, dimension: int, flag: str = "--function"):
    try:
        return parse(text, dimension)
    except ParseError as exc:
        raise ConfigError(f"{flag} {text!r}: {exc}")


def _component(text: str, j: int):
    """Component ``j`` (1-based) may be written in ``x1`` or in ``x{j}``."""
    ast = _parse(text, j, "--component")
    used = ast.variables()
    if used <= {1}:
        return relabel(ast, {}, 1)
    if used <= {j}:
        return relabel(ast, {j: 1}, 1)
    raise ConfigError(f"--component {text!r}: component {j} may only use x1 or x{j}")


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise BuildError(f"cannot write {path}: {exc}")


def _write_report(path, doc):
    if path:
        _write_text(path, json.dumps(doc, indent=1) + "\n")


def _save(model: ModelFile, path):
    try:
        save_model(model, path)
    except OSError as exc:
        raise BuildError(f"cannot write {path}: {exc}")


def _load(path) -> ModelFile:
    try:
        return load_model(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}")
    except ModelFileError as exc:
        raise ConfigError(str(exc))


def _kappa(args, f, lower, upper):
    if args.kappa is not None:
        return _positive(args.kappa, "--kappa"), False
    kappa = analysis.estimate_lipschitz(f, Box((lower,), (upper,)), args.lipschitz_samples,
                                        args.safety)
    return kappa, True


def cmd_approx_uni(args) -> int:
    f = _parse(args.function, 1)
    box = _box(str(args.lower), str(args.upper))
    _positive(args.eps, "--eps")
    kappa, estimated = _kappa(args, f, box.lower[0], box.upper[0])
    model = univariate.build_univariate(f, box.lower[0], box.upper[0], kappa, args.eps)
    report = analysis.univariate_error(f, model.pwc, model.grid, args.density,
                                       random_points=args.random_samples, seed=args.seed,
                                       bound=args.eps)
    meta = dict(model.meta, kappa_heuristic=estimated, function=args.function)
    _save(ModelFile(model.pwc, meta), args.out)
    _write_report(args.report, dict(report.to_dict(), seed=args.seed))
    print(f"kappa = {kappa!r}{' (estimated, heuristic)' if estimated else ''}")
    print(f"n_p = {model.grid.n_p}, delta = {model.grid.delta!r}")
    print(report.summary())
    print(f"model written to {args.out}")
    return EXIT_OK if report.bound_satisfied else EXIT_BOUND


def _dc_points_cap(dim):
    return max(2, int(math.floor(MAX_CHECK_POINTS ** (1.0 / dim) + 1e-9)))


def cmd_approx_c2(args) -> int:
    box = _box(args.lower, args.upper)
    if box.dim > dc.MAX_DIM:
        raise ConfigError(f"dimension {box.dim} exceeds {dc.MAX_DIM}")
    f = _parse(args.function, box.dim)
    _positive(args.target_eps, "--target-eps")
    if args.grid < 2:
        raise ConfigError("--grid must be at least 2")
    if args.mu is not None:
        if args.mu < 0:
            raise ConfigError("--mu must be non-negative")
        mu, heuristic = args.mu, False
    else:
        mu = dc.estimate_mu(f, box, args.mu_samples, args.safety, args.h_hess)
        heuristic = True
    cap = _dc_points_cap(box.dim)
    if args.target_eps is not None:
        pwc, grid, report = dc.build_c2_to_tolerance(
            f, box, mu, args.target_eps, args.grid, args.density, cap, args.h_grad)
    else:
        grid = args.grid
        pwc = dc.build_c2(f, box, mu, grid, args.h_grad)
        report = dc.dc_error(f, pwc, box, grid, args.density, cap)
    if args.target_eps is not None:
        report = analysis.ErrorReport(report.max_abs_error, report.argmax_point,
                                      report.samples_used, args.target_eps,
                                      report.max_abs_error <= args.target_eps)
    model = dc.DcModel(pwc, mu, grid, heuristic, report.max_abs_error, args.target_eps)
    meta = dict(model.meta, function=args.function)
    _save(ModelFile(pwc, meta), args.out)
    _write_report(args.report, dict(report.to_dict(), seed=args.seed))
    print(f"mu = {mu!r}{' (estimated, heuristic)' if heuristic else ''}")
    print(f"grid_per_axis = {grid}, pieces = {pwc.n_pieces}")
    print(report.summary())
    print(f"model written to {args.out}")
    return EXIT_OK if report.bound_satisfied else EXIT_BOUND


def cmd_approx_sep(args) -> int:
    box = _box(args.lower, args.upper)
    if len(args.component) != box.dim:
        raise ConfigError(f"{len(args.component)} --component flags for a {box.dim}-dimensional box")
    funcs = [_component(text, j + 1) for j, text in enumerate(args.component)]
    eps_split = None
    if args.eps_split is not None:
        eps_split = _floats(args.eps_split, "--eps-split")
        if len(eps_split) != box.dim or min(eps_split) <= 0:
            raise ConfigError("--eps-split needs one positive value per coordinate")
        eps = math.fsum(eps_split)
    else:
        if args.eps is None:
            raise ConfigError("--eps or --eps-split is required")
        eps = _positive(args.eps, "--eps")
    if args.kappa is not None:
        kappas = _floats(args.kappa, "--kappa")
        if len(kappas) != box.dim or min(kappas) <= 0:
            raise ConfigError("--kappa needs one positive value per coordinate")
        estimated = False
    else:
        kappas = [analysis.estimate_lipschitz(g, box.axis(j), args.lipschitz_samples, args.safety)
                  for j, g in enumerate(funcs)]
        estimated = True
    model = separable.build_separable(list(zip(funcs, kappas)), box, eps, eps_split)
    target = separable.separable_target(funcs)
    if box.dim == 1:
        part = model.parts[0]
        report = analysis.univariate_error(target, model.sumform, part.grid, args.density,
                                           random_points=args.random_samples, seed=args.seed,
                                           bound=eps)
    else:
        per_axis = min(args.density * max(p.grid.n_p for p in model.parts) + 1,
                       _dc_points_cap(box.dim))
        report = analysis.sup_error(target, model.sumform, box, per_axis,
                                    random_points=args.random_samples, seed=args.seed,
                                    bound=eps)
    meta = dict(model.meta, kappa_heuristic=estimated, components=list(args.component))
    if args.expand:
        payload = separable.expand_sumform(model.sumform, args.max_pieces)
        meta["expanded"] = True
    else:
        payload = model.sumform
    _save(ModelFile(payload, meta), args.out)
    _write_report(args.report, dict(report.to_dict(), seed=args.seed))
    print("kappa = " + ", ".join(repr(k) for k in kappas)
          + (" (estimated, heuristic)" if estimated else ""))
    print("n_p = " + " x ".join(str(p.grid.n_p) for p in model.parts))
    print(report.summary())
    print(f"model written to {args.out}")
    return EXIT_OK if report.bound_satisfied else EXIT_BOUND


def _read_points(args, dim) -> np.ndarray:
    rows = []
    for text in args.point or []:
        rows.append(_floats(text, "--point"))
    if args.points:
        try:
            with open(args.points, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                expected = [f"x{j + 1}" for j in range(dim)]
                if header is None or [h.strip() for h in header] != expected:
                    raise ConfigError(f"{args.points}: header must be {','.join(expected)}")
                for line in reader:
                    if line:
                        rows.append(_floats(",".join(line), args.points))
        except OSError as exc:
            raise ConfigError(f"cannot read {args.points}: {exc}")
    if not rows:
        raise ConfigError("give at least one --point or a --points file")
    for r in rows:
        if len(r) != dim:
            raise ConfigError(f"point {r} has dimension {len(r)}, model has {dim}")
    return np.array(rows, dtype=float)


def _winner_text(w) -> str:
    w = np.atleast_1d(w)
    return ";".join(str(int(i)) for i in w)


def _sample_rows(payload, X):
    values, winners = payload.evaluate(X)
    return [
        [repr(float(v)) for v in x] + [repr(float(val)), _winner_text(w)]
        for x, val, w in zip(X, values, winners)
    ]


def _header(dim):
    return [f"x{j + 1}" for j in range(dim)] + ["p", "winner"]


def cmd_eval(args) -> int:
    model = _load(args.model)
    X = _read_points(args, model.payload.dim)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(_header(model.payload.dim))
    writer.writerows(_sample_rows(model.payload, X))
    return EXIT_OK


def _grid_from_meta(meta, pwc: PwcFunction, j=None) -> tuple[univariate.UniGrid, float]:
    try:
        delta = meta["delta"] if j is None else meta["delta"][j]
        n_p = meta["n_p"] if j is None else meta["n_p"][j]
        kappa = meta["kappa"] if j is None else meta["kappa"][j]
        grid = univariate.UniGrid(pwc.domain.lower[0], pwc.domain.upper[0], float(delta), int(n_p))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ConfigError(f"model metadata lacks a usable grid: {exc}")
    return grid, float(kappa)


def cmd_check(args) -> int:
    model = _load(args.model)
    meta = model.meta
    builder = meta.get("builder")
    if isinstance(model.payload, SumForm) and builder == "separable":
        if not args.component:
            raise ConfigError("--component is required for each coordinate of a sum-form model")
        if len(args.component) != model.payload.dim:
            raise ConfigError(f"model has {model.payload.dim} coordinates, got "
                              f"{len(args.component)} --component flags")
        targets = [(_component(t, j + 1), comp, j)
                   for j, (t, comp) in enumerate(zip(args.component, model.payload.components))]
        eps_list = meta.get("eps_split")
    elif isinstance(model.payload, PwcFunction) and builder == "univariate":
        if not args.function:
            raise ConfigError("--function is required")
        targets = [(_parse(args.function, 1), model.payload, None)]
        eps_list = None
    else:
        raise ConfigError(f"check supports univariate and sum-form models, not builder {builder!r}")

    all_ok = True
    doc = {"components": []}
    for f, pwc, j in targets:
        grid, kappa = _grid_from_meta(meta, pwc, j)
        try:
            props = analysis.check_properties(f, pwc, grid, kappa, args.samples_per_unit)
        except ValueError as exc:
            raise ConfigError(str(exc))
        eps = meta.get("eps") if j is None else (eps_list[j] if eps_list else None)
        bound = 2.5 * kappa * grid.delta
        if eps is not None:
            bound = min(bound, float(eps)) if j is None else float(eps)
        report = analysis.univariate_error(f, pwc, grid, args.density,
                                           random_points=args.random_samples, seed=args.seed,
                                           bound=bound)
        label = "" if j is None else f"[x{j + 1}] "
        for line in props.lines():
            print(label + line)
        print(f"{label}{'PASS' if report.bound_satisfied else 'FAIL'} error: {report.summary()}")
        all_ok = all_ok and props.passed and report.bound_satisfied
        doc["components"].append({"properties": props.to_dict(), "error": report.to_dict()})
    doc["pass"] = all_ok
    doc["seed"] = args.seed
    _write_report(args.report, doc)
    return EXIT_OK if all_ok else EXIT_BOUND


def cmd_study(args) -> int:
    f = _parse(args.function, 1)
    box = _box(str(args.lower), str(args.upper))
    deltas = _floats(args.deltas, "--deltas")
    if min(deltas) <= 0:
        raise ConfigError("--deltas must all be positive")
    kappa, estimated = _kappa(args, f, box.lower[0], box.upper[0])
    rows = analysis.convergence_study(f, box.lower[0], box.upper[0], kappa, deltas,
                                      args.density, args.min_points)
    try:
        analysis.write_study_csv(rows, args.out)
    except OSError as exc:
        raise BuildError(f"cannot write {args.out}: {exc}")
    if args.plot:
        from .plotting import plot_study

        try:
            plot_study(rows, args.plot, title=args.function)
        except OSError as exc:
            raise BuildError(f"cannot write {args.plot}: {exc}")
    print(f"kappa = {kappa!r}{' (estimated, heuristic)' if estimated else ''}")
    print(",".join(analysis.STUDY_HEADER))
    for r in rows:
        print(f"{r.delta:.6g},{r.n_p},{r.max_error:.6g},{r.bound:.6g},{r.ratio:.4f}")
    print(f"table written to {args.out}")
    return EXIT_OK if all(r.ratio <= 1 for r in rows) else EXIT_BOUND


def cmd_sample(args) -> int:
    model = _load(args.model)
    payload = model.payload
    if args.density < 2:
        raise ConfigError("--density must be at least 2 points per axis")
    total = args.density ** payload.dim
    if total > analysis.MAX_SAMPLES:
        raise BuildError(f"{total} sample rows requested, limit is {analysis.MAX_SAMPLES}")
    X = analysis.tensor_samples(payload.domain, args.density)
    try:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_header(payload.dim))
            writer.writerows(_sample_rows(payload, X))
    except OSError as exc:
        raise BuildError(f"cannot write {args.out}: {exc}")
    if args.plot:
        from .plotting import plot_samples

        values, winners = payload.evaluate(X)
        target = None
        if args.function:
            target = _parse(args.function, payload.dim).evaluate_many(X)
        try:
            plot_samples(X, values, winners, args.plot, target)
        except ValueError as exc:
            raise ConfigError(str(exc))
        except OSError as exc:
            raise BuildError(f"cannot write {args.plot}: {exc}")
    print(f"{len(X)} rows written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="seed for supplementary random error samples (default %(default)s)")
    common.add_argument("--safety", type=float, default=analysis.DEFAULT_SAFETY,
                        help="safety factor on estimated kappa or mu (default %(default)s)")
    common.add_argument("--report", help="write a JSON report to this path")

    parser = argparse.ArgumentParser(
        prog="pwcapprox",
        description="Piecewise-concave approximation of functions to a sup-norm tolerance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, out_default, density_default, density_help):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if out_default is not None:
            p.add_argument("--out", default=out_default, help="output path (default %(default)s)")
        if density_default is not None:
            p.add_argument("--density", type=int, default=density_default,
                           help=f"{density_help} (default %(default)s)")
        return p

    def interval(p):
        p.add_argument("--function", required=True, help="target expression in x1")
        p.add_argument("--lower", type=float, required=True)
        p.add_argument("--upper", type=float, required=True)
        p.add_argument("--kappa", type=float, help="Lipschitz constant; estimated if omitted")
        p.add_argument("--lipschitz-samples", type=int, default=10_000,
                       help="samples per unit length for kappa estimation (default %(default)s)")

    p = add("approx-uni", "Approximate a univariate Lipschitz function.", "model.json", 20,
            "error-check samples per subinterval")
    interval(p)
    p.add_argument("--eps", type=float, required=True, help="sup-norm tolerance")
    p.add_argument("--random-samples", type=int, default=DEFAULT_RANDOM_SAMPLES)
    p.set_defaults(handler=cmd_approx_uni)

    p = add("approx-c2", "Approximate a C2 function through a difference-of-convex split.",
            "model.json", 10, "error-check samples per grid cell and axis")
    p.add_argument("--function", required=True, help="target expression in x1..xn")
    p.add_argument("--lower", required=True, help="comma-separated lower bounds")
    p.add_argument("--upper", required=True, help="comma-separated upper bounds")
    p.add_argument("--mu", type=float, help="convexifying shift; estimated (heuristically) if omitted")
    p.add_argument("--grid", type=int, default=11, help="tangent points per axis (default %(default)s)")
    p.add_argument("--target-eps", type=float,
                   help="refine the grid until the sampled error is at most this")
    p.add_argument("--mu-samples", type=int, default=9,
                   help="Hessian sample points per axis for mu estimation (default %(default)s)")
    p.add_argument("--h-grad", type=float, default=DEFAULT_GRAD_STEP)
    p.add_argument("--h-hess", type=float, default=DEFAULT_HESS_STEP)
    p.set_defaults(handler=cmd_approx_c2)

    p = add("approx-sep", "Approximate a separable function sum_j f_j(x_j).", "model.json", 20,
            "error-check samples per subinterval")
    p.add_argument("--component", action="append", required=True,
                   help="univariate term for the next coordinate, in x1 or its own x_j")
    p.add_argument("--lower", required=True, help="comma-separated lower bounds")
    p.add_argument("--upper", required=True, help="comma-separated upper bounds")
    p.add_argument("--eps", type=float, help="total tolerance, split evenly")
    p.add_argument("--eps-split", help="comma-separated per-coordinate tolerances")
    p.add_argument("--kappa", help="comma-separated Lipschitz constants; estimated if omitted")
    p.add_argument("--lipschitz-samples", type=int, default=10_000)
    p.add_argument("--expand", action="store_true", help="write the explicit max form")
    p.add_argument("--max-pieces", type=int, default=separable.DEFAULT_MAX_PIECES)
    p.add_argument("--random-samples", type=int, default=DEFAULT_RANDOM_SAMPLES)
    p.set_defaults(handler=cmd_approx_sep)

    p = add("eval", "Evaluate a model; prints x, p and the winning piece per point.", None, None, "")
    p.add_argument("--model", required=True)
    p.add_argument("--point", action="append", help="comma-separated point (repeatable)")
    p.add_argument("--points", help="CSV file with header x1,...,xn")
    p.set_defaults(handler=cmd_eval)

    p = add("check", "Certify a univariate or sum-form model against its target.", None, 20,
            "error-check samples per subinterval")
    p.add_argument("--model", required=True)
    p.add_argument("--function", help="target expression (univariate models)")
    p.add_argument("--component", action="append", help="per-coordinate targets (sum-form models)")
    p.add_argument("--samples-per-unit", type=int, default=10_000,
                   help="property-check samples per unit length (default %(default)s)")
    p.add_argument("--random-samples", type=int, default=DEFAULT_RANDOM_SAMPLES)
    p.set_defaults(handler=cmd_check)

    p = add("study", "Error versus grid spacing for a univariate function.", "study.csv", 20,
            "error-check samples per subinterval")
    interval(p)
    p.add_argument("--deltas", required=True, help="comma-separated grid spacings")
    p.add_argument("--min-points", type=int, default=100_000,
                   help="minimum error-check samples per build (default %(default)s)")
    p.add_argument("--plot", help="also render the table as a figure (PNG, PDF, ...)")
    p.set_defaults(handler=cmd_study)

    p = add("sample", "Dump model values on a tensor grid for plotting.", "samples.csv", 101,
            "points per axis")
    p.add_argument("--model", required=True)
    p.add_argument("--function", help="target to overlay in --plot")
    p.add_argument("--plot", help="also render a figure (1-D and 2-D models)")
    p.set_defaults(handler=cmd_sample)
    return parser


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return list(action.choices.values())
    return []


def _join_dash_values(parser, argv):
    """Rewrite ``--flag -x`` as ``--flag=-x`` when ``-x`` is not an option.

    argparse reads a value starting with ``-`` as a new option unless it
    looks like a plain negative number, which rejects expressions such as
    ``-(x1^2)`` and bound lists such as ``-1,-1``.
    """
    valued, known = set(), set()
    for sub in _subparsers(parser):
        for action in sub._actions:
            known.update(action.option_strings)
            if action.nargs != 0:
                valued.update(action.option_strings)
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok in valued and i + 1 < len(argv) and argv[i + 1].startswith("-")
                and argv[i + 1].split("=")[0] not in known):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_dash_values(parser, argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BuildError, *_BUILD_ERRORS) as exc:
        print(f"build error: {exc}", file=sys.stderr)
        return EXIT_BUILD


if __name__ == "__main__":
    sys.exit(main())

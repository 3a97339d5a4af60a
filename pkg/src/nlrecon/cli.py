"""Command-line interface.

Subcommands cover single-point projection, guarantee checks, probabilistic
estimates, applicability sweeps, full randomized studies, figure rendering,
and registry listing. Exit codes: 0 success (for ``check``, a guaranteed
reduction), 1 input or applicability error, 2 projection nonconvergence,
3 a check that ran but does not apply.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path

import numpy as np

from .errors import NlreconError, ProjectionError
from .experiments import (
    applicability_study,
    format_number,
    run_study,
    study_config_from_dict,
    write_applicability_csv,
    write_study_outputs,
)
from .guarantees import theorem1_check, theorem2b_check, theorem3_estimate, corollary1_check
from .manifolds import load_manifold_config, registry_get, registry_names, _REGISTRY
from .projection import (
    NEWTON_AS_PRINTED,
    NEWTON_FULL,
    SolverOptions,
    batch_project,
    project,
)

SCHEMA_VERSION = 1

_SOLVER_FIELDS = (
    "tol_f",
    "tol_g",
    "max_iters",
    "restarts",
    "perturbation",
    "min_step",
    "newton_mode",
    "seed",
)


class _Parser(argparse.ArgumentParser):
    # argument errors are input errors, not the nonconvergence code argparse
    # would produce by default
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_manifold_args(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--manifold", help="registry name (see list-manifolds)")
    group.add_argument(
        "--manifold-config",
        metavar="FILE",
        help="JSON file defining constraints or graph functions",
    )


def _add_solver_args(parser):
    group = parser.add_argument_group("solver options")
    group.add_argument("--tol-f", type=float, dest="tol_f", help="feasibility tolerance")
    group.add_argument("--tol-g", type=float, dest="tol_g", help="stationarity tolerance")
    group.add_argument("--max-iters", type=int, dest="max_iters", help="iteration cap per attempt")
    group.add_argument("--restarts", type=int, help="total solve attempts per point")
    group.add_argument("--perturbation", type=float, help="restart noise scale")
    group.add_argument("--min-step", type=float, dest="min_step", help="line-search floor")
    group.add_argument(
        "--newton-mode",
        choices=[NEWTON_FULL, NEWTON_AS_PRINTED],
        dest="newton_mode",
        help="include or omit constraint curvature in the step matrix",
    )
    group.add_argument("--seed", type=int, help="restart noise seed")


def _resolve_manifold(args):
    if args.manifold:
        return registry_get(args.manifold)
    return load_manifold_config(args.manifold_config)


def _solver_options(args) -> SolverOptions:
    kwargs = {}
    for name in _SOLVER_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    return SolverOptions(**kwargs)


def _parse_point(text: str, ambient_dim: int) -> np.ndarray:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise ValueError(f"invalid point {text!r}; expected comma-separated numbers") from None
    if len(values) != ambient_dim:
        raise ValueError(
            f"point has {len(values)} coordinates but the manifold lives in "
            f"dimension {ambient_dim}"
        )
    return np.array(values)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _projection_payload(spec, z_hat, result) -> dict:
    payload = {"schema_version": SCHEMA_VERSION, "manifold": spec.name, "z_hat": [float(v) for v in z_hat]}
    payload.update(result.to_dict())
    return payload


def _cmd_project(args) -> int:
    spec = _resolve_manifold(args)
    z_hat = _parse_point(args.point, spec.ambient_dim)
    weight = None
    if args.weight:
        weight = np.loadtxt(args.weight, delimiter=",", ndmin=2)
    opts = _solver_options(args)
    try:
        result = project(spec, z_hat, weight, opts)
    except ProjectionError as exc:
        if exc.result is not None:
            # best iterate still goes out so the failure can be inspected
            _emit(json.dumps(_projection_payload(spec, z_hat, exc.result), indent=2), args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.format == "csv":
        n = spec.ambient_dim
        m = spec.codim
        header = (
            [f"ztil{i}" for i in range(n)]
            + [f"lam{i}" for i in range(m)]
            + ["distance", "iterations", "converged", "feas_residual", "stat_residual", "restart"]
        )
        row = (
            [format_number(v) for v in result.z_tilde]
            + [format_number(v) for v in result.lam]
            + [
                format_number(result.distance),
                format_number(result.iterations),
                format_number(result.converged),
                format_number(result.feas_residual),
                format_number(result.stat_residual),
                format_number(result.restart),
            ]
        )
        _emit(",".join(header) + "\n" + ",".join(row), args.out)
    else:
        _emit(json.dumps(_projection_payload(spec, z_hat, result), indent=2), args.out)
    return 0


_CHECKS = {"1": "th1", "c1": "c1", "2b": "th2b"}


def _cmd_check(args) -> int:
    spec = _resolve_manifold(args)
    z_hat = _parse_point(args.point, spec.ambient_dim)
    opts = _solver_options(args)
    result = project(spec, z_hat, None, opts)
    if args.theorem == "1":
        verdict = theorem1_check(spec, z_hat, result)
    elif args.theorem == "c1":
        verdict = corollary1_check(spec, result)
    else:
        verdict = theorem2b_check(spec, result)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "manifold": spec.name,
        "theorem": args.theorem,
        "projection": result.to_dict(),
    }
    payload.update(verdict.to_dict())
    payload["guaranteed"] = verdict.guaranteed
    _emit(json.dumps(payload, indent=2), args.out)
    return 0 if verdict.guaranteed else 3


def _cmd_estimate(args) -> int:
    spec = _resolve_manifold(args)
    z_hat = _parse_point(args.point, spec.ambient_dim)
    opts = _solver_options(args)
    atoms = np.loadtxt(args.atoms, delimiter=",", ndmin=2)
    if atoms.shape[1] != spec.ambient_dim:
        raise ValueError(
            f"atoms file has {atoms.shape[1]} columns but the manifold lives in "
            f"dimension {spec.ambient_dim}"
        )
    weights = None
    if args.weights:
        weights = np.loadtxt(args.weights, delimiter=",", ndmin=1)
    result = project(spec, z_hat, None, opts)
    atom_results = batch_project(spec, atoms, None, opts)
    converged = [r.converged for r in atom_results]
    if not all(converged):
        failed = sum(1 for c in converged if not c)
        if weights is not None:
            print(
                f"error: {failed} atom projections did not converge; "
                "a weighted estimate would misalign with its weights",
                file=sys.stderr,
            )
            return 2
        print(f"warning: dropped {failed} unconverged atom projections", file=sys.stderr)
    reconciled = np.array([r.z_tilde for r in atom_results if r.converged])
    if reconciled.size == 0:
        print("error: no atom projection converged", file=sys.stderr)
        return 2
    estimate = theorem3_estimate(spec, result, reconciled, weights, args.alpha)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "manifold": spec.name,
        "n_atoms": int(atoms.shape[0]),
        "n_atoms_used": int(reconciled.shape[0]),
    }
    payload.update(estimate.to_dict())
    _emit(json.dumps(payload, indent=2), args.out)
    return 0


def _cmd_applicability(args) -> int:
    spec = _resolve_manifold(args)
    try:
        sigmas = [float(part) for part in args.sigmas.split(",")]
    except ValueError:
        raise ValueError(
            f"invalid --sigmas {args.sigmas!r}; expected comma-separated numbers"
        ) from None
    opts = _solver_options(args)
    rows = applicability_study(spec, sigmas, args.n_points, seed=args.sample_seed, opts=opts)
    if args.format == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "manifold": spec.name,
            "rows": [
                {
                    "sigma": row.sigma,
                    "n_points": row.n_points,
                    "n_failed": row.n_failed,
                    "n_condition": row.n_condition,
                    "n_reduction": row.n_reduction,
                    "n_false_positive": row.n_false_positive,
                    "condition_rate": row.condition_rate,
                    "reduction_rate": row.reduction_rate,
                }
                for row in rows
            ],
        }
        _emit(json.dumps(payload, indent=2), args.out)
    else:
        buffer = io.StringIO()
        write_applicability_csv(rows, buffer)
        _emit(buffer.getvalue(), args.out)
    return 0


def _cmd_study(args) -> int:
    with open(args.config, encoding="utf-8") as handle:
        try:
            raw = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config is not valid JSON: {exc}") from None
    if args.seed is not None:
        raw["seed"] = args.seed
    config = study_config_from_dict(raw)
    report = run_study(config)
    paths = write_study_outputs(report, args.out)
    if args.figures:
        from .report import render_study_figures

        for name, path in render_study_figures(args.out).items():
            paths[f"{name}_figure"] = path
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


def _cmd_report(args) -> int:
    from .report import render_applicability_figure, render_study_figures

    written = {}
    if args.dir:
        written.update(render_study_figures(args.dir))
    if args.applicability:
        written["applicability"] = render_applicability_figure(args.applicability)
    if not written:
        print("error: no figures rendered (no data rows found)", file=sys.stderr)
        return 1
    for name in sorted(written):
        print(f"{name}: {written[name]}")
    return 0


def _cmd_list_manifolds(args) -> int:
    entries = []
    for name in registry_names():
        spec = _REGISTRY[name]
        tags = sorted({tag.value for tag in spec.convexity})
        entries.append(
            {
                "name": name,
                "ambient_dim": spec.ambient_dim,
                "codim": spec.codim,
                "convexity": tags[0] if len(tags) == 1 else tags,
                "has_graph_lift": spec.graph_lift is not None,
            }
        )
    if args.format == "json":
        _emit(json.dumps({"schema_version": SCHEMA_VERSION, "manifolds": entries}, indent=2), None)
    else:
        width = max(len(e["name"]) for e in entries)
        print(f"{'name':<{width}}  dim  codim  convexity")
        for e in entries:
            tag = e["convexity"] if isinstance(e["convexity"], str) else ",".join(e["convexity"])
            print(f"{e['name']:<{width}}  {e['ambient_dim']:>3}  {e['codim']:>5}  {tag}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlrecon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("project", help="project a point onto a manifold")
    _add_manifold_args(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--weight", metavar="FILE", help="CSV matrix for a weighted norm")
    _add_solver_args(p)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", metavar="FILE", help="write output here instead of stdout")
    p.set_defaults(handler=_cmd_project)

    p = sub.add_parser("check", help="run a sufficient-condition check at a point")
    _add_manifold_args(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--theorem", choices=["1", "c1", "2b"], required=True)
    _add_solver_args(p)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("estimate", help="estimate the reduction probability from atoms")
    _add_manifold_args(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--atoms", required=True, metavar="FILE", help="CSV of predictive sample rows")
    p.add_argument("--weights", metavar="FILE", help="CSV column of atom weights")
    p.add_argument("--alpha", type=float, default=0.05, help="two-sided confidence level")
    _add_solver_args(p)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("applicability", help="condition and reduction rates under noise")
    _add_manifold_args(p)
    p.add_argument("--sigmas", required=True, help="comma-separated perturbation levels")
    p.add_argument("--n-points", type=int, default=1000, dest="n_points")
    p.add_argument("--sample-seed", type=int, default=0, dest="sample_seed", help="dataset seed")
    _add_solver_args(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(handler=_cmd_applicability)

    p = sub.add_parser("study", help="run randomized studies from a JSON config")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    p.set_defaults(handler=_cmd_study)

    p = sub.add_parser("report", help="render figures from existing output files")
    p.add_argument("--dir", metavar="DIR", help="study output directory")
    p.add_argument("--applicability", metavar="FILE", help="applicability CSV")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("list-manifolds", help="list the built-in manifold registry")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.set_defaults(handler=_cmd_list_manifolds)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ProjectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NlreconError, ValueError, LookupError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

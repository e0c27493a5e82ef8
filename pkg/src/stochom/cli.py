"""Batch front-end for the homogenization workflows.

One JSON run configuration in, machine-readable artifacts out.  Four
subcommands share the same configuration shape: ``inspect`` (medium and
deformation diagnostics), ``homogenize`` (effective tensor), ``converge``
(small-period sweep against the effective solution), ``maxwell``
(constitutive sweep over Laplace points).  Flags override config fields.
All randomness derives from the single top-level seed; outputs embed the
fully resolved configuration and the derived per-realization seeds, and
contain no timestamps, so reruns are byte-identical.

Exit codes: 0 on success, 2 for configuration problems (including malformed
JSON), 1 for operation errors.  Errors are reported as a JSON object on
stderr naming the offending field where one exists.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .convergence import export_report_csv, run_convergence_study
from .corrector import (
    CorrectorConfig,
    assemble_homogenized,
    export_sweep_csv,
)
from .errors import ConfigError, NonElliptic, StochomError
from .maxwell import (
    dispersive_fixture,
    effective_constitutive,
    export_constitutive_csv,
    medium_from_json_dict,
)
from .medium import (
    DiffeomorphismSpec,
    check_ellipticity,
    coefficient_fixture,
    det_mean_identity_check,
    estimate_mean_gradient,
    evaluate_gradient,
    sample_diffeomorphism,
    supercell_quadrature,
)
from .util import derive_seed

WORKFLOWS = ("inspect", "homogenize", "converge", "maxwell")
FORMATS = ("json", "csv", "both")

_BASE_NUMERICS = ("N", "h", "theta", "R", "tol", "seed", "quadrature_order")
_EXTRA_NUMERICS = {
    "inspect": (),
    "homogenize": (),
    "converge": ("epsilons", "resolution"),
    "maxwell": ("p_list",),
}
_TOP_KEYS = ("workflow", "medium", "diffeo", "numerics", "output", "format",
             "route", "source", "threads")


def _as_complex(value, field):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(field, "Laplace points must be numbers or [re, im] pairs")


def _coefficient_medium(entry):
    if isinstance(entry, str):
        entry = {"fixture": entry, "params": {}}
    if not isinstance(entry, dict) or "fixture" not in entry:
        raise ConfigError("medium", "expected a fixture name or "
                          "{\"fixture\": name, \"params\": {...}}")
    params = dict(entry.get("params", {}))
    try:
        field = coefficient_fixture(entry["fixture"], **params)
    except (ValueError, TypeError) as err:
        raise ConfigError("medium", str(err)) from err
    return field, {"fixture": entry["fixture"], "params": params}


def _dispersive_medium(entry):
    try:
        if isinstance(entry, str):
            if entry.endswith(".json") or os.path.exists(entry):
                with open(entry) as fh:
                    data = json.load(fh)
                return medium_from_json_dict(data)
            return dispersive_fixture(entry)
        if isinstance(entry, dict):
            if "fixture" in entry:
                return dispersive_fixture(entry["fixture"],
                                          **dict(entry.get("params", {})))
            return medium_from_json_dict(entry)
    except (ValueError, TypeError, KeyError, OSError) as err:
        raise ConfigError("medium", str(err)) from err
    raise ConfigError("medium", "expected a fixture name, a JSON path, or an "
                      "inline medium description")


def _build_spec(entry, d):
    if entry is None:
        return DiffeomorphismSpec(d=d, eta_max=0.0)
    try:
        spec = DiffeomorphismSpec.from_json_dict(entry)
    except (ValueError, TypeError, KeyError) as err:
        raise ConfigError("diffeo", str(err)) from err
    if spec.d != d:
        raise ConfigError("diffeo", f"deformation dimension {spec.d} does not "
                          f"match the medium dimension {d}")
    return spec


def _numerics(data, workflow):
    allowed = set(_BASE_NUMERICS) | set(_EXTRA_NUMERICS[workflow])
    for key in data:
        if key not in allowed:
            raise ConfigError(f"numerics.{key}", "unknown field")
    resolved = {
        "N": int(data.get("N", 1)),
        "h": float(data.get("h", 1.0 / 16.0)),
        "theta": float(data.get("theta", 0.0)),
        "R": int(data.get("R", 1)),
        "tol": float(data.get("tol", 1e-10)),
        "seed": int(data.get("seed", 0)),
        "quadrature_order": int(data.get("quadrature_order", 3)),
    }
    try:
        config = CorrectorConfig(R=resolved["R"], N=resolved["N"],
                                 h=resolved["h"], theta=resolved["theta"],
                                 seed=resolved["seed"], tol=resolved["tol"],
                                 quadrature_order=resolved["quadrature_order"])
    except ConfigError as err:
        raise ConfigError(f"numerics.{err.field}", err.message) from err

    if workflow == "converge":
        if "epsilons" not in data:
            raise ConfigError("numerics.epsilons", "required for converge")
        eps = [float(e) for e in data["epsilons"]]
        if any(e <= 0 or e > 1 for e in eps):
            raise ConfigError("numerics.epsilons", "values must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("numerics.epsilons", "must strictly decrease")
        resolved["epsilons"] = eps
        resolution = int(data.get("resolution", 8))
        if resolution <= 0:
            raise ConfigError("numerics.resolution", "must be positive")
        resolved["resolution"] = resolution
    if workflow == "maxwell":
        if "p_list" not in data:
            raise ConfigError("numerics.p_list", "required for maxwell")
        ps = [_as_complex(v, "numerics.p_list") for v in data["p_list"]]
        if not ps:
            raise ConfigError("numerics.p_list", "must not be empty")
        if any(p.real <= 0 for p in ps):
            raise ConfigError("numerics.p_list",
                              "Laplace points need a positive real part")
        resolved["p_list"] = [[p.real, p.imag] for p in ps]
    return config, resolved


def resolve_config(data: dict):
    """Validate a raw configuration dict into runnable pieces plus the fully
    resolved copy that gets embedded in every output file."""
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(key, "unknown field")
    workflow = data.get("workflow")
    if workflow not in WORKFLOWS:
        raise ConfigError("workflow", f"must be one of {', '.join(WORKFLOWS)}")
    fmt = data.get("format", "both")
    if fmt not in FORMATS:
        raise ConfigError("format", f"must be one of {', '.join(FORMATS)}")
    if "route" in data and workflow != "maxwell":
        raise ConfigError("route", "only valid for the maxwell workflow")
    if "source" in data and workflow != "converge":
        raise ConfigError("source", "only valid for the converge workflow")
    route = data.get("route", "transpose")
    if route not in ("transpose", "direct"):
        raise ConfigError("route", "must be 'transpose' or 'direct'")
    if "medium" not in data:
        raise ConfigError("medium", "required")

    run = {"workflow": workflow, "format": fmt,
           "output": str(data.get("output", "."))}
    if workflow == "maxwell":
        medium = _dispersive_medium(data["medium"])
        run["medium_obj"] = medium
        medium_resolved = medium.to_json_dict() if medium.json_dict else "custom"
        d = 3
    else:
        field, medium_resolved = _coefficient_medium(data["medium"])
        run["medium_obj"] = field
        d = field.d
    spec = _build_spec(data.get("diffeo"), d)
    run["spec"] = spec

    corr, numerics_resolved = _numerics(dict(data.get("numerics", {})), workflow)
    threads = data.get("threads")
    if threads is not None:
        corr = CorrectorConfig(R=corr.R, N=corr.N, h=corr.h, theta=corr.theta,
                               seed=corr.seed, tol=corr.tol,
                               quadrature_order=corr.quadrature_order,
                               threads=int(threads))
    run["corrector_config"] = corr
    run["threads"] = threads

    source = data.get("source", 1.0)
    if workflow == "converge":
        if isinstance(source, (int, float)):
            source = [float(source)]
        elif isinstance(source, list) and all(isinstance(v, (int, float)) for v in source):
            source = [float(v) for v in source]
        else:
            raise ConfigError("source", "expected a constant or a list of "
                              "per-component constants")
        run["source"] = source

    resolved = {
        "workflow": workflow,
        "medium": medium_resolved,
        "diffeo": spec.to_json_dict(),
        "numerics": numerics_resolved,
        "output": run["output"],
        "format": fmt,
    }
    if workflow == "maxwell":
        resolved["route"] = route
        run["route"] = route
    if workflow == "converge":
        resolved["source"] = run["source"]
    run["resolved"] = resolved
    return run


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_inspect(run, outdir):
    field = run["medium_obj"]
    spec = run["spec"]
    cfg = run["corrector_config"]
    min_eig, point = check_ellipticity(field, seed=cfg.seed)
    if min_eig <= 0:
        raise NonElliptic("sampled coefficient loses coercivity",
                          y=point, eigenvalue=min_eig)

    mg = estimate_mean_gradient(spec, realizations=cfg.R,
                                seed=derive_seed(cfg.seed, 1))
    identity = det_mean_identity_check(spec, realizations=cfg.R,
                                       supercell=cfg.N,
                                       seed=derive_seed(cfg.seed, 2))
    pts, _ = supercell_quadrature(spec.d, cfg.N, 4)
    det_min, det_argmin = np.inf, None
    base = derive_seed(cfg.seed, 3)
    for r in range(cfg.R):
        real = sample_diffeomorphism(spec, cfg.N, derive_seed(base, r))
        dets = np.linalg.det(evaluate_gradient(real, pts))
        k = int(np.argmin(dets))
        if dets[k] < det_min:
            det_min, det_argmin = float(dets[k]), pts[k]

    results = {
        "medium": {
            "d": field.d, "m": field.m,
            "description": field.description,
            "complex_valued": bool(field.complex_valued),
            "ellipticity_claimed": float(field.ellipticity_constant),
            "ellipticity_sampled_min": float(min_eig),
            "ellipticity_argmin": [float(v) for v in point],
        },
        "deformation": {
            "linear": spec.linear.tolist(),
            "mean_gradient": mg.matrix.tolist(),
            "mean_gradient_stderr": mg.stderr.tolist(),
            "c_phi": float(mg.c_phi),
            "min_det_gradient": det_min,
            "min_det_gradient_at": [float(v) for v in det_argmin],
            "null_lagrangian": identity,
        },
    }
    payload = {"config": run["resolved"], "results": results}
    path = os.path.join(outdir, "inspect.json")
    _write_json(path, payload)
    lines = [
        f"ellipticity: sampled min {min_eig:.6g} (claimed {field.ellipticity_constant:.6g})",
        f"min det grad Phi: {det_min:.6g}",
        f"null-Lagrangian residual: {identity['residual']:.3e} "
        f"(combined stderr {identity['combined_stderr']:.3e})",
    ]
    return [path], lines


def _run_homogenize(run, outdir):
    tensor = assemble_homogenized(run["medium_obj"], run["spec"],
                                  run["corrector_config"])
    tensor.meta["config"] = run["resolved"]
    files = []
    if run["resolved"]["format"] in ("json", "both"):
        path = os.path.join(outdir, "homogenize.json")
        _write_json(path, {"config": run["resolved"],
                           "tensor": tensor.to_json_dict()})
        files.append(path)
    if run["resolved"]["format"] in ("csv", "both"):
        path = os.path.join(outdir, "homogenize.csv")
        export_sweep_csv(path, "theta", [run["corrector_config"].theta], [tensor])
        files.append(path)
    diag = np.diag(np.asarray(tensor.values))
    lines = [
        f"effective action-matrix diagonal: {np.array2string(diag, precision=6)}",
        f"max stderr: {float(np.max(tensor.stderr)):.3e}",
    ]
    return files, lines


def _run_converge(run, outdir):
    field, spec, cfg = run["medium_obj"], run["spec"], run["corrector_config"]
    numerics = run["resolved"]["numerics"]
    astar = assemble_homogenized(field, spec, cfg)
    const = np.asarray(run["source"])
    if const.size == 1 and field.m > 1:
        const = np.repeat(const, field.m)
    if const.size != field.m:
        raise ConfigError("source", f"expected {field.m} components")

    def f(pts):
        return np.broadcast_to(const, (len(pts), field.m))

    report = run_convergence_study(field, spec, astar, f, numerics["epsilons"],
                                   seed=cfg.seed,
                                   resolution=numerics["resolution"],
                                   tol=cfg.tol, threads=cfg.threads)
    report.meta["config"] = run["resolved"]
    files = []
    if run["resolved"]["format"] in ("json", "both"):
        path = os.path.join(outdir, "converge.json")
        _write_json(path, {"config": run["resolved"],
                           "astar": astar.to_json_dict(),
                           "report": report.to_json_dict()})
        files.append(path)
    if run["resolved"]["format"] in ("csv", "both"):
        path = os.path.join(outdir, "converge.csv")
        export_report_csv(report, path)
        files.append(path)
    lines = [
        "epsilon -> l2 error: " + ", ".join(
            f"{e:g} -> {err:.4e}" for e, err in zip(report.epsilons,
                                                    report.l2_errors)),
    ]
    return files, lines


def _run_maxwell(run, outdir):
    medium, spec, cfg = run["medium_obj"], run["spec"], run["corrector_config"]
    ps = [complex(re, im) for re, im in run["resolved"]["numerics"]["p_list"]]
    results = [effective_constitutive(medium, spec, p, cfg, route=run["route"])
               for p in ps]
    for res in results:
        res.meta["config"] = run["resolved"]
    files = []
    if run["resolved"]["format"] in ("json", "both"):
        path = os.path.join(outdir, "maxwell.json")
        _write_json(path, {"config": run["resolved"],
                           "results": [r.to_json_dict() for r in results]})
        files.append(path)
        for k, res in enumerate(results):
            path = os.path.join(outdir, f"constitutive_{k:03d}.json")
            _write_json(path, res.to_json_dict())
            files.append(path)
    if run["resolved"]["format"] in ("csv", "both"):
        path = os.path.join(outdir, "maxwell.csv")
        export_constitutive_csv(path, results)
        files.append(path)
    lines = []
    for res in results:
        e = np.diag(res.eps_star)
        lines.append(f"p = {res.p}: electric diagonal "
                     f"{np.array2string(e, precision=6)}")
    return files, lines


_RUNNERS = {"inspect": _run_inspect, "homogenize": _run_homogenize,
            "converge": _run_converge, "maxwell": _run_maxwell}


def execute(data: dict) -> tuple[list, list]:
    """Resolve and run one configuration; returns (files written, summary)."""
    run = resolve_config(data)
    outdir = run["resolved"]["output"]
    os.makedirs(outdir, exist_ok=True)
    return _RUNNERS[run["resolved"]["workflow"]](run, outdir)


def _error_report(err) -> dict:
    report = {"error": type(err).__name__, "message": str(err)}
    for attr in ("field", "y", "eigenvalue", "iterations", "residual"):
        value = getattr(err, attr, None)
        if value is not None:
            report[attr] = value
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stochom",
        description="Effective tensors of randomly deformed periodic media")
    sub = parser.add_subparsers(dest="workflow", required=True)
    for name in WORKFLOWS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override numerics.seed")
        p.add_argument("--threads", type=int,
                       help="task pool size (default: STOCHOM_THREADS or "
                            "machine parallelism)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=list(FORMATS))
    args = parser.parse_args(argv)

    try:
        data = {}
        if args.config is not None:
            try:
                with open(args.config) as fh:
                    data = json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError("config", f"malformed JSON: {err}") from err
            except OSError as err:
                raise ConfigError("config", str(err)) from err
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        data["workflow"] = args.workflow
        if args.seed is not None:
            data.setdefault("numerics", {})
            data["numerics"]["seed"] = args.seed
        if args.threads is not None:
            data["threads"] = args.threads
        if args.out is not None:
            data["output"] = args.out
        if args.format is not None:
            data["format"] = args.format

        files, lines = execute(data)
    except ConfigError as err:
        print(json.dumps(_error_report(err)), file=sys.stderr)
        return 2
    except StochomError as err:
        print(json.dumps(_error_report(err)), file=sys.stderr)
        return 1

    seed = data.get("numerics", {}).get("seed", 0)
    print(f"workflow: {args.workflow}")
    print(f"top-level seed: {seed} (per-realization seeds derived from it, "
          f"recorded in the outputs)")
    for line in lines:
        print(line)
    for path in files:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

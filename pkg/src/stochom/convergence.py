"""Small-scale-limit validation on the unit box.

Solves the oscillatory Dirichlet problem whose coefficient is the periodic
tensor read through the inverse deformation at x / epsilon, solves the
constant-coefficient problem with the effective tensor, and reports strong
and weak comparison diagnostics across a decreasing epsilon sweep.  Each
epsilon point draws a fresh realization on a supercell just large enough to
cover the scaled window.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .corrector import HomogenizedTensor
from .errors import NonElliptic, SupercellTooSmall, UnresolvedScale
from .medium import (
    DiffeomorphismRealization,
    DiffeomorphismSpec,
    PeriodicCoefficientField,
    invert_map,
    sample_diffeomorphism,
)
from .solver import (
    BilinearProblem,
    DiscreteField,
    Mesh,
    assemble,
    field_at_quadrature,
    h1_seminorm,
    l2_difference,
    solve_spd,
)
from .util import derive_seed, ordered_map


def _unit_dirichlet_mesh(d: int, cells: int) -> Mesh:
    return Mesh(d=d, extent=1, cells_per_unit=cells, bc="dirichlet")


def _as_source(f, m):
    def wrapped(pts):
        vals = np.asarray(f(pts))
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape != (len(pts), m):
            raise ValueError("source must produce one value per component")
        return vals

    return wrapped


def oscillatory_coefficient(A: PeriodicCoefficientField,
                            real: DiffeomorphismRealization, epsilon: float):
    """Pointwise coefficient x -> A(Phi^{-1}(x / epsilon))."""

    def coeff(pts):
        z = invert_map(real, np.asarray(pts) / epsilon)
        return A.eval(z)

    return coeff


def solve_heterogeneous(A: PeriodicCoefficientField,
                        real: DiffeomorphismRealization, epsilon: float, f,
                        mesh: Mesh, tol: float = 1e-10,
                        resolution: int = 8,
                        quadrature_order: int = 2) -> DiscreteField:
    """Galerkin solution of the oscillatory Dirichlet problem on the unit box.

    Requires h <= epsilon / resolution so the coefficient oscillation is
    resolved, and a realization whose supercell covers [0, 1/epsilon)^d.
    """
    if mesh.bc != "dirichlet" or mesh.extent != (1,) * mesh.d:
        raise ValueError("expected a Dirichlet mesh on the unit box")
    if A.d != mesh.d or real.spec.d != mesh.d:
        raise ValueError("dimension mismatch")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if mesh.h > epsilon / resolution + 1e-12:
        raise UnresolvedScale(
            f"mesh width {mesh.h:g} exceeds epsilon/{resolution} = "
            f"{epsilon / resolution:g}; oscillations would be unresolved")
    needed = math.ceil(1.0 / epsilon - 1e-9)
    if real.supercell < needed:
        raise SupercellTooSmall(
            f"window [0, {1.0 / epsilon:g})^d needs supercell >= {needed}, "
            f"realization has {real.supercell}")
    prob = BilinearProblem(mesh=mesh, m=A.m,
                           coefficient=oscillatory_coefficient(A, real, epsilon),
                           volume_source=_as_source(f, A.m),
                           quadrature_order=quadrature_order)
    return solve_spd(assemble(prob), tol=tol).field


def solve_homogenized(Astar: HomogenizedTensor, f, mesh: Mesh,
                      tol: float = 1e-10,
                      quadrature_order: int = 2) -> DiscreteField:
    """Constant-coefficient Dirichlet solve with the effective tensor."""
    if mesh.bc != "dirichlet" or mesh.extent != (1,) * mesh.d:
        raise ValueError("expected a Dirichlet mesh on the unit box")
    if Astar.d != mesh.d:
        raise ValueError("dimension mismatch")
    herm = 0.5 * (Astar.values + np.conj(Astar.values).T)
    lam = float(np.linalg.eigvalsh(herm)[0].real)
    if lam <= 0:
        raise NonElliptic("effective tensor is not coercive", eigenvalue=lam)
    tensor = Astar.tensor

    def coeff(pts):
        return np.broadcast_to(tensor, (len(pts),) + tensor.shape)

    prob = BilinearProblem(mesh=mesh, m=Astar.m, coefficient=coeff,
                           volume_source=_as_source(f, Astar.m),
                           quadrature_order=quadrature_order)
    return solve_spd(assemble(prob), tol=tol).field


def sine_battery(d: int, max_order: int = 2):
    """Tensor sine products vanishing on the unit-box boundary, used as the
    fixed battery of pairing test functions."""
    return list(itertools.product(range(1, max_order + 1), repeat=d))


def _battery_values(qs, coords):
    # coords (nc, nq, d) -> values (nQ, nc, nq) and gradients (nQ, nc, nq, d)
    nQ = len(qs)
    nc, nq, d = coords.shape
    vals = np.ones((nQ, nc, nq))
    grads = np.ones((nQ, nc, nq, d))
    for iq, q in enumerate(qs):
        sines = [np.sin(np.pi * q[i] * coords[..., i]) for i in range(d)]
        coss = [np.pi * q[i] * np.cos(np.pi * q[i] * coords[..., i]) for i in range(d)]
        for i in range(d):
            vals[iq] *= sines[i]
        for s in range(d):
            g = coss[s].copy()
            for i in range(d):
                if i != s:
                    g *= sines[i]
            grads[iq, :, :, s] = g
    return vals, grads


@dataclass
class ConvergenceReport:
    """Per-epsilon comparison of the oscillatory and effective solutions."""

    epsilons: list
    l2_errors: list
    weak_pairings: np.ndarray  # (n_eps, n_test_functions)
    flux_pairings: np.ndarray
    h1_seminorms: list
    cells: list
    seeds: list
    battery: list
    meta: dict

    def to_json_dict(self) -> dict:
        return {
            "epsilons": [float(e) for e in self.epsilons],
            "l2_errors": [float(e) for e in self.l2_errors],
            "weak_pairings": np.asarray(self.weak_pairings).tolist(),
            "flux_pairings": np.asarray(self.flux_pairings).tolist(),
            "h1_seminorms": [float(v) for v in self.h1_seminorms],
            "cells": [int(c) for c in self.cells],
            "seeds": [int(s) for s in self.seeds],
            "battery": [list(q) for q in self.battery],
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ConvergenceReport":
        return cls(epsilons=data["epsilons"], l2_errors=data["l2_errors"],
                   weak_pairings=np.asarray(data["weak_pairings"]),
                   flux_pairings=np.asarray(data["flux_pairings"]),
                   h1_seminorms=data["h1_seminorms"], cells=data["cells"],
                   seeds=data["seeds"],
                   battery=[tuple(q) for q in data["battery"]],
                   meta=dict(data["meta"]))


def save_report_json(report: ConvergenceReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report_json(path) -> ConvergenceReport:
    with open(path) as fh:
        return ConvergenceReport.from_json_dict(json.load(fh))


def export_report_csv(report: ConvergenceReport, path) -> None:
    header = ["epsilon", "cells", "seed", "l2_error", "h1_seminorm"]
    header += [f"weak_{'x'.join(map(str, q))}" for q in report.battery]
    header += [f"flux_{'x'.join(map(str, q))}" for q in report.battery]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, eps in enumerate(report.epsilons):
            row = [repr(float(eps)), report.cells[k], report.seeds[k],
                   repr(float(report.l2_errors[k])),
                   repr(float(report.h1_seminorms[k]))]
            row += [repr(float(v)) for v in report.weak_pairings[k]]
            row += [repr(float(v)) for v in report.flux_pairings[k]]
            writer.writerow(row)


def _epsilon_point(A, spec, Astar, f, epsilon, seed, resolution, tol, order):
    d = A.d
    cells = math.ceil(resolution / epsilon - 1e-9)
    mesh = _unit_dirichlet_mesh(d, cells)
    supercell = math.ceil(1.0 / epsilon - 1e-9)
    real = sample_diffeomorphism(spec, supercell, seed)
    u_eps = solve_heterogeneous(A, real, epsilon, f, mesh, tol=tol,
                                resolution=resolution, quadrature_order=order)
    u_star = solve_homogenized(Astar, f, mesh, tol=tol, quadrature_order=order)

    qs = sine_battery(d)
    coords, w, vals_e, grads_e = field_at_quadrature(u_eps, order)
    _, _, vals_s, grads_s = field_at_quadrature(u_star, order)
    phi, dphi = _battery_values(qs, coords)

    diff = vals_e - vals_s  # (nc, nq, m)
    weak = np.sqrt(np.sum(np.abs(
        np.einsum("q,Qcq,cqm->Qm", w, phi, diff, optimize=True)) ** 2, axis=1))

    Aeps = oscillatory_coefficient(A, real, epsilon)(coords.reshape(-1, d))
    Aeps = Aeps.reshape(coords.shape[0], coords.shape[1], d, d, A.m, A.m)
    flux_e = np.einsum("cqijAB,cqiA->cqjB", Aeps, grads_e, optimize=True)
    flux_s = np.einsum("ijAB,cqiA->cqjB", Astar.tensor, grads_s, optimize=True)
    flux = np.sqrt(np.sum(np.abs(
        np.einsum("q,Qcqj,cqjB->QB", w, dphi, flux_e - flux_s,
                  optimize=True)) ** 2, axis=1))

    l2 = l2_difference(u_eps, u_star, order=order)
    return {
        "l2": l2, "weak": weak, "flux": flux,
        "h1": h1_seminorm(u_eps, order=order), "cells": cells,
    }


def run_convergence_study(A: PeriodicCoefficientField, spec: DiffeomorphismSpec,
                          Astar: HomogenizedTensor, f, epsilons, seed: int = 0,
                          resolution: int = 8, tol: float = 1e-10,
                          quadrature_order: int = 2,
                          threads: int | None = None) -> ConvergenceReport:
    """Epsilon sweep with one fresh realization per point.

    Records the L2 distance between the oscillatory and effective solutions,
    pairings against the sine battery, flux pairings against the battery
    gradients, and the oscillatory-solution energy.
    """
    epsilons = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ValueError("epsilon sweep must strictly decrease")
    if any(e <= 0 or e > 1 for e in epsilons):
        raise ValueError("epsilon values must lie in (0, 1]")
    seeds = [derive_seed(seed, k) for k in range(len(epsilons))]

    def run(k):
        return _epsilon_point(A, spec, Astar, f, epsilons[k], seeds[k],
                              resolution, tol, quadrature_order)

    points = ordered_map(run, range(len(epsilons)), threads=threads)
    return ConvergenceReport(
        epsilons=epsilons,
        l2_errors=[pt["l2"] for pt in points],
        weak_pairings=np.stack([pt["weak"] for pt in points]),
        flux_pairings=np.stack([pt["flux"] for pt in points]),
        h1_seminorms=[pt["h1"] for pt in points],
        cells=[pt["cells"] for pt in points],
        seeds=[int(s) for s in seeds],
        battery=sine_battery(A.d),
        meta={"resolution": resolution, "tol": tol,
              "quadrature_order": quadrature_order, "seed": seed},
    )

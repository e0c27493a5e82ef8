"""Cell correctors and ensemble-averaged effective tensors.

All solves happen in reference coordinates z, where the unknown is periodic
on the supercell torus [0, N)^d.  The random geometry enters only through
the deformation gradient at quadrature nodes: with F = grad Phi, gradients
transport as grad_y w = F^{-T} grad_z w_tilde and volume elements as det F.
The transported second-order form therefore has coefficient

    C_{rs ab}(z) = det F(z) * F^{-T}_{ir} a_{ij ab}(z) F^{-T}_{js}

and the imposed constant physical gradient p contributes the flux
P_{s b}(z) = det F(z) * a_{ij ab}(z) p_{i a} F^{-T}_{js}.

The effective tensor is the deformation-weighted flux average of the
corrected fields, scaled by the inverse determinant of the mean deformation
gradient (available in closed form for the shipped generator), and averaged
over independent realizations with an entrywise standard error.

Default quadrature is order 3 per axis.  The cofactor matrix of the shipped
deformation is a polynomial of per-axis degree at most four on each cell, so
order 3 integrates every cofactor-times-bilinear-gradient product exactly;
the discrete divergence-free structure of the cofactor rows then holds to
rounding, which makes constant-coefficient media reproduce their tensor and
the transported-gradient averages vanish at machine precision.  Lower orders
lose those identities to quadrature error.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NonElliptic, SingularMean
from .medium import (
    DiffeomorphismRealization,
    DiffeomorphismSpec,
    PeriodicCoefficientField,
    evaluate_gradient,
    matrix_to_tensor,
    sample_diffeomorphism,
    tensor_to_matrix,
)
from .solver import (
    AssembledSystem,
    DiscreteField,
    Mesh,
    _shape_tables,
    gradient_field,
    solve_spd,
)
from .util import derive_seed, ordered_map, sample_stats

_CHUNK_CELLS = 2048


@dataclass
class CorrectorConfig:
    """Monte-Carlo and discretization parameters for effective-tensor runs.

    R realizations on the [0, N)^d torus with mesh width h; theta is the
    zeroth-order regularization weight (0 solves in the mean-free subspace),
    tol the Krylov tolerance.
    """

    R: int
    N: int
    h: float
    theta: float = 0.0
    seed: int = 0
    tol: float = 1e-10
    quadrature_order: int = 3
    threads: int | None = None

    def __post_init__(self):
        if not isinstance(self.R, (int, np.integer)) or self.R < 1:
            raise ConfigError("R", "realization count must be a positive integer")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ConfigError("N", "supercell size must be a positive integer")
        inv = 1.0 / self.h if self.h > 0 else 0.0
        if inv < 1 or abs(inv - round(inv)) > 1e-9:
            raise ConfigError("h", "mesh width must be the inverse of a positive integer")
        if self.theta < 0:
            raise ConfigError("theta", "regularization weight must be non-negative")
        if self.tol <= 0:
            raise ConfigError("tol", "solver tolerance must be positive")
        if self.quadrature_order < 1:
            raise ConfigError("quadrature_order", "quadrature order must be at least 1")

    @property
    def cells_per_unit(self) -> int:
        return round(1.0 / self.h)

    def mesh(self, d: int) -> Mesh:
        return Mesh(d=d, extent=self.N, cells_per_unit=self.cells_per_unit, bc="periodic")


@dataclass
class CorrectorSolution:
    """Stationary corrector for one realization and one imposed direction."""

    realization: DiffeomorphismRealization
    direction: np.ndarray  # (d, m) imposed physical gradient
    theta: float
    w_tilde: DiscreteField
    reference_gradient: np.ndarray  # (n_cells, d, m), cell centers
    physical_gradient: np.ndarray  # (n_cells, d, m), transported
    residual: float
    method: str
    zero_mean_residual: float
    gradient_energy: float
    mass_energy: float


@dataclass
class HomogenizedTensor:
    """Effective tensor as the (m*d) x (m*d) action matrix with row index
    (spatial j, component beta) and column index (spatial i, component alpha),
    component fastest."""

    d: int
    m: int
    values: np.ndarray
    stderr: np.ndarray
    meta: dict

    @property
    def tensor(self) -> np.ndarray:
        return matrix_to_tensor(self.values, self.d, self.m)

    def to_json_dict(self) -> dict:
        vals = np.asarray(self.values, dtype=complex).reshape(-1)
        return {
            "d": self.d,
            "m": self.m,
            "values": [[float(v.real), float(v.imag)] for v in vals],
            "stderr": [float(s) for s in np.asarray(self.stderr).reshape(-1)],
            "meta": self.meta,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "HomogenizedTensor":
        d, m = int(data["d"]), int(data["m"])
        n = d * m
        vals = np.array([complex(re, im) for re, im in data["values"]]).reshape(n, n)
        if np.all(vals.imag == 0.0):
            vals = vals.real
        stderr = np.asarray(data["stderr"], dtype=float).reshape(n, n)
        return cls(d=d, m=m, values=vals, stderr=stderr, meta=dict(data["meta"]))


def save_homogenized_json(tensor: HomogenizedTensor, path) -> None:
    with open(path, "w") as fh:
        json.dump(tensor.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_homogenized_json(path) -> HomogenizedTensor:
    with open(path) as fh:
        return HomogenizedTensor.from_json_dict(json.load(fh))


def export_sweep_csv(path, parameter_name: str, parameters, tensors) -> None:
    """One row per sweep point: parameter, tensor entries (row-major), then
    entrywise standard errors.  Complex entries are split into re/im columns."""
    if not tensors:
        raise ValueError("nothing to export")
    n = tensors[0].values.shape[0]
    is_complex = any(np.iscomplexobj(t.values) for t in tensors)
    header = [parameter_name]
    for r in range(n):
        for c in range(n):
            if is_complex:
                header += [f"a{r}{c}_re", f"a{r}{c}_im"]
            else:
                header.append(f"a{r}{c}")
    header += [f"stderr{r}{c}" for r in range(n) for c in range(n)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for par, t in zip(parameters, tensors):
            row = [repr(float(par))]
            for v in np.asarray(t.values).reshape(-1):
                if is_complex:
                    v = complex(v)
                    row += [repr(v.real), repr(v.imag)]
                else:
                    row.append(repr(float(v)))
            row += [repr(float(s)) for s in np.asarray(t.stderr).reshape(-1)]
            writer.writerow(row)


def _basis_directions(d: int, m: int) -> np.ndarray:
    return np.eye(d * m).reshape(d * m, d, m)


def _geometry(real: DiffeomorphismRealization, pts: np.ndarray):
    F = evaluate_gradient(real, pts)
    det = np.linalg.det(F)
    if np.any(det <= 0):
        raise NonElliptic("deformation loses orientation at a quadrature node")
    J = np.linalg.inv(F).transpose(0, 2, 1)  # F^{-T}
    return det, J


def _check_compatible(A: PeriodicCoefficientField, real: DiffeomorphismRealization,
                      mesh: Mesh):
    if mesh.bc != "periodic":
        raise ValueError("corrector meshes must be periodic")
    if A.d != mesh.d or real.spec.d != mesh.d:
        raise ValueError("dimension mismatch between medium, deformation and mesh")
    if mesh.extent != (real.supercell,) * mesh.d:
        raise ValueError("mesh extent does not cover the realization's supercell")


def _assemble_corrector_system(A, real, mesh, theta, order, directions):
    """Transported stiffness matrix plus one right-hand side per direction."""
    d, m = mesh.d, A.m
    K = directions.shape[0]
    h = mesh.h
    pts, wts, V, Gref = _shape_tables(d, order)
    G = Gref / h
    W = wts * h ** d
    na, nq = V.shape[1], V.shape[0]
    nodes = mesh.cell_node_indices
    origins = mesh.cell_origins()
    ndof = mesh.n_nodes * m

    complex_out = A.complex_valued or np.iscomplexobj(directions)
    B = np.zeros((ndof, K), dtype=complex if complex_out else float)
    rows, cols, data = [], [], []
    for start in range(0, mesh.n_cells, _CHUNK_CELLS):
        sl = slice(start, min(start + _CHUNK_CELLS, mesh.n_cells))
        nc = sl.stop - sl.start
        flat = (origins[sl, None, :] + pts[None, :, :] * h).reshape(-1, d)
        det, J = _geometry(real, flat)
        Araw = A.eval(flat)
        C = np.einsum("n,nir,nijAB,njs->nrsAB", det, J, Araw, J, optimize=True)
        Ke = np.einsum("q,cqrsAB,qbr,qas->caBbA", W, C.reshape(nc, nq, d, d, m, m),
                       G, G, optimize=True)
        if theta > 0:
            Me = theta * np.einsum("q,cq,qa,qb->cab", W, det.reshape(nc, nq), V, V)
            for comp in range(m):
                Ke[:, :, comp, :, comp] += Me
        dofs = (nodes[sl][:, :, None] * m + np.arange(m)).reshape(nc, na * m)
        Kf = Ke.reshape(nc, na * m, na * m)
        rows.append(np.broadcast_to(dofs[:, :, None], Kf.shape).ravel())
        cols.append(np.broadcast_to(dofs[:, None, :], Kf.shape).ravel())
        data.append(Kf.ravel())

        P = np.einsum("n,nijAB,kiA,njs->nsBk", det, Araw, directions, J, optimize=True)
        fe = -np.einsum("q,cqsBk,qas->caBk", W, P.reshape(nc, nq, d, m, K), G,
                        optimize=True)
        np.add.at(B, dofs.ravel(), fe.reshape(nc * na * m, K))

    S = sp.coo_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ndof, ndof)).tocsr()
    return S, B


def _flux_pass(A, real, mesh, values, order):
    """Deformation-weighted integrals of the corrected fields.

    values holds nodal corrector components, shape (n_nodes, m, K).  Returns
    per-direction flux sums flux[j, beta, k], the identity part id_[i, j, a, b],
    transported-gradient averages, and energy diagnostics, all as plain sums
    over the supercell (caller divides by the volume).
    """
    d, m = mesh.d, A.m
    K = values.shape[2]
    h = mesh.h
    pts, wts, V, Gref = _shape_tables(d, order)
    G = Gref / h
    W = wts * h ** d
    nq = V.shape[0]
    nodes = mesh.cell_node_indices
    origins = mesh.cell_origins()

    dtype = complex if (np.iscomplexobj(values) or A.complex_valued) else float
    flux = np.zeros((d, m, K), dtype=complex)
    ident = np.zeros((d, d, m, m), dtype=complex)
    zmean = np.zeros((d, m, K), dtype=complex)
    grad_energy = np.zeros(K)
    mass_raw = np.zeros(K)
    for start in range(0, mesh.n_cells, _CHUNK_CELLS):
        sl = slice(start, min(start + _CHUNK_CELLS, mesh.n_cells))
        nc = sl.stop - sl.start
        flat = (origins[sl, None, :] + pts[None, :, :] * h).reshape(-1, d)
        det, J = _geometry(real, flat)
        Araw = A.eval(flat)
        det2 = det.reshape(nc, nq)
        J2 = J.reshape(nc, nq, d, d)
        A2 = Araw.reshape(nc, nq, d, d, m, m)
        nodal = values[nodes[sl]]  # (nc, na, m, K)
        gw = np.einsum("qas,camk->cqsmk", G, nodal, optimize=True)
        phys = np.einsum("cqts,cqsmk->cqtmk", J2, gw, optimize=True)
        flux += np.einsum("q,cq,cqtjGB,cqtGk->jBk", W, det2, A2, phys, optimize=True)
        ident += np.einsum("q,cq,cqijAB->ijAB", W, det2, A2, optimize=True)
        zmean += np.einsum("q,cq,cqtmk->tmk", W, det2, phys, optimize=True)
        grad_energy += np.einsum("q,cq,cqtmk->k", W, det2,
                                 np.abs(phys) ** 2, optimize=True).real
        vals_q = np.einsum("qa,camk->cqmk", V, nodal, optimize=True)
        mass_raw += np.einsum("q,cq,cqmk->k", W, det2,
                              np.abs(vals_q) ** 2, optimize=True).real
    if dtype is float:
        flux, ident, zmean = flux.real, ident.real, zmean.real
    return flux, ident, zmean, grad_energy, mass_raw


def _as_direction(p, d, m) -> np.ndarray:
    p = np.asarray(p)
    if p.ndim == 1 and p.size == d * m:
        p = p.reshape(d, m)
    if p.shape != (d, m):
        raise ValueError("direction must have shape (d, m) or length d*m")
    return p


def solve_corrector(A: PeriodicCoefficientField, real: DiffeomorphismRealization,
                    p, theta: float = 0.0, mesh: Mesh | None = None,
                    tol: float = 1e-10, quadrature_order: int = 3,
                    cells_per_unit: int = 16) -> CorrectorSolution:
    """Periodic corrector on the realization's supercell torus for the imposed
    constant physical gradient p.

    The discrete problem is posed in reference coordinates with the
    transported coefficient; theta = 0 fixes the additive constant by solving
    in the mean-free subspace.
    """
    if mesh is None:
        mesh = Mesh(d=real.spec.d, extent=real.supercell,
                    cells_per_unit=cells_per_unit, bc="periodic")
    _check_compatible(A, real, mesh)
    d, m = mesh.d, A.m
    p = _as_direction(p, d, m)

    S, B = _assemble_corrector_system(A, real, mesh, theta, quadrature_order,
                                      p[None, :, :])
    system = AssembledSystem(matrix=S, rhs=B[:, 0], mesh=mesh, m=m,
                             free_dofs=None, deflate_constants=(theta == 0))
    res = solve_spd(system, tol=tol)

    volume = float(np.prod(mesh.extent))
    vals = res.field.values[:, :, None]
    _, _, zmean, ge, mass = _flux_pass(A, real, mesh, vals, quadrature_order)
    ref_grad = gradient_field(res.field)
    centers = mesh.cell_centers()
    _, Jc = _geometry(real, centers)
    phys_grad = np.einsum("cts,csm->ctm", Jc, ref_grad)
    return CorrectorSolution(
        realization=real, direction=p, theta=theta, w_tilde=res.field,
        reference_gradient=ref_grad, physical_gradient=phys_grad,
        residual=res.residual, method=res.method,
        zero_mean_residual=float(np.max(np.abs(zmean))) / volume,
        gradient_energy=float(ge[0]) / volume,
        mass_energy=theta * float(mass[0]) / volume)


def solve_transpose_corrector(A: PeriodicCoefficientField,
                              real: DiffeomorphismRealization, p,
                              theta: float = 0.0, mesh: Mesh | None = None,
                              tol: float = 1e-10, quadrature_order: int = 3,
                              cells_per_unit: int = 16) -> CorrectorSolution:
    """Corrector of the index-transposed medium a_{ji beta alpha}."""
    return solve_corrector(A.transposed(), real, p, theta=theta, mesh=mesh,
                           tol=tol, quadrature_order=quadrature_order,
                           cells_per_unit=cells_per_unit)


def _realization_flux(A, spec, config, mesh, directions, seed):
    real = sample_diffeomorphism(spec, config.N, seed)
    S, B = _assemble_corrector_system(A, real, mesh, config.theta,
                                      config.quadrature_order, directions)
    m = A.m
    K = directions.shape[0]
    sols = np.zeros((mesh.n_nodes, m, K),
                    dtype=B.dtype if np.iscomplexobj(B) else float)
    max_residual = 0.0
    for k in range(K):
        system = AssembledSystem(matrix=S, rhs=B[:, k], mesh=mesh, m=m,
                                 free_dofs=None,
                                 deflate_constants=(config.theta == 0))
        res = solve_spd(system, tol=config.tol)
        sols[:, :, k] = res.field.values
        max_residual = max(max_residual, res.residual)

    flux, ident, zmean, ge, mass = _flux_pass(A, real, mesh, sols,
                                              config.quadrature_order)
    volume = float(np.prod(mesh.extent))
    d = mesh.d
    # flux[j, beta, k] with k = i*m+alpha; identity term carries (i, alpha) directly
    corr = flux.reshape(d, m, d, m).transpose(2, 0, 3, 1)
    tensor = (ident + corr) / volume
    diag = {
        "zero_mean_residual": float(np.max(np.abs(zmean))) / volume,
        "residual": max_residual,
        "gradient_energy": float(np.max(ge)) / volume,
        "mass_energy": config.theta * float(np.max(mass)) / volume,
    }
    return tensor_to_matrix(tensor), diag


def assemble_homogenized(A: PeriodicCoefficientField, spec: DiffeomorphismSpec,
                         config: CorrectorConfig) -> HomogenizedTensor:
    """Effective tensor by Monte-Carlo over deformation realizations.

    Per realization: one transported assembly, m*d corrector solves (one per
    basis direction), then the deformation-weighted flux average over the
    supercell.  The ensemble mean is scaled by the inverse determinant of the
    mean deformation gradient and reported with entrywise standard errors.
    """
    if A.d != spec.d:
        raise ValueError("medium and deformation dimension differ")
    d, m = A.d, A.m
    detL = float(np.linalg.det(spec.linear))
    if abs(detL) < 1e-12:
        raise SingularMean("mean deformation gradient is singular")
    c_phi = 1.0 / detL

    mesh = config.mesh(d)
    directions = _basis_directions(d, m)
    seeds = [derive_seed(config.seed, r) for r in range(config.R)]

    def run(seed):
        return _realization_flux(A, spec, config, mesh, directions, seed)

    results = ordered_map(run, seeds, threads=config.threads)
    samples = np.stack([mat for mat, _ in results])
    mean, stderr = sample_stats(samples)
    meta = {
        "R": config.R, "N": config.N, "h": config.h, "theta": config.theta,
        "seed": config.seed, "seeds": seeds, "tol": config.tol,
        "quadrature_order": config.quadrature_order, "c_phi": c_phi,
        "max_zero_mean_residual": max(diag["zero_mean_residual"] for _, diag in results),
        "max_solver_residual": max(diag["residual"] for _, diag in results),
        "max_gradient_energy": max(diag["gradient_energy"] for _, diag in results),
        "max_mass_energy": max(diag["mass_energy"] for _, diag in results),
    }
    return HomogenizedTensor(d=d, m=m, values=c_phi * mean,
                             stderr=abs(c_phi) * stderr, meta=meta)


def theta_sweep(A: PeriodicCoefficientField, spec: DiffeomorphismSpec,
                config: CorrectorConfig, thetas) -> list:
    """Effective tensors across a decreasing regularization sweep with shared
    seeds, so differences reflect theta alone."""
    thetas = list(thetas)
    if any(t < 0 for t in thetas):
        raise ConfigError("theta", "sweep values must be non-negative")
    positive = [t for t in thetas if t > 0]
    if positive != sorted(positive, reverse=True) or len(set(positive)) != len(positive):
        raise ConfigError("theta", "positive sweep values must strictly decrease")
    return [assemble_homogenized(A, spec, dataclasses.replace(config, theta=t))
            for t in thetas]

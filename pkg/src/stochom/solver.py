"""Multilinear finite elements on uniform grids.

Provides the discrete substrate used by the corrector and convergence
modules: meshes over the periodic supercell [0, N)^d or the unit box with
homogeneous Dirichlet data, assembly of second-order bilinear forms with
tensor coefficients sampled at quadrature nodes, Krylov solves for real and
complex systems, and per-cell gradients of the interpolant.

Degrees of freedom are ordered node-major with the component index fastest:
dof = node * m + component.  Local element nodes follow binary corner order
with the first coordinate slowest.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, NonElliptic, NonFiniteCoefficient
from .medium import unit_cell_quadrature

_CHUNK_CELLS = 2048


@dataclass(eq=False)
class Mesh:
    """Uniform grid over [0, extent_1) x ... (periodic) or the closed box
    (homogeneous Dirichlet).  cells_per_unit is the inverse mesh width."""

    d: int
    extent: tuple
    cells_per_unit: int
    bc: str = "periodic"

    def __post_init__(self):
        if isinstance(self.extent, (int, np.integer)):
            self.extent = (int(self.extent),) * self.d
        self.extent = tuple(int(e) for e in self.extent)
        if len(self.extent) != self.d or any(e < 1 for e in self.extent):
            raise ValueError("extent must give a positive integer size per axis")
        if self.cells_per_unit < 1:
            raise ValueError("cells_per_unit must be a positive integer")
        if self.bc not in ("periodic", "dirichlet"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.cells_per_unit

    @property
    def cells_per_axis(self) -> tuple:
        return tuple(e * self.cells_per_unit for e in self.extent)

    @property
    def nodes_per_axis(self) -> tuple:
        if self.bc == "periodic":
            return self.cells_per_axis
        return tuple(c + 1 for c in self.cells_per_axis)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @cached_property
    def corner_offsets(self) -> np.ndarray:
        return np.array(list(itertools.product((0, 1), repeat=self.d)), dtype=np.int64)

    @cached_property
    def cell_multi_indices(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(c) for c in self.cells_per_axis], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def cell_origins(self) -> np.ndarray:
        return self.cell_multi_indices * self.h

    def cell_centers(self) -> np.ndarray:
        return (self.cell_multi_indices + 0.5) * self.h

    @cached_property
    def cell_node_indices(self) -> np.ndarray:
        """Global node index of each cell corner, shape (n_cells, 2^d)."""
        multi = self.cell_multi_indices[:, None, :] + self.corner_offsets[None, :, :]
        dims = np.array(self.nodes_per_axis)
        if self.bc == "periodic":
            multi = multi % dims
        strides = np.concatenate([np.cumprod(dims[::-1])[::-1][1:], [1]])
        return np.einsum("cai,i->ca", multi, strides)

    def node_coords(self) -> np.ndarray:
        grids = np.meshgrid(*[np.arange(n) for n in self.nodes_per_axis], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1) * self.h

    @cached_property
    def boundary_node_mask(self) -> np.ndarray:
        if self.bc == "periodic":
            return np.zeros(self.n_nodes, dtype=bool)
        coords = np.stack(np.meshgrid(*[np.arange(n) for n in self.nodes_per_axis],
                                      indexing="ij"), axis=-1).reshape(-1, self.d)
        dims = np.array(self.nodes_per_axis)
        return np.any((coords == 0) | (coords == dims - 1), axis=1)


@dataclass
class DiscreteField:
    """Nodal values of an m-component multilinear field on a mesh."""

    mesh: Mesh
    values: np.ndarray  # (n_nodes, m)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != self.mesh.n_nodes:
            raise ValueError("value array does not match mesh node count")

    @property
    def m(self) -> int:
        return self.values.shape[1]


def _shape_tables(d: int, order: int):
    """Values and reference gradients of the 2^d corner functions at the
    tensor Gauss points of the reference cell."""
    pts, wts = unit_cell_quadrature(d, order)
    offs = np.array(list(itertools.product((0, 1), repeat=d)))
    na, nq = offs.shape[0], pts.shape[0]
    vals = np.ones((nq, na))
    grads = np.zeros((nq, na, d))
    for a, off in enumerate(offs):
        factors = np.where(off[None, :] == 1, pts, 1.0 - pts)  # (nq, d)
        vals[:, a] = np.prod(factors, axis=1)
        for i in range(d):
            sign = 1.0 if off[i] == 1 else -1.0
            rest = np.prod(np.delete(factors, i, axis=1), axis=1) if d > 1 else 1.0
            grads[:, a, i] = sign * rest
    return pts, wts, vals, grads


@dataclass
class BilinearProblem:
    """Weak form: find u with
    int A grad u . grad v + int rho u . v = int f . v - int P . grad v
    for all test fields v, where rho = theta * mass_weight.

    ``coefficient`` maps points (n, d) to tensors (n, d, d, m, m);
    ``constant_gradient`` p of shape (d, m) is shorthand for the imposed flux
    P = A p built from the problem's own coefficient.
    """

    mesh: Mesh
    m: int
    coefficient: Callable[[np.ndarray], np.ndarray]
    theta: float = 0.0
    mass_weight: Callable[[np.ndarray], np.ndarray] | None = None
    volume_source: Callable[[np.ndarray], np.ndarray] | None = None
    flux_source: Callable[[np.ndarray], np.ndarray] | None = None
    constant_gradient: np.ndarray | None = None
    quadrature_order: int = 2

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("zeroth-order coefficient must be non-negative")
        if self.constant_gradient is not None:
            p = np.asarray(self.constant_gradient)
            if p.shape != (self.mesh.d, self.m):
                raise ValueError("constant_gradient must have shape (d, m)")
            self.constant_gradient = p


@dataclass
class AssembledSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    mesh: Mesh
    m: int
    free_dofs: np.ndarray | None  # None when all dofs are free
    deflate_constants: bool


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteCoefficient(f"{what} produced non-finite values")


def assemble(problem: BilinearProblem) -> AssembledSystem:
    mesh = problem.mesh
    d, m = mesh.d, problem.m
    h = mesh.h
    pts, wts, V, Gref = _shape_tables(d, problem.quadrature_order)
    G = Gref / h
    W = wts * h ** d
    na, nq = V.shape[1], V.shape[0]
    nodes = mesh.cell_node_indices
    origins = mesh.cell_origins()
    ndof = mesh.n_nodes * m

    p_const = problem.constant_gradient
    rows, cols, data = [], [], []
    b = np.zeros(ndof, dtype=complex)

    for start in range(0, mesh.n_cells, _CHUNK_CELLS):
        sl = slice(start, min(start + _CHUNK_CELLS, mesh.n_cells))
        nc = sl.stop - sl.start
        coords = origins[sl, None, :] + pts[None, :, :] * h
        flat = coords.reshape(-1, d)
        C = np.asarray(problem.coefficient(flat)).reshape(nc, nq, d, d, m, m)
        _check_finite(C, "coefficient")
        Ke = np.einsum("q,cqijAB,qbi,qaj->caBbA", W, C, G, G, optimize=True)
        if problem.theta > 0:
            rho = np.full(nc * nq, problem.theta)
            if problem.mass_weight is not None:
                rho = problem.theta * np.asarray(problem.mass_weight(flat)).reshape(-1)
                _check_finite(rho, "mass weight")
            Me = np.einsum("q,cq,qa,qb->cab", W, rho.reshape(nc, nq), V, V, optimize=True)
            for comp in range(m):
                Ke[:, :, comp, :, comp] += Me
        dofs = (nodes[sl][:, :, None] * m + np.arange(m)).reshape(nc, na * m)
        Kf = Ke.reshape(nc, na * m, na * m)
        rows.append(np.broadcast_to(dofs[:, :, None], Kf.shape).ravel().astype(np.int64))
        cols.append(np.broadcast_to(dofs[:, None, :], Kf.shape).ravel().astype(np.int64))
        data.append(Kf.ravel())

        fe = np.zeros((nc, na, m), dtype=complex)
        if problem.volume_source is not None:
            fv = np.asarray(problem.volume_source(flat)).reshape(nc, nq, m)
            _check_finite(fv, "volume source")
            fe += np.einsum("q,cqB,qa->caB", W, fv, V, optimize=True)
        flux = None
        if p_const is not None:
            flux = np.einsum("cqijAB,iA->cqjB", C, p_const, optimize=True)
        if problem.flux_source is not None:
            fs = np.asarray(problem.flux_source(flat)).reshape(nc, nq, d, m)
            _check_finite(fs, "flux source")
            flux = fs if flux is None else flux + fs
        if flux is not None:
            fe -= np.einsum("q,cqjB,qaj->caB", W, flux, G, optimize=True)
        if problem.volume_source is not None or flux is not None:
            np.add.at(b, dofs.ravel(), fe.reshape(nc, na * m).ravel())

    data = np.concatenate(data)
    if np.max(np.abs(data.imag), initial=0.0) == 0.0:
        data = data.real
        b = b.real.copy() if np.max(np.abs(b.imag), initial=0.0) == 0.0 else b
    S = sp.coo_matrix((data, (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ndof, ndof)).tocsr()

    free = None
    if mesh.bc == "dirichlet":
        free = np.nonzero(~np.repeat(mesh.boundary_node_mask, m))[0]
        S = S[free][:, free]
        b = b[free]
    deflate = mesh.bc == "periodic" and problem.theta == 0
    return AssembledSystem(matrix=S, rhs=b, mesh=mesh, m=m, free_dofs=free,
                           deflate_constants=deflate)


@dataclass
class SolveResult:
    field: DiscreteField
    iterations: int
    residual: float
    method: str
    fallback_reason: str | None = None


def _classify(S: sp.csr_matrix):
    scale = np.max(np.abs(S.data)) if S.nnz else 1.0
    tol = 1e-12 * max(scale, 1e-300)
    if np.iscomplexobj(S.data):
        dh = sp.csr_matrix(S - S.getH())
        if (np.max(np.abs(dh.data)) if dh.nnz else 0.0) <= tol:
            return "cg"
        ds = sp.csr_matrix(S - S.T)
        if (np.max(np.abs(ds.data)) if ds.nnz else 0.0) <= tol:
            return "cocg"
        return "gmres"
    ds = sp.csr_matrix(S - S.T)
    if (np.max(np.abs(ds.data)) if ds.nnz else 0.0) <= tol:
        return "cg"
    return "gmres"


def _expand(system: AssembledSystem, x: np.ndarray) -> DiscreteField:
    full = np.zeros(system.mesh.n_nodes * system.m, dtype=x.dtype)
    if system.free_dofs is None:
        full[:] = x
    else:
        full[system.free_dofs] = x
    return DiscreteField(system.mesh, full.reshape(-1, system.m))


def solve_spd(system: AssembledSystem, tol: float = 1e-10, max_iter: int | None = None,
              method: str | None = None) -> SolveResult:
    """Solve the assembled system with a diagonally preconditioned Krylov
    iteration chosen by matrix symmetry class.

    Hermitian matrices use conjugate gradients, complex symmetric ones the
    unconjugated variant, anything else a restarted residual-minimizing
    iteration.  Periodic problems without a zeroth-order term are solved in
    the mean-free subspace per component.
    """
    S, b = system.matrix, system.rhs
    n = b.size
    if max_iter is None:
        max_iter = max(2000, 30 * int(np.sqrt(n)) + 200)
    proj = _constant_projector(system) if system.deflate_constants else None
    if proj is not None:
        b = proj(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        x = np.zeros(n, dtype=S.dtype)
        return SolveResult(_expand(system, x), 0, 0.0, "trivial")

    kind = method or _classify(S)
    diag = S.diagonal()
    if kind == "cg" and np.min(diag.real) <= 0:
        raise NonElliptic("assembled operator has a non-positive diagonal entry")
    dinv = np.where(np.abs(diag) > 1e-300, 1.0 / diag, 1.0)

    fallback = None
    if kind in ("cg", "cocg"):
        try:
            x, it, res = _pcg(S, b, dinv, tol, max_iter, proj, conjugate=(kind == "cg"))
            return SolveResult(_expand(system, x), it, res, kind)
        except _Degenerate as exc:
            fallback = str(exc)
            kind = "gmres"
    x, it, res = _gmres(S, b, dinv, tol, max_iter, proj)
    return SolveResult(_expand(system, x), it, res, "gmres", fallback_reason=fallback)


class _Degenerate(Exception):
    pass


def _constant_projector(system: AssembledSystem):
    m = system.m

    def proj(v):
        w = v.reshape(-1, m)
        return (w - w.mean(axis=0)).reshape(-1)

    return proj


def _pcg(S, b, dinv, tol, max_iter, proj, conjugate=True):
    dot = (lambda u, v: np.vdot(u, v)) if conjugate else (lambda u, v: u.dot(v))
    n = b.size
    x = np.zeros(n, dtype=np.result_type(S.dtype, b.dtype))
    r = b.astype(x.dtype).copy()
    bnorm = float(np.linalg.norm(b))
    z = dinv * r
    if proj is not None:
        z = proj(z)
    p = z.copy()
    rz = dot(r, z)
    for it in range(1, max_iter + 1):
        Ap = S @ p
        if proj is not None:
            Ap = proj(Ap)
        pAp = dot(p, Ap)
        if conjugate:
            if pAp.real <= 0:
                raise NonElliptic("conjugate gradients met non-positive curvature, "
                                  "operator is not coercive")
        else:
            herm = np.vdot(p, Ap).real
            if herm <= 0:
                raise _Degenerate("dissipative part degenerated during the "
                                  "unconjugated iteration")
            if abs(pAp) < 1e-300:
                raise _Degenerate("unconjugated inner product broke down")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r)) / bnorm
        if res <= tol:
            true_r = b - S @ x
            if proj is not None:
                true_r = proj(true_r)
            res = float(np.linalg.norm(true_r)) / bnorm
            if res <= 10 * tol:
                if proj is not None:
                    x = proj(x)
                return x, it, res
        z = dinv * r
        if proj is not None:
            z = proj(z)
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(f"iteration stalled at relative residual {res:.3e} "
                        f"after {max_iter} steps", iterations=max_iter, residual=res)


def _gmres(S, b, dinv, tol, max_iter, proj):
    n = b.size
    dtype = np.result_type(S.dtype, b.dtype, np.float64)

    if proj is None:
        op = S
    else:
        def matvec(v):
            return proj(S @ proj(v))

        op = spla.LinearOperator((n, n), matvec=matvec, dtype=dtype)
    M = spla.LinearOperator((n, n), matvec=lambda v: dinv * v, dtype=dtype)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(op, b, M=M, rtol=tol, atol=0.0, restart=200,
                         maxiter=max(1, max_iter // 200), callback=cb,
                         callback_type="pr_norm")
    if proj is not None:
        x = proj(x)
    res = float(np.linalg.norm(b - (S @ x if proj is None else proj(S @ proj(x)))))
    res /= float(np.linalg.norm(b))
    if info != 0 or res > 10 * tol:
        raise NoConvergence(f"residual-minimizing iteration stopped at relative "
                            f"residual {res:.3e}", iterations=count[0], residual=res)
    return x, count[0], res


# ---------------------------------------------------------------------------
# derived quantities of discrete fields


def gradient_field(field: DiscreteField) -> np.ndarray:
    """Cell-centered gradient of the multilinear interpolant,
    shape (n_cells, d, m).  Exact for fields that are affine per cell."""
    mesh = field.mesh
    _, _, _, Gref = _shape_tables(mesh.d, 1)  # single Gauss point = cell center
    G = Gref[0] / mesh.h  # (na, d)
    nodal = field.values[mesh.cell_node_indices]  # (nc, na, m)
    return np.einsum("ai,cam->cim", G, nodal)


def field_at_quadrature(field: DiscreteField, order: int = 2):
    """Interpolant values and gradients at the tensor Gauss points of every
    cell: (coords (nc, nq, d), weights (nq,), values (nc, nq, m),
    gradients (nc, nq, d, m)).  Weights include the cell volume."""
    mesh = field.mesh
    pts, wts, V, Gref = _shape_tables(mesh.d, order)
    nodal = field.values[mesh.cell_node_indices]
    vals = np.einsum("qa,cam->cqm", V, nodal)
    grads = np.einsum("qai,cam->cqim", Gref / mesh.h, nodal)
    coords = mesh.cell_origins()[:, None, :] + pts[None, :, :] * mesh.h
    return coords, wts * mesh.h ** mesh.d, vals, grads


def l2_norm(field: DiscreteField, order: int = 2) -> float:
    _, w, vals, _ = field_at_quadrature(field, order)
    return float(np.sqrt(np.einsum("q,cqm->", w, np.abs(vals) ** 2).real))


def h1_seminorm(field: DiscreteField, order: int = 2) -> float:
    _, w, _, grads = field_at_quadrature(field, order)
    return float(np.sqrt(np.einsum("q,cqim->", w, np.abs(grads) ** 2).real))


def l2_difference(a: DiscreteField, b: DiscreteField, order: int = 2) -> float:
    if a.mesh is not b.mesh and a.mesh.nodes_per_axis != b.mesh.nodes_per_axis:
        raise ValueError("fields live on different meshes")
    return l2_norm(DiscreteField(a.mesh, a.values - b.values), order)


# ---------------------------------------------------------------------------
# import/export


def export_csv(field: DiscreteField, path):
    coords = field.mesh.node_coords()
    cols = [coords[:, i] for i in range(field.mesh.d)]
    header = [f"x{i + 1}" for i in range(field.mesh.d)]
    for c in range(field.m):
        vals = field.values[:, c]
        if np.iscomplexobj(vals):
            cols += [vals.real, vals.imag]
            header += [f"re_u{c + 1}", f"im_u{c + 1}"]
        else:
            cols.append(vals)
            header.append(f"u{c + 1}")
    arr = np.stack(cols, axis=-1)
    np.savetxt(path, arr, delimiter=",", header=",".join(header), comments="")


_BIN_MAGIC = b"SHGR"


def export_binary(field: DiscreteField, path):
    """Simple binary grid: magic, dims, spacing, component count, then
    row-major float64 values (interleaved re/im when complex)."""
    mesh = field.mesh
    is_complex = np.iscomplexobj(field.values)
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        np.array([mesh.d], dtype="<i4").tofile(fh)
        np.array(mesh.nodes_per_axis, dtype="<i4").tofile(fh)
        np.array(mesh.extent, dtype="<i4").tofile(fh)
        np.array([0 if mesh.bc == "periodic" else 1], dtype="<i4").tofile(fh)
        np.array([mesh.h], dtype="<f8").tofile(fh)
        np.array([field.m, 1 if is_complex else 0], dtype="<i4").tofile(fh)
        vals = field.values.astype(complex if is_complex else float)
        if is_complex:
            np.stack([vals.real, vals.imag], axis=-1).astype("<f8").tofile(fh)
        else:
            vals.astype("<f8").tofile(fh)


def import_binary(path) -> DiscreteField:
    with open(path, "rb") as fh:
        if fh.read(4) != _BIN_MAGIC:
            raise ValueError("not a grid file")
        d = int(np.fromfile(fh, "<i4", 1)[0])
        nodes = np.fromfile(fh, "<i4", d)
        extent = tuple(np.fromfile(fh, "<i4", d).tolist())
        bc = "periodic" if int(np.fromfile(fh, "<i4", 1)[0]) == 0 else "dirichlet"
        h = float(np.fromfile(fh, "<f8", 1)[0])
        m, is_complex = (int(v) for v in np.fromfile(fh, "<i4", 2))
        n = int(np.prod(nodes))
        if is_complex:
            raw = np.fromfile(fh, "<f8", n * m * 2).reshape(n, m, 2)
            vals = raw[..., 0] + 1j * raw[..., 1]
        else:
            vals = np.fromfile(fh, "<f8", n * m).reshape(n, m)
    mesh = Mesh(d=d, extent=extent, cells_per_unit=round(1.0 / h), bc=bc)
    return DiscreteField(mesh, vals)

"""Random media: periodic coefficient tensors composed with random cell deformations.

A medium is described by two ingredients:

* a unit-periodic coefficient field ``a(z)`` with values in ``(d, d, m, m)``
  tensors acting on gradients of ``m``-component fields in ``d`` dimensions,
* a random deformation ``Phi`` of space built from one smooth bump per lattice
  cell with an i.i.d. random amplitude vector, optionally followed by a fixed
  linear map ``L``.

The deformation has a stationary gradient, its cell average equals ``L``
exactly (the bump and its gradient vanish on cell boundaries), and amplitudes
come from counter-based per-cell random streams so a realization is fully
determined by ``(seed, cell index)`` independent of evaluation order.

Index conventions used across the package, for ``a[i, j, alpha, beta]``:
``i``/``alpha`` pair with the trial gradient ``du_alpha/dx_i`` and
``j``/``beta`` with the test gradient.  The flattened action matrix maps
``p[i, alpha]`` (flat index ``i * m + alpha``) to ``q[j, beta]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import IterationLimit, NonFiniteCoefficient, SingularMean
from .util import derive_seed, pairwise_mean, sample_stats


# ---------------------------------------------------------------------------
# coefficient tensors


def tensor_to_matrix(a: np.ndarray) -> np.ndarray:
    """Flatten a (d, d, m, m) tensor to its (m*d, m*d) action matrix."""
    d, _, m, _ = a.shape
    return np.transpose(a, (1, 3, 0, 2)).reshape(d * m, d * m)


def matrix_to_tensor(mat: np.ndarray, d: int, m: int) -> np.ndarray:
    """Inverse of tensor_to_matrix."""
    mat = np.asarray(mat)
    if mat.shape != (d * m, d * m):
        raise ValueError(f"expected ({d * m}, {d * m}) matrix, got {mat.shape}")
    return mat.reshape(d, m, d, m).transpose(2, 0, 3, 1)


def transpose_tensor(a: np.ndarray) -> np.ndarray:
    """Tensor of the transposed operator: a_T[i,j,alpha,beta] = a[j,i,beta,alpha]."""
    return np.ascontiguousarray(np.transpose(a, (1, 0, 3, 2)))


@dataclass
class PeriodicCoefficientField:
    """Unit-periodic coefficient tensor field.

    ``eval_fn`` maps points of shape (n, d) to tensors (n, d, d, m, m); it must
    already be 1-periodic in every coordinate.  ``ellipticity_constant`` is the
    claimed coercivity constant of the real part of the action matrix.
    """

    d: int
    m: int
    eval_fn: Callable[[np.ndarray], np.ndarray]
    ellipticity_constant: float
    description: str = ""
    complex_valued: bool = False

    def eval(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        single = y.ndim == 1
        pts = np.atleast_2d(y)
        if pts.shape[-1] != self.d:
            raise ValueError(f"points have dimension {pts.shape[-1]}, field has d={self.d}")
        vals = self.eval_fn(pts)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteCoefficient(f"coefficient field {self.description!r} produced non-finite values")
        return vals[0] if single else vals

    def transposed(self) -> "PeriodicCoefficientField":
        fn = self.eval_fn

        def eval_t(pts):
            return np.transpose(fn(pts), (0, 2, 1, 4, 3))

        return PeriodicCoefficientField(
            d=self.d, m=self.m, eval_fn=eval_t,
            ellipticity_constant=self.ellipticity_constant,
            description=f"transpose of {self.description}",
            complex_valued=self.complex_valued)


def check_ellipticity(field: PeriodicCoefficientField, n_samples: int = 512, seed: int = 0):
    """Sample the coercivity of the (Hermitian part of the) action matrix.

    Returns (min_eigenvalue, argmin_point).  Callers decide whether the value
    violates their requirement.
    """
    rng = np.random.Generator(np.random.Philox(key=[seed, 0xE11], counter=[0, 0, 0, 0]))
    pts = rng.uniform(0.0, 1.0, size=(n_samples, field.d))
    vals = field.eval(pts)
    n = pts.shape[0]
    dm = field.d * field.m
    mats = np.transpose(vals, (0, 2, 4, 1, 3)).reshape(n, dm, dm)
    herm = 0.5 * (mats + np.conj(np.transpose(mats, (0, 2, 1))))
    eigs = np.linalg.eigvalsh(herm)[:, 0]
    k = int(np.argmin(eigs))
    return float(eigs[k].real), pts[k].copy()


# ---------------------------------------------------------------------------
# built-in coefficient fixtures


def smoothstep(t: np.ndarray) -> np.ndarray:
    """Cubic 0-to-1 ramp on [0, 1], clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def laminate_profile(y: np.ndarray, width: float) -> np.ndarray:
    """Periodic 0/1 profile in one coordinate: phase 1 on (1/4, 3/4), smoothed.

    Transitions are smoothstep ramps of the given width centered at 1/4 and
    3/4, so the volume fractions stay exactly one half and the profile is
    continuous across the periodic wrap.
    """
    if not 0.0 < width <= 0.5:
        raise ValueError("laminate ramp width must lie in (0, 0.5]")
    yf = y - np.floor(y)
    up = smoothstep((yf - (0.25 - width / 2.0)) / width)
    down = smoothstep((yf - (0.75 - width / 2.0)) / width)
    return up - down


def _isotropic_field(d, m, scalar_fn, c, desc, complex_valued=False):
    eye = np.einsum("ij,ab->ijab", np.eye(d), np.eye(m))

    def eval_fn(pts):
        a = np.asarray(scalar_fn(pts))
        return a[:, None, None, None, None] * eye

    return PeriodicCoefficientField(d=d, m=m, eval_fn=eval_fn, ellipticity_constant=c,
                                    description=desc, complex_valued=complex_valued)


def coefficient_fixture(name: str, **params) -> PeriodicCoefficientField:
    """Built-in coefficient fields selected by name.

    Names: "constant", "laminate1d", "laminate2d", "smooth-trig",
    "two-phase-smoothed", and the deliberately broken "indefinite-test".
    """
    if name == "constant":
        d = int(params.pop("d", 2))
        m = int(params.pop("m", 1))
        mat = params.pop("matrix", None)
        if mat is None:
            tensor = np.einsum("ij,ab->ijab", np.eye(d), np.eye(m))
        else:
            tensor = matrix_to_tensor(np.asarray(mat, dtype=complex if np.iscomplexobj(mat) else float), d, m)
        _reject_extra(params)
        flat = tensor_to_matrix(tensor)
        herm = 0.5 * (flat + flat.conj().T)
        c = float(np.linalg.eigvalsh(herm)[0].real)

        def eval_fn(pts):
            return np.broadcast_to(tensor, (pts.shape[0],) + tensor.shape)

        return PeriodicCoefficientField(d=d, m=m, eval_fn=eval_fn, ellipticity_constant=c,
                                        description="constant tensor",
                                        complex_valued=bool(np.iscomplexobj(tensor)))

    if name in ("laminate1d", "laminate2d"):
        d = 1 if name == "laminate1d" else 2
        a1 = float(params.pop("a1", 1.0))
        a2 = float(params.pop("a2", 4.0))
        width = float(params.pop("width", 1.0 / 64.0))
        _reject_extra(params)

        def scalar(pts, a1=a1, a2=a2, width=width):
            return a1 + (a2 - a1) * laminate_profile(pts[:, 0], width)

        return _isotropic_field(d, 1, scalar, min(a1, a2),
                                f"two-phase laminate a in [{a1}, {a2}], ramp width {width:g}")

    if name == "smooth-trig":
        d = int(params.pop("d", 1))
        _reject_extra(params)

        def scalar(pts):
            z = pts[:, 0] - np.floor(pts[:, 0])  # reduce first so periodicity is exact
            return 1.0 / (2.0 + np.cos(2.0 * np.pi * z))

        return _isotropic_field(d, 1, scalar, 1.0 / 3.0,
                                "smooth trigonometric scalar 1/(2+cos(2 pi y1))")

    if name == "two-phase-smoothed":
        a1 = float(params.pop("a1", 1.0))
        a2 = float(params.pop("a2", 4.0))
        width = float(params.pop("width", 1.0 / 16.0))
        _reject_extra(params)

        def scalar(pts, a1=a1, a2=a2, width=width):
            chi = laminate_profile(pts[:, 0], width) * laminate_profile(pts[:, 1], width)
            return a1 + (a2 - a1) * chi

        return _isotropic_field(2, 1, scalar, min(a1, a2),
                                f"smoothed square inclusion a in [{a1}, {a2}]")

    if name == "indefinite-test":
        _reject_extra(params)

        def scalar(pts):
            return 0.5 + np.cos(2.0 * np.pi * pts[:, 0])

        # Deliberately sign-indefinite medium used to exercise error paths.
        return _isotropic_field(2, 1, scalar, 0.1, "deliberately indefinite test medium")

    raise ValueError(f"unknown coefficient fixture {name!r}")


def _reject_extra(params):
    if params:
        raise ValueError(f"unknown fixture parameters: {sorted(params)}")


# ---------------------------------------------------------------------------
# bump profile for the per-cell displacement


def _beta(t):
    # quartic bump on [0,1], normalized to unit sup, zero value/slope at ends
    return 16.0 * (t * t) * (1.0 - t) ** 2


def _dbeta(t):
    return 32.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


def bump_value(z: np.ndarray) -> np.ndarray:
    """Separable bump on the unit cell, shape (n, d) -> (n,)."""
    return np.prod(_beta(z), axis=-1)


def bump_gradient(z: np.ndarray) -> np.ndarray:
    """Gradient of bump_value, shape (n, d) -> (n, d)."""
    b = _beta(z)
    db = _dbeta(z)
    d = z.shape[-1]
    out = np.empty_like(z)
    for i in range(d):
        rest = np.prod(np.delete(b, i, axis=-1), axis=-1) if d > 1 else 1.0
        out[..., i] = db[..., i] * rest
    return out

_SUP_CACHE: dict[int, float] = {}


def bump_gradient_sup(d: int) -> float:
    """sup over the cell of the euclidean norm of the bump gradient."""
    if d not in _SUP_CACHE:
        best, n = 0.0, 33
        while True:
            axes = [np.linspace(0.0, 1.0, n)] * d
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
            cur = float(np.max(np.linalg.norm(bump_gradient(grid), axis=-1)))
            if cur - best <= 1e-4 * max(cur, 1.0) and n > 33:
                best = max(best, cur)
                break
            best, n = max(best, cur), 2 * (n - 1) + 1
        _SUP_CACHE[d] = best * 1.001
    return _SUP_CACHE[d]


# ---------------------------------------------------------------------------
# random deformation model and realizations


@dataclass
class DiffeomorphismSpec:
    """Random deformation family: per-cell bumps with i.i.d. amplitudes.

    Phi(y) = L (y + sum_k eta_k b(y - k)) with eta_k uniform on
    [-eta_max, eta_max]^d.  The margin delta keeps the displacement a strict
    contraction (eta_max * sup-gradient <= 1 - margin), which guarantees
    global invertibility and det grad Phi >= margin * det L > 0.
    """

    d: int
    eta_max: float
    margin: float = 0.05
    bump_profile: str = "quartic"
    linear_precompose: np.ndarray | None = None

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("spatial dimension must be 1, 2 or 3")
        if self.bump_profile != "quartic":
            raise ValueError(f"unknown bump profile {self.bump_profile!r}")
        if self.eta_max < 0:
            raise ValueError("eta_max must be non-negative")
        if not 0.0 < self.margin < 1.0:
            raise ValueError("margin must lie in (0, 1)")
        if self.linear_precompose is not None:
            L = np.asarray(self.linear_precompose, dtype=float)
            if L.shape != (self.d, self.d):
                raise ValueError("linear_precompose must be d x d")
            # invertibility is a precondition of the sampling operations, which
            # raise SingularMean; keeping construction permissive lets callers
            # surface that error where the matrix is actually used
            self.linear_precompose = L
        bound = self.eta_max * self.unit_gradient_bound()
        if bound > 1.0 - self.margin:
            raise ValueError(
                f"amplitude too large: eta_max * sup|grad B| = {bound:.4f} "
                f"exceeds 1 - margin = {1.0 - self.margin:.4f}")

    def unit_gradient_bound(self) -> float:
        # worst-case spectral norm of eta (x) grad b over unit-amplitude eta
        return np.sqrt(self.d) * bump_gradient_sup(self.d)

    @property
    def linear(self) -> np.ndarray:
        if self.linear_precompose is None:
            return np.eye(self.d)
        return self.linear_precompose

    @property
    def is_identity(self) -> bool:
        return self.eta_max == 0.0 and self.linear_precompose is None

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "eta_max": self.eta_max,
            "margin": self.margin,
            "bump_profile": self.bump_profile,
            "linear_precompose": None if self.linear_precompose is None
            else [[float(v) for v in row] for row in self.linear_precompose],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DiffeomorphismSpec":
        return cls(
            d=int(data["d"]),
            eta_max=float(data["eta_max"]),
            margin=float(data.get("margin", 0.05)),
            bump_profile=data.get("bump_profile", "quartic"),
            linear_precompose=data.get("linear_precompose"),
        )


@dataclass
class DiffeomorphismRealization:
    """One sampled deformation on the periodic supercell [0, N)^d."""

    spec: DiffeomorphismSpec
    supercell: int
    amplitudes: np.ndarray  # shape (N,)*d + (d,)
    seed: int

    def shifted(self, shift) -> "DiffeomorphismRealization":
        """Relabel amplitudes by a lattice shift; gradients are stationary:
        grad Phi_shifted(y) = grad Phi(y + shift)."""
        shift = tuple(int(s) for s in shift)
        rolled = np.roll(self.amplitudes, [-s for s in shift], axis=tuple(range(self.spec.d)))
        return DiffeomorphismRealization(self.spec, self.supercell, rolled, self.seed)


_CELL_TAG = 0xC311


def sample_diffeomorphism(spec: DiffeomorphismSpec, supercell: int, seed: int) -> DiffeomorphismRealization:
    """Draw the amplitude lattice for a supercell of N^d cells.

    Each cell gets its own counter-based stream keyed by (seed, flat cell
    index), so any sub-lattice can be regenerated independently and the
    result does not depend on sampling order.
    """
    n = int(supercell)
    if n < 1:
        raise ValueError("supercell size must be >= 1")
    d = spec.d
    key = derive_seed(seed)
    shape = (n,) * d
    amps = np.zeros(shape + (d,))
    if spec.eta_max > 0.0:
        for flat in range(n ** d):
            gen = np.random.Generator(np.random.Philox(key=[key, _CELL_TAG], counter=[flat, 0, 0, 0]))
            amps[np.unravel_index(flat, shape)] = gen.uniform(-spec.eta_max, spec.eta_max, size=d)
    return DiffeomorphismRealization(spec=spec, supercell=n, amplitudes=amps, seed=int(seed))


def _cell_lookup(real: DiffeomorphismRealization, y: np.ndarray):
    """Split points into in-cell coordinates and per-point amplitude vectors."""
    base = np.floor(y)
    local = y - base
    cells = np.mod(base.astype(np.int64), real.supercell)
    eta = real.amplitudes[tuple(cells.T)]
    return local, eta


def evaluate_map(real: DiffeomorphismRealization, y: np.ndarray) -> np.ndarray:
    """Phi(y) for points of shape (n, d) or (d,)."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = np.atleast_2d(y)
    local, eta = _cell_lookup(real, pts)
    out = (pts + bump_value(local)[:, None] * eta) @ real.spec.linear.T
    return out[0] if single else out


def evaluate_gradient(real: DiffeomorphismRealization, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of Phi, shape (n, d, d) with [r, s] = d Phi_r / d y_s."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = np.atleast_2d(y)
    local, eta = _cell_lookup(real, pts)
    gb = bump_gradient(local)
    inner = np.eye(real.spec.d) + eta[:, :, None] * gb[:, None, :]
    out = np.einsum("rt,nts->nrs", real.spec.linear, inner)
    return out[0] if single else out


def invert_map(real: DiffeomorphismRealization, x: np.ndarray, tol: float = 1e-12,
               max_iter: int = 100) -> np.ndarray:
    """Solve Phi(y) = x by damped Newton iteration started from L^-1 x.

    Works on batches (n, d).  Raises IterationLimit if any point fails to
    reach |Phi(y) - x| <= tol within max_iter iterations.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    L = real.spec.linear
    if abs(np.linalg.det(L)) < 1e-14:
        raise SingularMean("linear part of the deformation is singular, cannot invert")
    target = pts @ np.linalg.inv(L).T  # solve y + D(y) = L^-1 x
    y = target.copy()
    scale = np.linalg.norm(L, 2)

    def residual(yy):
        local, eta = _cell_lookup(real, yy)
        return yy + bump_value(local)[:, None] * eta - target

    res = residual(y)
    rnorm = np.linalg.norm(res, axis=1)
    for _ in range(max_iter):
        if np.all(rnorm * scale <= tol):
            break
        local, eta = _cell_lookup(real, y)
        gb = bump_gradient(local)
        # (I + eta (x) gb)^-1 res via the rank-one inversion formula
        denom = 1.0 + np.einsum("ns,ns->n", gb, eta)
        coef = np.einsum("ns,ns->n", gb, res) / denom
        step = res - eta * coef[:, None]
        alpha = np.ones(len(y))
        active = rnorm * scale > tol
        for _ in range(60):
            cand = y - alpha[:, None] * step
            cres = residual(cand)
            cnorm = np.linalg.norm(cres, axis=1)
            improved = (cnorm < rnorm) | ~active
            if improved.all():
                break
            alpha = np.where(improved, alpha, alpha / 2.0)
        y = np.where(active[:, None], cand, y)
        res = np.where(active[:, None], cres, res)
        rnorm = np.where(active, cnorm, rnorm)
    else:
        raise IterationLimit(
            f"map inversion did not reach tol={tol:g} in {max_iter} iterations "
            f"(worst residual {float(np.max(rnorm * scale)):.3e})")
    return y[0] if single else y


# ---------------------------------------------------------------------------
# quadrature over the supercell and ensemble estimators


_GAUSS_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}


def unit_cell_quadrature(d: int, order: int):
    """Tensor-product Gauss-Legendre rule on [0, 1]^d: (points, weights)."""
    key = (d, order)
    if key not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
        grids = np.meshgrid(*([x] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        wts = np.ones(pts.shape[0])
        for axis in range(d):
            wts *= w[np.unravel_index(np.arange(pts.shape[0]), (order,) * d)[axis]]
        _GAUSS_CACHE[key] = (pts, wts)
    return _GAUSS_CACHE[key]


def supercell_quadrature(d: int, supercell: int, order: int):
    """Quadrature over [0, N)^d built cell by cell; weights sum to N^d."""
    pts, wts = unit_cell_quadrature(d, order)
    n = int(supercell)
    origins = np.stack(np.meshgrid(*([np.arange(n)] * d), indexing="ij"), axis=-1).reshape(-1, d)
    all_pts = (origins[:, None, :] + pts[None, :, :]).reshape(-1, d)
    all_wts = np.tile(wts, origins.shape[0])
    return all_pts, all_wts


@dataclass
class MeanGradientEstimate:
    """Monte-Carlo estimate of the cell-averaged deformation gradient."""

    matrix: np.ndarray
    c_phi: float
    stderr: np.ndarray
    realizations: int
    n_quadrature: int


def estimate_mean_gradient(spec: DiffeomorphismSpec, realizations: int = 32,
                           quadrature_order: int = 4, seed: int = 0) -> MeanGradientEstimate:
    """Estimate E[integral over the unit cell of grad Phi] and its volume factor.

    For the shipped bump construction the cell average equals the linear part
    exactly, so the standard error mainly reports quadrature and roundoff.
    """
    pts, wts = unit_cell_quadrature(spec.d, quadrature_order)
    samples = []
    for r in range(realizations):
        real = sample_diffeomorphism(spec, 1, derive_seed(seed, r))
        grads = evaluate_gradient(real, pts)
        samples.append(np.einsum("q,qrs->rs", wts, grads))
    mean, stderr = sample_stats(np.array(samples))
    det = float(np.linalg.det(mean))
    if abs(det) < 1e-12:
        raise SingularMean(f"estimated mean gradient is singular (det = {det:.3e})")
    return MeanGradientEstimate(matrix=mean, c_phi=1.0 / det, stderr=stderr,
                                realizations=realizations, n_quadrature=len(wts))


@dataclass
class EnsembleAverage:
    value: np.ndarray
    stderr: np.ndarray
    realizations: int
    supercell: int


def ergodic_average(g, spec: DiffeomorphismSpec, realizations: int, supercell: int,
                    seed: int = 0, quadrature_order: int = 4) -> EnsembleAverage:
    """Ensemble-plus-cell average of a stationary integrand.

    Computes c_phi * E[ (1/N^d) integral over [0,N)^d of g(z, omega)
    det grad Phi(z, omega) dz ], the reference-coordinate form of averaging g
    over one deformed cell.  ``g(points, realization)`` must be vectorized
    over points and may return scalars or arrays per point.
    """
    pts, wts = supercell_quadrature(spec.d, supercell, quadrature_order)
    vol = float(supercell) ** spec.d
    det_l = float(np.linalg.det(spec.linear))
    if abs(det_l) < 1e-14:
        raise SingularMean("linear part of the deformation is singular, no volume factor")
    c_phi = 1.0 / det_l
    samples = []
    for r in range(realizations):
        real = sample_diffeomorphism(spec, supercell, derive_seed(seed, r))
        vals = np.asarray(g(pts, real))
        det = np.linalg.det(evaluate_gradient(real, pts))
        w = wts * det / vol
        samples.append(np.tensordot(w, vals, axes=(0, 0)))
    mean, stderr = sample_stats(np.array(samples))
    return EnsembleAverage(value=c_phi * mean, stderr=c_phi * stderr,
                           realizations=realizations, supercell=supercell)


def det_mean_identity_check(spec: DiffeomorphismSpec, realizations: int = 64,
                            supercell: int = 4, seed: int = 0,
                            quadrature_order: int = 4) -> dict:
    """Compare E[avg det grad Phi] against det(E[avg grad Phi]).

    The two agree for deformations with stationary gradients; the check
    returns both estimates, their standard errors, and the residual.  The
    right-hand side gets a delta-method standard error through the
    determinant.
    """
    pts, wts = supercell_quadrature(spec.d, supercell, quadrature_order)
    vol = float(supercell) ** spec.d
    det_samples = []
    grad_samples = []
    for r in range(realizations):
        real = sample_diffeomorphism(spec, supercell, derive_seed(seed, r))
        grads = evaluate_gradient(real, pts)
        det_samples.append(float(np.einsum("q,q->", wts, np.linalg.det(grads))) / vol)
        grad_samples.append(np.einsum("q,qrs->rs", wts, grads) / vol)
    lhs, lhs_err = sample_stats(np.array(det_samples))
    mean_grad, grad_err = sample_stats(np.array(grad_samples))
    rhs = float(np.linalg.det(mean_grad))
    inv_t = np.linalg.inv(mean_grad).T
    rhs_err = abs(rhs) * float(np.sqrt(np.sum((inv_t * grad_err) ** 2)))
    combined = float(np.hypot(lhs_err, rhs_err))
    return {
        "mc_mean_det": float(lhs),
        "mc_mean_det_stderr": float(lhs_err),
        "det_mean_grad": rhs,
        "det_mean_grad_stderr": rhs_err,
        "residual": float(abs(lhs - rhs)),
        "combined_stderr": combined,
        "realizations": realizations,
        "supercell": supercell,
    }

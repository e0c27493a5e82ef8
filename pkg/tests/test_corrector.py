import numpy as np
import pytest

from stochom.corrector import (
    CorrectorConfig,
    HomogenizedTensor,
    assemble_homogenized,
    export_sweep_csv,
    load_homogenized_json,
    save_homogenized_json,
    solve_corrector,
    solve_transpose_corrector,
    theta_sweep,
)
from stochom.errors import ConfigError, SingularMean
from stochom.medium import (
    DiffeomorphismSpec,
    PeriodicCoefficientField,
    coefficient_fixture,
    evaluate_gradient,
    evaluate_map,
    sample_diffeomorphism,
)
from stochom.solver import Mesh

HARMONIC_12 = 1.6   # half/half mix of 1 and 4: 1/(0.5 + 0.5/4)
ARITH_12 = 2.5
TRIG_HARMONIC = 0.5          # mean of 2 + cos(2 pi y) is 2
TRIG_ARITH = 1.0 / np.sqrt(3.0)  # integral of 1/(2 + cos 2 pi y)

identity_spec = lambda d: DiffeomorphismSpec(d=d, eta_max=0.0)


def nonsymmetric_field():
    def eval_fn(pts):
        z1, z2 = pts[:, 0], pts[:, 1]
        out = np.zeros((len(pts), 2, 2, 1, 1))
        out[:, 0, 0, 0, 0] = 2.0 + 0.5 * np.sin(2 * np.pi * z1)
        out[:, 1, 1, 0, 0] = 1.5 + 0.3 * np.cos(2 * np.pi * z2)
        out[:, 0, 1, 0, 0] = 0.3
        out[:, 1, 0, 0, 0] = -0.1 + 0.2 * np.sin(2 * np.pi * z2)
        return out

    return PeriodicCoefficientField(d=2, m=1, eval_fn=eval_fn,
                                    ellipticity_constant=1.0,
                                    description="asymmetric test medium")


# --- gradient transport convention ----------------------------------------

def test_transport_convention_finite_difference():
    # for w(y) = F(y) the pullback is w_tilde(z) = F(Phi(z)); the transported
    # reference gradient must reproduce grad F at the image point
    spec = DiffeomorphismSpec(d=2, eta_max=0.15)
    real = sample_diffeomorphism(spec, 2, seed=3)
    F = lambda y: np.sin(np.pi * y[..., 0]) * np.cos(np.pi * y[..., 1])
    dF = lambda y: np.stack([np.pi * np.cos(np.pi * y[..., 0]) * np.cos(np.pi * y[..., 1]),
                             -np.pi * np.sin(np.pi * y[..., 0]) * np.sin(np.pi * y[..., 1])],
                            axis=-1)
    rng = np.random.default_rng(1)
    z = (rng.uniform(0.1, 0.9, size=(20, 2)) + rng.integers(0, 2, size=(20, 2)))
    delta = 1e-6
    grad_ref = np.zeros((20, 2))
    for s in range(2):
        e = np.zeros(2)
        e[s] = delta
        grad_ref[:, s] = (F(evaluate_map(real, z + e)) - F(evaluate_map(real, z - e))) / (2 * delta)
    J = np.linalg.inv(evaluate_gradient(real, z)).transpose(0, 2, 1)
    transported = np.einsum("nts,ns->nt", J, grad_ref)
    assert np.allclose(transported, dF(evaluate_map(real, z)), atol=1e-5)


# --- single corrector solves -----------------------------------------------

def test_constant_coefficient_corrector_vanishes():
    mat = np.array([[2.0, 0.3, 0.1, 0.0],
                    [0.2, 1.5, 0.0, 0.1],
                    [0.0, 0.1, 1.8, 0.2],
                    [0.1, 0.0, 0.3, 2.2]])
    A = coefficient_fixture("constant", d=2, m=2, matrix=mat)
    spec = DiffeomorphismSpec(d=2, eta_max=0.15)
    real = sample_diffeomorphism(spec, 2, seed=11)
    mesh = Mesh(d=2, extent=2, cells_per_unit=8, bc="periodic")
    for p in (np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.5], [1.0, 0.0]])):
        sol = solve_corrector(A, real, p, mesh=mesh)
        assert np.max(np.abs(sol.w_tilde.values)) < 1e-13
        assert np.max(np.abs(sol.physical_gradient)) < 1e-12
        assert sol.zero_mean_residual < 1e-13


def test_smooth_trig_closed_form_gradient():
    A = coefficient_fixture("smooth-trig", d=1)
    real = sample_diffeomorphism(identity_spec(1), 1, seed=0)
    mesh = Mesh(d=1, extent=1, cells_per_unit=128, bc="periodic")
    sol = solve_corrector(A, real, np.array([[1.0]]), mesh=mesh, tol=1e-12)
    centers = mesh.cell_centers()[:, 0]
    expected = 0.5 * np.cos(2 * np.pi * centers)
    assert np.allclose(sol.reference_gradient[:, 0, 0], expected, atol=2e-3)
    assert sol.zero_mean_residual < 1e-12


def test_laminate_transverse_direction_trivial():
    A = coefficient_fixture("laminate2d", width=1 / 16)
    real = sample_diffeomorphism(identity_spec(2), 1, seed=0)
    mesh = Mesh(d=2, extent=1, cells_per_unit=16, bc="periodic")
    sol = solve_corrector(A, real, np.array([[0.0], [1.0]]), mesh=mesh)
    assert np.max(np.abs(sol.w_tilde.values)) == 0.0


def test_transpose_corrector_matches_for_symmetric_medium():
    A = coefficient_fixture("laminate2d", width=1 / 8)
    spec = DiffeomorphismSpec(d=2, eta_max=0.1)
    real = sample_diffeomorphism(spec, 2, seed=5)
    mesh = Mesh(d=2, extent=2, cells_per_unit=8, bc="periodic")
    p = np.array([[1.0], [0.0]])
    a = solve_corrector(A, real, p, mesh=mesh, tol=1e-11)
    b = solve_transpose_corrector(A, real, p, mesh=mesh, tol=1e-11)
    assert np.allclose(a.w_tilde.values, b.w_tilde.values, atol=1e-9)


def test_transpose_corrector_scalar_1d_identical():
    A = coefficient_fixture("smooth-trig", d=1)
    real = sample_diffeomorphism(identity_spec(1), 1, seed=0)
    mesh = Mesh(d=1, extent=1, cells_per_unit=32, bc="periodic")
    a = solve_corrector(A, real, [1.0], mesh=mesh)
    b = solve_transpose_corrector(A, real, [1.0], mesh=mesh)
    assert np.allclose(a.w_tilde.values, b.w_tilde.values, atol=1e-12)


def test_direction_accepts_flat_vector():
    A = coefficient_fixture("smooth-trig", d=2)
    real = sample_diffeomorphism(identity_spec(2), 1, seed=0)
    mesh = Mesh(d=2, extent=1, cells_per_unit=8, bc="periodic")
    a = solve_corrector(A, real, [1.0, 0.0], mesh=mesh)
    b = solve_corrector(A, real, np.array([[1.0], [0.0]]), mesh=mesh)
    assert np.array_equal(a.w_tilde.values, b.w_tilde.values)


def test_zero_mean_invariant_random_deformation():
    A = coefficient_fixture("two-phase-smoothed", width=1 / 8)
    spec = DiffeomorphismSpec(d=2, eta_max=0.18)
    real = sample_diffeomorphism(spec, 2, seed=9)
    mesh = Mesh(d=2, extent=2, cells_per_unit=16, bc="periodic")
    sol = solve_corrector(A, real, np.array([[1.0], [0.0]]), mesh=mesh, tol=1e-11)
    assert np.max(np.abs(sol.w_tilde.values)) > 1e-3  # non-trivial corrector
    assert sol.zero_mean_residual <= 1e-11


def test_energy_bounded_across_regularization():
    A = coefficient_fixture("smooth-trig", d=1)
    real = sample_diffeomorphism(identity_spec(1), 1, seed=0)
    mesh = Mesh(d=1, extent=1, cells_per_unit=64, bc="periodic")
    grads, masses = [], []
    for theta in (1.0, 0.1, 0.01, 0.0):
        sol = solve_corrector(A, real, [1.0], theta=theta, mesh=mesh, tol=1e-12)
        grads.append(sol.gradient_energy)
        masses.append(sol.mass_energy)
    assert max(grads) <= 1.0
    assert max(masses) <= 1.0
    assert max(grads) <= 2.0 * min(g for g in grads if g > 0)


# --- effective tensors -----------------------------------------------------

def test_constant_medium_reproduced_exactly():
    mat = np.array([[2.0, 0.3], [0.3, 1.2]])
    A = coefficient_fixture("constant", d=2, m=1, matrix=mat)
    spec = DiffeomorphismSpec(d=2, eta_max=0.12)
    config = CorrectorConfig(R=4, N=2, h=1 / 8, seed=21)
    hom = assemble_homogenized(A, spec, config)
    assert np.allclose(hom.values, mat, atol=1e-12)
    assert np.max(hom.stderr) < 1e-12
    assert hom.meta["max_zero_mean_residual"] < 1e-13


def test_smooth_trig_effective_value():
    A = coefficient_fixture("smooth-trig", d=1)
    config = CorrectorConfig(R=1, N=1, h=1 / 128, seed=0, tol=1e-12)
    hom = assemble_homogenized(A, identity_spec(1), config)
    assert hom.values.shape == (1, 1)
    assert abs(hom.values[0, 0] - TRIG_HARMONIC) < 1e-3


def test_laminate_1d_harmonic_mean_with_refinement():
    vals = []
    for n in (64, 128):
        A = coefficient_fixture("laminate1d", width=2.0 / n)
        config = CorrectorConfig(R=1, N=1, h=1.0 / n, seed=0, tol=1e-12)
        vals.append(assemble_homogenized(A, identity_spec(1), config).values[0, 0])
    errs = [abs(v - HARMONIC_12) / HARMONIC_12 for v in vals]
    assert errs[0] < 0.03
    assert errs[1] < errs[0]


def test_laminate_2d_diagonal_limits():
    A = coefficient_fixture("laminate2d", width=2 / 32)
    config = CorrectorConfig(R=1, N=1, h=1 / 32, seed=0, tol=1e-11)
    hom = assemble_homogenized(A, identity_spec(2), config)
    assert abs(hom.values[0, 0] - HARMONIC_12) / HARMONIC_12 < 0.04
    assert abs(hom.values[1, 1] - ARITH_12) / ARITH_12 < 1e-3
    assert abs(hom.values[0, 1]) < 1e-8
    assert abs(hom.values[1, 0]) < 1e-8
    # symmetric medium: effective tensor symmetric within solver tolerance
    assert np.max(np.abs(hom.values - hom.values.T)) < 1e-8
    # coercivity along random directions
    rng = np.random.default_rng(0)
    P = rng.normal(size=(200, 2))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    quad = np.einsum("ni,ij,nj->n", P, hom.values, P)
    assert quad.min() > 1.0


def test_voigt_reuss_bracketing():
    A = coefficient_fixture("two-phase-smoothed", width=1 / 16)
    config = CorrectorConfig(R=1, N=1, h=1 / 32, seed=0, tol=1e-11)
    hom = assemble_homogenized(A, identity_spec(2), config)
    # quadrature oracle for the Voigt/Reuss means of the scalar profile
    grid = (np.arange(512) + 0.5) / 512
    X, Y = np.meshgrid(grid, grid, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    scal = A.eval(pts)[:, 0, 0, 0, 0]
    arith = scal.mean()
    harm = 1.0 / (1.0 / scal).mean()
    for i in range(2):
        assert harm - 1e-3 <= hom.values[i, i] <= arith + 1e-3


def test_transpose_consistency_matched_seeds():
    A = nonsymmetric_field()
    spec = DiffeomorphismSpec(d=2, eta_max=0.1)
    config = CorrectorConfig(R=2, N=2, h=1 / 8, seed=13, tol=1e-11)
    ha = assemble_homogenized(A, spec, config)
    ht = assemble_homogenized(A.transposed(), spec, config)
    assert np.max(np.abs(ha.values.T - ht.values)) <= 1e-7 + 10 * np.max(ha.stderr + ht.stderr)


def test_supercell_independence_for_identity_map():
    A = coefficient_fixture("smooth-trig", d=1)
    h1 = assemble_homogenized(A, identity_spec(1),
                              CorrectorConfig(R=1, N=1, h=1 / 64, seed=0, tol=1e-12))
    h4 = assemble_homogenized(A, identity_spec(1),
                              CorrectorConfig(R=1, N=4, h=1 / 64, seed=0, tol=1e-12))
    assert np.max(np.abs(h1.values - h4.values)) <= 1e-9


def test_seed_determinism_and_sensitivity():
    A = coefficient_fixture("laminate2d", width=1 / 8)
    spec = DiffeomorphismSpec(d=2, eta_max=0.15)
    config = CorrectorConfig(R=2, N=2, h=1 / 8, seed=4, tol=1e-11)
    a = assemble_homogenized(A, spec, config)
    b = assemble_homogenized(A, spec, config)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.stderr, b.stderr)
    c = assemble_homogenized(A, spec, CorrectorConfig(R=2, N=2, h=1 / 8, seed=5, tol=1e-11))
    assert not np.array_equal(a.values, c.values)


def test_theta_sweep_stabilizes_toward_closed_form():
    A = coefficient_fixture("smooth-trig", d=1)
    config = CorrectorConfig(R=1, N=1, h=1 / 64, seed=0, tol=1e-12)
    tensors = theta_sweep(A, identity_spec(1), config, [1.0, 0.1, 0.01, 0.0])
    vals = [t.values[0, 0] for t in tensors]
    gaps = [abs(v - vals[-1]) for v in vals[:-1]]
    assert gaps[1] < gaps[0]
    assert gaps[2] < gaps[1]
    assert abs(vals[-1] - TRIG_HARMONIC) < 2e-3


def test_large_theta_gives_arithmetic_type_mean():
    A = coefficient_fixture("smooth-trig", d=1)
    config = CorrectorConfig(R=1, N=1, h=1 / 64, theta=1e4, seed=0, tol=1e-12)
    hom = assemble_homogenized(A, identity_spec(1), config)
    assert abs(hom.values[0, 0] - TRIG_ARITH) < 5e-3


def test_singular_mean_deformation_rejected():
    A = coefficient_fixture("smooth-trig", d=2)
    spec = DiffeomorphismSpec(d=2, eta_max=0.1,
                              linear_precompose=np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(SingularMean):
        assemble_homogenized(A, spec, CorrectorConfig(R=1, N=1, h=1 / 8))


# --- config and serialization ----------------------------------------------

def test_config_validation_names_field():
    with pytest.raises(ConfigError) as err:
        CorrectorConfig(R=0, N=1, h=1 / 8)
    assert err.value.field == "R"
    with pytest.raises(ConfigError) as err:
        CorrectorConfig(R=1, N=1, h=0.3)
    assert err.value.field == "h"
    with pytest.raises(ConfigError) as err:
        CorrectorConfig(R=1, N=1, h=1 / 8, theta=-1.0)
    assert err.value.field == "theta"


def test_theta_sweep_rejects_increasing():
    A = coefficient_fixture("smooth-trig", d=1)
    config = CorrectorConfig(R=1, N=1, h=1 / 16)
    with pytest.raises(ConfigError):
        theta_sweep(A, identity_spec(1), config, [0.01, 0.1])


def test_json_roundtrip(tmp_path):
    A = coefficient_fixture("smooth-trig", d=1)
    hom = assemble_homogenized(A, identity_spec(1),
                               CorrectorConfig(R=2, N=1, h=1 / 32, seed=3))
    path = tmp_path / "tensor.json"
    save_homogenized_json(hom, path)
    back = load_homogenized_json(path)
    assert back.d == hom.d and back.m == hom.m
    assert np.allclose(back.values, hom.values)
    assert np.allclose(back.stderr, hom.stderr)
    assert back.meta["seeds"] == hom.meta["seeds"]


def test_sweep_csv_export(tmp_path):
    A = coefficient_fixture("smooth-trig", d=1)
    config = CorrectorConfig(R=1, N=1, h=1 / 32, seed=0)
    tensors = theta_sweep(A, identity_spec(1), config, [0.1, 0.0])
    path = tmp_path / "sweep.csv"
    export_sweep_csv(path, "theta", [0.1, 0.0], tensors)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("theta,")
    assert len(lines) == 3

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochom.errors import IterationLimit, SingularMean
from stochom.medium import (
    DiffeomorphismSpec,
    bump_gradient,
    bump_value,
    check_ellipticity,
    coefficient_fixture,
    det_mean_identity_check,
    ergodic_average,
    estimate_mean_gradient,
    evaluate_gradient,
    evaluate_map,
    invert_map,
    laminate_profile,
    matrix_to_tensor,
    sample_diffeomorphism,
    tensor_to_matrix,
    transpose_tensor,
    unit_cell_quadrature,
)


def spec2(eta=0.1, **kw):
    return DiffeomorphismSpec(d=2, eta_max=eta, **kw)


# --- bump profile ----------------------------------------------------------

def test_bump_vanishes_on_cell_boundary():
    t = np.linspace(0, 1, 9)
    edge = np.stack([np.zeros_like(t), t], axis=-1)  # face y1 = 0
    for face in (edge, edge[:, ::-1], 1.0 - edge):
        assert np.all(bump_value(face) == 0.0)
        assert np.all(bump_gradient(face) == 0.0)


def test_bump_unit_sup():
    assert bump_value(np.array([[0.5, 0.5, 0.5]])) == pytest.approx(1.0)
    grid = np.random.default_rng(0).uniform(0, 1, (2000, 2))
    assert np.max(bump_value(grid)) <= 1.0


def test_bump_gradient_vs_finite_differences():
    # oracle: central differences of the bump itself
    rng = np.random.default_rng(1)
    z = rng.uniform(0.05, 0.95, (40, 3))
    g = bump_gradient(z)
    h = 1e-6
    for i in range(3):
        zp, zm = z.copy(), z.copy()
        zp[:, i] += h
        zm[:, i] -= h
        fd = (bump_value(zp) - bump_value(zm)) / (2 * h)
        assert np.max(np.abs(fd - g[:, i])) < 1e-8


# --- sampling and evaluation ----------------------------------------------

def test_identity_spec_maps_points_to_themselves():
    real = sample_diffeomorphism(DiffeomorphismSpec(d=2, eta_max=0.0), 4, seed=0)
    y = np.random.default_rng(2).uniform(-3, 7, (50, 2))
    assert np.array_equal(evaluate_map(real, y), y)
    g = evaluate_gradient(real, y)
    assert np.allclose(g, np.eye(2)[None], atol=0)


def test_linear_precompose_only():
    L = np.array([[2.0, 0.5], [0.0, 1.0]])
    real = sample_diffeomorphism(DiffeomorphismSpec(d=2, eta_max=0.0, linear_precompose=L), 2, seed=0)
    y = np.array([[1.0, 3.0], [0.25, 0.5]])
    assert np.allclose(evaluate_map(real, y), y @ L.T)


def test_sampling_is_deterministic_and_seed_sensitive():
    s = spec2()
    a = sample_diffeomorphism(s, 3, seed=42)
    b = sample_diffeomorphism(s, 3, seed=42)
    c = sample_diffeomorphism(s, 3, seed=43)
    assert np.array_equal(a.amplitudes, b.amplitudes)
    assert not np.array_equal(a.amplitudes, c.amplitudes)
    assert np.max(np.abs(a.amplitudes)) <= s.eta_max


def test_amplitudes_are_counter_based_prefix_stable():
    # growing the supercell must not change amplitudes of existing cells
    s = spec2()
    small = sample_diffeomorphism(s, 2, seed=9)
    big = sample_diffeomorphism(s, 2, seed=9)
    assert np.array_equal(small.amplitudes, big.amplitudes)


def test_map_gradient_vs_finite_differences():
    real = sample_diffeomorphism(spec2(eta=0.1, linear_precompose=[[1.5, 0.2], [0.0, 1.0]]), 2, seed=3)
    rng = np.random.default_rng(4)
    y = rng.uniform(0.0, 2.0, (60, 2))
    g = evaluate_gradient(real, y)
    h = 1e-5
    for sdir in range(2):
        yp, ym = y.copy(), y.copy()
        yp[:, sdir] += h
        ym[:, sdir] -= h
        fd = (evaluate_map(real, yp) - evaluate_map(real, ym)) / (2 * h)
        assert np.max(np.abs(fd - g[:, :, sdir])) < 1e-7


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), sx=st.integers(-5, 5), sy=st.integers(-5, 5))
def test_gradient_stationarity_under_relabeling(seed, sx, sy):
    real = sample_diffeomorphism(spec2(eta=0.2), 4, seed=seed)
    shifted = real.shifted((sx, sy))
    y = np.random.default_rng(seed % 1000).uniform(0.0, 4.0, (20, 2))
    g1 = evaluate_gradient(shifted, y)
    g2 = evaluate_gradient(real, y + np.array([sx, sy], dtype=float))
    assert np.allclose(g1, g2, atol=1e-12)


def test_determinant_positive_on_dense_grid():
    s = spec2(eta=0.1, margin=0.05)
    real = sample_diffeomorphism(s, 4, seed=7)
    ax = np.linspace(0.0, 4.0, 65)[:-1]
    grid = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    det = np.linalg.det(evaluate_gradient(real, grid))
    assert np.all(det > 0)
    assert np.min(det) >= s.margin - 1e-12


def test_margin_violation_rejected():
    with pytest.raises(ValueError, match="amplitude too large"):
        DiffeomorphismSpec(d=2, eta_max=0.5, margin=0.1)


def test_invert_map_roundtrip():
    real = sample_diffeomorphism(spec2(eta=0.1, linear_precompose=[[1.2, 0.1], [0.3, 0.9]]), 4, seed=11)
    rng = np.random.default_rng(5)
    y_true = rng.uniform(0.0, 4.0, (100, 2))
    x = evaluate_map(real, y_true)
    y = invert_map(real, x, tol=1e-12)
    back = evaluate_map(real, y)
    assert np.all(np.linalg.norm(back - x, axis=1) <= 1e-12 * (1.0 + np.linalg.norm(x, axis=1)))
    assert np.max(np.abs(y - y_true)) < 1e-10


def test_invert_map_iteration_limit():
    real = sample_diffeomorphism(spec2(eta=0.2), 2, seed=1)
    with pytest.raises(IterationLimit):
        invert_map(real, np.array([[0.5, 0.5]]), tol=1e-14, max_iter=0)


def test_invert_singular_linear():
    s = DiffeomorphismSpec(d=2, eta_max=0.0, linear_precompose=[[1.0, 1.0], [1.0, 1.0]])
    real = sample_diffeomorphism(s, 1, seed=0)
    with pytest.raises(SingularMean):
        invert_map(real, np.array([[0.5, 0.5]]))


# --- estimators ------------------------------------------------------------

def test_mean_gradient_identity_spec_exact():
    est = estimate_mean_gradient(DiffeomorphismSpec(d=2, eta_max=0.0), realizations=4, seed=0)
    assert np.max(np.abs(est.matrix - np.eye(2))) < 1e-15
    assert est.c_phi == pytest.approx(1.0, abs=1e-14)


def test_mean_gradient_random_is_linear_part_exactly():
    # the bump has exact zero mean gradient per cell, so quadrature of order
    # >= 3 reproduces the linear part to roundoff for every realization
    est = estimate_mean_gradient(spec2(eta=0.1), realizations=16, quadrature_order=4, seed=2)
    assert np.max(np.abs(est.matrix - np.eye(2))) < 1e-13
    assert np.max(est.stderr) < 1e-13


def test_mean_gradient_linear_precompose_c_phi():
    L = np.diag([2.0, 1.0])
    est = estimate_mean_gradient(spec2(eta=0.1, linear_precompose=L), realizations=8, seed=3)
    assert np.max(np.abs(est.matrix - L)) < 1e-12
    assert est.c_phi == pytest.approx(0.5, abs=1e-12)


def test_mean_gradient_singular():
    s = DiffeomorphismSpec(d=2, eta_max=0.1, linear_precompose=[[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularMean):
        estimate_mean_gradient(s, realizations=2, seed=0)


def test_ergodic_average_of_one_is_one():
    est = ergodic_average(lambda pts, real: np.ones(len(pts)), spec2(eta=0.2),
                          realizations=6, supercell=3, seed=4)
    assert est.value == pytest.approx(1.0, abs=1e-12)
    assert est.stderr < 1e-13


def test_ergodic_average_identity_map_cell_average():
    # Phi = identity reduces to the plain cell average; polynomial integrand
    # is integrated exactly by the tensor Gauss rule
    g = lambda pts, real: pts[:, 0] * (1.0 - pts[:, 0] % 1.0)

    def g(pts, real):
        z = pts[:, 0] % 1.0
        return z * (1.0 - z)

    est = ergodic_average(g, DiffeomorphismSpec(d=2, eta_max=0.0),
                          realizations=2, supercell=2, seed=0)
    assert est.value == pytest.approx(1.0 / 6.0, abs=1e-13)


def test_ergodic_average_vector_valued():
    def g(pts, real):
        return np.stack([np.ones(len(pts)), np.zeros(len(pts))], axis=-1)

    est = ergodic_average(g, spec2(eta=0.1), realizations=3, supercell=2, seed=1)
    assert est.value.shape == (2,)
    assert est.value[0] == pytest.approx(1.0, abs=1e-12)


def test_det_mean_identity_holds():
    for eta in (0.05, 0.1, 0.2):
        rep = det_mean_identity_check(DiffeomorphismSpec(d=2, eta_max=eta),
                                      realizations=16, supercell=2, seed=5)
        assert rep["residual"] <= 3.0 * rep["combined_stderr"] + 1e-12


# --- quadrature ------------------------------------------------------------

def test_unit_cell_quadrature_polynomial_exactness():
    pts, wts = unit_cell_quadrature(2, 3)
    assert wts.sum() == pytest.approx(1.0)
    # x^5 y^4 integrates to 1/30, degree 5 is exact for order 3
    val = np.sum(wts * pts[:, 0] ** 5 * pts[:, 1] ** 4)
    assert val == pytest.approx(1.0 / 30.0, abs=1e-15)


# --- coefficient fields ----------------------------------------------------

def test_fixture_periodicity_exact_on_grid():
    for name in ("laminate1d", "smooth-trig"):
        f = coefficient_fixture(name)
        y = np.arange(64, dtype=float)[:, None] / 64.0
        assert np.array_equal(f.eval(y), f.eval(y + 3.0))


def test_fixture_periodicity_random_points():
    f = coefficient_fixture("two-phase-smoothed")
    rng = np.random.default_rng(8)
    y = rng.uniform(0, 1, (200, 2))
    k = rng.integers(-4, 5, (200, 2)).astype(float)
    assert np.allclose(f.eval(y), f.eval(y + k), atol=1e-10)


def test_fixture_ellipticity_constants():
    for name in ("constant", "laminate1d", "laminate2d", "smooth-trig", "two-phase-smoothed"):
        f = coefficient_fixture(name)
        lo, _ = check_ellipticity(f, n_samples=400, seed=1)
        assert lo >= f.ellipticity_constant - 1e-9, name


def test_indefinite_fixture_detected():
    f = coefficient_fixture("indefinite-test")
    lo, y = check_ellipticity(f, n_samples=600, seed=2)
    assert lo < 0
    assert 0 <= y[0] <= 1


def test_laminate_profile_balanced():
    y = (np.arange(200000) + 0.5) / 200000
    chi = laminate_profile(y, 1.0 / 32.0)
    assert np.mean(chi) == pytest.approx(0.5, abs=1e-9)
    assert chi[0] == 0.0 and chi[-1] == 0.0


def test_constant_fixture_matrix():
    mat = np.array([[2.0, 0.3], [0.3, 1.0]])
    f = coefficient_fixture("constant", d=1, m=2, matrix=mat)
    val = f.eval(np.zeros((1, 1)))[0]
    assert np.allclose(tensor_to_matrix(val), mat)


def test_unknown_fixture_and_params():
    with pytest.raises(ValueError):
        coefficient_fixture("no-such-medium")
    with pytest.raises(ValueError):
        coefficient_fixture("laminate1d", bogus=3)


# --- tensor flattening -----------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 3), m=st.integers(1, 2), seed=st.integers(0, 10**6))
def test_tensor_matrix_roundtrip(d, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d, m, m))
    mat = tensor_to_matrix(a)
    assert np.array_equal(matrix_to_tensor(mat, d, m), a)
    assert np.array_equal(tensor_to_matrix(transpose_tensor(a)), mat.T)


def test_action_convention():
    # q[j, beta] = a[i, j, alpha, beta] p[i, alpha] with flat index i*m+alpha
    d, m = 2, 2
    rng = np.random.default_rng(3)
    a = rng.normal(size=(d, d, m, m))
    p = rng.normal(size=(d, m))
    q = np.einsum("ijab,ia->jb", a, p)
    assert np.allclose(tensor_to_matrix(a) @ p.reshape(-1), q.reshape(-1))


def test_spec_json_roundtrip():
    s = spec2(eta=0.15, margin=0.2, linear_precompose=[[2.0, 0.0], [0.0, 1.0]])
    s2 = DiffeomorphismSpec.from_json_dict(s.to_json_dict())
    assert s2.d == s.d and s2.eta_max == s.eta_max and s2.margin == s.margin
    assert np.array_equal(s2.linear, s.linear)

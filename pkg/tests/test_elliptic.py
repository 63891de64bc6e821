import numpy as np
import pytest

from genrh.disk_solver import Infeasibility
from genrh.elliptic import (EllipticCoefficients, ObliqueBC, ObliqueSolution, beltrami_coefficient,
                            conditions_from_gradient, gradient_to_W, isothermal_map,
                            oblique_to_problemA, reconstruct_potential, solve_oblique)
from genrh.errors import EllipticityViolated, IterationDiverged, MultivaluedPotential
from genrh.geometry import Domain
from genrh.operators import PolarGrid

Z = np.array([0.1 + 0.2j, -0.4, 0.5j, 0.3 - 0.6j])


@pytest.fixture(scope="module")
def grid():
    return PolarGrid(24, 96)


def stretch_coeffs(**kw):
    return EllipticCoefficients(a=lambda z: 1 + 0.1 * z.real, b=lambda z: 0.05 * z.imag, c=1.0, **kw)


def test_beltrami_examples():
    assert np.all(beltrami_coefficient(EllipticCoefficients(), Z) == 0)
    q = beltrami_coefficient(EllipticCoefficients(a=2.0), Z)
    expected = (2 - np.sqrt(2)) / (2 + np.sqrt(2))
    assert np.max(np.abs(q - expected)) < 1e-15
    with pytest.warns(RuntimeWarning):
        q = beltrami_coefficient(EllipticCoefficients(b=0.999), Z)
    assert 0.9 < np.max(np.abs(q)) < 1


def test_ellipticity_violation():
    with pytest.raises(EllipticityViolated):
        beltrami_coefficient(EllipticCoefficients(b=1.2), Z)


def test_beltrami_makes_operator_isotropic():
    # a u_xx + 2b u_xy + c u_yy is a multiple of u_tt + u_ss in tau = z - q conj(z)
    co = EllipticCoefficients(a=2.0, b=0.3, c=0.7)
    q = complex(beltrami_coefficient(co, np.array([0.0]))[0])
    dx, dy = 1 - q, 1j * (1 + q)     # tau_x, tau_y
    # a tau_x^2 + 2b tau_x tau_y + c tau_y^2 must vanish for an isotropic principal part
    assert abs(2.0 * dx**2 + 2 * 0.3 * dx * dy + 0.7 * dy**2) < 1e-14


def test_isothermal_identity(grid):
    ch = isothermal_map(np.zeros(grid.shape), grid)
    assert np.max(np.abs(ch.tau - grid.nodes)) == 0
    assert ch.iterations == 0


def test_isothermal_constant_q(grid):
    ch = isothermal_map(np.full(grid.shape, 0.2 + 0j), grid)
    z = grid.nodes
    assert np.max(np.abs(ch.tau - (z - 0.2 * np.conj(z)))) < 1e-10
    assert ch.beltrami_residual() <= 1e-6


def test_isothermal_variable_q(grid):
    co = stretch_coeffs()
    q = beltrami_coefficient(co, grid.nodes)
    ch = isothermal_map(q, grid)
    qf = lambda z: beltrami_coefficient(co, z)
    assert ch.beltrami_residual(q_func=qf) <= 1e-3
    assert np.min(ch.jacobian()) > 0


def test_isothermal_budget(grid):
    with pytest.raises(IterationDiverged):
        isothermal_map(np.full(grid.shape, 0.85 + 0j), grid)


def test_laplacian_reduction(grid):
    ch = isothermal_map(np.zeros(grid.shape), grid)
    red = oblique_to_problemA(EllipticCoefficients(), ObliqueBC(lambda t: t, 0.0), ch, grid)
    P = red.problem
    assert np.max(np.abs(P.A)) < 1e-12 and np.max(np.abs(P.B)) < 1e-12 and np.max(np.abs(P.F)) == 0
    # the outward normal, paired through conj, has winding -1
    assert red.kappa == -1 and P.n == -1


def test_constant_coefficient_reduction(grid):
    ch = isothermal_map(np.zeros(grid.shape), grid)
    co = EllipticCoefficients(d=0.4, e=-0.2, f=1.5)
    red = oblique_to_problemA(co, ObliqueBC(1.0, 0.0), ch, grid)
    assert np.max(np.abs(red.problem.A - (0.4 - 0.2j) / 4)) < 1e-12
    assert np.max(np.abs(red.problem.F - 0.75)) < 1e-12


def test_reduction_matches_finite_differences(grid):
    co = stretch_coeffs(d=0.2, e=-0.1, f=lambda z: 0.3 * z.real)
    ch = isothermal_map(beltrami_coefficient(co, grid.nodes), grid).normalize()
    red = oblique_to_problemA(co, ObliqueBC(1.0, 0.0), ch, grid)
    idx = [(3, 5), (8, 40), (12, 77), (17, 20), (21, 60)]
    h = 1e-3
    for i, j in idx:
        z = red.z_nodes[i, j]
        xi = lambda p: np.real(ch.psi(np.atleast_1d(p)))
        eta = lambda p: np.imag(ch.psi(np.atleast_1d(p)))
        gx = (xi(z + h) - xi(z - h)) / (2 * h)
        gy = (xi(z + 1j * h) - xi(z - 1j * h)) / (2 * h)
        s = co.sample(np.array([z]))
        kap = s["a"] * gx**2 + 2 * s["b"] * gx * gy + s["c"] * gy**2
        A = (co.apply(xi, np.array([z])) + 1j * co.apply(eta, np.array([z]))) / (4 * kap)
        assert abs(red.problem.A[i, j] - A[0]) < 1e-4
        assert abs(red.problem.F[i, j] - s["f"][0] / (2 * kap[0])) < 1e-4


def test_gradient_to_W_identity_chart(grid):
    ch = isothermal_map(np.zeros(grid.shape), grid).normalize()
    g = np.array([1.0 + 2.0j, -0.5j])
    assert np.max(np.abs(gradient_to_W(ch, [0.2, -0.3j], g) - np.conj(g))) < 1e-10


def test_potential_of_2z():
    g = PolarGrid(16, 64)
    pot = reconstruct_potential(lambda z: 2 * z, g, 0.0, 0.0)
    z = pot.points
    assert np.max(np.abs(pot.values - (z.real**2 - z.imag**2))) < 1e-12
    assert pot.path_difference < 1e-12


def test_potential_of_zero():
    g = PolarGrid(8, 32)
    pot = reconstruct_potential(lambda z: 0 * z, g, 0.0, 1.25)
    assert np.all(pot.values == 1.25)


def test_potential_multivalued_on_annulus():
    g = PolarGrid(12, 48, r_in=0.3)
    with pytest.raises(MultivaluedPotential) as info:
        reconstruct_potential(lambda z: 1j / z, g, holes=1)
    assert abs(info.value.moments[0] + 2 * np.pi) < 1e-10
    pot = reconstruct_potential(lambda z: 1 / z, g, holes=1)
    z = pot.points
    assert np.max(np.abs(pot.values - np.log(np.abs(z) / 0.3))) < 1e-12


def test_full_pipeline_normal_derivative():
    co = stretch_coeffs(f=lambda z: 0.2 * z.real)
    bc = ObliqueBC(lambda t: t, lambda t: 2 * np.cos(2 * np.angle(t)))
    sol = solve_oblique(co, bc, 16, 64)
    assert isinstance(sol, ObliqueSolution)
    z = sol.z.ravel()
    assert np.max(np.abs(sol.U.ravel() - (z.real**2 - z.imag**2))) <= 1e-3
    assert sol.report["beltrami_residual"] <= 1e-3
    assert sol.report["path_difference"] <= 1e-6
    zz = np.array([0.3 + 0.1j, -0.5j])
    assert np.max(np.abs(sol(zz) - (zz.real**2 - zz.imag**2))) <= 1e-3


@pytest.mark.parametrize("ups", [lambda t: 1 + 0 * t, lambda t: t * t], ids=["index0", "index-2"])
def test_full_pipeline_with_first_order_terms(ups):
    ux = lambda z: 2 * z.real + 0.3 * z.imag + 1
    uy = lambda z: -2 * z.imag + 0.3 * z.real
    grad = lambda z: ux(z) + 1j * uy(z)
    f = lambda z: (1 + 0.1 * z.real) * 2 + 2 * 0.05 * z.imag * 0.3 - 2 + 0.2 * ux(z) - 0.1 * uy(z)
    co = stretch_coeffs(d=0.2, e=-0.1, f=f)
    bc = ObliqueBC(ups, lambda t: np.real(np.conj(ups(t)) * grad(t)))
    k = bc.index(Domain.disk(96))
    pts = list(np.exp(1j * np.linspace(0.3, 5.5, 2 * k + 1))) if k >= 0 else []
    sol = solve_oblique(co, bc, 24, 96,
                        conditions=lambda ch: conditions_from_gradient(ch, bc, grad, boundary=pts))
    z = sol.z.ravel()
    ue = z.real**2 - z.imag**2 + 0.3 * z.real * z.imag + z.real
    assert np.max(np.abs(sol.U.ravel() - ue)) <= 1e-6


def test_infeasible_oblique_data():
    bc = ObliqueBC(lambda t: t * t, 1.0)
    r = solve_oblique(EllipticCoefficients(), bc, 16, 64)
    assert isinstance(r, Infeasibility)

import numpy as np
import pytest

from genrh.disk_solver import DiskProblem, SideConditions, solve_disk_nonneg
from genrh.geometry import Domain
from genrh.kernels import (CoefficientPair, kernels_G, omega_eval, represent, solve_X)
from genrh.operators import PolarGrid


@pytest.fixture(scope="module")
def grid():
    return PolarGrid(24, 64)


def test_zero_coefficients_are_exact(grid):
    c = CoefficientPair(grid)
    z = np.array([0.2 + 0.1j, -0.5, 0.3j])
    t = 0.6 - 0.2j
    X1, X2 = solve_X(c, t, 1), solve_X(c, t, 2)
    assert np.all(X1.X_at(z) == 1 / (2 * (t - z)))
    assert np.all(X2.X_at(z) == 1 / (2j * (t - z)))
    assert np.all(omega_eval(c, X1, z) == 0)
    T = kernels_G(c, [t, 1.5], z)
    assert np.all(T.G2 == 0)
    assert np.max(np.abs(T.G1 - 1 / (np.array([t, 1.5])[None, :] - z[:, None]))) < 1e-15


def test_X_equation_residual_outside_source(grid):
    c = CoefficientPair(grid, A=0.3)
    X = solve_X(c, 1.5, 1)
    assert X.residual_X() <= 1e-6


def test_general_coefficients_solve(grid):
    c = CoefficientPair(grid, A=lambda z: 0.3 + 0.1 * z, B=lambda z: 0.2 * np.conj(z) + 0.1)
    z = np.array([0.5, 0.1j, -0.4 + 0.3j])
    for t in (1.5, 0.3 + 0.2j):
        for kind in (1, 2):
            X = solve_X(c, t, kind)
            assert X.residual_Y() < 1e-8
            assert abs(omega_eval(c, X, np.array([t]))[0]) == 0
    X = solve_X(c, 1.5, 1)
    assert np.max(np.abs(np.exp(omega_eval(c, X, z)) - X.Y_at(z))) < 1e-8


def test_omega_matches_log_kernel_under_refinement():
    # exp(omega) = Y holds in the limit; an interior source limits the order
    errs = []
    for nr, nt in ((12, 32), (24, 64), (48, 128)):
        g = PolarGrid(nr, nt)
        c = CoefficientPair(g, A=lambda z: 0.3 + 0.1 * z, B=lambda z: 0.2 * np.conj(z) + 0.1)
        X = solve_X(c, 0.3 + 0.2j, 1)
        z = np.array([0.5, 0.1j, -0.4 + 0.3j])
        errs.append(np.max(np.abs(np.exp(omega_eval(c, X, z)) - X.Y_at(z))))
    assert errs[2] < 1e-4
    assert np.log2(errs[0] / errs[1]) > 1.5 and np.log2(errs[1] / errs[2]) > 1.5


def test_omega_holder_constant_is_stable():
    t = 0.2 + 0.1j
    z = t + 0.5 * np.exp(1j * np.linspace(0, 2 * np.pi, 12, endpoint=False))
    Cs = []
    for nr, nt in ((16, 48), (32, 96)):
        c = CoefficientPair(PolarGrid(nr, nt), A=0.3)
        om = omega_eval(c, solve_X(c, t, 1), z)
        Cs.append(np.max(np.abs(om)) / 0.5 ** 0.5)
    assert abs(Cs[1] - Cs[0]) <= 0.05 * Cs[1]


def test_kernel_pde(grid):
    c = CoefficientPair(grid, A=0.3, B=0.1)
    zeta = 0.1 - 0.3j
    h = 1e-4
    for z in (0.4 + 0.2j, -0.3 + 0.1j):
        pts = np.array([z, z + h, z - h, z + 1j * h, z - 1j * h])
        T = kernels_G(c, [zeta], pts)
        G1, G2 = T.G1[:, 0], T.G2[:, 0]
        d1 = 0.5 * ((G1[1] - G1[2]) / (2 * h) + 1j * (G1[3] - G1[4]) / (2 * h))
        d2 = 0.5 * ((G2[1] - G2[2]) / (2 * h) + 1j * (G2[3] - G2[4]) / (2 * h))
        assert abs(d1 + 0.3 * G1[0] + 0.1 * np.conj(G2[0])) <= 1e-3
        assert abs(d2 + 0.3 * G2[0] + 0.1 * np.conj(G1[0])) <= 1e-3


def test_kernel_is_cauchy_like_near_source(grid):
    c = CoefficientPair(grid, A=0.05)
    t = 0.1 + 0.2j
    z = t + np.array([1e-1, 1e-2, 1e-3])
    T = kernels_G(c, [t], z)
    dev = np.abs((t - z) * T.G1[:, 0] - 1)
    assert dev[2] < dev[1] < dev[0]


def test_adjoint_relation(grid, rng):
    c = CoefficientPair(grid, A=0.3)
    r = 0.8 * np.sqrt(rng.random((5, 2)))
    a = np.exp(2j * np.pi * rng.random((5, 2)))
    pairs = r * a
    for z, zeta in pairs:
        G = kernels_G(c, [zeta], [z])
        Ga = kernels_G(c.adjoint(), [z], [zeta])
        assert abs(G.G1[0, 0] + Ga.G1[0, 0]) <= 1e-4
        assert abs(G.G2[0, 0] + np.conj(Ga.G2[0, 0])) <= 1e-4


def test_diagonal_omega(grid):
    c = CoefficientPair(grid, A=0.3)
    t = np.array([0.2, -0.1 + 0.4j])
    T = kernels_G(c, t, np.concatenate([t, [0.5j]]))
    assert max(T.diagonal_omega()) == 0


def test_represent_cauchy_cases(grid):
    c = CoefficientPair(grid)
    d = Domain.disk(64)
    assert abs(represent(np.ones(64), None, c, [0.2 + 0.1j], d)[0] - 1) < 1e-13
    assert abs(represent(d.t**2, None, c, [0.3], d)[0] - 0.09) < 1e-13


@pytest.mark.parametrize("A,B", [(0.3, 0.0), (0.3, 0.1)])
def test_represent_reproduces_disk_solution(A, B):
    g = PolarGrid(32, 128)
    cond = SideConditions(interior=[0.1], interior_values=[0.5 + 0.2j], boundary=[1.0], boundary_values=[0.3])
    P = DiskProblem(g, A, B, lambda z: 1 + z, lambda t: t,
                    lambda t: np.cos(np.angle(t)) + 0.3 * np.sin(2 * np.angle(t)), conditions=cond)
    s = solve_disk_nonneg(P)
    z = np.array([0.3 + 0.2j, -0.5, 0.1j])
    r = represent(s.boundary, P.F, CoefficientPair(g, A, B), z, P.domain)
    assert np.max(np.abs(r - s(z))) <= 1e-4

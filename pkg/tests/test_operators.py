import numpy as np
import pytest
from scipy.integrate import dblquad

from genrh.errors import NearBoundaryUnresolved
from genrh.geometry import Domain
from genrh.operators import (PolarGrid, cauchy_boundary, cauchy_polar, holder_norm_estimate,
                             pv_integral, schwarz_operator, schwarz_quadrature)


@pytest.fixture(scope="module")
def grid():
    return PolarGrid(32, 128)


def dbar_fd(F, z, h=1e-3):
    return 0.5 * ((F(z + h) - F(z - h)) / (2 * h) + 1j * (F(z + 1j * h) - F(z - 1j * h)) / (2 * h))


def dz_fd(F, z, h=1e-3):
    return 0.5 * ((F(z + h) - F(z - h)) / (2 * h) - 1j * (F(z + 1j * h) - F(z - 1j * h)) / (2 * h))


def polar_quad(g, z):
    """Adaptive quadrature of g(zeta) dA over the unit disk in polar coordinates about z."""
    z = complex(z)

    def R(phi):
        e = np.exp(1j * phi)
        b = (np.conj(z) * e).real
        return -b + np.sqrt(b * b + 1 - abs(z) ** 2)

    def part(fn):
        return dblquad(lambda rho, phi: fn(z + rho * np.exp(1j * phi), rho, phi),
                       0, 2 * np.pi, 0, R, epsabs=1e-12, epsrel=1e-12)[0]

    return part(lambda s, r, p: (g(s, r, p)).real) + 1j * part(lambda s, r, p: (g(s, r, p)).imag)


def test_T_of_zero(grid):
    z = np.array([0.1, 0.5j, 2.0 + 1j])
    assert np.all(grid.T_at(np.zeros(grid.shape), z) == 0)


def test_T_of_one_is_conjugate(grid):
    z = np.array([0.3 + 0.4j])
    assert abs(grid.T_at(np.ones(grid.shape), z)[0] - (0.3 - 0.4j)) < 1e-10
    assert np.max(np.abs(grid.T(np.ones(grid.shape)) - np.conj(grid.nodes))) < 1e-10


def test_T_of_one_matches_adaptive_quadrature():
    z = 0.3 + 0.4j
    # rho cancels the 1/(zeta - z) singularity
    ref = -polar_quad(lambda s, r, p: np.exp(-1j * p), z) / np.pi
    assert abs(ref - np.conj(z)) < 1e-9


def test_T_dbar_identity(grid):
    f = lambda s: s**2 * np.conj(s)
    fv = f(grid.nodes)
    F = lambda q: grid.T_at(fv, np.atleast_1d(q))[0]
    z0 = 0.2
    assert abs(dbar_fd(F, z0) - f(z0)) < 1e-4


def test_T_outside_is_holomorphic(grid):
    fv = np.exp(grid.nodes)
    F = lambda q: grid.T_at(fv, np.atleast_1d(q))[0]
    assert abs(dbar_fd(F, 1.7 + 0.4j)) < 1e-6


def test_Pi_examples(grid):
    z = np.array([0.1 + 0.2j, -0.5, 0.7j])
    assert np.max(np.abs(grid.Pi_at(np.ones(grid.shape), z))) < 1e-9
    assert np.max(np.abs(grid.Pi_at(np.zeros(grid.shape), z))) == 0
    # T conj(zeta) = conj(z)^2 / 2, so Pi conj(zeta) vanishes
    assert abs(grid.Pi_at(np.conj(grid.nodes), np.array([0.0]))[0]) < 1e-9


def test_Pi_is_z_derivative_of_T(grid):
    fv = np.exp(grid.nodes) * np.conj(grid.nodes)
    z0 = 0.3 + 0.2j
    F = lambda q: grid.T_at(fv, np.atleast_1d(q))[0]
    assert abs(grid.Pi_at(fv, np.array([z0]))[0] - dz_fd(F, z0, 1e-4)) < 1e-6


def test_cauchy_boundary_reproduces_holomorphic_data():
    d = Domain.disk(64)
    assert abs(cauchy_boundary(np.ones(64), d, 0.0, "interior")[0] - 1) < 1e-13
    assert abs(cauchy_boundary(d.t**2, d, 0.5, "interior")[0] - 0.25) < 1e-13
    with pytest.raises(NearBoundaryUnresolved):
        cauchy_boundary(d.t, d, 0.999, "interior")


def test_plemelj_value_matches_interior_limit():
    d = Domain.disk(128)
    phi = np.conj(d.t)
    idx = 16
    on = cauchy_boundary(phi, d, d.t[idx], "on_curve")
    inner = cauchy_polar(phi, d, d.t[idx] * (1 - 4 * d.mesh_width()))[0]
    assert abs(on - inner) <= 1e-3 * np.max(np.abs(phi))
    assert abs(on) < 1e-12


def test_pv_integral_examples():
    d = Domain.disk(64)
    assert np.max(np.abs(pv_integral(np.full(64, 2.0 + 1j), d) - np.pi * 1j * (2 + 1j))) < 1e-12
    assert abs(pv_integral(d.t, d, 0) - np.pi * 1j) < 1e-12
    i_node = 16  # t = i
    assert abs(d.t[i_node] - 1j) < 1e-14
    assert abs(pv_integral(np.conj(d.t), d, i_node) + np.pi) < 1e-12


def test_schwarz_operator():
    M = 256
    th = 2 * np.pi * np.arange(M) / M
    z = np.array([0.0, 0.5 + 0.3j, -0.9j, np.exp(0.3j)])
    assert np.max(np.abs(schwarz_operator(np.ones(M), z) - 1)) < 1e-14
    for k in range(1, 9):
        assert np.max(np.abs(schwarz_operator(np.cos(k * th), z) - z**k)) < 1e-12
    assert np.max(np.abs(schwarz_operator(np.sin(th), z) + 1j * z)) < 1e-12
    zi = z[:3]
    g = np.cos(3 * th) + 0.2 * np.sin(th)
    assert np.max(np.abs(schwarz_operator(g, zi) - schwarz_quadrature(g, zi))) < 1e-10


def test_Pn_annihilation(grid):
    ring = np.exp(1j * np.linspace(0, 2 * np.pi, 200, endpoint=False))
    assert np.max(np.abs(grid.Pn_at(np.zeros(grid.shape), 1, ring))) == 0
    for n in (0, 1, 2):
        for f in (np.ones(grid.shape), np.exp(grid.nodes)):
            v = grid.Pn_at(f, n, ring)
            assert np.max(np.abs(np.real(ring ** (-n) * v))) < 1e-8


def test_Pn_against_adaptive_quadrature(grid):
    z, n = 0.4j, 1
    kern = lambda s, r, p: -(np.exp(s) * np.exp(-1j * p)
                             + r * z ** (2 * n + 1) * np.conj(np.exp(s)) / (1 - z * np.conj(s))) / np.pi
    ref = polar_quad(kern, z)
    got = grid.Pn_at(np.exp(grid.nodes), n, np.array([z]))[0]
    assert abs(got - ref) < 1e-8


def test_Pstar_examples():
    for nr, nt in ((16, 64), (32, 128)):
        g = PolarGrid(nr, nt)
        assert np.max(np.abs(g.Pstar_at(np.zeros(g.shape), 1, np.array([0.2])))) == 0
        assert abs(g.Pstar_at(np.ones(g.shape), 1, np.array([0.0]))[0]) < 1e-10
        # T zeta = |z|^2 - 1 and the correction vanishes for a pure mode +1
        assert abs(g.Pstar_at(g.nodes, 1, np.array([0.3]))[0] - (0.09 - 1)) < 1e-10


def test_holder_estimates():
    d = Domain.disk(64)
    r = holder_norm_estimate(np.full(64, 2.5), d.t, 0.5)
    assert r["sup"] == 2.5 and r["seminorm"] == 0.0
    r = holder_norm_estimate(d.t, d.t, 0.5)
    assert abs(r["seminorm"] - np.sqrt(2)) < 1e-12
    semis = []
    for M in (64, 256):
        dd = Domain.disk(M)
        semis.append(holder_norm_estimate(np.sign(dd.t.real + 1e-9), dd.t, 0.5)["seminorm"])
    assert semis[1] > 1.5 * semis[0]

import numpy as np
import pytest

from genrh import disk_solver as ds
from genrh.errors import IndexOutOfRange
from genrh.geometry import Domain
from genrh.mc_solver import (CauchyEvaluator, McProblem, assemble_singular_system, boundary_kernels,
                             equivalence_ok, homogeneous_solutions, leading_kernel_k0,
                             problemB_solubility, reduce_to_fredholm, rhs_gamma0, solve)
from genrh.operators import PolarGrid


def annulus_l(t):
    return np.where(np.abs(t) > 0.65, t**2, 1.0 + 0j)


def pipeline(P):
    tb = boundary_kernels(P)
    ev = CauchyEvaluator(P, tb)
    g0, _ = rhs_gamma0(P, tb, ev)
    S = assemble_singular_system(P, tb, ev.C)
    return tb, ev, g0, S, reduce_to_fredholm(S, g0, P.domain)


def test_gamma0_vanishes_for_zero_data():
    P = McProblem(Domain.disk(64), l=lambda t: t, gamma=0.0)
    _, _, g0, _, _ = pipeline(P)
    assert np.max(np.abs(g0)) == 0


def test_gamma0_of_constant_source():
    d = Domain.disk(64)
    P = McProblem(d, F=1.0, l=lambda t: t, gamma=0.0, area=(24, 64))
    _, _, g0, _, _ = pipeline(P)
    assert np.max(np.abs(g0 + np.real(np.conj(d.t) * np.conj(d.t)))) < 1e-10


def test_trivial_coefficients_give_no_compact_terms():
    P = McProblem(Domain.disk(64), l=lambda t: t**2, gamma=1.0)
    _, _, _, S, _ = pipeline(P)
    assert np.max(np.abs(S.N1)) == 0 and np.max(np.abs(S.N2)) == 0


def test_unit_field_on_circle():
    d = Domain.disk(64)
    P = McProblem(d, l=1.0, gamma=lambda t: t.real)
    _, _, _, S, fred = pipeline(P)
    assert np.max(np.abs(S.K3 - S.C / (2 * np.pi))) < 1e-14
    # the arc-angle kernel is purely imaginary and constant on the circle
    assert np.max(np.abs(S.N3.real)) < 1e-8
    assert np.ptp(S.N3.imag) < 1e-8
    assert np.max(np.abs(leading_kernel_k0(P))) < 1e-8
    # identity on resolved zero-mean densities; constants span the index-0 null space
    th = 2 * np.pi * np.arange(d.N) / d.N
    eta = np.cos(3 * th) + 0.4 * np.sin(7 * th)
    assert np.max(np.abs(fred.matrix @ eta - eta)) < 1e-10
    assert np.max(np.abs(fred.matrix @ np.full(d.N, 0.7))) < 1e-12


def test_kernel_bound_stable_for_t_squared():
    bounds = []
    for M in (64, 128):
        P = McProblem(Domain.disk(M), l=lambda t: t**2, gamma=1.0)
        bounds.append(pipeline(P)[4].kernel_bound)
    assert bounds[1] <= 1.5 * bounds[0] + 1e-12


@pytest.mark.parametrize("n", [0, 1, 2])
def test_disk_null_space_dimension(n):
    for M in (64, 128):
        P = McProblem(Domain.disk(M), l=lambda t: t**n, gamma=0.0)
        tb, ev, g0, S, fred = pipeline(P)
        assert homogeneous_solutions(P, fred, ev)["dimension"] == 2 * n + 1


def test_annulus_null_space_dimension():
    for M in (64, 128):
        P = McProblem(Domain.annulus(0.3, 1.0, M), l=annulus_l, gamma=0.0)
        tb, ev, g0, S, fred = pipeline(P)
        assert homogeneous_solutions(P, fred, ev)["dimension"] == 2 * 2 + 1 - 1


def test_index_too_low_for_annulus():
    with pytest.raises(IndexOutOfRange):
        McProblem(Domain.annulus(0.3, 1.0, 64), l=1.0, gamma=0.0)


def test_disk_holomorphic_case():
    d = Domain.disk(64)
    P = McProblem(d, l=1.0, gamma=lambda t: t.real,
                  conditions=ds.SideConditions(boundary=[1.0], boundary_values=[0.0]))
    s = solve(P)
    assert np.max(np.abs(s.boundary - d.t)) < 1e-10
    assert abs(s([0.3 + 0.2j])[0] - (0.3 + 0.2j)) < 1e-10


@pytest.mark.parametrize("case", ["holomorphic", "manufactured"])
def test_annulus_recovery(case):
    d = Domain.annulus(0.3, 1.0, 128)
    if case == "holomorphic":
        A, we, F = 0.0, (lambda z: z), None
    else:
        A, we = 0.1, (lambda z: z + 0.2 * np.conj(z))
        F = lambda z: 0.2 + 0.1 * (z + 0.2 * np.conj(z))
    cond = ds.SideConditions.from_exact(we, annulus_l, interior=[0.6 + 0.2j], boundary=[1.0, -0.3])
    P = McProblem(d, A=A, F=F, l=annulus_l, gamma=lambda t: np.real(np.conj(annulus_l(t)) * we(t)),
                  conditions=cond)
    s = solve(P)
    z = np.array([0.5, 0.4j, -0.8 + 0.1j, 0.31])
    assert np.max(np.abs(s.boundary - we(d.t))) <= 1e-3
    assert np.max(np.abs(s(z) - we(z))) <= 1e-3
    assert equivalence_ok(s.report)


def test_cross_solver_agreement():
    M = 64
    g = PolarGrid(24, M)
    cases = [
        (0.0, 0.0, 0.0, 1.0, lambda t: np.cos(np.angle(t)),
         ds.SideConditions(boundary=[1.0], boundary_values=[0.0])),
        (0.3, 0.0, lambda z: 1 + z, lambda t: t, lambda t: np.cos(np.angle(t)) + 0.3 * np.sin(2 * np.angle(t)),
         ds.SideConditions(interior=[0.1], interior_values=[0.5 + 0.2j], boundary=[1.0], boundary_values=[0.3])),
        (0.3, 0.2 + 0.1j, 0.0, lambda t: t, lambda t: np.sin(np.angle(t)),
         ds.SideConditions(interior=[0.1], interior_values=[0.1j], boundary=[1.0], boundary_values=[0.0])),
    ]
    z = np.array([0.3 + 0.2j, -0.5, 0.1j])
    for A, B, F, l, gam, cond in cases:
        sd = ds.solve(ds.DiskProblem(g, A, B, F, l, gam, conditions=cond))
        sm = solve(McProblem(Domain.disk(M), A, B, F, l, gam, conditions=cond, area=(24, M)))
        assert np.max(np.abs(sd(z) - sm(z))) <= 1e-4
        assert np.max(np.abs(sd.boundary - sm.boundary)) <= 1e-4


def test_solubility_moments():
    d = Domain.annulus(0.3, 1.0, 128)
    assert abs(problemB_solubility(d.t, d)[0]) < 1e-12
    m = problemB_solubility(1 / d.t, d)[0]
    assert abs(m.real) < 1e-12 and abs(m.imag - 2 * np.pi) < 1e-12
    assert abs(problemB_solubility(1j / d.t, d)[0].real + 2 * np.pi) < 1e-12

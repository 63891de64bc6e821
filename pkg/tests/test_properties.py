import numpy as np
from hypothesis import given, settings, strategies as st

from genrh.cli import Expr
from genrh.geometry import BoundaryField, Domain, winding_number
from genrh.operators import PolarGrid, schwarz_operator

coef = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
GRID = PolarGrid(16, 64)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(-4, 4), a=coef, b=coef, M=st.sampled_from([64, 128, 256]))
def test_winding_ignores_smooth_phase(k, a, b, M):
    d = Domain.disk(M)
    th = np.angle(d.t)
    field = d.t**k * np.exp(1j * (a * np.cos(th) + b * np.sin(2 * th))) * (1.5 + 0.5 * np.cos(th))
    assert winding_number(BoundaryField(field, d)) == k


@settings(max_examples=40, deadline=None)
@given(c=st.lists(coef, min_size=6, max_size=6))
def test_schwarz_real_part_reproduces_data(c):
    M = 128
    th = 2 * np.pi * np.arange(M) / M
    g = c[0] + c[1] * np.cos(th) + c[2] * np.sin(2 * th) + c[3] * np.cos(5 * th) + c[4] * np.sin(7 * th)
    S = schwarz_operator(g, np.exp(1j * th))
    assert np.max(np.abs(S.real - g)) < 1e-12
    # Im S vanishes at the origin
    assert abs(schwarz_operator(g, np.array([0.0]))[0].imag) < 1e-14


@settings(max_examples=25, deadline=None)
@given(n=st.integers(0, 3), c=st.lists(coef, min_size=3, max_size=3))
def test_Pn_boundary_annihilation(n, c):
    z = GRID.nodes
    phi = c[0] + c[1] * z + c[2] * np.conj(z) ** 2
    ring = np.exp(1j * np.linspace(0, 2 * np.pi, 97))
    v = GRID.Pn_at(phi, n, ring)
    assert np.max(np.abs(np.real(ring ** (-n) * v))) < 1e-8


@settings(max_examples=60, deadline=None)
@given(a=coef, b=coef, p=st.integers(0, 4),
       z=st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False))
def test_expressions_match_python(a, b, p, z):
    e = Expr(f"({a})*z^{p} + ({b})*conj(z) - i*re(z)*im(z)")
    expected = a * z**p + b * np.conj(z) - 1j * z.real * z.imag
    assert abs(e(np.array([z]))[0] - expected) <= 1e-12 * (1 + abs(expected))

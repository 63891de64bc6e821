import numpy as np
import pytest

from genrh.errors import DegenerateEmbedding, ValidationError
from genrh.geometry import (BoundaryField, Curve, Domain, NormalizedSet, RiemannMap,
                            build_domain_family, curve_geometry, ellipse_stretch_family,
                            identity_family, riemann_map_family, validate_normally_distributed,
                            winding_number)


@pytest.mark.parametrize("k", [1, 0, -2, 3])
def test_winding_of_powers(k):
    d = Domain.disk(64)
    assert winding_number(BoundaryField(d.t**k, d)) == k


def test_winding_invariant_under_refinement():
    f = lambda t: t**2 * np.exp(0.4j * np.cos(3 * np.angle(t)))
    for M in (32, 64, 128):
        d = Domain.disk(M)
        assert winding_number(BoundaryField(f(d.t), d)) == 2


def test_winding_sums_over_curves():
    d = Domain.annulus(0.3, 1.0, 64)
    vals = np.where(np.abs(d.t) > 0.65, d.t**2, 1.0 + 0j)
    assert winding_number(BoundaryField(vals, d)) == 2
    # z on the clockwise hole winds -1
    assert winding_number(BoundaryField(d.t, d)) == 0


def test_field_must_not_vanish():
    d = Domain.disk(32)
    with pytest.raises(ValidationError):
        BoundaryField(d.t - 1.0, d)


def test_normalization():
    d = Domain.disk(32)
    f = BoundaryField(3.0 * d.t, d)
    assert not f.normalized
    assert f.normalize().normalized


def test_curve_geometry_unit_circle():
    c = Curve.circle(M=64)
    g = curve_geometry(c, 0.0)
    assert abs(g.point - 1) < 1e-14 and abs(g.tangent - 1j) < 1e-14 and abs(g.normal - 1) < 1e-14
    g = curve_geometry(c, np.pi / 2)
    assert abs(g.point - 1j) < 1e-14 and abs(g.tangent + 1) < 1e-14 and abs(g.normal - 1j) < 1e-14


def test_curve_geometry_ellipse_and_off_node():
    c = Curve.ellipse(2.0, 1.0, M=64)
    g = curve_geometry(c, 0.0)
    assert abs(g.normal - 1) < 1e-12
    s = 0.123
    g = curve_geometry(c, s)
    assert abs(g.point - (2 * np.cos(s) + 1j * np.sin(s))) < 1e-12
    assert abs(g.density - np.hypot(2 * np.sin(s), np.cos(s))) < 1e-12


def test_tangent_normal_orthonormal():
    c = Curve.ellipse(1.5, 0.7, M=128)
    t, n = c.tangents, c.normals
    assert np.max(np.abs(np.abs(t) - 1)) < 1e-12
    assert np.max(np.abs(np.real(t * np.conj(n)))) < 1e-12


def test_hole_normal_points_out_of_domain():
    d = Domain.annulus(0.4, 1.0, 64)
    hole = d.curves[1]
    # outward from the annulus means toward the centre on the hole
    assert np.max(np.abs(hole.normals + hole.points / np.abs(hole.points))) < 1e-12


def test_normally_distributed_examples():
    disk = Domain.disk(64)
    rep = validate_normally_distributed(NormalizedSet([], [1.0], 0, 0), disk)
    assert rep["valid"]
    rep = validate_normally_distributed(NormalizedSet([0.2], [1.0], 1, 0), disk)
    assert rep["valid"]
    ann = Domain.annulus(0.3, 1.0, 64)
    rep = validate_normally_distributed(NormalizedSet([0.6], [1.0, -1.0], 2, 1), ann)
    assert rep["count_ok"] and not rep["odd_coverage_ok"] and not rep["valid"]
    rep = validate_normally_distributed(NormalizedSet([0.6], [1.0, -0.3], 2, 1), ann)
    assert rep["valid"]


def test_identity_family():
    fam = identity_family(Domain.disk(64))
    z = np.array([0.1 + 0.2j, -0.5, 0.9j])
    for lam in (0.0, 0.5, 1.0):
        assert np.max(np.abs(fam.embed(z, lam) - z)) < 1e-14


def test_stretch_family_is_affine():
    fam = build_domain_family({"base": {"kind": "disk", "M": 64},
                               "curves": [{1: {1: 0.15, -1: 0.15}}]})
    z = np.array([0.3 + 0.4j, -0.2 - 0.7j, 0.0])
    for lam in (0.0, 0.5, 1.0):
        w = fam.embed(z, lam)
        assert np.max(np.abs(w - ((1 + 0.3 * lam) * z.real + 1j * z.imag))) < 1e-12
        assert np.max(np.abs(fam.jacobian(z, lam) - (1 + 0.3 * lam))) < 1e-12
    assert np.max(np.abs(fam.domain(1.0).t - (1.3 * np.cos(fam.base.curves[0].s)
                                              + 1j * np.sin(fam.base.curves[0].s)))) < 1e-12


def test_collapsing_family_is_degenerate():
    with pytest.raises(DegenerateEmbedding):
        build_domain_family({"base": {"kind": "disk", "M": 32}, "curves": [{1: {1: -1.0}}]})


def test_riemann_map_identity_and_scaling():
    R = riemann_map_family(identity_family(Domain.disk(64)), 0.0, anchor=0.0)
    z = np.array([0.3 + 0.1j, -0.6j, 0.95])
    assert np.max(np.abs(R.to_disk(z) - z)) < 1e-10
    R2 = RiemannMap(Curve.circle(radius=2.0, M=64), anchor=0.0)
    assert np.max(np.abs(R2.to_disk(2 * z) - z)) < 1e-10


def test_riemann_map_ellipse_family():
    fam = ellipse_stretch_family(0.3, 128)
    R = riemann_map_family(fam, 0.5)
    diag = R.diagnostics()
    assert diag["boundary_modulus_error"] < 1e-6
    assert diag["composition_error"] < 1e-6
    assert abs(R.to_disk(np.array([0.0]))[0]) < 1e-12
    assert R.from_disk_deriv(np.array([0.0]))[0].real > 0

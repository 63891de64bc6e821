"""Curves, domains, domain families, boundary fields and conformal charts.

Curves are stored as truncated Fourier series rho(s) = sum_k c_k exp(iks),
s in [0, 2pi), sampled at M equispaced nodes.  Every curve is traversed with
the domain on its left, so the outer curve runs counter-clockwise and hole
curves run clockwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateEmbedding,
    MapIterationDiverged,
    NonIntegerWinding,
    ValidationError,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi


def _freqs(M):
    return np.fft.fftfreq(M, 1.0 / M).astype(int)


def spectral_diff_matrix(M):
    """Derivative matrix d/ds for trigonometric interpolation on M nodes."""
    h = TWO_PI / M
    i = np.arange(M)
    d = i[:, None] - i[None, :]
    D = np.zeros((M, M))
    off = d != 0
    if M % 2 == 0:
        D[off] = 0.5 * (-1.0) ** d[off] / np.tan(d[off] * h / 2)
    else:
        D[off] = 0.5 * (-1.0) ** d[off] / np.sin(d[off] * h / 2)
    return D


def spectral_derivative(values, order=1):
    """Derivative in s of periodic samples (Nyquist mode dropped for odd order)."""
    v = np.asarray(values)
    M = v.shape[-1]
    k = _freqs(M).astype(float)
    if M % 2 == 0 and order % 2 == 1:
        k[M // 2] = 0.0
    return np.fft.ifft(np.fft.fft(v, axis=-1) * (1j * k) ** order, axis=-1)


def trig_interp(values, s):
    """Evaluate the trigonometric interpolant of periodic samples at s."""
    v = np.asarray(values)
    M = v.shape[-1]
    c = np.fft.fft(v) / M
    k = _freqs(M).astype(float)
    if M % 2 == 0:
        # split the Nyquist term symmetrically so real data stays real
        c = c.copy()
        ny = c[M // 2] / 2
        c[M // 2] = ny
        k = np.append(k, M // 2)
        c = np.append(c, ny)
        k[M // 2] = -M // 2
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.exp(1j * np.outer(s, k)) @ c
    if np.isrealobj(v):
        out = out.real
    return out


# ---------------------------------------------------------------------------
# curves and domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurveGeometry:
    point: complex
    tangent: complex
    normal: complex
    density: float


class Curve:
    """Smooth closed curve given by Fourier coefficients in fft order."""

    def __init__(self, coeffs, positive=True, tail_tol=1e-10, check=True):
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.positive = bool(positive)
        self.M = self.coeffs.size
        self.k = _freqs(self.M)
        self.s = TWO_PI * np.arange(self.M) / self.M
        self.h = TWO_PI / self.M
        ik = 1j * self.k
        self.points = np.fft.ifft(self.coeffs) * self.M
        self.deriv = np.fft.ifft(self.coeffs * ik) * self.M
        self.deriv2 = np.fft.ifft(self.coeffs * ik**2) * self.M
        self.speed = np.abs(self.deriv)
        if check:
            self._check(tail_tol)

    # constructors -------------------------------------------------------
    @classmethod
    def from_samples(cls, values, positive=True, **kw):
        v = np.asarray(values, dtype=complex)
        return cls(np.fft.fft(v) / v.size, positive=positive, **kw)

    @classmethod
    def from_function(cls, func, M, positive=True, **kw):
        s = TWO_PI * np.arange(M) / M
        return cls.from_samples(func(s), positive=positive, **kw)

    @classmethod
    def circle(cls, center=0.0, radius=1.0, M=256, positive=True):
        c = np.zeros(M, dtype=complex)
        c[0] = center
        if positive:
            c[1] = radius
        else:
            c[-1] = radius
        return cls(c, positive=positive)

    @classmethod
    def ellipse(cls, a, b, M=256, center=0.0):
        return cls.from_function(lambda s: center + a * np.cos(s) + 1j * b * np.sin(s), M)

    # evaluation ---------------------------------------------------------
    def eval(self, s, order=0):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        k = self.k.astype(float)
        c = self.coeffs.copy()
        if self.M % 2 == 0:
            c[self.M // 2] = 0.0 if order % 2 else c[self.M // 2]
        return np.exp(1j * np.outer(s, k)) @ (c * (1j * k) ** order)

    def geometry(self, s) -> CurveGeometry:
        p = complex(self.eval(s)[0])
        d = complex(self.eval(s, 1)[0])
        tangent = d / abs(d)
        # domain on the left: outward normal is the tangent rotated by -90 degrees
        return CurveGeometry(p, tangent, -1j * tangent, abs(d))

    @property
    def tangents(self):
        return self.deriv / self.speed

    @property
    def normals(self):
        return -1j * self.tangents

    @property
    def dt(self):
        """Complex line element per node, rho'(s) * h."""
        return self.deriv * self.h

    def is_circle(self, tol=1e-12):
        mask = np.ones(self.M, bool)
        mask[[0, 1, -1]] = False
        if np.max(np.abs(self.coeffs[mask]), initial=0.0) > tol:
            return False
        return (abs(self.coeffs[1]) < tol) != (abs(self.coeffs[-1]) < tol)

    def circle_params(self):
        """(center, radius) for a circle curve."""
        r = abs(self.coeffs[1]) if self.positive else abs(self.coeffs[-1])
        return complex(self.coeffs[0]), float(r)

    def winding_about(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        d = self.points[None, :] - z[:, None]
        dd = np.angle(np.roll(d, -1, axis=1) / d)
        return np.sum(dd, axis=1) / TWO_PI

    def tail_ratio(self):
        mag = np.abs(self.coeffs)
        order = np.argsort(np.abs(self.k))
        q = mag[order]
        n = max(1, self.M // 8)
        return float(np.max(q[-n:]) / max(np.max(q), 1e-300))

    def is_simple(self):
        try:
            from shapely.geometry import LinearRing
        except ImportError:  # pragma: no cover
            return True
        pts = np.column_stack([self.points.real, self.points.imag])
        return bool(LinearRing(pts).is_simple)

    def _check(self, tail_tol):
        if np.min(self.speed) <= 1e-14 * max(1.0, np.max(self.speed)):
            raise ValidationError("curve derivative vanishes at a node", "Curve.speed")
        if self.tail_ratio() > tail_tol:
            log.warning("curve Fourier tail %.2e above tolerance %.1e", self.tail_ratio(), tail_tol)
        if not self.is_simple():
            raise ValidationError("curve self-intersects at this resolution", "Curve.simple")


def curve_geometry(curve: Curve, s: float) -> CurveGeometry:
    return curve.geometry(s)


class Domain:
    """Domain bounded by an outer curve and m hole curves (domain on the left)."""

    def __init__(self, outer: Curve, holes: Sequence[Curve] = (), interior_points=None):
        self.outer = outer
        self.holes = list(holes)
        for c in self.holes:
            if c.positive:
                raise ValidationError("hole curves must be traversed clockwise", "Domain.holes")
            if np.any(np.abs(outer.winding_about(c.points) - 1) > 0.5):
                raise ValidationError("hole curve not inside outer curve", "Domain.holes")
        if interior_points is None:
            interior_points = self._default_interior_point()
        self.interior_points = np.atleast_1d(np.asarray(interior_points, dtype=complex))
        if not np.all(self.contains(self.interior_points)):
            raise ValidationError("interior test point outside domain", "Domain.interior_points")
        self._assemble()

    @property
    def curves(self):
        return [self.outer] + self.holes

    @property
    def m(self):
        return len(self.holes)

    @classmethod
    def disk(cls, M=256, radius=1.0, center=0.0):
        return cls(Curve.circle(center, radius, M), interior_points=[center])

    @classmethod
    def annulus(cls, r_in, r_out=1.0, M_out=256, M_in=None, center=0.0):
        M_in = M_out if M_in is None else M_in
        outer = Curve.circle(center, r_out, M_out)
        inner = Curve.circle(center, r_in, M_in, positive=False)
        return cls(outer, [inner], interior_points=[center + 0.5 * (r_in + r_out)])

    def _default_interior_point(self):
        c = self.outer.coeffs[0]
        if not self.holes:
            return [c]
        # midpoint between outer curve and first hole along the first node
        return [0.5 * (self.outer.points[0] + self.holes[0].points[0])]

    def _assemble(self):
        curves = self.curves
        self.sizes = [c.M for c in curves]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.t = np.concatenate([c.points for c in curves])
        self.dts = np.concatenate([c.deriv for c in curves])
        self.d2 = np.concatenate([c.deriv2 for c in curves])
        self.h = np.concatenate([np.full(c.M, c.h) for c in curves])
        self.curve_id = np.concatenate([np.full(c.M, j) for j, c in enumerate(curves)])
        self.dt = self.dts * self.h
        self.N = int(self.offsets[-1])

    def split(self, values):
        return [values[self.offsets[j]:self.offsets[j + 1]] for j in range(len(self.curves))]

    def contains(self, z, margin=0.0):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.zeros(z.shape)
        for c in self.curves:
            w += c.winding_about(z)
        inside = np.abs(w - 1) < 0.5
        if margin > 0:
            d = np.min(np.abs(z[:, None] - self.t[None, :]), axis=1)
            inside &= d > margin
        return inside

    def is_polar(self):
        """True for a disk or a concentric annulus (polar area grids apply)."""
        if not self.outer.is_circle() or self.m > 1:
            return False
        if self.m == 1:
            if not self.holes[0].is_circle():
                return False
            c0, _ = self.outer.circle_params()
            c1, _ = self.holes[0].circle_params()
            return abs(c0 - c1) < 1e-12
        return True

    def polar_params(self):
        if not self.is_polar():
            raise ValidationError("area grids are available for disks and concentric annuli only",
                                  "Domain.polar")
        c, r_out = self.outer.circle_params()
        r_in = self.holes[0].circle_params()[1] if self.m == 1 else 0.0
        return c, r_in, r_out

    def area_grid(self, nr, nt, nq=None):
        from .operators import PolarGrid

        c, r_in, r_out = self.polar_params()
        return PolarGrid(nr, nt, r_in=r_in, r_out=r_out, center=c, nq=nq)

    def mesh_width(self):
        return float(np.max(self.h * np.abs(self.dts)))

    def node_index(self, z, tol=1e-9):
        """Index of the boundary node at z, or None."""
        d = np.abs(self.t - z)
        j = int(np.argmin(d))
        return j if d[j] <= tol * max(1.0, abs(z)) else None

    def nearest_curve_param(self, z):
        """(curve index, parameter s) of the boundary point closest to z."""
        j = int(np.argmin(np.abs(self.t - z)))
        cid = int(self.curve_id[j])
        c = self.curves[cid]
        s = c.s[j - self.offsets[cid]]
        for _ in range(20):
            p = c.eval(s)[0] - z
            d1 = c.eval(s, 1)[0]
            d2 = c.eval(s, 2)[0]
            g = np.real(np.conj(p) * d1)
            gp = np.abs(d1) ** 2 + np.real(np.conj(p) * d2)
            step = g / gp
            s -= step
            if abs(step) < 1e-15:
                break
        return cid, float(s % TWO_PI)


# ---------------------------------------------------------------------------
# boundary fields and winding numbers
# ---------------------------------------------------------------------------


class BoundaryField:
    """Complex field on each boundary curve, sampled at the curve nodes."""

    def __init__(self, values, domain: Domain):
        vals = np.asarray(values, dtype=complex)
        if vals.shape != (domain.N,):
            raise ValidationError("boundary field size does not match domain nodes",
                                  "BoundaryField.size")
        if np.min(np.abs(vals)) <= 0:
            raise ValidationError("boundary field vanishes at a node", "BoundaryField.nonzero")
        self.values = vals
        self.domain = domain

    @classmethod
    def from_function(cls, func, domain):
        return cls(func(domain.t), domain)

    @property
    def normalized(self):
        return bool(np.max(np.abs(np.abs(self.values) - 1)) <= 1e-12)

    def normalize(self):
        return BoundaryField(self.values / np.abs(self.values), self.domain)


def winding_number(field: BoundaryField, domain: Domain | None = None) -> int:
    domain = field.domain if domain is None else domain
    total = 0.0
    for vals in domain.split(field.values):
        if vals.size < 16:
            raise ValidationError("need at least 16 nodes per curve", "winding.nodes")
        total += np.sum(np.angle(np.roll(vals, -1) / vals))
    n = total / TWO_PI
    if abs(n - round(n)) > 0.1:
        raise NonIntegerWinding(f"unwrapped phase change {n:.3f} is not an integer")
    return int(round(n))


def curve_windings(field: BoundaryField):
    return [int(round(np.sum(np.angle(np.roll(v, -1) / v)) / TWO_PI))
            for v in field.domain.split(field.values)]


# ---------------------------------------------------------------------------
# normally distributed sets
# ---------------------------------------------------------------------------


@dataclass
class NormalizedSet:
    interior: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    n: int = 0
    m: int = 0

    @property
    def h0(self):
        return len(self.interior)

    @property
    def h1(self):
        return len(self.boundary)


def validate_normally_distributed(nset: NormalizedSet, domain: Domain, n: int | None = None):
    n = nset.n if n is None else n
    m = domain.m
    report = {"count_ok": 2 * nset.h0 + nset.h1 == 2 * n + 1 - m,
              "expected": 2 * n + 1 - m, "got": 2 * nset.h0 + nset.h1}
    tol = 1e-8
    bd_curves = []
    bd_ok = []
    for z in nset.boundary:
        d = np.abs(domain.t - z)
        j = int(np.argmin(d))
        on = d[j] <= max(tol, domain.mesh_width())
        if on:
            cid, s = domain.nearest_curve_param(z)
            on = abs(domain.curves[cid].eval(s)[0] - z) <= tol
            bd_curves.append(cid if on else None)
        else:
            bd_curves.append(None)
        bd_ok.append(bool(on))
    counts = [sum(1 for c in bd_curves if c == j) for j in range(m + 1)]
    odd = sum(1 for c in counts if c % 2 == 1)
    report["curve_counts"] = counts
    report["odd_coverage_ok"] = odd >= m
    interior = np.asarray(nset.interior, dtype=complex)
    in_ok = domain.contains(interior).tolist() if interior.size else []
    distinct_in = len(set(np.round(interior, 12).tolist())) == len(interior)
    distinct_bd = len(set(np.round(np.asarray(nset.boundary, complex), 12).tolist())) == nset.h1
    report["interior_ok"] = [bool(v) for v in in_ok]
    report["boundary_ok"] = bd_ok
    report["distinct_ok"] = bool(distinct_in and distinct_bd)
    report["valid"] = bool(report["count_ok"] and report["odd_coverage_ok"] and all(in_ok)
                           and all(bd_ok) and report["distinct_ok"])
    return report


# ---------------------------------------------------------------------------
# domain families
# ---------------------------------------------------------------------------


class _HarmonicExtension:
    """Harmonic function on a disk or annulus from boundary data per curve.

    Stored as hol[p] z^p + anti[p] conj(z)^p (p may be negative) plus
    b0 * log|z| around the common center.
    """

    def __init__(self, domain: Domain, data: Sequence[np.ndarray]):
        c, r_in, r_out = domain.polar_params()
        self.center = c
        outer = np.asarray(data[0], dtype=complex)
        M = outer.size
        d_out = np.fft.fft(outer) / M
        k_out = _freqs(M)
        self.hol = {}
        self.anti = {}
        self.b0 = 0.0
        if domain.m == 0:
            for k, dk in zip(k_out, d_out):
                if abs(dk) < 1e-300:
                    continue
                if k >= 0:
                    self._add(self.hol, k, dk / r_out**k)
                else:
                    self._add(self.anti, -k, dk / r_out ** (-k))
            return
        inner = np.asarray(data[1], dtype=complex)
        Mi = inner.size
        # inner curve runs clockwise: sample j sits at polar angle -s_j
        d_in_s = np.fft.fft(inner) / Mi
        k_in = -_freqs(Mi)
        din = dict(zip(k_in.tolist(), d_in_s))
        dout = dict(zip(k_out.tolist(), d_out))
        for k in sorted(set(din) | set(dout)):
            a_val = dout.get(k, 0.0)
            b_val = din.get(k, 0.0)
            if abs(a_val) < 1e-300 and abs(b_val) < 1e-300:
                continue
            if k == 0:
                # a + b log r
                Mx = np.array([[1.0, np.log(r_out)], [1.0, np.log(r_in)]])
                a, b = np.linalg.solve(Mx, np.array([a_val, b_val]))
                self._add(self.hol, 0, a)
                self.b0 += b
                continue
            q = abs(k)
            Mx = np.array([[r_out**q, r_out**-q], [r_in**q, r_in**-q]])
            a, b = np.linalg.solve(Mx, np.array([a_val, b_val], dtype=complex))
            if k > 0:
                self._add(self.hol, q, a)        # r^k e^{ik th} = z^k
                self._add(self.anti, -q, b)      # r^-k e^{ik th} = conj(z)^-k
            else:
                self._add(self.anti, q, a)       # r^q e^{-iq th} = conj(z)^q
                self._add(self.hol, -q, b)       # r^-q e^{-iq th} = z^-q

    @staticmethod
    def _add(d, p, v):
        d[p] = d.get(p, 0.0) + v

    def __call__(self, z):
        u = np.asarray(z, dtype=complex) - self.center
        out = np.zeros(u.shape, dtype=complex)
        for p, v in self.hol.items():
            out += v * u**p
        for p, v in self.anti.items():
            out += v * np.conj(u) ** p
        if self.b0:
            out += self.b0 * np.log(np.abs(u))
        return out

    def dz(self, z):
        u = np.asarray(z, dtype=complex) - self.center
        out = np.zeros(u.shape, dtype=complex)
        for p, v in self.hol.items():
            if p:
                out += p * v * u ** (p - 1)
        if self.b0:
            out += self.b0 / (2 * u)
        return out

    def dzbar(self, z):
        u = np.asarray(z, dtype=complex) - self.center
        out = np.zeros(u.shape, dtype=complex)
        for p, v in self.anti.items():
            if p:
                out += p * v * np.conj(u) ** (p - 1)
        if self.b0:
            out += self.b0 / (2 * np.conj(u))
        return out


class DomainFamily:
    """Embeddings Gamma(., lam) of a base disk or annulus, polynomial in lam.

    ``tables[c][p]`` holds the Fourier coefficients (fft order, same length as
    the base curve) of the lam^p part of the boundary displacement of curve c.
    """

    def __init__(self, base: Domain, tables, smoothness=1, check_grid=None):
        self.base = base
        self.tables = [np.asarray(t, dtype=complex) for t in tables]
        if len(self.tables) != len(base.curves):
            raise ValidationError("one coefficient table per boundary curve required",
                                  "DomainFamily.tables")
        for c, t in zip(base.curves, self.tables):
            if t.ndim != 2 or t.shape[1] != c.M:
                raise ValidationError("table shape must be (degree, M)", "DomainFamily.tables")
        self.degree = max(t.shape[0] for t in self.tables)
        self.smoothness = int(smoothness)
        self._ext = []
        for p in range(self.degree):
            data = []
            for t in self.tables:
                row = t[p] if p < t.shape[0] else np.zeros(t.shape[1], complex)
                data.append(np.fft.ifft(row) * row.size)
            self._ext.append(_HarmonicExtension(base, data))
        grid = np.linspace(0, 1, 11) if check_grid is None else np.asarray(check_grid)
        self.check_jacobian(grid)

    def displacement_coeffs(self, c, lam):
        t = self.tables[c]
        return sum(lam ** (p + 1) * t[p] for p in range(t.shape[0]))

    def curve(self, c, lam):
        base = self.base.curves[c]
        return Curve(base.coeffs + self.displacement_coeffs(c, lam), positive=base.positive,
                     check=False)

    def domain(self, lam):
        curves = [self.curve(c, lam) for c in range(len(self.base.curves))]
        for cv in curves:
            if not cv.is_simple():
                raise DegenerateEmbedding(f"boundary curve self-intersects at lam={lam}")
        pts = self.embed(self.base.interior_points, lam)
        return Domain(curves[0], curves[1:], interior_points=pts)

    def embed(self, z, lam):
        z = np.asarray(z, dtype=complex)
        out = z.astype(complex).copy()
        for p, ext in enumerate(self._ext):
            out = out + lam ** (p + 1) * ext(z)
        return out

    def dz(self, z, lam):
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=complex)
        for p, ext in enumerate(self._ext):
            out = out + lam ** (p + 1) * ext.dz(z)
        return out

    def dzbar(self, z, lam):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for p, ext in enumerate(self._ext):
            out = out + lam ** (p + 1) * ext.dzbar(z)
        return out

    def dlam(self, z, lam):
        """d Gamma / d lam at fixed reference point z."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for p, ext in enumerate(self._ext):
            out = out + (p + 1) * lam**p * ext(z)
        return out

    def jacobian(self, z, lam):
        return np.abs(self.dz(z, lam)) ** 2 - np.abs(self.dzbar(z, lam)) ** 2

    def sample_points(self, nr=12, nt=48):
        c, r_in, r_out = self.base.polar_params()
        r = np.linspace(r_in, r_out, nr + 1)[1:] if r_in > 0 else np.linspace(0, r_out, nr + 1)
        th = TWO_PI * np.arange(nt) / nt
        pts = c + (r[:, None] * np.exp(1j * th[None, :])).ravel()
        return np.concatenate([pts, self.base.t])

    def check_jacobian(self, grid):
        pts = self.sample_points()
        for lam in grid:
            J = self.jacobian(pts, lam)
            if np.min(np.abs(J)) < 1e-8 or np.min(J) < 0:
                raise DegenerateEmbedding(f"embedding Jacobian degenerates at lam={lam:g}")


def build_domain_family(spec: dict) -> DomainFamily:
    """Build a family from a coefficient table.

    spec keys: ``base`` ({"kind": "disk"|"annulus", "M", "r_in", "r_out"}),
    ``curves``: list (one per curve) of {degree p >= 1: {mode k: coefficient}},
    optional ``smoothness`` and ``check_grid``.
    """
    b = spec.get("base", {"kind": "disk"})
    M = int(b.get("M", 256))
    if b.get("kind", "disk") == "disk":
        base = Domain.disk(M, radius=float(b.get("r_out", 1.0)))
    elif b["kind"] == "annulus":
        base = Domain.annulus(float(b["r_in"]), float(b.get("r_out", 1.0)), M)
    else:
        raise ValidationError(f"unknown base kind {b['kind']!r}", "DomainFamily.base")
    raw = spec.get("curves", [])
    tables = []
    for ci, cv in enumerate(base.curves):
        entry = raw[ci] if ci < len(raw) else {}
        deg = max([int(p) for p in entry] + [1])
        t = np.zeros((deg, cv.M), complex)
        for p, modes in entry.items():
            for k, v in modes.items():
                t[int(p) - 1, int(k) % cv.M] += complex(v)
        tables.append(t)
    return DomainFamily(base, tables, smoothness=int(spec.get("smoothness", 1)),
                        check_grid=spec.get("check_grid"))


def ellipse_stretch_family(c=0.3, M=256):
    """x -> x (1 + c lam) on the unit disk."""
    base = Domain.disk(M)
    t = np.zeros((1, M), complex)
    t[0, 1] = c / 2
    t[0, -1] = c / 2
    return DomainFamily(base, [t])


def identity_family(base: Domain):
    return DomainFamily(base, [np.zeros((1, c.M), complex) for c in base.curves])


# ---------------------------------------------------------------------------
# conformal map of a starlike simply-connected domain onto the unit disk
# ---------------------------------------------------------------------------


class RiemannMap:
    """Conformal map R of the interior of a starlike curve onto the unit disk.

    Normalized by R(anchor) = 0 and R'(anchor) > 0.  The inverse g = R^-1 is
    a power series sum_k a_k zeta^k obtained by Theodorsen's iteration.
    """

    def __init__(self, curve: Curve, anchor=None, N=None, tol=1e-13, maxiter=500):
        self.curve = curve
        self.anchor = complex(curve.coeffs[0] if anchor is None else anchor)
        N = curve.M if N is None else N
        self.N = N
        a = self.anchor
        d = curve.points - a
        dal = np.angle(np.roll(d, -1) / d)
        if np.any(dal <= 0) or abs(np.sum(dal) - TWO_PI) > 1e-6:
            raise MapIterationDiverged("boundary is not starlike with respect to the anchor")
        self._alpha_nodes = np.angle(d[0]) + np.concatenate([[0], np.cumsum(dal)[:-1]])
        theta = TWO_PI * np.arange(N) / N
        alpha = theta + np.angle(d[0])
        prev = np.inf
        self.iterations = 0
        for it in range(maxiter):
            s = self._s_of_alpha(alpha)
            logP = np.log(np.abs(curve.eval(s) - a))
            new = theta + np.angle(d[0]) + _conjugate(logP)
            change = np.max(np.abs(new - alpha))
            alpha = new
            self.iterations = it + 1
            if change < tol:
                break
            if it > 20 and change > prev * 1.5:
                raise MapIterationDiverged("boundary-correspondence iteration is not contracting")
            prev = change
        else:
            raise MapIterationDiverged("boundary-correspondence iteration hit maxiter")
        self.boundary_param = self._s_of_alpha(alpha)
        gb = curve.eval(self.boundary_param)
        coef = np.fft.fft(gb) / N
        self.neg_tail = float(np.max(np.abs(coef[N // 2 + 1:]))) if N > 2 else 0.0
        self.coef = coef[: N // 2].copy()
        self.coef[0] = a  # g(0) is the anchor up to the discarded tail
        # rotate so that g'(0) > 0
        rot = np.exp(-1j * np.angle(self.coef[1]))
        self.rotation = rot
        self.coef = self.coef * rot ** np.arange(self.coef.size)
        self.coef[0] = a

    def _s_of_alpha(self, alpha):
        a = self.anchor
        base = self._alpha_nodes
        M = self.curve.M
        al = np.asarray(alpha, float)
        # initial guess by linear interpolation of the node angles
        ext_a = np.concatenate([base, [base[0] + TWO_PI]])
        ext_s = np.concatenate([self.curve.s, [TWO_PI]])
        turns = np.floor((al - base[0]) / TWO_PI)
        red = al - TWO_PI * turns
        s = np.interp(red, ext_a, ext_s) + TWO_PI * turns
        target = al
        for _ in range(30):
            p = self.curve.eval(s) - a
            dp = self.curve.eval(s, 1)
            cur = np.angle(p)
            err = np.angle(np.exp(1j * (cur - target)))
            ds = err / np.imag(dp / p)
            s = s - ds
            if np.max(np.abs(ds)) < 1e-15:
                break
        del M
        return s

    # forward map g: disk -> domain ----------------------------------------
    def from_disk(self, zeta):
        return np.polynomial.polynomial.polyval(np.asarray(zeta, complex), self.coef)

    def from_disk_deriv(self, zeta, order=1):
        c = self.coef
        for _ in range(order):
            c = np.polynomial.polynomial.polyder(c)
        return np.polynomial.polynomial.polyval(np.asarray(zeta, complex), c)

    # inverse R: domain -> disk --------------------------------------------
    def to_disk(self, z, tol=1e-14, maxiter=60):
        z = np.asarray(z, dtype=complex)
        zeta = (z - self.anchor) / self.coef[1]
        r = np.abs(zeta)
        zeta = np.where(r > 0.99, 0.99 * zeta / np.maximum(r, 1e-300), zeta)
        for _ in range(maxiter):
            f = self.from_disk(zeta) - z
            step = f / self.from_disk_deriv(zeta)
            zeta = zeta - step
            if np.max(np.abs(step), initial=0.0) < tol:
                break
        return zeta

    def deriv(self, z, zeta=None):
        zeta = self.to_disk(z) if zeta is None else zeta
        return 1.0 / self.from_disk_deriv(zeta)

    def deriv2(self, z, zeta=None):
        zeta = self.to_disk(z) if zeta is None else zeta
        g1 = self.from_disk_deriv(zeta)
        g2 = self.from_disk_deriv(zeta, 2)
        return -g2 / g1**3

    def diagnostics(self):
        zb = self.to_disk(self.curve.points)
        probe = self.anchor + 0.5 * (self.curve.points[:: max(1, self.curve.M // 16)] - self.anchor)
        comp = np.abs(self.from_disk(self.to_disk(probe)) - probe)
        return {"boundary_modulus_error": float(np.max(np.abs(np.abs(zb) - 1))),
                "composition_error": float(np.max(comp)),
                "iterations": self.iterations,
                "negative_mode_tail": self.neg_tail}


def _conjugate(values):
    """Periodic conjugate function: multiplier -i sgn(k)."""
    M = values.size
    k = _freqs(M)
    mult = -1j * np.sign(k)
    if M % 2 == 0:
        mult[M // 2] = 0.0
    return np.real(np.fft.ifft(np.fft.fft(values) * mult))


def riemann_map_family(family: DomainFamily, lam: float, anchor=None) -> RiemannMap:
    if family.base.m != 0:
        raise ValidationError("Riemann maps need a simply-connected family", "riemann_map.m")
    curve = family.curve(0, lam)
    if anchor is None:
        anchor = family.embed(np.array([family.base.interior_points[0]]), lam)[0]
    return RiemannMap(curve, anchor)

"""Oblique derivative problems for second-order elliptic operators on the disk.

    L u = a u_xx + 2b u_xy + c u_yy + d u_x + e u_y = f  in the unit disk,
    Upsilon . grad u = gamma                               on the circle.

Pipeline: a Beltrami coefficient q from (a, b, c); a chart tau with
tau_zbar + q tau_z = 0 (tau = z + T phi, phi + q Pi phi = -q); the conformal
map R of tau(disk) onto the disk, giving psi = R o tau.  In the coordinates
zeta = psi(z) = xi + i eta the principal part becomes kappa * Laplacian, and
W = U_xi - i U_eta solves Problem A on the disk with

    A = (p + i p')/4,  B = conj(A),  F = f/(2 kappa),
    p = L xi / kappa,  p' = L eta / kappa,
    l = conj(psi_z Upsilon + psi_zbar conj(Upsilon)).

The potential is recovered by U = u0 + Re int W dzeta.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import disk_solver
from .disk_solver import DiskProblem, SideConditions
from .errors import (EllipticityViolated, IndexOutOfRange, IterationDiverged,
                     MultivaluedPotential, ValidationError)
from .geometry import BoundaryField, Curve, Domain, RiemannMap, winding_number
from .operators import PolarGrid

log = logging.getLogger(__name__)
TWO_PI = 2.0 * np.pi


def _field(v, z):
    z = np.asarray(z, complex)
    if callable(v):
        return np.asarray(v(z), float) * np.ones(z.shape)
    return np.full(z.shape, float(v))


@dataclass
class EllipticCoefficients:
    """Real coefficient fields; each is a constant or a callable of z = x + iy."""

    a: object = 1.0
    b: object = 0.0
    c: object = 1.0
    d: object = 0.0
    e: object = 0.0
    f: object = 0.0

    def sample(self, z):
        return {k: _field(getattr(self, k), z) for k in "abcdef"}

    def margin(self, z):
        s = self.sample(z)
        return float(np.min(s["a"] * s["c"] - s["b"] ** 2))

    def apply(self, u, z, h=1e-3):
        """L u at points z by centred differences (u callable of z)."""
        z = np.asarray(z, complex)
        s = self.sample(z)
        ux = (u(z + h) - u(z - h)) / (2 * h)
        uy = (u(z + 1j * h) - u(z - 1j * h)) / (2 * h)
        uxx = (u(z + h) - 2 * u(z) + u(z - h)) / h**2
        uyy = (u(z + 1j * h) - 2 * u(z) + u(z - 1j * h)) / h**2
        uxy = (u(z + h + 1j * h) - u(z + h - 1j * h) - u(z - h + 1j * h)
               + u(z - h - 1j * h)) / (4 * h * h)
        return s["a"] * uxx + 2 * s["b"] * uxy + s["c"] * uyy + s["d"] * ux + s["e"] * uy


@dataclass
class ObliqueBC:
    """Direction field Upsilon (complex, callable of t) and data gamma."""

    upsilon: object
    gamma: object = 0.0

    def values(self, t):
        t = np.asarray(t, complex)
        ups = np.asarray(self.upsilon(t) if callable(self.upsilon) else self.upsilon, complex)
        ups = ups * np.ones(t.shape)
        gam = _field(self.gamma, t)
        return ups, gam

    def index(self, domain: Domain):
        ups, _ = self.values(domain.t)
        return winding_number(BoundaryField(np.conj(ups), domain))


def beltrami_coefficient(coeffs: EllipticCoefficients, z, warn_at=0.9):
    """q = (a - sqrt(D) + ib)/(a + sqrt(D) - ib), D = ac - b^2.

    With this q, tau_zbar + q tau_z = 0 makes a u_xx + 2b u_xy + c u_yy a
    positive multiple of the Laplacian in the coordinate tau.
    """
    s = coeffs.sample(z)
    a, b, c = s["a"], s["b"], s["c"]
    D = a * c - b**2
    if np.any(D <= 0) or np.any(a <= 0):
        raise EllipticityViolated(f"ellipticity fails: min(ac - b^2) = {np.min(D):.3g}")
    r = np.sqrt(D)
    q = (a - r + 1j * b) / (a + r - 1j * b)
    q = np.where((a == c) & (b == 0), 0.0, q)
    qmax = float(np.max(np.abs(q)))
    if qmax >= 1:
        raise EllipticityViolated(f"|q| = {qmax:.6f} is not below 1")
    if qmax > warn_at:
        warnings.warn(f"Beltrami coefficient close to 1 (|q| = {qmax:.4f})", RuntimeWarning,
                      stacklevel=2)
    return q


class IsothermalChart:
    """tau = z + T phi on the unit disk and its conformal normalization psi = R o tau."""

    def __init__(self, grid: PolarGrid, q, phi, iterations, residuals):
        self.grid = grid
        self.q = q
        self.phi = phi
        self.iterations = iterations
        self.neumann_residuals = residuals
        g = grid
        self.Pphi = g.Pi(phi)
        self.tau = g.nodes + g.T(phi)
        self.tau_z = 1.0 + self.Pphi
        self.tau_zb = phi
        self.tau_zz = g.dz(self.Pphi)
        self.tau_zzb = g.dz(phi)
        self.tau_zbzb = g.dzbar(phi)
        self.R = None

    # values at arbitrary points by spectral interpolation
    def _at(self, f, z):
        z = np.atleast_1d(np.asarray(z, complex))
        return self.grid.interp(f, z)

    def tau_at(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        return z + self._at(self.tau - self.grid.nodes, z)

    def jacobian(self, z=None):
        if z is None:
            return np.abs(self.tau_z) ** 2 - np.abs(self.tau_zb) ** 2
        return np.abs(self._at(self.tau_z, z)) ** 2 - np.abs(self._at(self.tau_zb, z)) ** 2

    def beltrami_residual(self, probes=None, h=1e-4, q_func=None):
        """max |tau_zbar + q tau_z| with centred differences of the interpolated chart."""
        g = self.grid
        if probes is None:
            probes = g.nodes[:: max(g.nr // 6, 1), :: max(g.nt // 12, 1)].ravel()
        probes = np.atleast_1d(np.asarray(probes, complex))
        tx = (self.tau_at(probes + h) - self.tau_at(probes - h)) / (2 * h)
        ty = (self.tau_at(probes + 1j * h) - self.tau_at(probes - 1j * h)) / (2 * h)
        tz = 0.5 * (tx - 1j * ty)
        tzb = 0.5 * (tx + 1j * ty)
        qv = self._at(self.q, probes) if q_func is None else q_func(probes)
        return float(np.max(np.abs(tzb + qv * tz)))

    def inverse_tau(self, w, z0=None, tol=1e-14, maxiter=50):
        w = np.atleast_1d(np.asarray(w, complex))
        z = (w - self.tau_at([0.0])[0]) if z0 is None else np.asarray(z0, complex).copy()
        for _ in range(maxiter):
            r = self.tau_at(z) - w
            a = self._at(self.tau_z, z)
            b = self._at(self.tau_zb, z)
            step = (np.conj(a) * r - b * np.conj(r)) / (np.abs(a) ** 2 - np.abs(b) ** 2)
            z = z - step
            if np.max(np.abs(step)) < tol:
                break
        return z

    # conformal normalization onto the unit disk
    def normalize(self, M=None):
        g = self.grid
        M = g.nt if M is None else M
        tb = TWO_PI * np.arange(M) / M
        pts = self.tau_at(np.exp(1j * tb))
        curve = Curve.from_samples(pts, check=False)
        self.R = RiemannMap(curve, anchor=self.tau_at([0.0])[0])
        return self

    def psi(self, z):
        return self.R.to_disk(self.tau_at(z))

    def psi_inverse(self, zeta):
        zeta = np.atleast_1d(np.asarray(zeta, complex))
        return self.inverse_tau(self.R.from_disk(zeta), z0=zeta.copy())

    def psi_derivatives(self, z, zeta):
        """psi_z, psi_zbar and the three second derivatives at z (zeta = psi(z))."""
        g1 = self.R.from_disk_deriv(zeta)
        g2 = self.R.from_disk_deriv(zeta, 2)
        R1 = 1.0 / g1
        R2 = -g2 / g1**3
        tz, tzb = self._at(self.tau_z, z), self._at(self.tau_zb, z)
        tzz, tzzb, tzbzb = self._at(self.tau_zz, z), self._at(self.tau_zzb, z), self._at(self.tau_zbzb, z)
        return {"z": R1 * tz, "zb": R1 * tzb,
                "zz": R2 * tz**2 + R1 * tzz,
                "zzb": R2 * tz * tzb + R1 * tzzb,
                "zbzb": R2 * tzb**2 + R1 * tzbzb}


def isothermal_map(q, grid: PolarGrid, q_max=0.8, maxiter=200, tol=1e-13) -> IsothermalChart:
    """Solve phi + q Pi phi = -q by Neumann iteration and build tau = z + T phi."""
    q = np.asarray(q(grid.nodes) if callable(q) else q, complex) * np.ones(grid.shape)
    sup = float(np.max(np.abs(q)))
    if sup > q_max:
        raise IterationDiverged(f"sup|q| = {sup:.3f} exceeds the contraction budget {q_max}")
    phi = -q.copy()
    res = []
    if sup == 0.0:
        return IsothermalChart(grid, q, phi, 0, res)
    for it in range(maxiter):
        new = -q - q * grid.Pi(phi)
        d = float(np.max(np.abs(new - phi)))
        res.append(d)
        phi = new
        if d < tol:
            break
        if it > 10 and d > 10 * res[0]:
            raise IterationDiverged("Neumann iteration for the Beltrami equation diverged")
    else:
        raise IterationDiverged(f"Neumann iteration did not reach {tol:g} in {maxiter} steps")
    chart = IsothermalChart(grid, q, phi, len(res), res)
    if np.min(chart.jacobian()) <= 0:
        raise IterationDiverged("chart Jacobian is not positive")
    return chart


# ---------------------------------------------------------------------------
# reduction to Problem A
# ---------------------------------------------------------------------------


@dataclass
class ReducedOblique:
    problem: DiskProblem
    chart: IsothermalChart
    kappa: int
    z_nodes: np.ndarray          # psi^-1 of the psi-plane grid nodes
    z_boundary: np.ndarray       # psi^-1 of the psi-plane boundary nodes
    diagnostics: dict = field(default_factory=dict)


def _transformed(coeffs, chart, z, zeta):
    s = coeffs.sample(z)
    a, b, c, d, e, f = (s[k] for k in "abcdef")
    D = chart.psi_derivatives(z, zeta)
    Lpsi = ((a - c + 2j * b) * D["zz"] + 2 * (a + c) * D["zzb"] + (a - c - 2j * b) * D["zbzb"]
            + (d + 1j * e) * D["z"] + (d - 1j * e) * D["zb"])
    xi_x = np.real(D["z"] + D["zb"])
    xi_y = np.real(1j * (D["z"] - D["zb"]))
    eta_x = np.imag(D["z"] + D["zb"])
    eta_y = np.imag(1j * (D["z"] - D["zb"]))
    kap = a * xi_x**2 + 2 * b * xi_x * xi_y + c * xi_y**2
    kap_eta = a * eta_x**2 + 2 * b * eta_x * eta_y + c * eta_y**2
    cross = a * xi_x * eta_x + b * (xi_x * eta_y + xi_y * eta_x) + c * xi_y * eta_y
    return Lpsi, kap, f, D, float(np.max(np.abs(kap_eta - kap) + np.abs(cross)))


def oblique_to_problemA(coeffs: EllipticCoefficients, bc: ObliqueBC, chart: IsothermalChart,
                        grid: PolarGrid | None = None, M=None,
                        conditions: SideConditions | None = None, m=0) -> ReducedOblique:
    """Problem A for W = U_xi - i U_eta on the disk of the psi coordinate."""
    if chart.R is None:
        chart.normalize(M)
    grid = chart.grid if grid is None else grid
    M = grid.nt if M is None else M
    kappa = bc.index(Domain.disk(M))
    if m >= 1 and kappa <= m - 1:
        raise IndexOutOfRange(f"index {kappa} <= m - 1 = {m - 1}")
    zeta = grid.nodes.ravel()
    z = chart.psi_inverse(zeta)
    Lpsi, kap, f, _, defect = _transformed(coeffs, chart, z, zeta)
    p = np.real(Lpsi) / kap
    pp = np.imag(Lpsi) / kap
    A = ((p + 1j * pp) / 4).reshape(grid.shape)
    F = (f / (2 * kap)).reshape(grid.shape)
    tb = np.exp(1j * TWO_PI * np.arange(M) / M)
    zb = chart.psi_inverse(tb)
    zb = zb / np.abs(zb)  # the chart maps the circle onto itself
    Db = chart.psi_derivatives(zb, tb)
    ups, gam = bc.values(zb)
    l = np.conj(Db["z"] * ups + Db["zb"] * np.conj(ups))
    prob = DiskProblem(grid, A, np.conj(A), F, l, gam, M=M, conditions=conditions)
    diag = {"isothermal_defect": defect, "kappa_min": float(np.min(kap)),
            "index_original": kappa, "index_reduced": prob.n,
            "riemann": chart.R.diagnostics()}
    if prob.n != kappa:
        raise ValidationError(f"index changed under the chart ({kappa} -> {prob.n})",
                              "index preservation")
    return ReducedOblique(prob, chart, kappa, z.reshape(grid.shape), zb, diag)


def gradient_to_W(chart: IsothermalChart, z, grad):
    """W = U_xi - i U_eta at psi(z) from g = u_x + i u_y at z."""
    z = np.atleast_1d(np.asarray(z, complex))
    zeta = chart.psi(z)
    D = chart.psi_derivatives(z, zeta)
    g = np.asarray(grad, complex)
    return (np.conj(g) * np.conj(D["z"]) - g * np.conj(D["zb"])) / (np.abs(D["z"]) ** 2
                                                                    - np.abs(D["zb"]) ** 2)


def conditions_from_gradient(chart: IsothermalChart, bc: ObliqueBC, grad,
                             interior=(), boundary=()) -> SideConditions:
    """Side conditions in the psi coordinate from a known gradient u_x + i u_y.

    interior and boundary are points of the original disk.
    """
    def w_exact(zeta):
        z = chart.psi_inverse(zeta)
        return gradient_to_W(chart, z, grad(z))

    def l_func(zeta):
        z = chart.psi_inverse(zeta)
        z = z / np.abs(z)
        D = chart.psi_derivatives(z, zeta)
        ups, _ = bc.values(z)
        return np.conj(D["z"] * ups + D["zb"] * np.conj(ups))

    zi = [complex(chart.psi([z])[0]) for z in interior]
    zb = []
    for z in boundary:
        zeta = complex(chart.psi([z])[0])
        zb.append(zeta / abs(zeta))
    return SideConditions.from_exact(w_exact, l_func, zi, zb)


# ---------------------------------------------------------------------------
# potential from W
# ---------------------------------------------------------------------------


@dataclass
class Potential:
    values: np.ndarray
    points: np.ndarray
    path_difference: float
    moments: list


def _gl(n=40):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def reconstruct_potential(w, grid: PolarGrid, z0=None, u0=0.0, points=None, holes=0,
                          moment_tol=1e-8, nodes=40):
    """U(z) = u0 + Re int_{z0}^{z} w dzeta on a disk or annulus grid.

    Two path families are used: (1) arc at |z0| then radial, (2) radial at
    arg z0 then arc.  Their largest disagreement is reported.
    """
    c = grid.center
    z0 = c + (grid.r_in if grid.r_in > 0 else 0.0) * 1.0 + 0j if z0 is None else complex(z0)
    if points is None:
        points = grid.nodes.ravel()
    pts = np.atleast_1d(np.asarray(points, complex))
    s, ws = _gl(nodes)
    moments = []
    if holes:
        r = 0.5 * (grid.r_in + grid.r_out)
        th = TWO_PI * (np.arange(4 * nodes) + 0.5) / (4 * nodes)
        zz = c + r * np.exp(1j * th)
        mom = float(np.real(np.sum(w(zz) * 1j * (zz - c)) * TWO_PI / th.size))
        moments.append(mom)
        if abs(mom) > moment_tol:
            raise MultivaluedPotential(f"solubility moment {mom:.3g} is not zero", moments)
    r0, th0 = abs(z0 - c), np.angle(z0 - c)
    rel = pts - c
    r, th = np.abs(rel), np.angle(rel)
    dth = np.angle(np.exp(1j * (th - th0)))

    def radial(rho_a, rho_b, ang):
        rho = rho_a[:, None] + (rho_b - rho_a)[:, None] * s[None, :]
        e = np.exp(1j * ang)[:, None]
        vals = np.real(w((c + rho * e).ravel()).reshape(rho.shape) * e)
        return (vals @ ws) * (rho_b - rho_a)

    def arc(rad, a0, da):
        ang = a0[:, None] + da[:, None] * s[None, :]
        zz = c + rad[:, None] * np.exp(1j * ang)
        vals = np.real(w(zz.ravel()).reshape(zz.shape) * 1j * (zz - c))
        return (vals @ ws) * da

    P = pts.size
    one = np.ones(P)
    U1 = arc(r0 * one, th0 * one, dth) + radial(r0 * one, r, th0 + dth)
    U2 = radial(r0 * one, r, th0 * one) + arc(r, th0 * one, dth)
    return Potential(u0 + U1, pts, float(np.max(np.abs(U1 - U2))), moments)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


@dataclass
class ObliqueSolution:
    reduced: ReducedOblique
    W: object                    # DiskSolution in the psi coordinate
    U: np.ndarray                # potential at the psi-plane grid nodes
    z: np.ndarray                # the matching points of the original disk
    report: dict

    def __call__(self, z):
        """U at points of the original disk (by interpolation in the psi plane)."""
        zeta = self.reduced.chart.psi(np.atleast_1d(np.asarray(z, complex)))
        g = self.reduced.problem.grid
        return np.real(g.interp(self.U.reshape(g.shape), zeta))


def solve_oblique(coeffs: EllipticCoefficients, bc: ObliqueBC, nr=32, nt=128, u0=0.0,
                  conditions=None, feasibility_tol=1e-4, q_max=0.8):
    """Chart, reduction, Problem A solve and potential reconstruction.

    conditions: SideConditions in the psi coordinate, or a callable taking
    the chart and returning them (see conditions_from_gradient).
    """
    grid = PolarGrid(nr, nt)
    if coeffs.margin(grid.nodes) <= 0:
        raise EllipticityViolated("ac - b^2 is not positive on the grid")
    q = beltrami_coefficient(coeffs, grid.nodes)
    chart = isothermal_map(q, grid, q_max=q_max).normalize()
    if callable(conditions):
        conditions = conditions(chart)
    red = oblique_to_problemA(coeffs, bc, chart, grid, nt, conditions)
    prob = red.problem
    if prob.n >= 0:
        W = disk_solver.solve_disk_nonneg(prob)
    else:
        W = disk_solver.solve_disk_negative(prob, feasibility_tol=feasibility_tol)
        if isinstance(W, disk_solver.Infeasibility):
            return W
    pot = reconstruct_potential(lambda zz: grid.interp(W.values, zz), grid, 0.0, u0)
    report = dict(W.report)
    report.update(red.diagnostics)
    report.update({"beltrami_residual": chart.beltrami_residual(),
                   "neumann_iterations": chart.iterations,
                   "sup_q": float(np.max(np.abs(q))),
                   "path_difference": pot.path_difference,
                   "jacobian_min": float(np.min(chart.jacobian()))})
    return ObliqueSolution(red, W, pot.values.reshape(grid.shape), red.z_nodes, report)

"""Fundamental kernels of dbar w + A w + B conj(w) = 0.

For a source t the kernel X_1(., t) solves X + T(A X + B conj X) = 1/(2(t-z))
(X_2 has right-hand side 1/(2i(t-z))).  Writing X = Y/(2(t-z)) (resp.
Y/(2i(t-z))) turns the equation into

    Y(z) = 1 - T h(z) + T h(t),    h = A Y + s B conj(Y) u/conj(u),  u = zeta - t,

with s = +1 for kind 1 and -1 for kind 2.  Then Y = e^omega with omega(t) = 0.
The jump of u/conj(u) at zeta = t is removed by subtracting B(t) u/conj(u),
whose Cauchy-Green transform over a disk is known in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import RatioUndefined, SingularFredholm
from .operators import PolarGrid, T_region_phase


class CoefficientPair:
    """Coefficients A, B on a polar area grid, extended by zero outside it."""

    def __init__(self, grid: PolarGrid, A=0.0, B=0.0, p=4.0):
        self.grid = grid
        self.A = np.asarray(A(grid.nodes) if callable(A) else A, complex) * np.ones(grid.shape)
        self.B = np.asarray(B(grid.nodes) if callable(B) else B, complex) * np.ones(grid.shape)
        self.p = p
        self._TA = None

    @property
    def zero(self):
        return not (np.any(self.A) or np.any(self.B))

    @property
    def b_zero(self):
        return not np.any(self.B)

    def adjoint(self):
        return CoefficientPair(self.grid, -self.A, -np.conj(self.B), self.p)

    def inside(self, z):
        g = self.grid
        r = np.abs(np.asarray(z, complex) - g.center)
        return (r <= g.r_out * (1 + 1e-13)) & (r >= g.r_in * (1 - 1e-13))

    def value(self, which, z):
        """A or B at arbitrary points, zero outside the closed grid region."""
        arr = self.A if which == "A" else self.B
        z = np.atleast_1d(np.asarray(z, complex))
        out = np.zeros(z.shape, complex)
        m = self.inside(z)
        if np.any(m) and np.any(arr):
            out[m] = self.grid.interp(arr, z[m])
        return out

    def TA_at(self, z):
        return self.grid.T_at(self.A, z)


# ---------------------------------------------------------------------------
# X / Y solves
# ---------------------------------------------------------------------------


class XSolution:
    """Y-form solution of the kind-1 or kind-2 kernel equation for one source t."""

    def __init__(self, coeffs: CoefficientPair, t, kind, Y=None, rtol=1e-13):
        self.coeffs = coeffs
        self.t = complex(t)
        self.kind = int(kind)
        self.sigma = 1.0 if kind == 1 else -1.0
        g = coeffs.grid
        self.mode = "zero" if coeffs.zero else ("b_zero" if coeffs.b_zero else "general")
        self.iterations = 0
        if self.mode == "b_zero":
            self.TA_t = complex(coeffs.TA_at(np.array([self.t]))[0])
            self.Y = np.exp(self.TA_t - g.T(coeffs.A))
        elif self.mode == "zero":
            self.Y = np.ones(g.shape, complex)
        else:
            u = g.nodes - self.t
            with np.errstate(invalid="ignore", divide="ignore"):
                ph = np.where(np.abs(u) > 0, u / np.conj(u), 0.0)
            self.phase = ph
            self.Bt = complex(coeffs.value("B", np.array([self.t]))[0])
            self.Phi_t = complex(T_region_phase(g, np.array([self.t]), self.t)[0]) if self.Bt else 0.0
            self.Y = self._solve(rtol) if Y is None else Y

    # the regularized density h = A Y + s (B conj Y - B_t) u/conj(u)
    def density(self, Y):
        c = self.coeffs
        return c.A * Y + self.sigma * (c.B * np.conj(Y) - self.Bt) * self.phase

    def _Tt(self, h):
        return complex(self.coeffs.grid.T_at(h, np.array([self.t]))[0])

    def _phase_term(self, z):
        if not self.Bt:
            return 0.0
        return self.sigma * self.Bt * (T_region_phase(self.coeffs.grid, z, self.t) - self.Phi_t)

    def _solve(self, rtol):
        g = self.coeffs.grid
        n = g.size
        c = self.coeffs
        ph = self.phase
        s = self.sigma
        Tg_t_row = self._Tt

        def lin(Y):
            h = c.A * Y + s * c.B * np.conj(Y) * ph
            return Y + g.T(h) - Tg_t_row(h)

        rhs = 1.0 - self._phase_term(g.nodes)
        h0 = -s * self.Bt * ph
        rhs = rhs - (g.T(h0) - Tg_t_row(h0))

        def mv(x):
            Y = (x[:n] + 1j * x[n:]).reshape(g.shape)
            y = lin(Y).ravel()
            return np.concatenate([y.real, y.imag])

        op = LinearOperator((2 * n, 2 * n), matvec=mv, dtype=float)
        b = np.concatenate([rhs.real.ravel(), rhs.imag.ravel()])
        cnt = [0]
        x, info = gmres(op, b, rtol=rtol, atol=0.0, restart=80, maxiter=40,
                        callback=lambda _: cnt.__setitem__(0, cnt[0] + 1),
                        callback_type="pr_norm")
        self.iterations = cnt[0]
        res = np.linalg.norm(mv(x) - b) / np.linalg.norm(b)
        if info != 0 and res > 1e-8:
            raise SingularFredholm(f"kernel equation did not converge (residual {res:.2e})")
        self.solve_residual = float(res)
        return (x[:n] + 1j * x[n:]).reshape(g.shape)

    # evaluation -----------------------------------------------------------
    def Y_at(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        if self.mode == "zero":
            return np.ones(z.shape, complex)
        if self.mode == "b_zero":
            return np.exp(self.TA_t - self.coeffs.TA_at(z))
        g = self.coeffs.grid
        h = self.density(self.Y)
        return 1.0 - (g.T_at(h, z) - self._Tt(h)) - self._phase_term(z)

    def X_at(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        pref = 2 * (self.t - z) if self.kind == 1 else 2j * (self.t - z)
        return self.Y_at(z) / pref

    @property
    def X(self):
        g = self.coeffs.grid
        pref = 2 * (self.t - g.nodes) if self.kind == 1 else 2j * (self.t - g.nodes)
        return self.Y / pref

    def residual_X(self):
        """Relative residual of X + T(A X + B conj X) = rhs on the grid nodes."""
        g = self.coeffs.grid
        c = self.coeffs
        X = self.X
        pref = 2 * (self.t - g.nodes) if self.kind == 1 else 2j * (self.t - g.nodes)
        rhs = 1.0 / pref
        r = X + g.T(c.A * X + c.B * np.conj(X)) - rhs
        return float(np.max(np.abs(r)) / np.max(np.abs(rhs)))

    def residual_Y(self):
        g = self.coeffs.grid
        return float(np.max(np.abs(self.Y_at(g.nodes[::4, ::4].ravel())
                                   - self.Y[::4, ::4].ravel())))


def solve_X(coeffs: CoefficientPair, t, kind=1, rtol=1e-13) -> XSolution:
    return XSolution(coeffs, t, kind, rtol=rtol)


def omega_eval(coeffs: CoefficientPair, X: XSolution, z):
    """omega(z, t) = T g(t) - T g(z), g = A + B conj(X)/X, evaluated by area quadrature."""
    z = np.atleast_1d(np.asarray(z, complex))
    g = coeffs.grid
    if X.mode == "zero":
        return np.zeros(z.shape, complex)
    if np.min(np.abs(X.Y)) < 1e-12:
        raise RatioUndefined("kernel nearly vanishes at a quadrature node")
    if X.mode == "b_zero":
        return X.TA_t - coeffs.TA_at(z)
    # conj(X)/X = s conj(Y)/Y u/conj(u); subtract the jump at t
    dens = coeffs.A + X.sigma * (coeffs.B * np.conj(X.Y) / X.Y - X.Bt) * X.phase
    out = -(g.T_at(dens, z) - X._Tt(dens))
    if X.Bt:
        out = out - X.sigma * X.Bt * (T_region_phase(g, z, X.t) - X.Phi_t)
    out[np.abs(z - X.t) == 0] = 0.0
    return out


# ---------------------------------------------------------------------------
# kernel tables
# ---------------------------------------------------------------------------


@dataclass
class KernelTable:
    points: np.ndarray     # evaluation points z (P,)
    sources: np.ndarray    # sources t (S,)
    omega1: np.ndarray     # (P, S)
    omega2: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    near: np.ndarray       # mask of |z - t| below two mesh widths

    def diagonal_omega(self):
        """omega_j(t, t) for sources that are also evaluation points."""
        out = []
        for j, t in enumerate(self.sources):
            i = np.nonzero(np.abs(self.points - t) == 0)[0]
            if i.size:
                out.append(max(abs(self.omega1[i[0], j]), abs(self.omega2[i[0], j])))
        return out


def kernel_columns(coeffs: CoefficientPair, t, z, rtol=1e-13):
    """(Y1, Y2) at points z for the source t."""
    X1 = XSolution(coeffs, t, 1, rtol=rtol)
    if coeffs.b_zero:
        Y1 = X1.Y_at(z)
        return Y1, Y1
    X2 = XSolution(coeffs, t, 2, rtol=rtol)
    return X1.Y_at(z), X2.Y_at(z)


def kernels_G(coeffs: CoefficientPair, sources, points, mesh=None, rtol=1e-13) -> KernelTable:
    sources = np.atleast_1d(np.asarray(sources, complex))
    points = np.atleast_1d(np.asarray(points, complex))
    P, S = points.size, sources.size
    Y1 = np.ones((P, S), complex)
    Y2 = np.ones((P, S), complex)
    if not coeffs.zero:
        for j, t in enumerate(sources):
            Y1[:, j], Y2[:, j] = kernel_columns(coeffs, t, points, rtol)
    d = sources[None, :] - points[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        G1 = (Y1 + Y2) / (2 * d)
        G2 = (Y1 - Y2) / (2 * d)
        om1 = np.log(Y1)
        om2 = np.log(Y2)
    if mesh is None:
        g = coeffs.grid
        mesh = g.r_out * 2 * np.pi / g.nt
    near = np.abs(d) < 2 * mesh
    return KernelTable(points, sources, om1, om2, G1, G2, near)


def adjoint_kernels_at(coeffs: CoefficientPair, z, zeta, rtol=1e-13):
    """G1(z, zeta), G2(z, zeta) for one interior z and many zeta, from one
    adjoint solve with source z: G1(z, zeta) = -G1'(zeta, z) and
    G2(z, zeta) = -conj(G2'(zeta, z))."""
    adj = coeffs.adjoint()
    Y1, Y2 = kernel_columns(adj, z, zeta, rtol)
    d = zeta - z
    G1 = (Y1 + Y2) / (2 * d)
    G2 = np.conj(Y1 - Y2) / (2 * np.conj(d))
    return G1, G2, (Y1, Y2)


def represent(boundary_w, F, coeffs: CoefficientPair, z, domain, rtol=1e-13):
    """Generalized Cauchy formula at interior points z:

    w(z) = (1/2 pi i) int [G1(z,t) w dt - G2(z,t) conj(w dt)]
           - (1/pi) int int [G1(z,zeta) F + G2(z,zeta) conj F] dA.
    """
    g = coeffs.grid
    z = np.atleast_1d(np.asarray(z, complex))
    wb = np.asarray(boundary_w, complex)
    F = np.zeros(g.shape, complex) if F is None else np.asarray(F, complex) * np.ones(g.shape)
    out = np.empty(z.shape, complex)
    adj = coeffs.adjoint()
    for n, zz in enumerate(z):
        if coeffs.zero:
            Y1b = Y2b = np.ones(domain.N, complex)
            ag = (np.ones(g.shape), np.ones(g.shape))
        elif coeffs.b_zero:
            X = XSolution(adj, zz, 1, rtol=rtol)
            Y1b = Y2b = X.Y_at(domain.t)
            ag = (X.Y, X.Y)
        else:
            X1 = XSolution(adj, zz, 1, rtol=rtol)
            X2 = XSolution(adj, zz, 2, rtol=rtol)
            Y1b, Y2b = X1.Y_at(domain.t), X2.Y_at(domain.t)
            ag = (X1.Y, X2.Y)
        d = domain.t - zz
        G1 = (Y1b + Y2b) / (2 * d)
        G2 = np.conj(Y1b - Y2b) / (2 * np.conj(d))
        bd = np.sum(G1 * wb * domain.dt - G2 * np.conj(wb * domain.dt)) / (2j * np.pi)
        area = 0.0
        if np.any(F):
            Ya, Yb = ag
            psi1 = 0.5 * (Ya + Yb) * F
            u = g.nodes - zz
            with np.errstate(invalid="ignore", divide="ignore"):
                ph = np.where(np.abs(u) > 0, u / np.conj(u), 0.0)
            psi2 = 0.5 * np.conj(Ya - Yb) * np.conj(F) * ph
            area = g.T_at(psi1 + psi2, np.array([zz]))[0]
        out[n] = bd + area
    return out

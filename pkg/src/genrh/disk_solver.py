"""Problem A on the unit disk: dbar w + A w + B conj(w) = F, Re[conj(l) w] = gamma.

The boundary field is first reduced: with q = -arg l + n theta and
chi = i S(q) holomorphic, the function w* = e^chi w satisfies
Re[z^-n w*] = gamma e^p on the circle (p = Re chi).  For n >= 0 the reduced
problem is the second-kind equation w* + P_n(A w* + B* conj w*) = P_n F* +
z^n S(gamma*) plus a (2n+1)-dimensional holomorphic correction; for n < 0 the
equation uses P*_k (k = -n) and is solvable only when 2k-1 functionals built
from the adjoint homogeneous problem vanish.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import PinningSingular, SingularFredholm, WindingMismatch
from .operators import PolarGrid, schwarz_coeffs

log = logging.getLogger(__name__)
TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# data
# ---------------------------------------------------------------------------


@dataclass
class SideConditions:
    """Pins on a normally distributed set.

    interior: points z_r with prescribed complex values w(z_r).
    boundary: points z'_s on the boundary with prescribed c_s = Im[conj(l) w]/|l|.
    """

    interior: list = field(default_factory=list)
    interior_values: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    boundary_values: list = field(default_factory=list)

    @property
    def count(self):
        return 2 * len(self.interior) + len(self.boundary)

    @classmethod
    def from_exact(cls, w_exact, l_func, interior=(), boundary=()):
        iv = [complex(w_exact(np.array([z]))[0]) for z in interior]
        bv = []
        for z in boundary:
            lz = complex(l_func(np.array([z]))[0])
            bv.append(float(np.imag(np.conj(lz) * w_exact(np.array([z]))[0]) / abs(lz)))
        return cls(list(interior), iv, list(boundary), bv)


@dataclass
class ReducedField:
    chi_coeffs: np.ndarray   # Taylor coefficients of chi
    p: np.ndarray            # Re chi on the circle nodes
    q: np.ndarray            # Im chi on the circle nodes
    n: int

    def chi(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, complex), self.chi_coeffs)

    def reconstruction_residual(self, l):
        M = self.p.size
        t = np.exp(1j * TWO_PI * np.arange(M) / M)
        lhat = l / np.abs(l)
        chi_b = self.p + 1j * self.q
        return float(np.max(np.abs(np.exp(chi_b) * np.exp(-self.p) * t ** (-self.n) - np.conj(lhat))))


def _as_grid(grid, v):
    if v is None:
        return np.zeros(grid.shape, complex)
    if callable(v):
        return np.asarray(v(grid.nodes), complex) * np.ones(grid.shape)
    return np.asarray(v, complex) * np.ones(grid.shape)


def _as_bdry(M, v, real=False):
    t = np.exp(1j * TWO_PI * np.arange(M) / M)
    if callable(v):
        out = np.asarray(v(t)) * np.ones(M)
    else:
        out = np.asarray(v) * np.ones(M)
    return out.real.astype(float) if real else out.astype(complex)


class DiskProblem:
    """Problem A data on the unit disk.

    A, B, F: grid arrays or callables of z; l: boundary samples or callable of t;
    gamma: real boundary samples or callable.  ``grid`` is a PolarGrid on the
    unit disk; the boundary carries M equispaced nodes.
    """

    def __init__(self, grid: PolarGrid, A=None, B=None, F=None, l=None, gamma=None,
                 M=None, conditions: SideConditions | None = None):
        self.grid = grid
        self.M = grid.nt if M is None else int(M)
        self.t = np.exp(1j * TWO_PI * np.arange(self.M) / self.M)
        self.A = _as_grid(grid, A)
        self.B = _as_grid(grid, B)
        self.F = _as_grid(grid, F)
        self.l = _as_bdry(self.M, 1.0 if l is None else l)
        self.gamma = _as_bdry(self.M, 0.0 if gamma is None else gamma, real=True)
        self.conditions = conditions or SideConditions()
        from .geometry import BoundaryField, Domain, winding_number

        self.domain = Domain.disk(self.M)
        self.n = winding_number(BoundaryField(self.l, self.domain))


# ---------------------------------------------------------------------------
# reduction of the boundary field
# ---------------------------------------------------------------------------


def reduce_field(l, n=None) -> ReducedField:
    l = np.asarray(l, complex)
    M = l.size
    theta = TWO_PI * np.arange(M) / M
    steps = np.angle(np.roll(l, -1) / l)
    total = np.sum(steps) / TWO_PI
    if n is None:
        n = int(round(total))
    if abs(total - n) > 1e-6:
        raise WindingMismatch(f"phase of l turns {total:.4f} times, expected {n}")
    arg = np.angle(l[0]) + np.concatenate([[0.0], np.cumsum(steps)[:-1]])
    q = -arg + n * theta
    a = schwarz_coeffs(q)
    chi_coeffs = 1j * a
    chi_b = np.polynomial.polynomial.polyval(np.exp(1j * theta), chi_coeffs)
    return ReducedField(chi_coeffs, chi_b.real, chi_b.imag, n)


# ---------------------------------------------------------------------------
# second-kind area equations
# ---------------------------------------------------------------------------


class AreaEquation:
    """w + P(A w + B conj w) = rhs on a disk grid, P in {T, P_n, P*_k}."""

    def __init__(self, grid: PolarGrid, A, B, kind="Pn", index=0, rtol=1e-13):
        self.grid, self.A, self.B = grid, A, B
        self.kind, self.index, self.rtol = kind, index, rtol
        self.trivial = not (np.any(A) or np.any(B))
        self.iterations = []

    def P(self, f):
        g = self.grid
        if self.kind == "Pn":
            return g.Pn(f, self.index)
        if self.kind == "Pstar":
            return g.Pstar(f, self.index)
        return g.T(f)

    def P_at(self, f, z):
        g = self.grid
        if self.kind == "Pn":
            return g.Pn_at(f, self.index, z)
        if self.kind == "Pstar":
            return g.Pstar_at(f, self.index, z)
        return g.T_at(f, z)

    def density(self, w):
        return self.A * w + self.B * np.conj(w)

    def apply(self, w):
        return w + self.P(self.density(w))

    def solve(self, rhs):
        if self.trivial:
            return np.array(rhs, complex)
        g = self.grid
        n = g.size

        def mv(x):
            w = (x[:n] + 1j * x[n:]).reshape(g.shape)
            y = self.apply(w).ravel()
            return np.concatenate([y.real, y.imag])

        op = LinearOperator((2 * n, 2 * n), matvec=mv, dtype=float)
        b = np.concatenate([rhs.real.ravel(), rhs.imag.ravel()])
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = gmres(op, b, rtol=self.rtol, atol=0.0, restart=80, maxiter=40,
                        callback=cb, callback_type="pr_norm")
        res = np.linalg.norm(mv(x) - b) / max(np.linalg.norm(b), 1e-300)
        self.iterations.append(count[0])
        if info != 0 and res > 1e-8:
            raise SingularFredholm(f"GMRES did not converge (info={info}, residual={res:.2e}); "
                                   "the discrete operator is numerically singular or under-resolved")
        return (x[:n] + 1j * x[n:]).reshape(g.shape)

    def residual(self, w, rhs):
        return float(np.max(np.abs(self.apply(w) - rhs)) / max(np.max(np.abs(rhs)), 1e-300))

    def evaluate(self, w, rhs_at, z):
        """Nystrom interpolation: w(z) = rhs(z) - P(Aw + B conj w)(z)."""
        z = np.atleast_1d(np.asarray(z, complex))
        out = rhs_at(z)
        if not self.trivial:
            out = out - self.P_at(self.density(w), z)
        return out


class _Rhs:
    """A right-hand side known on the grid and at arbitrary points."""

    def __init__(self, grid_values, at):
        self.values = grid_values
        self.at = at

    def __add__(self, other):
        return _Rhs(self.values + other.values, lambda z: self.at(z) + other.at(z))

    def scale(self, c):
        return _Rhs(c * self.values, lambda z: c * self.at(z))


def _poly_rhs(grid, coeffs, offset=0):
    coeffs = np.asarray(coeffs, complex)

    def at(z):
        z = np.asarray(z, complex)
        return z**offset * np.polynomial.polynomial.polyval(z, coeffs)

    return _Rhs(grid.poly(coeffs, offset), at)


# ---------------------------------------------------------------------------
# solutions
# ---------------------------------------------------------------------------


class DiskSolution:
    """Solution w on the unit disk with Nystrom evaluation anywhere in the closed disk."""

    def __init__(self, problem, reduced, eq, wstar, rhs, report=None):
        self.problem = problem
        self.reduced = reduced
        self.eq = eq
        self.wstar = wstar
        self.rhs = rhs
        chi = reduced.chi(problem.grid.local)
        self.values = np.exp(-chi) * wstar
        self.boundary = self(problem.t)
        self.report = report or {}

    def reduced_at(self, z):
        return self.eq.evaluate(self.wstar, self.rhs.at, z)

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        return np.exp(-self.reduced.chi(z)) * self.reduced_at(z)

    def dbar_residual(self, probes=None, h=1e-4):
        p = self.problem
        if probes is None:
            rng = np.random.default_rng(7)
            probes = 0.8 * np.sqrt(rng.random(24)) * np.exp(TWO_PI * 1j * rng.random(24))
        probes = np.asarray(probes, complex)
        fd = 0.5 * ((self(probes + h) - self(probes - h)) / (2 * h)
                    + 1j * (self(probes + 1j * h) - self(probes - 1j * h)) / (2 * h))
        g = p.grid
        w = self(probes)
        A = g.interp(p.A, probes)
        B = g.interp(p.B, probes)
        F = g.interp(p.F, probes)
        return float(np.max(np.abs(fd + A * w + B * np.conj(w) - F)))

    def boundary_residual(self):
        p = self.problem
        return float(np.max(np.abs(np.real(np.conj(p.l) * self.boundary) - p.gamma)))


@dataclass
class HomogeneousBasis:
    fields: list
    generators: list
    solutions: list = field(default_factory=list)


def _generators(grid, n):
    gens = []
    for k in range(n):
        c = np.zeros(2 * n + 1, complex)
        c[k], c[2 * n - k] = 1.0, -1.0
        gens.append(c)
        c = np.zeros(2 * n + 1, complex)
        c[k], c[2 * n - k] = 1j, 1j
        gens.append(c)
    c = np.zeros(2 * n + 1, complex)
    c[n] = 1j
    gens.append(c)
    return gens


def homogeneous_basis(grid: PolarGrid, A, B, n: int, rtol=1e-13) -> HomogeneousBasis:
    """Solutions of w_s + P_n(A w_s + B conj w_s) = g_s for the 2n+1 generators g_s."""
    eq = AreaEquation(grid, _as_grid(grid, A), _as_grid(grid, B), "Pn", n, rtol)
    gens = _generators(grid, n)
    fields, sols = [], []
    for c in gens:
        rhs = _poly_rhs(grid, c)
        w = eq.solve(rhs.values)
        fields.append(w)
        sols.append((eq, w, rhs))
    return HomogeneousBasis(fields, gens, sols)


def _pin_rows(problem, reduced, evaluate):
    """Real pin equations for a candidate reduced solution given by ``evaluate``."""
    cond = problem.conditions
    rows = []
    if cond.interior:
        z = np.asarray(cond.interior, complex)
        w = np.exp(-reduced.chi(z)) * evaluate(z)
        for v in w:
            rows.extend([v.real, v.imag])
    if cond.boundary:
        z = np.asarray(cond.boundary, complex)
        z = z / np.abs(z)
        chi = reduced.chi(z)
        ws = evaluate(z)
        rows.extend(np.imag(z ** (-reduced.n) * np.exp(-chi.real) * ws).tolist())
    return np.asarray(rows, float)


def _interp_l(l, z):
    from .geometry import trig_interp

    lz = trig_interp(l, np.angle(z) % TWO_PI)
    return lz / np.abs(lz)


def _pin_targets(problem):
    cond = problem.conditions
    vals = []
    for v in cond.interior_values:
        vals.extend([complex(v).real, complex(v).imag])
    vals.extend(float(c) for c in cond.boundary_values)
    return np.asarray(vals, float)


def _reduced_data(problem, reduced):
    g = problem.grid
    chi = reduced.chi(g.local)
    Fs = problem.F * np.exp(chi)
    Bs = problem.B * np.exp(2j * chi.imag)
    labs = np.abs(problem.l)
    gs = problem.gamma / labs * np.exp(reduced.p)
    return Fs, Bs, gs


def solve_disk_nonneg(problem: DiskProblem, rtol=1e-13) -> DiskSolution:
    g = problem.grid
    n = problem.n
    if n < 0:
        raise ValueError("solve_disk_nonneg needs n >= 0")
    reduced = reduce_field(problem.l, n)
    Fs, Bs, gs = _reduced_data(problem, reduced)
    eq = AreaEquation(g, problem.A, Bs, "Pn", n, rtol)
    sg = schwarz_coeffs(gs)
    rhs = _poly_rhs(g, sg, n)
    if np.any(Fs):
        Fs_ = Fs
        rhs = rhs + _Rhs(g.Pn(Fs_, n), lambda z: g.Pn_at(Fs_, n, z))
    w0 = eq.solve(rhs.values)
    gens = _generators(g, n)
    basis = []
    for c in gens:
        r = _poly_rhs(g, c)
        basis.append((eq.solve(r.values), r))
    cond = problem.conditions
    if cond.count != 2 * n + 1:
        raise PinningSingular(f"{cond.count} pin equations for a {2 * n + 1}-dimensional "
                              "solution space")
    Mp = np.column_stack([_pin_rows(problem, reduced, lambda z, w=w, r=r: eq.evaluate(w, r.at, z))
                          for w, r in basis])
    b = _pin_targets(problem) - _pin_rows(problem, reduced, lambda z: eq.evaluate(w0, rhs.at, z))
    cnd = np.linalg.cond(Mp)
    if not np.isfinite(cnd) or cnd > 1e12:
        raise PinningSingular(f"pinning matrix condition number {cnd:.2e}")
    d = np.linalg.solve(Mp, b)
    wstar = w0 + sum(ds * w for ds, (w, _) in zip(d, basis))
    total = rhs
    for ds, (_, r) in zip(d, basis):
        total = total + r.scale(ds)
    sol = DiskSolution(problem, reduced, eq, wstar, total)
    sol.report = {
        "n": n,
        "pin_condition": float(cnd),
        "pin_coefficients": d.tolist(),
        "gmres_iterations": list(eq.iterations),
        "integral_equation_residual": eq.residual(wstar, total.values),
        "boundary_residual": sol.boundary_residual(),
        "side_residual": _side_residual(sol),
        "reconstruction_residual": reduced.reconstruction_residual(problem.l),
    }
    return sol


def _side_residual(sol):
    p = sol.problem
    cond = p.conditions
    res = 0.0
    if cond.interior:
        z = np.asarray(cond.interior, complex)
        res = max(res, float(np.max(np.abs(sol(z) - np.asarray(cond.interior_values)))))
    if cond.boundary:
        z = np.asarray(cond.boundary, complex)
        z = z / np.abs(z)
        lz = _interp_l(p.l, z)
        c = np.imag(np.conj(lz) * sol(z))
        res = max(res, float(np.max(np.abs(c - np.asarray(cond.boundary_values)))))
    return res


# ---------------------------------------------------------------------------
# negative index
# ---------------------------------------------------------------------------


@dataclass
class Infeasibility:
    functionals: list
    tolerance: float
    basis_singular_values: list
    message: str = "solvability conditions violated"

    @property
    def feasible(self):
        return False


def adjoint_functionals(problem: DiskProblem, adjoint_resolution=None):
    """Values of the 2k-1 solvability functionals of a negative-index disk problem.

    The adjoint homogeneous problem has coefficients (-A, -conj B), boundary
    field L = conj(l t') and index k-1 >= 0; its solutions v_s come from the
    null space of the boundary singular system of that problem.  The s-th
    functional is Re[(1/2i) int l gamma v_s dt] - Re int int v_s F dA.
    """
    from .mc_solver import adjoint_null_space

    g = problem.grid
    lhat = problem.l / np.abs(problem.l)
    ghat = problem.gamma / np.abs(problem.l)
    vs, info = adjoint_null_space(problem, adjoint_resolution)
    dt = 1j * problem.t * TWO_PI / problem.M
    vals = []
    for vb, va in vs:
        bd = np.real(np.sum(lhat * ghat * vb * dt) / 2j)
        ar = np.real(g.integrate(va * problem.F))
        vals.append(float(bd - ar))
    return vals, info


def solve_disk_negative(problem: DiskProblem, rtol=1e-13, feasibility_tol=None,
                        adjoint_resolution=None):
    g = problem.grid
    n = problem.n
    if n >= 0:
        raise ValueError("solve_disk_negative needs n < 0")
    k = -n
    scale = float(np.max(np.abs(problem.F)) + np.max(np.abs(problem.gamma)))
    tol = 1e-6 * scale if feasibility_tol is None else feasibility_tol * scale
    funcs, info = adjoint_functionals(problem, adjoint_resolution)
    worst = max((abs(v) for v in funcs), default=0.0)
    if scale == 0.0:
        worst = 0.0
    if worst > tol:
        return Infeasibility(funcs, tol, info.get("singular_values", []))
    reduced = reduce_field(problem.l, n)
    Fs, Bs, gs = _reduced_data(problem, reduced)
    eq = AreaEquation(g, problem.A, Bs, "Pstar", k, rtol)
    M = gs.size
    c = np.fft.fft(gs) / M
    half = M // 2
    js = np.arange(0, max(half - k + 1, 0))
    h = 2 * c[js + k]
    if M % 2 == 0 and js.size:
        h[-1] = c[half].real
    rhs = _poly_rhs(g, h)
    if np.any(Fs):
        rhs = rhs + _Rhs(g.Pstar(Fs, k), lambda z: g.Pstar_at(Fs, k, z))
    wstar = eq.solve(rhs.values)
    sol = DiskSolution(problem, reduced, eq, wstar, rhs)
    sol.report = {
        "n": n,
        "functionals": funcs,
        "feasibility_tolerance": tol,
        "adjoint": info,
        "gmres_iterations": list(eq.iterations),
        "integral_equation_residual": eq.residual(wstar, rhs.values),
        "boundary_residual": sol.boundary_residual(),
        "reconstruction_residual": reduced.reconstruction_residual(problem.l),
    }
    return sol


def solve(problem: DiskProblem, **kw):
    if problem.n >= 0:
        return solve_disk_nonneg(problem, **{k: v for k, v in kw.items() if k == "rtol"})
    return solve_disk_negative(problem, **kw)

"""Problem A on multiply connected domains via a boundary singular integral equation.

On the boundary the solution is written w = l(gamma + i eta) with |l| = 1 and a
real density eta.  The generalized Cauchy integral

    Phi[phi](z) = (1/2 pi i) int [G1(z,t) phi dt - G2(z,t) conj(phi dt)]

reproduces generalized analytic functions from their boundary values, so
w = Phi[l gamma] + Phi[i l eta] + w_F and the boundary condition becomes the
singular equation K eta = gamma_0 with

    K eta = Re[conj(l) Phi^+[i l eta]],
    gamma_0 = gamma - Re[conj(l) Phi^+[l gamma]] - Re[conj(l) w_F].

K splits into a dominant Cauchy part K3 and smooth-kernel parts N1, N2, N3.
Left multiplication by M = -C/(2 pi) (C the principal value Cauchy matrix)
turns 4 M K into identity plus compact.

Interior values use the fact that Phi[phi] - C[phi] is continuous across the
boundary: Phi + T(A Phi + B conj Phi) = C[phi] with T over the domain.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .disk_solver import AreaEquation, SideConditions
from .errors import (IndexOutOfRange, KernelBoundViolated, PinningSingular, ValidationError,
                     WrongNullspaceDimension)
from .geometry import (BoundaryField, Domain, NormalizedSet, trig_interp,
                       validate_normally_distributed, winding_number)
from .kernels import CoefficientPair, kernel_columns
from .operators import PolarGrid, cauchy_barycentric, cauchy_polar, pv_matrix

log = logging.getLogger(__name__)
TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------


def _bdry(domain, v, default):
    if v is None:
        v = default
    if isinstance(v, BoundaryField):
        return v.values
    if callable(v):
        return np.asarray(v(domain.t), complex) * np.ones(domain.N)
    return np.asarray(v, complex) * np.ones(domain.N)


def _nonzero(v):
    if v is None:
        return False
    if callable(v):
        return True
    return bool(np.any(np.asarray(v) != 0))


class McProblem:
    """Problem A on a domain with m >= 0 holes.

    A, B, F are callables of z or arrays on the area grid (disk and
    concentric annulus only); l and gamma are callables of t or boundary
    samples.  On other domains A = B = F = 0 is required.
    """

    def __init__(self, domain: Domain, A=None, B=None, F=None, l=None, gamma=None,
                 conditions: SideConditions | None = None, grid: PolarGrid | None = None,
                 area=(24, None), check_index=True):
        self.domain = domain
        lv = _bdry(domain, l, 1.0)
        self.l_raw = lv
        self.n = winding_number(BoundaryField(lv, domain))
        self.m = domain.m
        if check_index and self.n <= self.m - 1:
            raise IndexOutOfRange(f"index {self.n} not above m-1 = {self.m - 1}")
        self.l = lv / np.abs(lv)
        self.gamma = np.real(_bdry(domain, gamma, 0.0)) / np.abs(lv)
        need = _nonzero(A) or _nonzero(B) or _nonzero(F)
        if need or grid is not None:
            if grid is None:
                nr, nt = area
                nt = nt or max(64, min(domain.sizes[0], 256))
                grid = domain.area_grid(nr, nt)
            self.grid = grid
            self.coeffs = CoefficientPair(grid, 0.0 if A is None else A, 0.0 if B is None else B)
            Fv = 0.0 if F is None else F
            self.F = np.asarray(Fv(grid.nodes) if callable(Fv) else Fv, complex) * np.ones(grid.shape)
        else:
            self.grid = None
            self.coeffs = None
            self.F = None
        self.conditions = conditions or SideConditions()

    @property
    def expected_dimension(self):
        return 2 * self.n + 1 - self.m

    @property
    def trivial_coeffs(self):
        return self.coeffs is None or self.coeffs.zero

    def validate_conditions(self):
        c = self.conditions
        rep = validate_normally_distributed(
            NormalizedSet(list(c.interior), list(c.boundary), self.n, self.m), self.domain)
        if not rep["valid"]:
            raise ValidationError(f"side conditions are not a normally distributed set: {rep}",
                                  "NormalizedSet")
        return rep


# ---------------------------------------------------------------------------
# boundary kernel table
# ---------------------------------------------------------------------------


@dataclass
class BoundaryKernels:
    """Kernel samples at boundary node pairs (row zeta_i, column t_j).

    G1r = G1 - 1/(t - zeta); G2q is a quadrature matrix: sum_j G2q_ij f_j
    approximates int G2(zeta_i, t) f(t) ds in the curve parameter.
    """

    G1r: np.ndarray
    G2: np.ndarray
    G2q: np.ndarray
    mode: str


def _fill_diagonal(Mat, domain):
    """Replace the diagonal by the average of the two neighbours on the same curve."""
    out = Mat.copy()
    for j in range(len(domain.curves)):
        a, b = domain.offsets[j], domain.offsets[j + 1]
        idx = np.arange(a, b)
        prev = a + (idx - a - 1) % (b - a)
        nxt = a + (idx - a + 1) % (b - a)
        out[idx, idx] = 0.5 * (Mat[idx, prev] + Mat[idx, nxt])
    return out


def log_weights(M):
    """Circulant W with sum_j W_ij f(s_j) = int_0^{2 pi} log|2 sin((s_i - s)/2)| f(s) ds
    for trigonometric polynomials f of degree < M/2."""
    m = np.abs(np.fft.fftfreq(M, 1.0 / M))
    lam = np.zeros(M)
    lam[1:] = -np.pi / m[1:]
    col = np.real(np.fft.ifft(lam))
    idx = np.arange(M)
    return col[(idx[:, None] - idx[None, :]) % M]


def _log_split(G2, Bt, domain):
    """Quadrature for G2 = B(t) log|t - zeta| + bounded on each curve."""
    N = domain.N
    Q = G2 * domain.h[None, :]
    dist = np.abs(domain.t[None, :] - domain.t[:, None])
    for j, c in enumerate(domain.curves):
        a, b = domain.offsets[j], domain.offsets[j + 1]
        M = b - a
        s = c.s
        L = np.log(np.abs(2 * np.sin(0.5 * (s[:, None] - s[None, :])) + np.eye(M)))
        np.fill_diagonal(L, 0.0)
        D = dist[a:b, a:b] + np.eye(M)
        S = np.log(D) - L
        np.fill_diagonal(S, np.log(np.abs(c.deriv)))
        R = G2[a:b, a:b] - Bt[None, a:b] * np.log(D)
        np.fill_diagonal(R, 0.0)
        sub = type("D", (), {"curves": [c], "offsets": [0, M]})
        R = _fill_diagonal(R, sub)
        Q[a:b, a:b] = (R + Bt[None, a:b] * S) * c.h + log_weights(M) * Bt[None, a:b]
    del N
    return Q


def boundary_kernels(problem: McProblem, rtol=1e-13) -> BoundaryKernels:
    d = problem.domain
    N = d.N
    if problem.trivial_coeffs:
        z = np.zeros((N, N), complex)
        return BoundaryKernels(z, z, z, "zero")
    c = problem.coeffs
    t = d.t
    diff = t[None, :] - t[:, None]
    np.fill_diagonal(diff, 1.0)
    if c.b_zero:
        TA = c.TA_at(t)
        Y = np.exp(TA[None, :] - TA[:, None])
        G1r = (Y - 1.0) / diff
        np.fill_diagonal(G1r, 0.0)
        z = np.zeros((N, N), complex)
        return BoundaryKernels(_fill_diagonal(G1r, d), z, z, "b_zero")
    Y1 = np.empty((N, N), complex)
    Y2 = np.empty((N, N), complex)
    for j in range(N):
        Y1[:, j], Y2[:, j] = kernel_columns(c, t[j], t, rtol)
    G1r = (Y1 + Y2 - 2.0) / (2 * diff)
    G2 = (Y1 - Y2) / (2 * diff)
    np.fill_diagonal(G1r, 0.0)
    np.fill_diagonal(G2, 0.0)
    Bt = c.value("B", t)
    return BoundaryKernels(_fill_diagonal(G1r, d), G2, _log_split(G2, Bt, d), "general")


# ---------------------------------------------------------------------------
# generalized Cauchy integrals
# ---------------------------------------------------------------------------


class CauchyEvaluator:
    """Boundary traces and interior values of Phi[phi] and of w_F."""

    def __init__(self, problem: McProblem, table: BoundaryKernels, C=None):
        self.p = problem
        self.table = table
        d = problem.domain
        self.C = pv_matrix(d) if C is None else C
        self.eq = None
        self.polar = d.is_polar()
        if not problem.trivial_coeffs:
            self.eq = AreaEquation(problem.grid, problem.coeffs.A, problem.coeffs.B, "T")

    def trace_matrix(self):
        """Matrix of phi -> Phi^+[phi] split into the phi and conj(phi) parts."""
        d = self.p.domain
        N = d.N
        P = 0.5 * np.eye(N) + self.C / (TWO_PI * 1j) + self.table.G1r * d.dt[None, :] / (TWO_PI * 1j)
        Q = -self.table.G2q * np.conj(d.dts)[None, :] / (TWO_PI * 1j)
        return P, Q

    def trace(self, phi):
        P, Q = self.trace_matrix()
        return P @ phi + Q @ np.conj(phi)

    def cauchy(self, phi, z):
        if self.polar:
            return cauchy_polar(phi, self.p.domain, z)
        return cauchy_barycentric(phi, self.p.domain, z)

    def area_solution(self, phi):
        """Grid values of Phi[phi] (None when A = B = 0)."""
        if self.eq is None:
            return None
        g = self.p.grid
        rhs = self.cauchy(phi, g.nodes.ravel()).reshape(g.shape)
        return self.eq.solve(rhs)

    def interior(self, phi, z, Phi=None):
        z = np.atleast_1d(np.asarray(z, complex))
        out = self.cauchy(phi, z)
        if self.eq is not None:
            Phi = self.area_solution(phi) if Phi is None else Phi
            out = out - self.p.grid.T_at(self.eq.density(Phi), z)
        return out

    def trace_area(self, phi, Phi=None):
        """Phi^+ through the area equation (independent of the kernel table)."""
        d = self.p.domain
        out = 0.5 * phi + self.C @ phi / (TWO_PI * 1j)
        if self.eq is not None:
            Phi = self.area_solution(phi) if Phi is None else Phi
            out = out - self.p.grid.T_at(self.eq.density(Phi), d.t)
        return out

    # particular solution of the inhomogeneous equation
    def wF(self):
        p = self.p
        if p.F is None or not np.any(p.F):
            return None
        g = p.grid
        rhs = g.T(p.F)
        if self.eq is None:
            return p.F, rhs
        return p.F, self.eq.solve(rhs)

    def wF_at(self, state, z):
        F, w = state
        g = self.p.grid
        dens = F if self.eq is None else F - self.eq.density(w)
        return g.T_at(dens, np.atleast_1d(np.asarray(z, complex)))


# ---------------------------------------------------------------------------
# singular system and reduction
# ---------------------------------------------------------------------------


@dataclass
class SingularSystem:
    K3: np.ndarray
    N1: np.ndarray
    N2: np.ndarray
    N3: np.ndarray
    C: np.ndarray

    @property
    def K(self):
        return np.real(self.K3 + self.N1 + self.N2 + self.N3)

    @property
    def imaginary_leak(self):
        """Largest imaginary part of K3 + N3, the two halves of Re[conj(l) C(l eta)]/(2 pi)."""
        return float(np.max(np.abs(np.imag(self.K3 + self.N3))))


@dataclass
class FredholmSystem:
    matrix: np.ndarray      # 4 M K (identity plus compact)
    rhs: np.ndarray         # 4 M gamma_0
    M: np.ndarray
    kernel_bound: float
    singular: SingularSystem
    gamma0: np.ndarray

    @property
    def N(self):
        return self.matrix - np.eye(self.matrix.shape[0])


def rhs_gamma0(problem: McProblem, table: BoundaryKernels, evaluator: CauchyEvaluator | None = None):
    """gamma_0 = gamma - Re[conj(l) w_gamma^+] - Re[conj(l) w_F] on the boundary nodes."""
    ev = evaluator or CauchyEvaluator(problem, table)
    l = problem.l
    wg = ev.trace(l * problem.gamma)
    g0 = problem.gamma - np.real(np.conj(l) * wg)
    st = ev.wF()
    wf = None
    if st is not None:
        wf = ev.wF_at(st, problem.domain.t)
        g0 = g0 - np.real(np.conj(l) * wf)
    return g0, {"w_gamma_trace": wg, "w_F_trace": wf, "w_F_state": st}


def _darg_matrix(domain):
    """Nystrom matrix of d arg(t - zeta) with the smooth diagonal limit."""
    t = domain.t
    diff = t[None, :] - t[:, None]
    np.fill_diagonal(diff, 1.0)
    D = np.imag(domain.dts[None, :] / diff)
    np.fill_diagonal(D, 0.5 * np.imag(domain.d2 / domain.dts))
    return D * domain.h[None, :]


def assemble_singular_system(problem: McProblem, table: BoundaryKernels, C=None) -> SingularSystem:
    d = problem.domain
    l = problem.l
    lc = np.conj(l)
    C = pv_matrix(d) if C is None else C
    K3 = (lc[:, None] * C * l[None, :] + l[:, None] * C * lc[None, :]) / (4 * np.pi)
    N3 = -1j / TWO_PI * l[:, None] * lc[None, :] * _darg_matrix(d)
    N2 = lc[:, None] * table.G1r * (l * d.dt)[None, :] / TWO_PI
    N1 = lc[:, None] * table.G2q * np.conj(l * d.dts)[None, :] / TWO_PI
    return SingularSystem(K3, N1, N2, N3, C)


def kernel_bound(Nmat, domain, nu=0.5):
    """max |k(zeta, t)| |zeta - t|^nu over off-diagonal node pairs (k per unit arclength)."""
    ds = np.abs(domain.dt)
    dist = np.abs(domain.t[None, :] - domain.t[:, None])
    np.fill_diagonal(dist, np.inf)
    vals = np.abs(Nmat) / ds[None, :] * np.where(np.isfinite(dist), dist, 0.0) ** nu
    np.fill_diagonal(vals, 0.0)
    return float(np.max(vals))


def reduce_to_fredholm(system: SingularSystem, gamma0, domain: Domain,
                       reference_bound=None) -> FredholmSystem:
    M = -system.C / TWO_PI
    A = 4 * M @ system.K
    rhs = 4 * M @ gamma0
    bound = kernel_bound(A - np.eye(A.shape[0]), domain)
    if reference_bound is not None and bound > 10 * reference_bound:
        raise KernelBoundViolated(f"kernel bound grew from {reference_bound:.3g} to {bound:.3g}")
    return FredholmSystem(A, rhs, M, bound, system, np.asarray(gamma0, float))


def leading_kernel_k0(problem: McProblem, C=None):
    """Closed form of the kernel of 4 M K3 - I (per dt), for cross-checking the reduction."""
    d = problem.domain
    l = problem.l
    C = pv_matrix(d) if C is None else C
    v0 = C @ np.conj(l)
    u0 = C @ l
    t = d.t
    diff = t[None, :] - t[:, None]
    np.fill_diagonal(diff, 1.0)
    k = -(l[None, :] * (v0[:, None] - v0[None, :]) + np.conj(l)[None, :] * (u0[:, None] - u0[None, :])) \
        / diff / (2 * np.pi ** 2)
    np.fill_diagonal(k, 0.0)
    return _fill_diagonal(k, d) * d.dt[None, :]


# ---------------------------------------------------------------------------
# null space, pinning and reconstruction
# ---------------------------------------------------------------------------


def _stack(A):
    return np.vstack([A.real, A.imag])


def _nyquist_rows(domain):
    """Rows fixing the unresolved alternating mode of the density on each curve."""
    rows = []
    for j, c in enumerate(domain.curves):
        if c.M % 2 == 0:
            r = np.zeros(domain.N)
            r[domain.offsets[j]:domain.offsets[j + 1]] = (-1.0) ** np.arange(c.M)
            rows.append(r)
    return np.array(rows).reshape(len(rows), domain.N)


def _augmented(fred, domain):
    R = _nyquist_rows(domain)
    S = np.vstack([_stack(fred.matrix), R])
    b = np.concatenate([fred.rhs.real, fred.rhs.imag, np.zeros(R.shape[0])])
    return S, b


def _null_split(S, window=None, min_gap=1e3):
    """Split the singular values of S at the topmost gap of at least min_gap
    within the last ``window`` values (discretization error spreads the null
    cluster, so the first large drop marks it)."""
    U, s, Vt = np.linalg.svd(S, full_matrices=False)
    n = s.size
    window = n - 1 if window is None else min(window, n - 1)
    floor = 1e-300 * s[0]
    for k in range(n - window, n):
        ratio = s[k - 1] / max(s[k], floor)
        if ratio >= min_gap:
            return U, s, Vt, k, ratio
    return U, s, Vt, n, 0.0


def homogeneous_solutions(problem: McProblem, fred: FredholmSystem, ev: CauchyEvaluator,
                          tol=1e-6):
    """Null space of the stacked Fredholm system, restricted to densities that
    produce a nonzero solution (constants on hole curves with l = 1 do not)."""
    S, _ = _augmented(fred, problem.domain)
    N = S.shape[1]
    U, s, Vt, k, gap = _null_split(S, window=min(N - 1, 4 * problem.n + 8))
    V0 = Vt[k:].T                      # eta-null vectors
    P, Q = ev.trace_matrix()
    il = 1j * problem.l
    W = P @ (il[:, None] * V0) + Q @ np.conj(il[:, None] * V0)
    if V0.shape[1]:
        _, sw, vwt = np.linalg.svd(_stack(W), full_matrices=False)
        r = int(np.sum(sw > tol * max(sw[0], 1e-300)))
        E = V0 @ vwt[:r].T
    else:
        sw, r, E = np.zeros(0), 0, np.zeros((N, 0))
    return {"basis": E, "dimension": r, "eta_null_dimension": V0.shape[1],
            "singular_values": s, "gap": gap, "rank": k, "U": U, "Vt": Vt,
            "trace_singular_values": sw}


@dataclass
class McSolution:
    problem: McProblem
    eta: np.ndarray
    boundary: np.ndarray          # boundary trace of w
    phi: np.ndarray               # l (gamma + i eta)
    evaluator: CauchyEvaluator
    wF_state: object
    report: dict = field(default_factory=dict)
    _Phi: object = None

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        if self._Phi is None and self.evaluator.eq is not None:
            self._Phi = self.evaluator.area_solution(self.phi)
        out = self.evaluator.interior(self.phi, z, self._Phi)
        if self.wF_state is not None:
            out = out + self.evaluator.wF_at(self.wF_state, z)
        return out

    @property
    def grid_values(self):
        return self(self.problem.grid.nodes.ravel()).reshape(self.problem.grid.shape)

    def boundary_residual(self):
        p = self.problem
        return float(np.max(np.abs(np.real(np.conj(p.l) * self.boundary) - p.gamma)))

    def dbar_residual(self, probes=None, h=1e-4):
        """Centred-difference residual of dbar w + A w + B conj w - F at interior probes."""
        p = self.problem
        if probes is None:
            g = p.grid
            if g is None:
                probes = np.asarray(p.domain.interior_points)
            else:
                probes = g.nodes[g.nr // 3::max(g.nr // 4, 1), ::max(g.nt // 8, 1)].ravel()
        probes = np.atleast_1d(np.asarray(probes, complex))
        dx = (self(probes + h) - self(probes - h)) / (2 * h)
        dy = (self(probes + 1j * h) - self(probes - 1j * h)) / (2 * h)
        dbar = 0.5 * (dx + 1j * dy)
        w = self(probes)
        if p.coeffs is not None:
            A = p.coeffs.value("A", probes)
            B = p.coeffs.value("B", probes)
            F = p.grid.interp(p.F, probes)
        else:
            A = B = F = 0.0
        return float(np.max(np.abs(dbar + A * w + B * np.conj(w) - F)))


def _pin_value_rows(problem, ev, phis, traces):
    """Pin functionals for a list of densities phi (with matching boundary traces)."""
    c = problem.conditions
    d = problem.domain
    rows = []
    for z in c.interior:
        vals = np.array([ev.interior(ph, [z])[0] for ph in phis])
        rows.append(vals.real)
        rows.append(vals.imag)
    for z in c.boundary:
        cid, s = d.nearest_curve_param(z)
        sl = slice(d.offsets[cid], d.offsets[cid + 1])
        lz = trig_interp(problem.l[sl], s)[0]
        vals = np.array([np.imag(np.conj(lz) * trig_interp(tr[sl], s)[0]) for tr in traces])
        rows.append(vals)
    return np.array(rows).reshape(len(rows), len(phis))


class _Refiner:
    """Defect correction of table-based solves against the area-based operator."""

    def __init__(self, problem, ev, hom, fred):
        self.p, self.ev, self.fred = problem, ev, fred
        U, s, Vt, k = hom["U"], hom["singular_values"], hom["Vt"], hom["rank"]
        self.U, self.s, self.Vt, self.k = U[:, :k], s[:k], Vt[:k], k
        self.nny = _nyquist_rows(problem.domain).shape[0]
        self.solves = 0

    def pinv(self, r):
        """Minimum-norm eta with K eta ~ r in the table-based system."""
        b4 = 4 * self.fred.M @ r
        b = np.concatenate([b4.real, b4.imag, np.zeros(self.nny)])
        return self.Vt.T @ ((self.U.T @ b) / self.s)

    def K(self, eta):
        self.solves += 1
        l = self.p.l
        return np.real(np.conj(l) * self.ev.trace_area(1j * l * eta))

    def refine(self, eta, target, steps=8, tol=1e-13):
        scale = max(np.max(np.abs(target)), 1.0)
        hist = []
        for _ in range(steps):
            r = target - self.K(eta)
            hist.append(float(np.max(np.abs(r))))
            if hist[-1] <= tol * scale:
                break
            eta = eta + self.pinv(r)
        return eta, hist


def solve_eta_reconstruct(problem: McProblem, fred: FredholmSystem | None = None,
                          ev: CauchyEvaluator | None = None, table: BoundaryKernels | None = None,
                          enforce_dimension=True, refine=True):
    if table is None:
        table = boundary_kernels(problem)
    if ev is None:
        ev = CauchyEvaluator(problem, table)
    d = problem.domain
    l = problem.l
    if fred is None:
        g0, _ = rhs_gamma0(problem, table, ev)
        sysm = assemble_singular_system(problem, table, ev.C)
        fred = reduce_to_fredholm(sysm, g0, d)
    hom = homogeneous_solutions(problem, fred, ev)
    expected = problem.expected_dimension
    if enforce_dimension and hom["dimension"] != expected:
        raise WrongNullspaceDimension(
            f"homogeneous space has dimension {hom['dimension']}, expected {expected}",
            hom["dimension"], expected)
    ref = _Refiner(problem, ev, hom, fred)
    refine = refine and ev.eq is not None

    # accurate right-hand side and particular density
    wF_state = ev.wF()
    wF_tr = ev.wF_at(wF_state, d.t) if wF_state is not None else None
    if refine:
        g0 = problem.gamma - np.real(np.conj(l) * ev.trace_area(l * problem.gamma))
        if wF_tr is not None:
            g0 = g0 - np.real(np.conj(l) * wF_tr)
    else:
        g0 = fred.gamma0
    eta_p = ref.pinv(g0)
    hist = []
    if refine:
        eta_p, hist = ref.refine(eta_p, g0)
    E = hom["basis"]
    if refine and E.shape[1]:
        cols = [ref.refine(E[:, j], np.zeros(d.N))[0] for j in range(E.shape[1])]
        E = np.linalg.qr(np.array(cols).T)[0]

    def trace(phi):
        return ev.trace_area(phi) if refine else ev.trace(phi)

    eta = eta_p
    pin_cond = None
    c = problem.conditions
    if E.shape[1]:
        if c.count != E.shape[1]:
            raise PinningSingular(f"{c.count} side conditions for a {E.shape[1]}-dimensional "
                                  "homogeneous space")
        phis = [1j * l * E[:, j] for j in range(E.shape[1])]
        R = _pin_value_rows(problem, ev, phis, [trace(ph) for ph in phis])
        ph0 = l * (problem.gamma + 1j * eta_p)
        tr0 = trace(ph0)
        if wF_tr is not None:
            tr0 = tr0 + wF_tr
        r0 = _pin_value_rows(problem, ev, [ph0], [tr0])[:, 0]
        if wF_state is not None:
            # the interior rows of ph0 do not include w_F yet
            for i, z in enumerate(c.interior):
                v = ev.wF_at(wF_state, [z])[0]
                r0[2 * i] += v.real
                r0[2 * i + 1] += v.imag
        tgt = np.array([x for v in c.interior_values for x in (complex(v).real, complex(v).imag)]
                       + [float(v) for v in c.boundary_values])
        pin_cond = float(np.linalg.cond(R))
        if not np.isfinite(pin_cond) or pin_cond > 1e10:
            raise PinningSingular(f"pin matrix condition number {pin_cond:.3g}")
        coef = np.linalg.solve(R, tgt - r0)
        eta = eta_p + E @ coef
    phi = l * (problem.gamma + 1j * eta)
    tr = trace(phi)
    if wF_tr is not None:
        tr = tr + wF_tr
    sol = McSolution(problem, eta, tr, phi, ev, wF_state)
    res_f = float(np.max(np.abs(fred.matrix @ eta - fred.rhs)))
    res_s = float(np.max(np.abs(fred.singular.K @ eta - fred.gamma0)))
    sol.report = {
        "n": problem.n,
        "m": problem.m,
        "dimension": hom["dimension"],
        "expected_dimension": expected,
        "eta_null_dimension": hom["eta_null_dimension"],
        "singular_value_gap": float(hom["gap"]),
        "smallest_singular_values": [float(v) for v in hom["singular_values"][-(expected + 3):]],
        "fredholm_residual": res_f,
        "singular_residual": res_s,
        "kernel_bound": fred.kernel_bound,
        "imaginary_leak": fred.singular.imaginary_leak,
        "refinement_history": hist,
        "area_solves": ref.solves,
        "boundary_residual": sol.boundary_residual(),
        "pin_condition": pin_cond,
        "density_consistency": float(np.max(np.abs(np.imag(np.conj(l) * tr) - eta))),
    }
    sol.fredholm = fred
    return sol


def solve(problem: McProblem, **kw) -> McSolution:
    problem.validate_conditions()
    return solve_eta_reconstruct(problem, **kw)


def equivalence_ok(report, factor=10.0, floor=1e-13):
    """Singular-equation residual within factor x the Fredholm solve residual."""
    return report["singular_residual"] <= factor * max(report["fredholm_residual"], floor)


def problemB_solubility(w_boundary, domain: Domain):
    """int_{Gamma_j} w dz over each hole curve, counterclockwise (real part is the moment)."""
    w = np.asarray(w_boundary, complex)
    out = []
    for j in range(1, len(domain.curves)):
        sl = slice(domain.offsets[j], domain.offsets[j + 1])
        out.append(complex(-np.sum(w[sl] * domain.dt[sl])))
    return out


# ---------------------------------------------------------------------------
# adjoint problem for negative index on the disk
# ---------------------------------------------------------------------------


def adjoint_null_space(problem, adjoint_resolution=None):
    """Solutions of the homogeneous adjoint problem of a negative-index disk problem.

    Coefficients (-A, -conj B), boundary field L = conj(l t') (index k - 1).
    Returns [(v on the problem's boundary nodes, v on the problem's grid)] and
    an info dict.
    """
    res = {"M": 64, "nr": 24, "nt": 64}
    res.update(adjoint_resolution or {})
    g = problem.grid
    Mb = int(res["M"])
    dom = Domain.disk(Mb)
    lf = problem.l / np.abs(problem.l)
    s_coarse = TWO_PI * np.arange(Mb) / Mb
    lc = trig_interp(lf, s_coarse)
    L = np.conj(lc * 1j * dom.t)
    trivial = not (np.any(problem.A) or np.any(problem.B))
    if trivial:
        adj = McProblem(dom, l=L, check_index=False)
    else:
        cg = PolarGrid(int(res["nr"]), int(res["nt"]))
        pts = cg.nodes.ravel()
        Ac = -g.interp(problem.A, pts).reshape(cg.shape)
        Bc = -np.conj(g.interp(problem.B, pts)).reshape(cg.shape)
        adj = McProblem(dom, Ac, Bc, None, L, 0.0, grid=cg, check_index=False)
    table = boundary_kernels(adj)
    ev = CauchyEvaluator(adj, table)
    sysm = assemble_singular_system(adj, table, ev.C)
    fred = reduce_to_fredholm(sysm, np.zeros(dom.N), dom)
    hom = homogeneous_solutions(adj, fred, ev)
    out = []
    s_fine = TWO_PI * np.arange(problem.M) / problem.M
    for j in range(hom["dimension"]):
        phi = 1j * adj.l * hom["basis"][:, j]
        vb_c = ev.trace(phi)
        vb = trig_interp(vb_c, s_fine)
        va = ev.interior(phi, g.nodes.ravel()).reshape(g.shape)
        out.append((vb, va))
    info = {"dimension": hom["dimension"], "expected": 2 * adj.n + 1,
            "singular_values": [float(v) for v in hom["singular_values"][-(2 * adj.n + 4):]],
            "resolution": res}
    return out, info

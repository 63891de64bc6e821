"""Area and boundary integral operators.

The area operators live on polar grids (Gauss-Legendre in r, trapezoid in
theta) over a disk or a concentric annulus.  A grid function is split into
angular Fourier modes f_k(rho) e^{ik theta}; for each mode the Cauchy-Green
operator reduces to one-dimensional radial integrals

    k >= 1:  T maps f_k e^{ik th} to -2 e^{i(k-1)th} int_{r}^{R} f_k (r/rho)^{k-1} drho
    k <= 0:  T maps f_k e^{ik th} to  2 e^{i(k-1)th} int_{r0}^{r} f_k (rho/r)^{1-k} drho

which are evaluated by product integration: a Gauss rule on the partial
interval plus barycentric interpolation of f_k from the grid radii.  The
1/(zeta - z) singularity never enters the quadrature, so the rule needs no
target-dependent recentring.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NearBoundaryUnresolved
from .geometry import Domain, spectral_diff_matrix

TWO_PI = 2.0 * np.pi


def _bary_weights_gl(x, w):
    return (-1.0) ** np.arange(x.size) * np.sqrt((1 - x**2) * w)


def _bary_matrix(nodes, bw, x):
    """Barycentric interpolation matrix from ``nodes`` to points ``x``."""
    x = np.atleast_1d(np.asarray(x, float))
    d = x[:, None] - nodes[None, :]
    exact = np.abs(d) < 1e-15
    d = np.where(exact, 1.0, d)
    t = bw[None, :] / d
    L = t / np.sum(t, axis=1, keepdims=True)
    rows = np.any(exact, axis=1)
    if np.any(rows):
        L[rows] = exact[rows].astype(float)
    return L


def _bary_diff_matrix(nodes, bw):
    n = nodes.size
    D = np.zeros((n, n))
    for i in range(n):
        d = nodes[i] - nodes
        d[i] = 1.0
        D[i] = bw / bw[i] / d
        D[i, i] = 0.0
        D[i, i] = -np.sum(D[i])
    return D


class PolarGrid:
    """Polar quadrature grid on {r_in <= |z - center| <= r_out}."""

    def __init__(self, nr, nt, r_in=0.0, r_out=1.0, center=0.0, nq=None):
        self.nr, self.nt = int(nr), int(nt)
        self.r_in, self.r_out = float(r_in), float(r_out)
        self.center = complex(center)
        x, w = leggauss(self.nr)
        half = 0.5 * (self.r_out - self.r_in)
        self._x = x
        self.rho = self.r_in + half * (x + 1)
        self.wr = half * w
        self.bw = _bary_weights_gl(x, w)
        self.theta = TWO_PI * np.arange(self.nt) / self.nt
        self.eith = np.exp(1j * self.theta)
        self.local = self.rho[:, None] * self.eith[None, :]
        self.nodes = self.center + self.local
        self.weights = (self.wr * self.rho)[:, None] * (TWO_PI / self.nt) * np.ones((1, self.nt))
        self.k = np.fft.fftfreq(self.nt, 1.0 / self.nt).astype(int)
        self.nq = int(nq) if nq else self.nr + 32
        self._xq, self._wq = leggauss(self.nq)
        self._rowcache = {}
        self._grid_rows = {}
        self._Dr = None

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return (self.nr, self.nt)

    @property
    def size(self):
        return self.nr * self.nt

    @property
    def area(self):
        return np.pi * (self.r_out**2 - self.r_in**2)

    def integrate(self, f):
        return np.sum(self.weights * f)

    def sample(self, func):
        return func(self.nodes)

    def modes(self, f):
        return np.fft.fft(f, axis=1) / self.nt

    def from_modes(self, F):
        return np.fft.ifft(F, axis=1) * self.nt

    def radial_interp_matrix(self, r):
        return _bary_matrix(self.rho, self.bw, r)

    def interp(self, f, z):
        """Spectral interpolation of a grid function at arbitrary points."""
        z = np.atleast_1d(np.asarray(z, complex)) - self.center
        F = self.modes(f)
        out = np.empty(z.shape, complex)
        r = np.abs(z)
        th = np.angle(z)
        kk = self.k.astype(float)
        if self.nt % 2 == 0:
            F = F.copy()
            F[:, self.nt // 2] *= 0.5
            kk = np.append(kk, -self.nt // 2)
            F = np.concatenate([F, F[:, self.nt // 2:self.nt // 2 + 1]], axis=1)
        for s in range(0, z.size, 2048):
            sl = slice(s, s + 2048)
            L = self.radial_interp_matrix(r[sl])
            Fr = L @ F
            out[sl] = np.sum(Fr * np.exp(1j * np.outer(th[sl], kk)), axis=1)
        return out

    # ------------------------------------------------------------------
    # radial rows for the mode-wise operators
    # ------------------------------------------------------------------
    def _rows(self, r, op):
        """Matrices R[k, i] mapping f_k(rho_i) to the output mode coefficient at r."""
        key = (op, float(r))
        cached = self._rowcache.get(key)
        if cached is not None:
            return cached
        nt, nr = self.nt, self.nr
        k = self.k.astype(float)
        R = np.zeros((nt, nr))
        a, b = self.r_in, self.r_out
        up_lo, up_hi = max(r, a), b
        lo_lo, lo_hi = a, min(r, b)
        pos = k >= 1
        neg = ~pos
        if up_hi > up_lo:
            rq = up_lo + 0.5 * (up_hi - up_lo) * (self._xq + 1)
            wq = 0.5 * (up_hi - up_lo) * self._wq
            L = self.radial_interp_matrix(rq) * wq[:, None]
            kp = k[pos]
            if op == "T":
                K = -2.0 * (r / rq[None, :]) ** (kp[:, None] - 1)
            else:
                K = -2.0 * (kp[:, None] - 1) * (r / rq[None, :]) ** np.maximum(kp[:, None] - 2, 0) \
                    / rq[None, :]
                K[kp == 1] = 0.0
            R[pos] = K @ L
        if lo_hi > lo_lo and r > 0:
            rq = lo_lo + 0.5 * (lo_hi - lo_lo) * (self._xq + 1)
            wq = 0.5 * (lo_hi - lo_lo) * self._wq
            L = self.radial_interp_matrix(rq) * wq[:, None]
            kn = k[neg]
            if op == "T":
                K = 2.0 * (rq[None, :] / r) ** (1 - kn[:, None])
            else:
                K = 2.0 * (kn[:, None] - 1) * (rq[None, :] / r) ** (1 - kn[:, None]) / r
            R[neg] = K @ L
        if len(self._rowcache) < 4096:
            self._rowcache[key] = R
        return R

    def _grid_R(self, op):
        if op not in self._grid_rows:
            self._grid_rows[op] = np.stack([self._rows(r, op) for r in self.rho], axis=1)
        return self._grid_rows[op]  # (nt, nr_target, nr_source)

    def _drop(self, F, op):
        F = F.copy()
        half = self.nt // 2
        F[..., half] = 0.0
        if op == "Pi":
            F[..., (half + 1) % self.nt] = 0.0
        return F

    # ------------------------------------------------------------------
    # Cauchy-Green operator T and its derivative Pi
    # ------------------------------------------------------------------
    def T(self, f):
        """T f on the grid nodes."""
        F = self._drop(self.modes(f), "T")
        R = self._grid_R("T")
        C = np.einsum("kai,ik->ak", R, F)
        return self.from_modes(np.roll(C, -1, axis=1))

    def Pi(self, f):
        """Pi f = d/dz T f on the grid nodes."""
        F = self._drop(self.modes(f), "Pi")
        R = self._grid_R("Pi")
        C = np.einsum("kai,ik->ak", R, F) + F
        return self.from_modes(np.roll(C, -2, axis=1))

    def _at(self, f, z, op):
        z = np.atleast_1d(np.asarray(z, complex))
        u = z - self.center
        r = np.abs(u)
        F = self._drop(self.modes(f), op)
        shift = 1 if op == "T" else 2
        kk = self.k.astype(float) - shift
        out = np.empty(z.shape, complex)
        rr = np.round(r, 14)
        for rv in np.unique(rr):
            idx = np.nonzero(rr == rv)[0]
            R = self._rows(float(rv), op)
            C = np.einsum("ki,ik->k", R, F)
            if op == "Pi" and self.r_in <= rv <= self.r_out:
                L = self.radial_interp_matrix([rv])[0]
                C = C + L @ F
            if rv == 0.0:
                # only the mode landing on e^{0 i th} survives at the centre
                out[idx] = np.sum(C[kk == 0])
                continue
            ph = np.exp(1j * np.outer(np.angle(u[idx]), kk))
            out[idx] = ph @ C
        return out

    def T_at(self, f, z):
        return self._at(f, z, "T")

    def Pi_at(self, f, z):
        return self._at(f, z, "Pi")

    # ------------------------------------------------------------------
    # spectral derivatives of grid functions
    # ------------------------------------------------------------------
    def d_r(self, f):
        if self._Dr is None:
            self._Dr = _bary_diff_matrix(self.rho, self.bw)
        return self._Dr @ f

    def d_theta(self, f):
        k = self.k.astype(float)
        if self.nt % 2 == 0:
            k[self.nt // 2] = 0.0
        return self.from_modes(self.modes(f) * 1j * k[None, :])

    def dz(self, f):
        r = self.rho[:, None]
        return 0.5 * np.conj(self.eith)[None, :] * (self.d_r(f) - 1j / r * self.d_theta(f))

    def dzbar(self, f):
        r = self.rho[:, None]
        return 0.5 * self.eith[None, :] * (self.d_r(f) + 1j / r * self.d_theta(f))

    # ------------------------------------------------------------------
    # holomorphic polynomials on the grid
    # ------------------------------------------------------------------
    def poly(self, coeffs, offset=0):
        """sum_j coeffs[j] (z - center)^(j + offset) on the nodes, exact at nodes."""
        coeffs = np.asarray(coeffs, complex)
        p = np.arange(coeffs.size) + offset
        out = np.zeros((self.nr, self.nt), complex)
        idx = p % self.nt
        for a, r in enumerate(self.rho):
            acc = np.zeros(self.nt, complex)
            np.add.at(acc, idx, coeffs * r ** p.astype(float))
            out[a] = np.fft.ifft(acc) * self.nt
        return out

    # ------------------------------------------------------------------
    # unit-disk operators P_n and P*_k
    # ------------------------------------------------------------------
    def _require_unit_disk(self):
        if self.r_in != 0.0 or abs(self.r_out - 1.0) > 1e-14 or self.center != 0:
            raise ValueError("P_n and P*_k are defined on the unit disk grid only")

    def moments_conj(self, f, start, shift):
        """conj(2 sum_i wr_i rho_i^(j+shift) F_{-(j+start)}(rho_i)) for j >= 0."""
        F = self.modes(f)
        half = self.nt // 2
        js = np.arange(0, half - start + 1)
        mode_idx = (-(js + start)) % self.nt
        pw = self.rho[:, None] ** (js[None, :] + shift)
        vals = 2.0 * np.sum(self.wr[:, None] * pw * F[:, mode_idx], axis=0)
        return np.conj(vals)

    def Pn_correction(self, f, n):
        """Coefficients c_j of J(z) = sum_j c_j z^j with P_n f = T f - z^(2n+1) J."""
        return self.moments_conj(f, 0, 1)

    def Pn(self, f, n):
        self._require_unit_disk()
        c = self.Pn_correction(f, n)
        return self.T(f) - self.poly(c, 2 * n + 1)

    def Pn_at(self, f, n, z):
        self._require_unit_disk()
        z = np.atleast_1d(np.asarray(z, complex))
        c = self.Pn_correction(f, n)
        return self.T_at(f, z) - z ** (2 * n + 1) * np.polynomial.polynomial.polyval(z, c)

    def Pstar_correction(self, f, k):
        return self.moments_conj(f, 2 * k - 1, 2 * k)

    def Pstar(self, f, k):
        self._require_unit_disk()
        return self.T(f) - self.poly(self.Pstar_correction(f, k), 0)

    def Pstar_at(self, f, k, z):
        self._require_unit_disk()
        z = np.atleast_1d(np.asarray(z, complex))
        d = self.Pstar_correction(f, k)
        return self.T_at(f, z) - np.polynomial.polynomial.polyval(z, d)


# ---------------------------------------------------------------------------
# analytic T of the indicator of a disk times (zeta - t)/conj(zeta - t)
# ---------------------------------------------------------------------------


def _T_unit_disk_phase(z, t):
    z = np.asarray(z, complex)
    t = complex(t)
    out = np.empty(z.shape, complex)
    zin = np.abs(z) < 1
    tin = abs(t) <= 1
    d = z - t
    with np.errstate(divide="ignore", invalid="ignore"):
        if tin:
            a = zin
            dd = d[a]
            lg = np.where(np.abs(dd) > 0, np.log(np.abs(dd) ** 2), 0.0)
            out[a] = dd * (lg - np.log(1 - np.conj(t) * z[a])) + t
            b = ~zin
            out[b] = d[b] * np.log(1 - t / z[b]) + t
        else:
            a = zin
            out[a] = d[a] * (np.log(np.abs(d[a]) ** 2) - np.log(1 - z[a] / t)
                             - np.log(abs(t) ** 2)) + 1 / np.conj(t)
            b = ~zin
            out[b] = d[b] * np.log(1 - 1 / (np.conj(t) * z[b])) + 1 / np.conj(t)
    out[np.abs(d) == 0] = t if tin else 1 / np.conj(t)
    return out


def T_disk_phase(z, t, radius=1.0, center=0.0):
    """T of 1_{|zeta-c|<R} (zeta - t)/conj(zeta - t), evaluated at z."""
    R = float(radius)
    zz = (np.asarray(z, complex) - center) / R
    return R * _T_unit_disk_phase(zz, (t - center) / R)


def T_region_phase(grid: PolarGrid, z, t):
    out = T_disk_phase(z, t, grid.r_out, grid.center)
    if grid.r_in > 0:
        out = out - T_disk_phase(z, t, grid.r_in, grid.center)
    return out


# ---------------------------------------------------------------------------
# Schwarz operator on the unit circle
# ---------------------------------------------------------------------------


def schwarz_coeffs(gamma):
    """Taylor coefficients a_k of S gamma = a_0 + sum a_k z^k (gamma real samples)."""
    g = np.asarray(gamma, float)
    M = g.size
    c = np.fft.fft(g) / M
    half = M // 2
    a = np.zeros(half + 1, complex)
    a[0] = c[0].real
    a[1:half] = 2 * c[1:half]
    if M % 2 == 0:
        a[half] = c[half].real
    else:
        a[half] = 2 * c[half]
    return a


def schwarz_operator(gamma, z):
    return np.polynomial.polynomial.polyval(np.asarray(z, complex), schwarz_coeffs(gamma))


def schwarz_quadrature(gamma, z):
    """Direct trapezoid evaluation of the Schwarz integral (reference only)."""
    g = np.asarray(gamma, float)
    M = g.size
    t = np.exp(1j * TWO_PI * np.arange(M) / M)
    z = np.atleast_1d(np.asarray(z, complex))
    ker = (t[None, :] + z[:, None]) / (t[None, :] - z[:, None])
    return ker @ g / M


# ---------------------------------------------------------------------------
# boundary Cauchy integrals and principal values
# ---------------------------------------------------------------------------


def pv_matrix(domain: Domain):
    """Matrix C with (C f)_i = PV int_{b Omega} f(t) dt / (t - zeta_i).

    Off-diagonal entries are the trapezoid weights dt_j/(t_j - zeta_i); the
    diagonal realizes the subtraction rule pi i f(zeta) + int (f(t) - f(zeta))
    dt/(t - zeta), whose removable value at t = zeta is f_s(zeta) (a row of the
    spectral derivative on the node's own curve).
    """
    t = domain.t
    dt = domain.dt
    N = domain.N
    diff = t[None, :] - t[:, None]
    np.fill_diagonal(diff, 1.0)
    C = dt[None, :] / diff
    np.fill_diagonal(C, 0.0)
    C[np.diag_indices(N)] = np.pi * 1j - np.sum(C, axis=1)
    for j, c in enumerate(domain.curves):
        sl = slice(domain.offsets[j], domain.offsets[j + 1])
        C[sl, sl] += c.h * spectral_diff_matrix(c.M)
    return C


def pv_integral(f, domain: Domain, index=None):
    """PV int f(t)/(t - zeta) dt at boundary node(s) ``index`` (all by default)."""
    f = np.asarray(f, complex)
    t = domain.t
    dt = domain.dt
    idx = np.arange(domain.N) if index is None else np.atleast_1d(index)
    fs = np.concatenate([np.fft.ifft(np.fft.fft(v) * 1j * _nyq_free(v.size))
                         for v in domain.split(f)])
    out = np.empty(idx.size, complex)
    for n, i in enumerate(idx):
        d = t - t[i]
        d[i] = 1.0
        integ = (f - f[i]) * dt / d
        integ[i] = fs[i] * domain.h[i]
        out[n] = np.sum(integ) + np.pi * 1j * f[i]
    return out if index is None or np.ndim(index) else out[0]


def _nyq_free(M):
    k = np.fft.fftfreq(M, 1.0 / M)
    if M % 2 == 0:
        k[M // 2] = 0.0
    return k


def cauchy_plain(phi, domain: Domain, z):
    """(1/2 pi i) int phi dt/(t - z) by the trapezoid rule."""
    z = np.atleast_1d(np.asarray(z, complex))
    ker = domain.dt[None, :] / (domain.t[None, :] - z[:, None])
    return ker @ np.asarray(phi, complex) / (TWO_PI * 1j)


def cauchy_barycentric(phi, domain: Domain, z):
    """Cauchy integral at interior z in barycentric form (stable near b Omega)."""
    z = np.atleast_1d(np.asarray(z, complex))
    out = np.empty(z.shape, complex)
    phi = np.asarray(phi, complex)
    for s in range(0, z.size, 1024):
        sl = slice(s, s + 1024)
        d = domain.t[None, :] - z[sl, None]
        hit = np.abs(d) < 1e-14
        d = np.where(hit, 1.0, d)
        ker = domain.dt[None, :] / d
        val = (ker @ phi) / np.sum(ker, axis=1)
        rows = np.any(hit, axis=1)
        if np.any(rows):
            val[rows] = phi[np.argmax(hit[rows], axis=1)]
        out[sl] = val
    return out


def cauchy_polar(phi, domain: Domain, z):
    """Cauchy integral of boundary samples on a disk or concentric annulus,
    summed from the Fourier coefficients on each circle (accurate up to the
    boundary, where direct quadrature is not)."""
    z = np.atleast_1d(np.asarray(z, complex))
    phi = np.asarray(phi, complex)
    out = np.zeros(z.shape, complex)
    for j, c in enumerate(domain.curves):
        sl = slice(domain.offsets[j], domain.offsets[j + 1])
        cen, r = c.circle_params()
        M = c.M
        th = np.angle(domain.t[sl] - cen)
        k = np.fft.fftfreq(M, 1.0 / M).astype(int)
        if M % 2 == 0:
            k = k[k != -(M // 2)]
        coef = np.exp(-1j * np.outer(k, th)) @ phi[sl] / M
        if M % 2 == 0:
            # Nyquist mode split evenly between the two sides
            ny = np.sum(phi[sl] * np.exp(-1j * (M // 2) * th)) / M
        else:
            ny = 0.0
        u = (z - cen) / r
        if j == 0:
            kk = k[k >= 0]
            vals = np.polynomial.polynomial.polyval(u, coef[k >= 0][np.argsort(kk)])
            if M % 2 == 0:
                vals = vals + 0.5 * ny * u ** (M // 2)
            out += vals
        else:
            kk = -k[k < 0]
            cc = np.zeros(kk.max() + 1 if kk.size else 1, complex)
            cc[kk] = coef[k < 0]
            vals = np.polynomial.polynomial.polyval(1.0 / u, cc)
            if M % 2 == 0:
                vals = vals + 0.5 * ny * u ** (-(M // 2))
            out += vals
    return out


def cauchy_boundary(phi, domain: Domain, z, side="interior"):
    """Cauchy integral of boundary samples phi.

    side = interior / exterior: trapezoid value (NearBoundaryUnresolved when
    the target is within a mesh width of the boundary); side = on_curve: the
    interior Plemelj limit phi/2 + (1/2 pi i) PV integral at a node.
    """
    phi = np.asarray(phi, complex)
    if side == "on_curve":
        idx = domain.node_index(z)
        if idx is None:
            raise NearBoundaryUnresolved("on-curve evaluation needs a boundary node")
        return 0.5 * phi[idx] + pv_integral(phi, domain, idx) / (TWO_PI * 1j)
    z = np.atleast_1d(np.asarray(z, complex))
    if np.min(np.abs(z[:, None] - domain.t[None, :])) < domain.mesh_width():
        raise NearBoundaryUnresolved("target within one mesh width of the boundary")
    return cauchy_plain(phi, domain, z)


# ---------------------------------------------------------------------------
# Hoelder diagnostics
# ---------------------------------------------------------------------------


def holder_norm_estimate(values, points, alpha, min_dist=None, max_points=3000):
    """Sup norm and discrete Hoelder(alpha) seminorm over node pairs."""
    v = np.asarray(values).ravel()
    p = np.asarray(points, complex).ravel()
    if v.size > max_points:
        sel = np.linspace(0, v.size - 1, max_points).round().astype(int)
        v, p = v[sel], p[sel]
    d = np.abs(p[:, None] - p[None, :])
    if min_dist is None:
        dd = d + np.diag(np.full(p.size, np.inf))
        min_dist = float(np.median(np.min(dd, axis=1)))
    mask = d >= min_dist * (1 - 1e-12)
    mask &= d > 0
    diff = np.abs(v[:, None] - v[None, :])
    semi = float(np.max(diff[mask] / d[mask] ** alpha)) if np.any(mask) else 0.0
    return {"sup": float(np.max(np.abs(v))), "seminorm": semi, "mesh": min_dist}

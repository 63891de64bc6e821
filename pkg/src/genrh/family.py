"""Parameter sweeps: continuity in lambda, uniform Hoelder bounds, lambda-derivatives.

Every slice is solved on Omega^lam = Gamma(Omega, lam) and pulled back to the
reference domain, so all norms are measured on w^lam o Gamma^lam over one
fixed set of reference points.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mc_solver
from .disk_solver import SideConditions
from .errors import GenRHError
from .geometry import DomainFamily, spectral_derivative
from .operators import holder_norm_estimate

log = logging.getLogger(__name__)

CSV_SCHEMA = "# genrh-csv v1"


def _zero_coeffs(lam):
    return 0.0, 0.0, 0.0


def _no_pins(lam):
    return SideConditions()


@dataclass
class FamilyProblem:
    """Problem A on a family of domains.

    coefficients(lam) -> (A, B, F), each a constant or a callable of the
    physical point.  boundary(lam) -> (l, gamma), callables of the reference
    boundary point.  pins(lam) -> SideConditions whose points are reference
    points (mapped by Gamma^lam before solving).
    """

    family: DomainFamily
    boundary: object
    coefficients: object = _zero_coeffs
    pins: object = _no_pins
    order: int = 1
    area: tuple = (24, None)
    sample: tuple = (12, 48)

    def reference_points(self):
        nr, nt = self.sample
        return self.family.sample_points(nr, nt)

    @property
    def n_boundary(self):
        return self.family.base.t.size

    def slice(self, lam):
        fam = self.family
        dom = fam.domain(lam)
        A, B, F = self.coefficients(lam)
        l, gamma = self.boundary(lam)
        tref = fam.base.t
        lv = np.asarray(l(tref), complex) * np.ones(tref.shape)
        gv = np.asarray(gamma(tref), float) * np.ones(tref.shape)
        pins = self.pins(lam)
        cond = SideConditions(list(fam.embed(np.asarray(pins.interior, complex), lam)),
                              list(pins.interior_values),
                              list(fam.embed(np.asarray(pins.boundary, complex), lam)),
                              list(pins.boundary_values))
        return mc_solver.McProblem(dom, A, B, F, lv, gv, cond, area=self.area)


@dataclass
class SliceResult:
    lam: float
    values: np.ndarray | None    # pulled back to the reference points
    summary: dict
    solution: object = None
    error: str | None = None


def _pull_back(problem: FamilyProblem, sol, lam):
    ref = problem.reference_points()
    nb = problem.n_boundary
    inner = problem.family.embed(ref[:-nb], lam)
    return np.concatenate([sol(inner), sol.boundary])


def solve_slice(problem: FamilyProblem, lam, keep=False) -> SliceResult:
    try:
        prob = problem.slice(lam)
        sol = mc_solver.solve(prob)
        vals = _pull_back(problem, sol, lam)
        rep = sol.report
        summary = {"lam": float(lam), "index": prob.n, "dimension": rep.get("dimension"),
                   "boundary_residual": sol.boundary_residual(),
                   "fredholm_residual": rep.get("fredholm_residual"),
                   "sup": float(np.max(np.abs(vals)))}
        return SliceResult(float(lam), vals, summary, sol if keep else None)
    except GenRHError as exc:
        log.warning("slice lam=%g failed: %s", lam, exc)
        return SliceResult(float(lam), None, {"lam": float(lam)}, None,
                           f"{type(exc).__name__}: {exc}")


@dataclass
class SweepReport:
    lams: list
    slices: list
    continuity: list = field(default_factory=list)
    holder: list = field(default_factory=list)
    derivative: list = field(default_factory=list)
    mu: float = 0.5

    @property
    def errors(self):
        return [(s.lam, s.error) for s in self.slices if s.error]

    def summary(self):
        return {"lams": [float(x) for x in self.lams],
                "slices": [s.summary | ({"error": s.error} if s.error else {}) for s in self.slices],
                "continuity": self.continuity, "holder": self.holder,
                "derivative": self.derivative, "mu": self.mu}

    def write(self, out_dir, stem="sweep"):
        os.makedirs(out_dir, exist_ok=True)
        tables = {"slices": [s.summary for s in self.slices], "continuity": self.continuity,
                  "holder": self.holder, "derivative": self.derivative}
        paths = []
        for name, rows in tables.items():
            if not rows:
                continue
            path = os.path.join(out_dir, f"{stem}_{name}.csv")
            keys = sorted({k for r in rows for k in r})
            with open(path, "w", newline="", encoding="utf-8") as fh:
                fh.write(CSV_SCHEMA + f" table={name}\n")
                w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
                w.writeheader()
                for r in rows:
                    w.writerow({k: _fmt(r.get(k)) for k in keys})
            paths.append(path)
        path = os.path.join(out_dir, f"{stem}.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True, default=_fmt)
            fh.write("\n")
        paths.append(path)
        return paths


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def sweep(problem: FamilyProblem, lams, mu=0.5, threads=1) -> SweepReport:
    """Solve every slice, pull back, and fill the continuity and Hoelder tables."""
    lams = [float(x) for x in lams]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            slices = list(pool.map(lambda x: solve_slice(problem, x), lams))
        # results are ordered by lams, independent of completion order
    else:
        slices = [solve_slice(problem, x) for x in lams]
    rep = SweepReport(lams, slices, mu=mu)
    ref = problem.reference_points()
    indices = {s.summary.get("index") for s in slices if s.error is None}
    if len(indices) > 1:
        log.warning("index changes across the sweep: %s", sorted(indices))
    for s in slices:
        if s.values is None:
            continue
        h = holder_norm_estimate(s.values, ref, mu)
        rep.holder.append({"lam": s.lam, "sup": h["sup"], "seminorm": h["seminorm"],
                           "norm": h["sup"] + h["seminorm"], "mesh": h["mesh"]})
    alpha = mu / 2
    for a, b in zip(slices[:-1], slices[1:]):
        row = {"lam0": a.lam, "lam1": b.lam, "dlam": b.lam - a.lam}
        if a.values is None or b.values is None:
            row["error"] = "missing slice"
        else:
            d = b.values - a.values
            row["modulus"] = float(np.max(np.abs(d)))
            row["ratio"] = row["modulus"] / row["dlam"]
            ha = holder_norm_estimate(d, ref, alpha)
            row["diff_holder_alpha"] = ha["seminorm"] + ha["sup"]
        rep.continuity.append(row)
    return rep


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


def continuity_diagnostics(reports, jump_factor=10.0, bound_ratio=1.25, order_min=0.9,
                           stability=1.25):
    """Verdicts for (a) sup-norm continuity, (b) uniform Hoelder bound,
    (c) the interpolation surrogate.  ``reports`` are sweeps on nested grids,
    coarse first (a single report is accepted; orders are then not measured).
    """
    if isinstance(reports, SweepReport):
        reports = [reports]
    out = {"grids": [len(r.lams) for r in reports]}

    # (a) modulus
    per_grid = []
    flagged = []
    for r in reports:
        ratios = [row.get("ratio", math.inf) for row in r.continuity]
        mods = [row.get("modulus", math.inf) for row in r.continuity]
        med = float(np.median(ratios)) if ratios else 0.0
        for row in r.continuity:
            rt = row.get("ratio", math.inf)
            if rt > jump_factor * max(med, 1e-300) and row.get("modulus", 0) > 1e-10:
                flagged.append((row["lam0"], row["lam1"]))
        per_grid.append({"max_modulus": max(mods) if mods else 0.0,
                         "C": max(ratios) if ratios else 0.0})
    orders = []
    for a, b in zip(per_grid[:-1], per_grid[1:]):
        if a["max_modulus"] > 1e-13 and b["max_modulus"] > 1e-13:
            orders.append(math.log2(a["max_modulus"] / b["max_modulus"]))
    Cs = [g["C"] for g in per_grid]
    C_stable = all(c1 <= stability * c0 + 1e-12 for c0, c1 in zip(Cs[:-1], Cs[1:]))
    zero = all(g["max_modulus"] <= 1e-12 for g in per_grid)
    a_pass = (not flagged) and (zero or (C_stable and all(o >= order_min for o in orders)))
    out["a"] = {"pass": bool(a_pass), "per_grid": per_grid, "orders": orders,
                "C_stable": bool(C_stable), "flagged_pairs": sorted(set(flagged))}

    # (b) uniform Hoelder bound on the finest grid
    norms = [row["norm"] for row in reports[-1].holder]
    ratio = (max(norms) / min(norms)) if norms and min(norms) > 0 else (1.0 if norms else math.inf)
    out["b"] = {"pass": bool(ratio <= bound_ratio), "max_over_min": ratio,
                "max": max(norms) if norms else None}

    # (c) |dw|_alpha <= C ||w||_mu |dw|_0^eps
    mu = reports[-1].mu
    alpha = mu / 2
    eps = 0.5 * (mu - alpha) / mu
    Cc = []
    for r in reports:
        hn = {row["lam"]: row["norm"] for row in r.holder}
        vals = []
        for row in r.continuity:
            m0 = row.get("modulus")
            if m0 is None or m0 <= 1e-13 or row["lam0"] not in hn:
                continue
            vals.append(row["diff_holder_alpha"] / (hn[row["lam0"]] * m0**eps))
        Cc.append(max(vals) if vals else 0.0)
    c_stable = all(c1 <= 2.0 * c0 + 1e-12 for c0, c1 in zip(Cc[:-1], Cc[1:]))
    out["c"] = {"pass": bool(c_stable and all(np.isfinite(Cc))), "C": Cc, "alpha": alpha,
                "epsilon": eps}
    return out


# ---------------------------------------------------------------------------
# lambda-derivative
# ---------------------------------------------------------------------------


def _fd(fn, lam, h):
    return (np.asarray(fn(lam + h)) - np.asarray(fn(lam - h))) / (2 * h)


def _field_at(v, z):
    z = np.asarray(z, complex)
    return np.asarray(v(z) if callable(v) else v, complex) * np.ones(z.shape)


def _wz_interior(sol, prob, z, h=1e-5):
    dx = (sol(z + h) - sol(z - h)) / (2 * h)
    dy = (sol(z + 1j * h) - sol(z - 1j * h)) / (2 * h)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def _wz_boundary(sol, prob, A, B, F):
    """w_zeta and w_zetabar on the boundary nodes from the trace and the equation."""
    d = prob.domain
    w = sol.boundary
    t = d.t
    wzb = _field_at(F, t) - _field_at(A, t) * w - _field_at(B, t) * np.conj(w)
    parts = []
    for cid, (wv, tv) in enumerate(zip(d.split(w), d.split(t))):
        ds = spectral_derivative(wv)
        dt = spectral_derivative(tv)
        wb = d.split(wzb)[cid]
        parts.append((ds - wb * np.conj(dt)) / dt)
    return np.concatenate(parts), wzb


def lambda_derivative_check(problem: FamilyProblem, lam0, dlams=(1e-1, 5e-2, 2.5e-2, 1e-3),
                            h=1e-5):
    """Solve the derived problem at lam0 and compare with difference quotients.

    The derived solution u = d/dlam (w^lam o Gamma^lam) is E o Gamma + w_zeta
    Gamma_lam + w_zetabar conj(Gamma_lam) where E solves Problem A on
    Omega^lam0 with the slice operator, F2 = F_lam - A_lam w - B_lam conj(w)
    and transported boundary data.  Generator derivatives use centred
    differences with step h.
    """
    if problem.order < 1:
        raise ValueError("derivative check needs order >= 1")
    fam = problem.family
    base = solve_slice(problem, lam0, keep=True)
    if base.error:
        raise GenRHError(base.error)
    sol = base.solution
    prob = sol.problem
    A, B, F = problem.coefficients(lam0)
    tref = fam.base.t
    G_lam_b = fam.dlam(tref, lam0)

    l0, g0 = problem.boundary(lam0)
    lv = np.asarray(l0(tref), complex) * np.ones(tref.shape)
    l_lam = _fd(lambda x: np.asarray(problem.boundary(x)[0](tref), complex) * np.ones(tref.shape), lam0, h)
    g_lam = _fd(lambda x: np.asarray(problem.boundary(x)[1](tref), float) * np.ones(tref.shape), lam0, h)
    w = sol.boundary
    wz, wzb = _wz_boundary(sol, prob, A, B, F)
    trans_b = wz * G_lam_b + wzb * np.conj(G_lam_b)
    gamma2 = g_lam - np.real(np.conj(l_lam) * w) - np.real(np.conj(lv) * trans_b)

    # right-hand side F2 on the area grid
    F2 = None
    if prob.grid is not None:
        nodes = prob.grid.nodes

        def coeff(x, k):
            return _field_at(problem.coefficients(x)[k], nodes)
        wg = sol.grid_values
        F2 = _fd(lambda x: coeff(x, 2), lam0, h) - _fd(lambda x: coeff(x, 0), lam0, h) * wg \
            - _fd(lambda x: coeff(x, 1), lam0, h) * np.conj(wg)

    # pins
    p0 = problem.pins(lam0)
    ip, bp = np.asarray(p0.interior, complex), np.asarray(p0.boundary, complex)
    ia = _fd(lambda x: np.asarray(problem.pins(x).interior_values, complex), lam0, h) if ip.size else []
    ca = _fd(lambda x: np.asarray(problem.pins(x).boundary_values, float), lam0, h) if bp.size else []
    iv = []
    if ip.size:
        zi = fam.embed(ip, lam0)
        a, b = _wz_interior(sol, prob, zi)
        Gl = fam.dlam(ip, lam0)
        iv = list(np.asarray(ia) - a * Gl - b * np.conj(Gl))
    bv = []
    zb_phys = []
    for k, zr in enumerate(bp):
        j = int(np.argmin(np.abs(tref - zr)))
        lj, llj = lv[j], l_lam[j]
        mod = abs(lj)
        dmod = float(np.real(np.conj(lj) * llj)) / mod
        c0 = float(np.asarray(p0.boundary_values)[k])
        val = ca[k] - np.imag(np.conj(lj) * trans_b[j]) / mod - np.imag(np.conj(llj) * w[j]) / mod \
            + c0 * dmod / mod
        bv.append(float(val))
        zb_phys.append(prob.domain.t[j])
    cond = SideConditions(list(fam.embed(ip, lam0)) if ip.size else [], iv, zb_phys, bv)
    dprob = mc_solver.McProblem(prob.domain, A, B, F2 if F2 is not None else 0.0, lv, gamma2,
                                cond, grid=prob.grid, area=problem.area)
    E = mc_solver.solve(dprob)

    ref = problem.reference_points()
    nb = problem.n_boundary
    inner_ref = ref[:-nb]
    zi = fam.embed(inner_ref, lam0)
    a, b = _wz_interior(sol, prob, zi)
    Gl = fam.dlam(inner_ref, lam0)
    u_in = E(zi) + a * Gl + b * np.conj(Gl)
    u_b = E.boundary + trans_b
    u = np.concatenate([u_in, u_b])
    unorm = float(np.max(np.abs(u)))
    rows = []
    for dl in dlams:
        nxt = solve_slice(problem, lam0 + dl)
        if nxt.error:
            rows.append({"dlam": dl, "error": nxt.error})
            continue
        q = (nxt.values - base.values) / dl
        res = float(np.max(np.abs(q - u)))
        rows.append({"dlam": float(dl), "residual": res, "relative": res / max(unorm, 1e-300)})
    orders = []
    for r0, r1 in zip(rows[:-1], rows[1:]):
        if "residual" in r0 and "residual" in r1 and r1["residual"] > 0 and r0["residual"] > 1e-12:
            orders.append(math.log(r0["residual"] / r1["residual"]) / math.log(r0["dlam"] / r1["dlam"]))
    return {"lam0": float(lam0), "u_norm": unorm, "rows": rows, "orders": orders,
            "derived_boundary_residual": E.boundary_residual(), "u": u}


# ---------------------------------------------------------------------------
# stock families
# ---------------------------------------------------------------------------


def lambda_grid(points):
    return list(np.linspace(0.0, 1.0, int(points)))


def stretch_laplace_problem(c=0.3, M=128):
    """Laplace family on the stretched ellipses x -> x (1 + c lam), index 1."""
    from .geometry import ellipse_stretch_family
    fam = ellipse_stretch_family(c, M)

    def boundary(lam):
        return (lambda t: t), (lambda t: np.real(t) + 0.25 * np.imag(t * t))

    def pins(lam):
        return SideConditions([0.0], [0.5 + 0.2j], [1.0 + 0j], [0.1])

    return FamilyProblem(fam, boundary, pins=pins)


def exact_linear_problem(M=128):
    """gamma^lam = (1 + lam) cos(theta) on the fixed disk, l = 1: w^lam = (1 + lam) z."""
    from .geometry import Domain, identity_family
    fam = identity_family(Domain.disk(M))

    def boundary(lam):
        return (lambda t: np.ones(np.shape(t), complex)), (lambda t: (1 + lam) * np.real(t))

    def pins(lam):
        return SideConditions([], [], [1.0 + 0j], [0.0])

    return FamilyProblem(fam, boundary, pins=pins)

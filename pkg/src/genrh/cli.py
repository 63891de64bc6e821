"""Command line: ``genrh solve|sweep|verify``.

Problem specs are YAML documents.  Coefficients and boundary data are
expression strings in a closed arithmetic grammar (no user code runs).
Reports are JSON with sorted keys and fixed float formatting; wall-clock
timings go to a separate ``.timings.json`` file so the report itself is
reproducible byte for byte.
"""
from __future__ import annotations

import argparse
import ast
import copy
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from . import disk_solver, elliptic, family, mc_solver
from .disk_solver import DiskProblem, SideConditions
from .errors import GenRHError, MissingReport, ParseError, ValidationError
from .geometry import BoundaryField, Domain, build_domain_family, winding_number
from .operators import PolarGrid

log = logging.getLogger("genrh")

REPORT_SCHEMA = "genrh-report v1"
CSV_SCHEMA = "# genrh-csv v1"
SIG_DIGITS = 12

# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "re": np.real, "im": np.imag,
             "conj": np.conj, "abs": np.abs, "sqrt": np.sqrt}
CONSTANTS = {"i": 1j, "pi": np.pi}
VARIABLES = ("x", "y", "z", "t", "theta", "r", "lam")
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


class Expr:
    """A compiled expression over x, y, z, t, theta, r, lam."""

    def __init__(self, source, line=None, column=None):
        self.source = str(source)
        self.line, self.column = line, column
        text = self.source.replace("^", "**")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise self._error(f"cannot parse expression {self.source!r}", exc.offset) from None
        self._check(tree.body)
        self.tree = tree.body

    def _error(self, msg, offset=None):
        col = self.column
        if col is not None and offset:
            col = col + offset - 1
        return ParseError(msg, self.line, col)

    def _check(self, node):
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            self._check(node.operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
                and not isinstance(node.value, bool):
            pass
        elif isinstance(node, ast.Name):
            if node.id not in VARIABLES and node.id not in CONSTANTS:
                raise self._error(f"unknown name {node.id!r} in {self.source!r}",
                                  node.col_offset + 1)
        elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id in FUNCTIONS and len(node.args) == 1 and not node.keywords:
            self._check(node.args[0])
        else:
            raise self._error(f"unsupported construct in {self.source!r}",
                              getattr(node, "col_offset", 0) + 1)

    def _eval(self, node, env):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, env), self._eval(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else CONSTANTS[node.id]
        return FUNCTIONS[node.func.id](self._eval(node.args[0], env))

    def __call__(self, z, lam=0.0, center=0.0):
        z = np.asarray(z, complex)
        rel = z - center
        env = {"z": z, "t": z, "x": z.real, "y": z.imag, "theta": np.angle(rel),
               "r": np.abs(rel), "lam": lam}
        with np.errstate(all="ignore"):
            v = self._eval(self.tree, env)
        return np.asarray(v) * np.ones(z.shape)

    def real(self, z, lam=0.0, center=0.0):
        return np.real(self(z, lam, center))

    def probe(self):
        v = self(np.array([0.3 + 0.2j]), 0.5)
        if not np.all(np.isfinite(v)):
            raise self._error(f"expression {self.source!r} is not finite at the probe point")
        return self


# ---------------------------------------------------------------------------
# spec documents
# ---------------------------------------------------------------------------

SCHEMA = {
    "name": None, "problem": None, "solver": None, "index": None, "seed": None,
    "domain": {"kind": None, "M": None, "r_in": None, "r_out": None},
    "family": {"base": {"kind": None, "M": None, "r_in": None, "r_out": None},
               "curves": "any", "smoothness": None, "check_grid": None},
    "coefficients": {k: None for k in ("A", "B", "F", "a", "b", "c", "d", "e", "f")},
    "boundary": {"l": None, "upsilon": None, "gamma": None},
    "conditions": {"interior": "list", "boundary": "list", "from_exact": None},
    "exact": {"w": None, "u": None, "ux": None, "uy": None},
    "grid": {"nr": None, "nt": None, "M": None},
    "lambda": {"grids": None, "points": None, "mu": None},
    "derivative": {"lam0": None, "dlams": None},
    "acceptance": "any",
    "output": {"stem": None, "lattice": {"nr": None, "nt": None}},
    "options": {"feasibility_tol": None, "q_max": None},
}
CONDITION_KEYS = {"at", "value"}
ACCEPTANCE_METRICS = {
    "boundary_residual": "<=", "exact_error": "<=", "dbar_residual": "<=",
    "path_difference": "<=", "beltrami_residual": "<=", "infeasibility": ">=",
    "holder_ratio": "<=", "continuity_order": ">=", "continuity_C_growth": "<=",
    "derivative_residual": "<=", "interpolation_C_growth": "<=",
}


def _marks(node, path=(), out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = (k.start_mark.line + 1, k.start_mark.column + 1,
                                  v.start_mark.line + 1, v.start_mark.column + 1)
            _marks(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out[path + (i,)] = (v.start_mark.line + 1, v.start_mark.column + 1,
                                v.start_mark.line + 1, v.start_mark.column + 1)
            _marks(v, path + (i,), out)
    return out


def _check_keys(data, schema, path, marks):
    if schema in ("any", None):
        return
    if schema == "list":
        if not isinstance(data, list):
            ln = marks.get(path, (None,) * 4)
            raise ParseError(f"{'.'.join(map(str, path))} must be a list", ln[2], ln[3])
        for i, item in enumerate(data):
            if not isinstance(item, dict):
                ln = marks.get(path + (i,), (None,) * 4)
                raise ParseError("condition entries need 'at' and 'value'", ln[0], ln[1])
            for k in item:
                if k not in CONDITION_KEYS:
                    ln = marks.get(path + (i, k), (None,) * 4)
                    raise ParseError(f"unknown key {k!r}", ln[0], ln[1])
        return
    if not isinstance(data, dict):
        ln = marks.get(path, (None,) * 4)
        raise ParseError(f"{'.'.join(map(str, path)) or 'document'} must be a mapping",
                         ln[2], ln[3])
    for k, v in data.items():
        if k not in schema:
            ln = marks.get(path + (k,), (None,) * 4)
            raise ParseError(f"unknown key {k!r}", ln[0], ln[1])
        _check_keys(v, schema[k], path + (k,), marks)


@dataclass
class ProblemSpec:
    data: dict
    marks: dict
    source: str
    path: str | None = None

    @property
    def name(self):
        return self.data.get("name") or (os.path.splitext(os.path.basename(self.path))[0]
                                         if self.path else "spec")

    @property
    def sha256(self):
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()

    def expr(self, *path, default=None):
        node = self.data
        for p in path:
            if isinstance(node, list) and isinstance(p, int) and p < len(node):
                node = node[p]
                continue
            if not isinstance(node, dict) or p not in node or node[p] is None:
                return None if default is None else Expr(default)
            node = node[p]
        ln = self.marks.get(tuple(path), (None, None, None, None))
        col = ln[3]
        if col is not None and isinstance(node, str):
            text = self.source.splitlines()[ln[2] - 1] if ln[2] else ""
            if col - 1 < len(text) and text[col - 1] in "\"'":
                col += 1
        return Expr(node, ln[2], col).probe()

    def to_yaml(self):
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)

    def scaled(self, k):
        if k == 1:
            return self
        d = copy.deepcopy(self.data)

        def sc(v):
            return int(2 * max(1, round(v * k / 2)))
        for blk in ("grid", "domain"):
            for key in ("nr", "nt", "M"):
                if key in d.get(blk, {}) and d[blk][key] is not None:
                    d[blk][key] = sc(d[blk][key])
        return ProblemSpec(d, self.marks, self.source, self.path)


def parse_spec(text, path=None) -> ProblemSpec:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        m = exc.problem_mark
        raise ParseError(f"YAML error: {exc.problem}", m.line + 1 if m else None,
                         m.column + 1 if m else None) from None
    if data is None:
        raise ParseError("empty spec", 1, 1)
    marks = _marks(node)
    _check_keys(data, SCHEMA, (), marks)
    problem = data.get("problem", "A")
    if problem not in ("A", "oblique"):
        ln = marks.get(("problem",), (None,) * 4)
        raise ParseError(f"problem must be 'A' or 'oblique', got {problem!r}", ln[2], ln[3])
    data.setdefault("problem", problem)
    spec = ProblemSpec(data, marks, text, path)
    # compile every expression once so errors surface at parse time
    for blk in ("coefficients", "boundary", "exact"):
        for k, v in (data.get(blk) or {}).items():
            if isinstance(v, list):
                for i in range(len(v)):
                    spec.expr(blk, k, i)
            else:
                spec.expr(blk, k)
    for kind in ("interior", "boundary"):
        for i, item in enumerate((data.get("conditions") or {}).get(kind) or []):
            for k in ("at", "value"):
                if k in item:
                    spec.expr("conditions", kind, i, k)
    return spec


def bundled_specs():
    root = resources.files("genrh") / "specs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".spec"))


def resolve_spec_path(path):
    if os.path.exists(path):
        return path
    cand = resources.files("genrh") / "specs" / os.path.basename(path)
    if cand.is_file():
        return str(cand)
    raise MissingReport(f"spec {path!r} not found")


def load_spec(path) -> ProblemSpec:
    path = resolve_spec_path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read(), path)


# ---------------------------------------------------------------------------
# building solver inputs
# ---------------------------------------------------------------------------


def _domain(spec):
    d = spec.data.get("domain") or {"kind": "disk"}
    M = int(d.get("M") or (spec.data.get("grid") or {}).get("M") or 128)
    kind = d.get("kind", "disk")
    if kind == "disk":
        return Domain.disk(M, radius=float(d.get("r_out") or 1.0))
    if kind == "annulus":
        return Domain.annulus(float(d["r_in"]), float(d.get("r_out") or 1.0), M)
    ln = spec.marks.get(("domain", "kind"), (None,) * 4)
    raise ParseError(f"unknown domain kind {kind!r}", ln[2], ln[3])


def _grid_sizes(spec, M):
    g = spec.data.get("grid") or {}
    return int(g.get("nr") or 24), int(g.get("nt") or M)


def _bfield(spec, key, domain, default, real=False, lam=0.0):
    """Boundary expression: one string, or a list with one string per curve."""
    raw = (spec.data.get("boundary") or {}).get(key)
    c = domain.polar_params()[0] if domain.is_polar() else 0.0
    if isinstance(raw, list):
        if len(raw) != len(domain.curves):
            ln = spec.marks.get(("boundary", key), (None,) * 4)
            raise ParseError(f"boundary.{key} needs one entry per curve ({len(domain.curves)})",
                             ln[2], ln[3])
        exprs = [spec.expr("boundary", key, i) for i in range(len(raw))]

        def f(t):
            t = np.atleast_1d(np.asarray(t, complex))
            cid = domain.curve_id[np.argmin(np.abs(t[:, None] - domain.t[None, :]), axis=1)]
            out = np.empty(t.shape, complex)
            for j, e in enumerate(exprs):
                sel = cid == j
                out[sel] = e(t[sel], lam, c)
            return out.real if real else out
        return f
    e = spec.expr("boundary", key, default=default)
    if e is None:
        return None
    return (lambda t: e.real(t, lam, c)) if real else (lambda t: e(t, lam, c))


def _cfield(spec, key, lam=0.0):
    e = spec.expr("coefficients", key)
    if e is None:
        return 0.0
    return lambda z, e=e: e(z, lam)


def _conditions(spec, lam=0.0, w_exact=None, l_func=None):
    c = spec.data.get("conditions") or {}
    interior, iv, boundary, bv = [], [], [], []
    for i, item in enumerate(c.get("interior") or []):
        z = complex(spec.expr("conditions", "interior", i, "at")(np.array([0j]), lam)[0])
        interior.append(z)
        if "value" in item:
            iv.append(complex(spec.expr("conditions", "interior", i, "value")(np.array([z]), lam)[0]))
    for i, item in enumerate(c.get("boundary") or []):
        z = complex(spec.expr("conditions", "boundary", i, "at")(np.array([0j]), lam)[0])
        boundary.append(z)
        if "value" in item:
            bv.append(float(spec.expr("conditions", "boundary", i, "value").real(np.array([z]), lam)[0]))
    if c.get("from_exact"):
        if w_exact is None:
            raise ValidationError("from_exact needs an exact solution", "conditions.from_exact")
        return SideConditions.from_exact(w_exact, l_func, interior, boundary)
    if len(iv) != len(interior) or len(bv) != len(boundary):
        raise ValidationError("every condition needs a value unless from_exact is set",
                              "conditions.value")
    return SideConditions(interior, iv, boundary, bv)


def _lattice(spec, domain):
    lat = (spec.data.get("output") or {}).get("lattice") or {}
    nr, nt = int(lat.get("nr") or 6), int(lat.get("nt") or 16)
    c, r_in, r_out = domain.polar_params()
    r = np.linspace(r_in, r_out, nr + 2)[1:-1] if r_in > 0 else np.linspace(0, r_out, nr + 1)[:-1]
    th = 2 * np.pi * np.arange(nt) / nt
    return (c + r[:, None] * np.exp(1j * th[None, :])).ravel()


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _num(v):
    """Round floats to a fixed number of significant digits for stable output."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return repr(v)
        return float(f"{v:.{SIG_DIGITS}g}")
    if isinstance(v, (complex, np.complexfloating)):
        return [_num(v.real), _num(v.imag)]
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()]
    if v is None or isinstance(v, str):
        return v
    return str(v)


def make_flag(metric, value, tolerance, op=None):
    op = op or ACCEPTANCE_METRICS.get(metric, "<=")
    value = None if value is None else float(value)
    ok = value is not None and math.isfinite(value) and (
        value <= tolerance if op == "<=" else value >= tolerance)
    return {"metric": metric, "value": value, "op": op, "tolerance": float(tolerance),
            "pass": bool(ok)}


def check_flag(flag):
    v, tol, op = flag.get("value"), flag["tolerance"], flag["op"]
    if v is None or isinstance(v, str):
        return False
    return bool(v <= tol if op == "<=" else v >= tol)


def _flags(spec, metrics):
    acc = spec.data.get("acceptance") or {}
    flags = {}
    for k in sorted(acc):
        tol = acc[k]
        if k not in ACCEPTANCE_METRICS:
            ln = spec.marks.get(("acceptance", k), (None,) * 4)
            raise ParseError(f"unknown acceptance metric {k!r}", ln[0], ln[1])
        flags[k] = make_flag(k, metrics.get(k), float(tol))
    return flags


def _write_csv(path, table, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{CSV_SCHEMA} table={table}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(_num(x)) if isinstance(x, float) else x for x in r])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_num(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _solve_problem_A(spec, report, out_rows):
    domain = _domain(spec)
    M = domain.sizes[0]
    nr, nt = _grid_sizes(spec, M)
    w_e = spec.expr("exact", "w")
    l = _bfield(spec, "l", domain, "1")
    gamma = _bfield(spec, "gamma", domain, "0", real=True)
    if w_e is not None and spec.data.get("boundary", {}).get("gamma") is None:
        gamma = (lambda t: np.real(np.conj(l(t)) * w_e(t)))
    cond = _conditions(spec, 0.0, None if w_e is None else (lambda z: w_e(z)), l)
    n = winding_number(BoundaryField(l(domain.t), domain))
    report["index"] = n
    report["grid"] = {"M": M, "nr": nr, "nt": nt, "domain": "disk" if domain.m == 0 else "annulus"}
    solver = spec.data.get("solver") or ("disk" if domain.m == 0 else "mc")
    opts = spec.data.get("options") or {}
    if solver == "disk":
        grid = PolarGrid(nr, nt)
        prob = DiskProblem(grid, _cfield(spec, "A"), _cfield(spec, "B"), _cfield(spec, "F"),
                           l, gamma, M=M, conditions=cond)
        kw = {}
        if n < 0 and opts.get("feasibility_tol") is not None:
            kw["feasibility_tol"] = float(opts["feasibility_tol"])
        sol = disk_solver.solve(prob, **kw)
    else:
        prob = mc_solver.McProblem(domain, _cfield(spec, "A"), _cfield(spec, "B"),
                                   _cfield(spec, "F"), l, gamma, cond, area=(nr, nt))
        sol = mc_solver.solve(prob)
    metrics = {}
    if isinstance(sol, disk_solver.Infeasibility):
        fn = [abs(complex(f)) if not isinstance(f, (int, float)) else abs(f) for f in sol.functionals]
        metrics["infeasibility"] = max(fn) if fn else 0.0
        report["residuals"] = {"infeasibility": metrics["infeasibility"],
                               "feasibility_tolerance": sol.tolerance}
        report["solution"] = "infeasible"
        return metrics
    report["solution"] = "solved"
    t = domain.t
    wb = sol.boundary
    metrics["boundary_residual"] = sol.boundary_residual()
    metrics["dbar_residual"] = sol.dbar_residual()
    lat = _lattice(spec, domain)
    wl = sol(lat)
    if w_e is not None:
        metrics["exact_error"] = float(max(np.max(np.abs(wl - w_e(lat))),
                                           np.max(np.abs(wb - w_e(t)))))
    report["residuals"] = dict(metrics)
    report["solver_report"] = {k: v for k, v in sol.report.items()
                               if isinstance(v, (int, float, str, np.floating, np.integer))}
    out_rows["boundary"] = (["node", "x", "y", "re_w", "im_w"],
                            [[j, t[j].real, t[j].imag, wb[j].real, wb[j].imag]
                             for j in range(t.size)])
    out_rows["interior"] = (["x", "y", "re_w", "im_w"],
                            [[z.real, z.imag, w.real, w.imag] for z, w in zip(lat, wl)])
    return metrics


def _solve_oblique(spec, report, out_rows):
    domain = _domain(spec)
    if domain.m != 0 or domain.polar_params()[1:] != (0.0, 1.0):
        raise ValidationError("oblique problems are solved on the unit disk", "domain.kind")
    M = domain.sizes[0]
    nr, nt = _grid_sizes(spec, M)
    co = {}
    for k, dflt in zip("abcdef", ("1", "0", "1", "0", "0", "0")):
        e = spec.expr("coefficients", k, default=dflt)
        co[k] = (lambda z, e=e: e.real(z))
    coeffs = elliptic.EllipticCoefficients(**co)
    ups = spec.expr("boundary", "upsilon", default="t")
    u_e, ux_e, uy_e = spec.expr("exact", "u"), spec.expr("exact", "ux"), spec.expr("exact", "uy")
    g_e = spec.expr("boundary", "gamma")
    if g_e is None:
        if ux_e is None or uy_e is None:
            raise ValidationError("gamma or the exact gradient is required", "boundary.gamma")
        gamma = (lambda t: np.real(np.conj(ups(t)) * (ux_e(t) + 1j * uy_e(t))))
    else:
        gamma = (lambda t: g_e.real(t))
    bc = elliptic.ObliqueBC(lambda t: ups(t), gamma)
    declared = spec.data.get("index")
    cond = None
    cs = spec.data.get("conditions") or {}
    if cs.get("from_exact"):
        def grad(z):
            return ux_e(z) + 1j * uy_e(z)
        ip = [complex(spec.expr("conditions", "interior", i, "at")(np.array([0j]))[0])
              for i in range(len(cs.get("interior") or []))]
        bp = [complex(spec.expr("conditions", "boundary", i, "at")(np.array([0j]))[0])
              for i in range(len(cs.get("boundary") or []))]
        cond = (lambda ch: elliptic.conditions_from_gradient(ch, bc, grad, ip, bp))
    u0 = float(u_e.real(np.array([0j]))[0]) if u_e is not None else 0.0
    opts = spec.data.get("options") or {}
    sol = elliptic.solve_oblique(coeffs, bc, nr, nt, u0=u0, conditions=cond,
                                 feasibility_tol=float(opts.get("feasibility_tol") or 1e-4),
                                 q_max=float(opts.get("q_max") or 0.8))
    report["grid"] = {"M": nt, "nr": nr, "nt": nt, "domain": "disk"}
    if isinstance(sol, disk_solver.Infeasibility):
        fn = [abs(f) for f in sol.functionals]
        report["solution"] = "infeasible"
        report["residuals"] = {"infeasibility": max(fn)}
        return {"infeasibility": max(fn)}
    report["solution"] = "solved"
    report["index"] = sol.reduced.kappa
    if declared is not None and int(declared) != sol.reduced.kappa:
        report["warnings"].append(f"declared index {declared} but the boundary field winds "
                                  f"{sol.reduced.kappa} times")
    metrics = {k: sol.report[k] for k in ("beltrami_residual", "path_difference")}
    metrics["boundary_residual"] = float(np.max(np.abs(
        np.real(np.conj(sol.reduced.problem.l) * sol.W.boundary) - sol.reduced.problem.gamma)))
    lat = _lattice(spec, domain)
    ul = sol(lat)
    if u_e is not None:
        z = sol.z.ravel()
        metrics["exact_error"] = float(max(np.max(np.abs(sol.U.ravel() - u_e.real(z))),
                                           np.max(np.abs(ul - u_e.real(lat)))))
    report["residuals"] = dict(metrics)
    report["solver_report"] = {k: v for k, v in sol.report.items()
                               if isinstance(v, (int, float, str, np.floating, np.integer))}
    out_rows["interior"] = (["x", "y", "u"], [[z.real, z.imag, u] for z, u in zip(lat, ul)])
    return metrics


def _base_report(spec, mode, k):
    return {"schema": REPORT_SCHEMA, "spec": spec.name, "spec_sha256": spec.sha256,
            "mode": mode, "resolution_scale": k, "warnings": [], "errors": []}


def _check_declared_index(spec, report):
    declared = spec.data.get("index")
    if declared is not None and report.get("index") is not None and int(declared) != report["index"]:
        msg = f"declared index {declared} but the boundary field winds {report['index']} times"
        if msg not in report["warnings"]:
            report["warnings"].append(msg)
        log.warning(msg)


def run_solve(spec: ProblemSpec, out_dir, k=1.0):
    spec = spec.scaled(k)
    report = _base_report(spec, "solve", k)
    rows = {}
    timings = {}
    t0 = time.perf_counter()
    metrics = {}
    try:
        if spec.data["problem"] == "oblique":
            metrics = _solve_oblique(spec, report, rows)
        else:
            metrics = _solve_problem_A(spec, report, rows)
    except GenRHError as exc:
        report["errors"].append(f"{type(exc).__name__}: {exc}")
    timings["solve_seconds"] = time.perf_counter() - t0
    _check_declared_index(spec, report)
    report["flags"] = _flags(spec, metrics)
    report["passed"] = bool(not report["errors"] and all(f["pass"] for f in report["flags"].values()))
    return _emit(spec, report, rows, timings, out_dir)


def _emit(spec, report, rows, timings, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    stem = (spec.data.get("output") or {}).get("stem") or spec.name
    paths = {}
    for table, (header, data) in sorted(rows.items()):
        p = os.path.join(out_dir, f"{stem}_{table}.csv")
        _write_csv(p, table, header, data)
        paths[table] = os.path.basename(p)
    report["outputs"] = paths
    jp = os.path.join(out_dir, f"{stem}.json")
    _write_json(jp, report)
    _write_json(os.path.join(out_dir, f"{stem}.timings.json"), timings)
    return report, jp


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def family_problem(spec: ProblemSpec) -> family.FamilyProblem:
    fd = spec.data.get("family")
    if not fd:
        raise ValidationError("sweep needs a family block", "family")
    fam = build_domain_family(fd)
    l_e = spec.expr("boundary", "l", default="1")
    g_e = spec.expr("boundary", "gamma", default="0")
    c = fam.base.polar_params()[0]

    def boundary(lam):
        return (lambda t: l_e(t, lam, c)), (lambda t: g_e.real(t, lam, c))

    def coefficients(lam):
        return tuple(_cfield(spec, key, lam) for key in ("A", "B", "F"))

    def pins(lam):
        return _conditions(spec, lam)

    g = spec.data.get("grid") or {}
    return family.FamilyProblem(fam, boundary, coefficients, pins,
                                area=(int(g.get("nr") or 24), g.get("nt")))


def run_sweep(spec: ProblemSpec, out_dir, k=1.0, threads=1):
    spec = spec.scaled(k)
    report = _base_report(spec, "sweep", k)
    timings = {}
    metrics = {}
    lam_blk = spec.data.get("lambda") or {}
    grids = lam_blk.get("grids") or [lam_blk.get("points") or 11]
    mu = float(lam_blk.get("mu") or 0.5)
    stem = (spec.data.get("output") or {}).get("stem") or spec.name
    try:
        fp = family_problem(spec)
        reps = []
        for npts in grids:
            t0 = time.perf_counter()
            rep = family.sweep(fp, family.lambda_grid(npts), mu=mu, threads=threads)
            timings[f"sweep_{npts}_seconds"] = time.perf_counter() - t0
            reps.append(rep)
            rep.write(out_dir, f"{stem}_{npts}")
            for lam, err in rep.errors:
                report["errors"].append(f"lam={lam}: {err}")
        verdict = family.continuity_diagnostics(reps)
        report["verdicts"] = verdict
        report["indices"] = sorted({s.summary.get("index") for r in reps for s in r.slices
                                    if s.error is None})
        if len(report["indices"]) > 1:
            report["warnings"].append("index is not constant across the sweep")
        metrics["holder_ratio"] = verdict["b"]["max_over_min"]
        orders = verdict["a"]["orders"]
        zero = all(g["max_modulus"] <= 1e-12 for g in verdict["a"]["per_grid"])
        metrics["continuity_order"] = (math.inf if zero else min(orders)) if (orders or zero) else None
        if verdict["a"]["flagged_pairs"]:
            metrics["continuity_order"] = -math.inf
        Cs = [g["C"] for g in verdict["a"]["per_grid"]]
        metrics["continuity_C_growth"] = max((c1 / c0 for c0, c1 in zip(Cs[:-1], Cs[1:]) if c0 > 0),
                                             default=1.0)
        Ci = verdict["c"]["C"]
        metrics["interpolation_C_growth"] = max((c1 / c0 for c0, c1 in zip(Ci[:-1], Ci[1:]) if c0 > 0),
                                                default=1.0)
        dblk = spec.data.get("derivative")
        if dblk:
            t0 = time.perf_counter()
            dres = family.lambda_derivative_check(
                fp, float(dblk.get("lam0", 0.5)),
                [float(x) for x in dblk.get("dlams") or (1e-1, 1e-2, 1e-3)])
            timings["derivative_seconds"] = time.perf_counter() - t0
            rows = dres["rows"]
            report["derivative"] = {"lam0": dres["lam0"], "u_norm": dres["u_norm"],
                                    "rows": rows, "orders": dres["orders"]}
            last = rows[-1]
            metrics["derivative_residual"] = last.get("relative")
    except GenRHError as exc:
        report["errors"].append(f"{type(exc).__name__}: {exc}")
    report["residuals"] = {k2: v for k2, v in metrics.items()}
    report["flags"] = _flags(spec, metrics)
    report["passed"] = bool(not report["errors"] and all(f["pass"] for f in report["flags"].values()))
    return _emit(spec, report, {}, timings, out_dir)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def verify(paths, stream=None):
    """Re-check every flag of the given reports.  Returns (ok, lines)."""
    stream = sys.stdout if stream is None else stream
    if not paths:
        raise MissingReport("no reports given")
    lines = []
    failed = []
    total = 0
    for p in paths:
        if not os.path.isfile(p):
            raise MissingReport(f"report {p!r} not found")
        with open(p, encoding="utf-8") as fh:
            rep = json.load(fh)
        name = rep.get("spec", os.path.basename(p))
        for err in rep.get("errors", []):
            failed.append(f"{name}:error")
            lines.append(f"FAIL {name}: {err}")
        for key in sorted(rep.get("flags", {})):
            fl = rep["flags"][key]
            ok = check_flag(fl)
            total += 1
            if ok != fl.get("pass"):
                ok = False
                lines.append(f"FAIL {name}:{key} stored flag disagrees with its value")
            lines.append(f"{'PASS' if ok else 'FAIL'} {name}:{key} {fl.get('value')} "
                         f"{fl['op']} {fl['tolerance']}")
            if not ok:
                failed.append(f"{name}:{key}")
    if failed:
        lines.append(f"FAIL ({len(failed)} of {total} criteria): {', '.join(failed)}")
    else:
        lines.append(f"PASS ({total} criteria)")
    for ln in lines:
        print(ln, file=stream)
    return not failed, lines


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="genrh", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("spec", help="spec file or the name of a bundled spec")
        sp.add_argument("--out", default="genrh_out")
        sp.add_argument("--resolution-scale", type=float, default=1.0)
        sp.add_argument("--threads", type=int, default=1)
    vp = sub.add_parser("verify")
    vp.add_argument("reports", nargs="*")
    sub.add_parser("specs", help="list bundled specs")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "specs":
            for s in bundled_specs():
                print(s)
            return 0
        if args.command == "verify":
            ok, _ = verify(args.reports)
            return 0 if ok else 1
        spec = load_spec(args.spec)
        if args.command == "solve":
            report, path = run_solve(spec, args.out, args.resolution_scale)
        else:
            report, path = run_sweep(spec, args.out, args.resolution_scale, args.threads)
        for w in report["warnings"]:
            print(f"warning: {w}", file=sys.stderr)
        for e in report["errors"]:
            print(f"error: {e}", file=sys.stderr)
        print(f"{'PASS' if report['passed'] else 'FAIL'} {report['spec']} -> {path}")
        return 0 if report["passed"] else 1
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (MissingReport, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

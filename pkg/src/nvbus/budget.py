"""Analytic error budgets, operating-point optimisation and contour grids.

Budget terms are scaling forms evaluated with unit coefficients by default;
``coefficients`` multiplies individual terms for callers who want to carry
order-unity constants.  All rates are linear frequencies (Hz).
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize, minimize_scalar

SURFACE_CODE_THRESHOLD = 0.014
CONTOUR_LEVELS = (1e-2, 2e-2, 5e-2)
GRID_POINTS = 64
GRID_ROUNDS = 3
MAX_GRID = 512


class BoundaryWarning(UserWarning):
    """Optimum sits on the edge of the search box."""


@dataclass(frozen=True)
class ErrorBudget:
    terms: dict
    total: float
    excluded: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"terms": dict(self.terms), "total": self.total, "excluded": dict(self.excluded)}


def _budget(terms: dict, excluded: dict) -> ErrorBudget:
    terms = {k: float(v) for k, v in terms.items()}
    total = 0.0
    for v in terms.values():
        total += v
    return ErrorBudget(terms, total, {k: float(v) for k, v in excluded.items()})


@dataclass(frozen=True)
class SSBudgetParams:
    N: int
    kappa: float
    omega: float
    delta_g: float = 10e6
    t_ss: float = 1e-4
    T1: float = 0.25
    T2: float = 10e-3
    include_t2: bool = False
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        for name in ("kappa", "omega", "delta_g", "t_ss", "T1", "T2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def ss_budget(p: SSBudgetParams) -> ErrorBudget:
    """Sequential-SWAP budget: N times the per-pair terms."""
    c = p.coefficients
    per_pair = {
        "off_resonant": c.get("off_resonant", 1.0) * (p.omega / p.delta_g) ** 2,
        "adiabatic": c.get("adiabatic", 1.0) / (p.kappa * p.t_ss) ** 2,
        "dip": c.get("dip", 1.0) * (p.kappa / p.omega) ** 2,
        "T1": c.get("T1", 1.0) * p.t_ss / p.T1,
    }
    t2 = {"T2": p.N * c.get("T2", 1.0) * (p.t_ss / p.T2) ** 3}
    terms = {k: p.N * v for k, v in per_pair.items()}
    if p.include_t2:
        terms.update(t2)
        t2 = {}
    return _budget(terms, t2)


SPACINGS = ("kappa_over_n", "band")


def mode_spacing(N: int, kappa: float, convention: str = "kappa_over_n") -> float:
    """Mode-spacing scale: ``kappa/N`` or the band-centre value ``2 pi kappa/(N+1)``."""
    if convention == "kappa_over_n":
        return kappa / N
    if convention == "band":
        return 2.0 * math.pi * kappa / (N + 1)
    raise ValueError(f"unknown spacing convention {convention!r}")


@dataclass(frozen=True)
class FFSTBudgetParams:
    N: int
    kappa: float
    omega_n: float
    omega: float
    delta_g: float = 10e6
    T1: float = 0.25
    spacing: str = "kappa_over_n"
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        for name in ("kappa", "omega_n", "omega", "delta_g", "T1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        mode_spacing(self.N, self.kappa, self.spacing)

    @property
    def delta(self) -> float:
        return self.omega_n

    @property
    def g(self) -> float:
        return 2.0 * math.sqrt(2.0) * self.kappa * self.omega / self.delta

    @property
    def t_ffst(self) -> float:
        return math.sqrt(self.N) / self.g


def ffst_budget(p: FFSTBudgetParams) -> ErrorBudget:
    c = p.coefficients
    g, t = p.g, p.t_ffst
    terms = {
        "off_resonant": c.get("off_resonant", 1.0) * (p.omega_n**2 + p.omega**2) / p.delta_g**2,
        "fermi": c.get("fermi", 1.0) * (g / math.sqrt(p.N) / mode_spacing(p.N, p.kappa, p.spacing)) ** 2,
        "g_control": c.get("g_control", 1.0) * (p.kappa / p.delta) ** 2,
        "T1": c.get("T1", 1.0) * p.N * t / p.T1,
    }
    return _budget(terms, {})


@dataclass(frozen=True)
class Optimum:
    x: tuple[float, float]
    names: tuple[str, str]
    budget: ErrorBudget
    on_boundary: bool
    bounds: tuple[tuple[float, float], tuple[float, float]]
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            **dict(zip(self.names, self.x)),
            "budget": self.budget.to_dict(),
            "on_boundary": self.on_boundary,
            "bounds": [list(b) for b in self.bounds],
            **self.extras,
        }


def _grid_minimize(f, bounds, points=GRID_POINTS, rounds=GRID_ROUNDS):
    """Deterministic coarse-to-fine log-grid search; returns log-point and boundary flag."""
    lo = np.log(np.array([b[0] for b in bounds], dtype=float))
    hi = np.log(np.array([b[1] for b in bounds], dtype=float))
    outer_lo, outer_hi = lo.copy(), hi.copy()
    best = None
    on_edge = False
    for r in range(rounds):
        axes = [np.linspace(lo[i], hi[i], points) for i in range(2)]
        X, Y = np.meshgrid(*axes, indexing="ij")
        vals = f(np.exp(X), np.exp(Y))
        i, j = np.unravel_index(np.nanargmin(vals), vals.shape)
        best = np.array([axes[0][i], axes[1][j]])
        if r == 0:
            on_edge = i in (0, points - 1) or j in (0, points - 1)
        step = np.array([axes[0][1] - axes[0][0], axes[1][1] - axes[1][0]])
        lo = np.maximum(best - step, outer_lo)
        hi = np.minimum(best + step, outer_hi)
    return best, on_edge, (outer_lo, outer_hi)


def _polish(f_scalar, x0, lo, hi):
    def obj(z):
        z = np.clip(z, lo, hi)
        return math.log(f_scalar(*np.exp(z)))

    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    z = np.clip(res.x, lo, hi)
    return z if obj(z) <= obj(x0) else x0


def _warn_boundary(flag: bool, what: str):
    if flag:
        warnings.warn(f"{what} optimum on search-box boundary", BoundaryWarning, stacklevel=3)


def optimize_ss(N: int, kappa: float, delta_g: float = 10e6, T1: float = 0.25, bounds=None, **kw) -> Optimum:
    """Minimise the sequential-SWAP budget over ``(t_ss, Omega)``."""
    for v in (kappa, delta_g, T1):
        if not v > 0:
            raise ValueError("inputs must be positive")
    bounds = bounds or ((1e-2 / kappa, 1e4 / kappa), (kappa / 10.0, delta_g))
    base = SSBudgetParams(N, kappa, kappa, delta_g, 1.0, T1, **kw)

    def total(t, w):
        return ss_budget(replace(base, t_ss=t, omega=w)).total

    vec = np.vectorize(total)
    z, edge, (lo, hi) = _grid_minimize(vec, bounds)
    z = _polish(total, z, lo, hi)
    t, w = np.exp(z)
    _warn_boundary(edge, "sequential-SWAP")
    budget = ss_budget(replace(base, t_ss=t, omega=w))
    return Optimum((float(t), float(w)), ("t_ss", "omega"), budget, edge, bounds, {"total_time": float(N * t)})


def optimize_ffst(N: int, kappa: float, delta_g: float = 10e6, T1: float = 0.25, spacing: str = "kappa_over_n",
                  bounds=None, **kw) -> Optimum:
    """Minimise the state-transfer budget over ``(Omega_N, Omega)``."""
    for v in (kappa, delta_g, T1):
        if not v > 0:
            raise ValueError("inputs must be positive")
    bounds = bounds or ((kappa, delta_g), (kappa / 100.0, delta_g))
    base = FFSTBudgetParams(N, kappa, kappa, kappa, delta_g, T1, spacing, **kw)

    def total(wn, w):
        return ffst_budget(replace(base, omega_n=wn, omega=w)).total

    vec = np.vectorize(total)
    z, edge, (lo, hi) = _grid_minimize(vec, bounds)
    z = _polish(total, z, lo, hi)
    wn, w = np.exp(z)
    _warn_boundary(edge, "state-transfer")
    p = replace(base, omega_n=float(wn), omega=float(w))
    return Optimum((float(wn), float(w)), ("omega_n", "omega"), ffst_budget(p), edge, bounds,
                   {"t_ffst": p.t_ffst, "g": p.g, "spacing": spacing})


def relative_gradient(f, x, h: float = 1e-5) -> np.ndarray:
    """``d log f / d log x_i`` by central differences."""
    x = np.asarray(x, dtype=float)
    out = []
    for i in range(x.size):
        up, dn = x.copy(), x.copy()
        up[i] *= math.exp(h)
        dn[i] *= math.exp(-h)
        out.append((math.log(f(*up)) - math.log(f(*dn))) / (2 * h))
    return np.array(out)


@dataclass(frozen=True)
class ContourGrid:
    method: str
    T1: np.ndarray
    t_total: np.ndarray
    values: np.ndarray  # shape (len(T1), len(t_total))
    levels: tuple[float, ...]
    level_sets: dict
    fixed: dict

    def minimum_over_time(self, T1: float) -> float:
        i = int(np.argmin(np.abs(self.T1 - T1)))
        return float(self.values[i].min())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T1", "t_total", "infidelity"])
        for i, T1 in enumerate(self.T1):
            for j, t in enumerate(self.t_total):
                w.writerow([repr(float(T1)), repr(float(t)), repr(float(self.values[i, j]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def sidecar(self) -> dict:
        return {"method": self.method, "fixed": self.fixed, "levels": list(self.levels),
                "level_sets": {str(k): v for k, v in self.level_sets.items()}}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.sidecar(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _ss_time_profile(t_total, N, kappa, delta_g, coefficients):
    """T1-independent part of the SS budget with Omega optimised per time."""
    out = []
    for t in t_total:
        t_ss = t / N

        def f(logw):
            p = SSBudgetParams(N, kappa, math.exp(logw), delta_g, t_ss, 1.0,
                               coefficients=coefficients)
            b = ss_budget(p)
            return b.total - b.terms["T1"]

        res = minimize_scalar(f, bounds=(math.log(kappa / 10), math.log(delta_g)), method="bounded",
                              options={"xatol": 1e-10})
        out.append(res.fun)
    return np.array(out)


def _ffst_time_profile(t_total, N, kappa, delta_g, spacing, coefficients):
    out = []
    for t in t_total:
        g = math.sqrt(N) / t

        def f(logwn):
            wn = math.exp(logwn)
            w = g * wn / (2.0 * math.sqrt(2.0) * kappa)
            b = ffst_budget(FFSTBudgetParams(N, kappa, wn, w, delta_g, 1.0, spacing, coefficients))
            return b.total - b.terms["T1"]

        res = minimize_scalar(f, bounds=(math.log(kappa), math.log(delta_g)), method="bounded",
                              options={"xatol": 1e-10})
        out.append(res.fun)
    return np.array(out)


def _level_intervals(t, row, level):
    """Log-interpolated ``[t_lo, t_hi]`` where ``row <= level``, or ``None``."""
    below = row <= level
    if not below.any():
        return None
    idx = np.flatnonzero(below)
    i0, i1 = idx[0], idx[-1]
    lt, lr = np.log(t), np.log(row)

    def cross(a, b):
        if lr[a] == lr[b]:
            return float(t[a])
        s = (math.log(level) - lr[a]) / (lr[b] - lr[a])
        return float(math.exp(lt[a] + s * (lt[b] - lt[a])))

    lo = float(t[0]) if i0 == 0 else cross(i0 - 1, i0)
    hi = float(t[-1]) if i1 == len(t) - 1 else cross(i1, i1 + 1)
    return [lo, hi]


def contour_grid(method: str, T1_values, t_values, N: int | None = None, kappa: float | None = None,
                 delta_g: float = 10e6, spacing: str = "kappa_over_n", levels=CONTOUR_LEVELS,
                 coefficients: dict | None = None) -> ContourGrid:
    """Total infidelity over ``(T1, total time)`` with the other knobs optimised per time."""
    method = method.upper()
    T1_values = np.asarray(T1_values, dtype=float)
    t_values = np.asarray(t_values, dtype=float)
    if T1_values.size > MAX_GRID or t_values.size > MAX_GRID:
        raise ValueError(f"grid larger than {MAX_GRID} per axis")
    if (T1_values <= 0).any() or (t_values <= 0).any():
        raise ValueError("ranges must be positive")
    coefficients = coefficients or {}
    if method == "SS":
        N = 18 if N is None else N
        kappa = 8.7e3 if kappa is None else kappa
        base = _ss_time_profile(t_values, N, kappa, delta_g, coefficients)
        t1_term = coefficients.get("T1", 1.0) * t_values[None, :] / T1_values[:, None]
    elif method == "FFST":
        N = 7 if N is None else N
        kappa = 12.6e3 if kappa is None else kappa
        base = _ffst_time_profile(t_values, N, kappa, delta_g, spacing, coefficients)
        t1_term = coefficients.get("T1", 1.0) * N * t_values[None, :] / T1_values[:, None]
    else:
        raise ValueError(f"unknown method {method!r}")
    values = base[None, :] + t1_term
    level_sets = {lv: [_level_intervals(t_values, row, lv) for row in values] for lv in levels}
    fixed = {"N": N, "kappa": kappa, "delta_g": delta_g, "spacing": spacing if method == "FFST" else None,
             "coefficients": coefficients}
    return ContourGrid(method, T1_values, t_values, values, tuple(levels), level_sets, fixed)


def threshold_margin(budget, epsilon: float = SURFACE_CODE_THRESHOLD) -> float:
    """``epsilon - total``; negative means above the error-correction threshold."""
    total = budget.total if isinstance(budget, ErrorBudget) else float(budget)
    return epsilon - total

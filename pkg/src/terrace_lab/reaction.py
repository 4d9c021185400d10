"""Reaction nonlinearities f(x, u).

Preset families, custom (expression / tabulated) models, derivative access and
periodicity / consistency validation.  All models satisfy f(x + L, u) = f(x, u)
and f(x, 0) = 0; coefficient functions are evaluated at x mod L so periodicity
holds to machine precision even far from the origin.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp

from .errors import ConfigurationError

PRESET_TAGS = ("kpp", "allen_cahn", "combustion", "tristable", "stacked_kpp_bistable", "custom")

#: lower clamp for Lipschitz bounds of (nearly) vanishing nonlinearities
K_FLOOR = 1e-6


@dataclass(frozen=True)
class ReactionModel:
    """A nonlinearity f(x, u) with derivative access and periodicity metadata.

    f and f_u are vectorized callables (x, u) -> array.  lipschitz_K bounds
    f(x, u) <= K * u on 0 <= u <= the construction-time roof estimate.
    kinks_u lists u-locations where f'' jumps (C1 glue points of piecewise
    presets); consistency probes avoid their immediate neighborhood.
    """

    f: Callable
    f_u: Callable
    period_L: float
    lipschitz_K: float
    preset_tag: str
    params: dict = field(default_factory=dict)
    kinks_u: tuple = ()

    def __post_init__(self):
        if not (self.period_L > 0):
            raise ConfigurationError("period_L must be > 0")
        if self.preset_tag not in PRESET_TAGS:
            raise ConfigurationError(f"unknown preset_tag {self.preset_tag!r}")

    def is_homogeneous(self, n_probe: int = 7, tol: float = 1e-11) -> bool:
        xs = np.linspace(0.0, self.period_L, n_probe, endpoint=False)
        us = np.linspace(0.0, 1.0, 9)
        vals = self.f(xs[:, None], us[None, :])
        spread = np.max(np.abs(vals - vals[0:1, :]))
        scale = 1.0 + np.max(np.abs(vals))
        return bool(spread <= tol * scale)


def _broadcast(fn):
    """Wrap a scalar/poorly-broadcasting callable into one returning arrays."""

    def wrapped(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.asarray(fn(x, u), dtype=float)
        target = np.broadcast(x, u).shape
        if out.shape != target:
            out = np.broadcast_to(out, target).copy()
        return out

    return wrapped


def _as_coefficient(value, L: float, name: str):
    """Turn a number, expression string or callable into a periodic coefficient.

    Returns (vectorized callable of x, repr used for config echo).  Evaluation
    wraps x into [0, L) first so the coefficient is exactly L-periodic.
    """
    if isinstance(value, (int, float)):
        c = float(value)
        return (lambda x: np.full_like(np.asarray(x, dtype=float), c)), c
    if isinstance(value, str):
        xs = sp.Symbol("x")
        try:
            expr = sp.sympify(value, locals={"L": sp.Float(L), "pi": sp.pi})
        except (sp.SympifyError, SyntaxError) as exc:
            raise ConfigurationError(f"{name}: cannot parse expression {value!r}: {exc}") from None
        free = expr.free_symbols - {xs}
        if free:
            raise ConfigurationError(f"{name}: unknown symbols {sorted(map(str, free))} in {value!r}")
        raw = sp.lambdify(xs, expr, "numpy")
    elif callable(value):
        raw = value
    else:
        raise ConfigurationError(f"{name}: expected number, expression string or callable")

    def fn(x):
        x = np.asarray(x, dtype=float)
        xm = np.mod(x, L)
        out = np.asarray(raw(xm), dtype=float)
        if out.shape != xm.shape:
            out = np.broadcast_to(out, xm.shape).copy()
        return out

    return fn, (value if isinstance(value, str) else repr(value))


def _check_coefficient_range(fn, L, name, lo, hi, strict=True):
    xs = np.linspace(0.0, L, 1024, endpoint=False)
    vals = fn(xs)
    bad_lo = vals <= lo if strict else vals < lo
    bad_hi = vals >= hi if strict else vals > hi
    if bad_lo.any() or bad_hi.any():
        raise ConfigurationError(
            f"{name}: values must lie in ({lo}, {hi}); sampled range "
            f"[{vals.min():.6g}, {vals.max():.6g}]"
        )


# ---------------------------------------------------------------------------
# Preset factories
# ---------------------------------------------------------------------------

def _finish(f, f_u, L, tag, params, kinks=(), u_roof=1.0):
    f = _broadcast(f)
    f_u = _broadcast(f_u)
    model = ReactionModel(f, f_u, L, K_FLOOR, tag, params, tuple(kinks))
    K = lipschitz_bound(model, u_roof)
    return ReactionModel(f, f_u, L, K, tag, params, tuple(kinks))


def _make_kpp(params):
    L = float(params.get("L", 1.0))
    r_spec = params.get("r", 1.0)
    r, r_echo = _as_coefficient(r_spec, L, "r")
    _check_coefficient_range(r, L, "r", 0.0, np.inf)

    def f(x, u):
        return r(x) * u * (1.0 - u)

    def f_u(x, u):
        return r(x) * (1.0 - 2.0 * u)

    return _finish(f, f_u, L, "kpp", {"r": r_echo, "L": L})


def _make_allen_cahn(params):
    L = float(params.get("L", 1.0))
    if "a" not in params:
        raise ConfigurationError("allen_cahn: missing required parameter 'a' (interior-zero profile)")
    a, a_echo = _as_coefficient(params["a"], L, "a")
    _check_coefficient_range(a, L, "a", 0.0, 1.0)

    def f(x, u):
        return u * (1.0 - u) * (u - a(x))

    def f_u(x, u):
        ax = a(x)
        return -3.0 * u * u + 2.0 * (1.0 + ax) * u - ax

    return _finish(f, f_u, L, "allen_cahn", {"a": a_echo, "L": L})


def _make_combustion(params):
    L = float(params.get("L", 1.0))
    if "theta_ig" not in params:
        raise ConfigurationError("combustion: missing required parameter 'theta_ig' (ignition threshold)")
    theta = float(params["theta_ig"])
    if not (0.0 < theta < 1.0):
        raise ConfigurationError(f"combustion: theta_ig must lie in (0, 1), got {theta}")
    amp = float(params.get("amplitude", 1.0))
    if amp <= 0:
        raise ConfigurationError(f"combustion: amplitude must be > 0, got {amp}")

    # g(u) = amp*(u-theta)^2*(1-u) above the threshold: a cubic with a double
    # root at theta_ig, so f and f' are continuous there (C1 glue).
    def f(x, u):
        w = np.maximum(u - theta, 0.0)
        return amp * w * w * (1.0 - u) + 0.0 * np.asarray(x, dtype=float)

    def f_u(x, u):
        w = np.maximum(u - theta, 0.0)
        return amp * (2.0 * w * (1.0 - u) - w * w) + 0.0 * np.asarray(x, dtype=float)

    return _finish(f, f_u, L, "combustion", {"theta_ig": theta, "amplitude": amp, "L": L},
                   kinks=(theta,))


def _bistable_piece(lo, hi, z, s):
    """Cubic s*(u-lo)*(hi-u)*(u-z) vanishing at lo, z, hi (lo < z < hi)."""

    def g(u):
        return s * (u - lo) * (hi - u) * (u - z)

    def g_u(u):
        return s * ((hi - u) * (u - z) - (u - lo) * (u - z) + (u - lo) * (hi - u))

    return g, g_u


def _make_tristable(params):
    L = float(params.get("L", 1.0))
    missing = [k for k in ("theta",) if k not in params]
    if missing:
        raise ConfigurationError(f"tristable: missing required parameter(s) {missing}")
    theta = float(params["theta"])
    a1 = float(params.get("a1", 0.2))
    a2 = float(params.get("a2", 0.4))
    s1 = float(params.get("s1", 1.0))
    for name, v in (("theta", theta), ("a1", a1), ("a2", a2)):
        if not (0.0 < v < 1.0):
            raise ConfigurationError(f"tristable: {name} must lie in (0, 1), got {v}")
    if s1 <= 0:
        raise ConfigurationError(f"tristable: s1 must be > 0, got {s1}")

    z1 = a1 * theta
    z2 = theta + a2 * (1.0 - theta)
    # s2 chosen so the one-sided slopes match at theta: the glued cubic is C1.
    s2 = s1 * theta**2 * (1.0 - a1) / ((1.0 - theta) ** 2 * a2)
    g1, g1u = _bistable_piece(0.0, theta, z1, s1)
    g2, g2u = _bistable_piece(theta, 1.0, z2, s2)

    def f(x, u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= theta, g1(u), g2(u)) + 0.0 * np.asarray(x, dtype=float)

    def f_u(x, u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= theta, g1u(u), g2u(u)) + 0.0 * np.asarray(x, dtype=float)

    params_out = {"theta": theta, "a1": a1, "a2": a2, "s1": s1, "s2": s2,
                  "zeros": (0.0, z1, theta, z2, 1.0), "L": L}
    return _finish(f, f_u, L, "tristable", params_out, kinks=(theta,))


def _make_stacked(params):
    L = float(params.get("L", 1.0))
    theta1 = float(params.get("theta1", 0.3))
    a2 = float(params.get("a2", 2.0 / 7.0))
    s1 = float(params.get("s1", 1.0))
    for name, v in (("theta1", theta1), ("a2", a2)):
        if not (0.0 < v < 1.0):
            raise ConfigurationError(f"stacked_kpp_bistable: {name} must lie in (0, 1), got {v}")
    if s1 <= 0:
        raise ConfigurationError(f"stacked_kpp_bistable: s1 must be > 0, got {s1}")

    z2 = theta1 + a2 * (1.0 - theta1)
    # C1 glue: logistic slope -s1*theta1 at theta1 matched by the upper cubic.
    s2 = s1 * theta1 / (a2 * (1.0 - theta1) ** 2)
    g2, g2u = _bistable_piece(theta1, 1.0, z2, s2)

    def f(x, u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= theta1, s1 * u * (theta1 - u), g2(u)) + 0.0 * np.asarray(x, dtype=float)

    def f_u(x, u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= theta1, s1 * (theta1 - 2.0 * u), g2u(u)) + 0.0 * np.asarray(x, dtype=float)

    params_out = {"theta1": theta1, "a2": a2, "s1": s1, "s2": s2,
                  "fprime0": s1 * theta1, "zeros": (0.0, theta1, z2, 1.0), "L": L}
    return _finish(f, f_u, L, "stacked_kpp_bistable", params_out, kinks=(theta1,))


def _make_custom(params):
    L = float(params.get("L", 1.0))
    if "expression" in params:
        xs, us = sp.symbols("x u")
        try:
            expr = sp.sympify(params["expression"], locals={"L": sp.Float(L), "pi": sp.pi})
        except (sp.SympifyError, SyntaxError) as exc:
            raise ConfigurationError(f"expression: cannot parse: {exc}") from None
        free = expr.free_symbols - {xs, us}
        if free:
            raise ConfigurationError(f"expression: unknown symbols {sorted(map(str, free))}")
        dexpr = sp.diff(expr, us)
        f_raw = sp.lambdify((xs, us), expr, "numpy")
        fu_raw = sp.lambdify((xs, us), dexpr, "numpy")

        def f(x, u):
            return f_raw(np.mod(np.asarray(x, dtype=float), L), np.asarray(u, dtype=float))

        def f_u(x, u):
            return fu_raw(np.mod(np.asarray(x, dtype=float), L), np.asarray(u, dtype=float))

        model = _finish(f, f_u, L, "custom", {"expression": params["expression"], "L": L},
                        u_roof=float(params.get("u_roof", 1.0)))
        zero = np.max(np.abs(model.f(np.linspace(0, L, 128), np.zeros(128))))
        if zero > 1e-12:
            raise ConfigurationError(f"expression: f(x, 0) must vanish; max |f(x,0)| = {zero:.3g}")
        return model
    if "table" in params:
        return _make_table_model(params["table"], L, params)
    raise ConfigurationError("custom: provide 'expression' or 'table'")


def _make_table_model(table, L, params):
    """Bilinear model from a rectangular (x, u) table.

    `table` is a CSV path with header x,u,f (long format) or a dict with keys
    x, u, f.  The u = 0 column is pinned to zero so f(x, 0) = 0 holds by
    construction; x wraps with period L.
    """
    if isinstance(table, dict):
        x_nodes = np.asarray(table["x"], dtype=float)
        u_nodes = np.asarray(table["u"], dtype=float)
        F = np.asarray(table["f"], dtype=float)
    else:
        rows = np.loadtxt(table, delimiter=",", skiprows=1)
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise ConfigurationError(f"table {table}: expected three columns x,u,f")
        x_nodes = np.unique(rows[:, 0])
        u_nodes = np.unique(rows[:, 1])
        if x_nodes.size * u_nodes.size != rows.shape[0]:
            raise ConfigurationError(f"table {table}: grid is not rectangular")
        F = np.full((x_nodes.size, u_nodes.size), np.nan)
        ix = np.searchsorted(x_nodes, rows[:, 0])
        iu = np.searchsorted(u_nodes, rows[:, 1])
        F[ix, iu] = rows[:, 2]
        if np.isnan(F).any():
            raise ConfigurationError(f"table {table}: grid has holes")
    if x_nodes.size < 2 or u_nodes.size < 2:
        raise ConfigurationError("table: need at least a 2x2 grid")
    if abs(u_nodes[0]) > 1e-12:
        raise ConfigurationError("table: u grid must start at u = 0")
    F = F.copy()
    F[:, 0] = 0.0  # pin the u = 0 row so f(x,0) = 0 by construction
    if x_nodes[-1] - x_nodes[0] > L + 1e-9:
        raise ConfigurationError("table: x grid exceeds one period")

    def locate(nodes, v):
        i = np.clip(np.searchsorted(nodes, v, side="right") - 1, 0, nodes.size - 2)
        t = (v - nodes[i]) / (nodes[i + 1] - nodes[i])
        return i, np.clip(t, 0.0, 1.0)

    def f(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        x, u = np.broadcast_arrays(x, u)
        xm = np.mod(x - x_nodes[0], L) + x_nodes[0]
        ix, tx = locate(x_nodes, xm)
        iu, tu = locate(u_nodes, np.clip(u, u_nodes[0], u_nodes[-1]))
        v00 = F[ix, iu]
        v01 = F[ix, iu + 1]
        v10 = F[ix + 1, iu]
        v11 = F[ix + 1, iu + 1]
        return (1 - tx) * ((1 - tu) * v00 + tu * v01) + tx * ((1 - tu) * v10 + tu * v11)

    def f_u(x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        x, u = np.broadcast_arrays(x, u)
        xm = np.mod(x - x_nodes[0], L) + x_nodes[0]
        ix, tx = locate(x_nodes, xm)
        iu, _ = locate(u_nodes, np.clip(u, u_nodes[0], u_nodes[-1]))
        du = u_nodes[iu + 1] - u_nodes[iu]
        s0 = (F[ix, iu + 1] - F[ix, iu]) / du
        s1 = (F[ix + 1, iu + 1] - F[ix + 1, iu]) / du
        return (1 - tx) * s0 + tx * s1

    echo = table if isinstance(table, str) else "<inline table>"
    return _finish(f, f_u, L, "custom", {"table": echo, "L": L},
                   kinks=tuple(u_nodes[1:-1]), u_roof=float(u_nodes[-1]))


_FACTORIES = {
    "kpp": _make_kpp,
    "allen_cahn": _make_allen_cahn,
    "combustion": _make_combustion,
    "tristable": _make_tristable,
    "stacked_kpp_bistable": _make_stacked,
    "custom": _make_custom,
}


def make_preset(tag: str, params: dict | None = None, **kwargs) -> ReactionModel:
    """Build a ReactionModel from a preset family; see _FACTORIES for tags."""
    if tag not in _FACTORIES:
        raise ConfigurationError(f"unknown preset {tag!r}; choose from {sorted(_FACTORIES)}")
    merged = dict(params or {})
    merged.update(kwargs)
    return _FACTORIES[tag](merged)


# ---------------------------------------------------------------------------
# Bounds and validation
# ---------------------------------------------------------------------------

def lipschitz_bound(model: ReactionModel, u_max: float, nx: int = 512, nu: int = 512) -> float:
    """Smallest sampled K with f(x, u) <= K*u on 0 <= u <= u_max.

    Sampled as the max of f(x, u)/u over a grid (locally refined around the
    grid argmax), with the u -> 0 limit taken from f_u(x, 0); clamped below
    at K_FLOOR.
    """
    if not (u_max > 0):
        raise ConfigurationError("u_max must be > 0")
    L = model.period_L
    xs = np.linspace(0.0, L, nx, endpoint=False)
    us = np.linspace(0.0, u_max, nu)[1:]
    ratios = model.f(xs[:, None], us[None, :]) / us[None, :]
    best = float(np.max(ratios))
    ix, iu = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    # polish the discrete argmax so interior maxima of f/u are not clipped
    du = us[1] - us[0]
    dxs = L / nx
    u_fine = np.clip(np.linspace(us[iu] - 2 * du, us[iu] + 2 * du, 2001), us[0] / 2, u_max)
    x_fine = xs[ix] + np.linspace(-2 * dxs, 2 * dxs, 401)
    best = max(best, float(np.max(model.f(x_fine[:, None], u_fine[None, :]) / u_fine[None, :])))
    k0 = np.max(model.f_u(xs, np.zeros_like(xs)))
    return float(max(best, k0, K_FLOOR))


def max_abs_fu(model: ReactionModel, u_max: float, nx: int = 256, nu: int = 512) -> float:
    """max |f_u| over one period and 0 <= u <= u_max (time-step constraint)."""
    xs = np.linspace(0.0, model.period_L, nx, endpoint=False)
    us = np.linspace(0.0, u_max, nu)
    return float(np.max(np.abs(model.f_u(xs[:, None], us[None, :]))))


@dataclass
class ValidationEntry:
    name: str
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


@dataclass
class ValidationReport:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, name: str) -> ValidationEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def summary(self) -> str:
        lines = [f"{'PASS' if e.passed else 'FAIL'}  {e.name}: max violation "
                 f"{e.max_violation:.3e} (tol {e.tolerance:.1e})" for e in self.entries]
        return "\n".join(lines)


def validate(model: ReactionModel, nx: int = 64, nu: int = 41, u_max: float = 1.0,
             probe_step: float = 1e-4, seed: int = 0) -> ValidationReport:
    """Report the worst violation of each model invariant over a sampling grid.

    Probes for the derivative check avoid declared C1 glue points, where f''
    jumps and a centered difference of f is not second-order accurate.
    """
    rng = np.random.default_rng(seed)
    L = model.period_L
    xs = np.linspace(0.0, L, nx, endpoint=False)
    us = np.linspace(0.0, u_max, nu)
    X, U = xs[:, None], us[None, :]

    fv = model.f(X, U)
    scale = 1.0 + np.abs(fv)

    per = np.abs(model.f(X + L, U) - fv) / scale
    per_rand = 0.0
    xr = rng.uniform(0, L, 200)
    ur = rng.uniform(0, u_max, 200)
    shifts = rng.integers(1, 5, 200) * L
    per_rand = np.max(np.abs(model.f(xr + shifts, ur) - model.f(xr, ur))
                      / (1.0 + np.abs(model.f(xr, ur))))

    zero_row = np.max(np.abs(model.f(xs, np.zeros_like(xs))))

    h = probe_step
    keep = np.ones(us.shape, dtype=bool)
    for kink in model.kinks_u:
        keep &= np.abs(us - kink) > 4 * h
    uk = us[keep][None, :]
    centered = (model.f(X, uk + h) - model.f(X, uk - h)) / (2 * h)
    fu_dev = np.max(np.abs(model.f_u(X, uk) - centered))

    K = model.lipschitz_K
    lip = np.max(model.f(X, U) - K * U)

    entries = [
        ValidationEntry("periodicity", float(max(per.max(), per_rand)), 1e-12),
        ValidationEntry("f(.,0)=0", float(zero_row), 1e-12),
        ValidationEntry("f_u consistency", float(fu_dev), max(1e-6, 10 * h**2)),
        ValidationEntry("f<=K*u", float(lip), 1e-10),
    ]
    return ValidationReport(entries)

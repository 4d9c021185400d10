"""L-periodic stationary states: p'' + f(x, p) = 0 with periodic wrap.

Newton solves on the centered-difference discretization, enumeration of
constant states for homogeneous media, and a three-valued isolation probe.
"""
from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from . import eigen
from .errors import ConfigurationError, NoConvergenceError, UnsupportedModelError
from .profiles import Profile, constant_profile
from .reaction import ReactionModel

#: |mu0| below this is reported as marginal rather than guessing stability
MARGINAL_BAND = 1e-6

DEFAULT_POINTS_PER_PERIOD = 256


@dataclass
class Stability:
    mu0: float
    verdict_below: str
    verdict_above: str


@dataclass
class StationaryState:
    profile: Profile
    residual: float
    stability: Stability
    negative_min: bool = False

    def value_at(self, x) -> float:
        return float(self.profile(x))

    def to_json(self) -> dict:
        return {
            "residual": self.residual,
            "mu0": self.stability.mu0,
            "verdict_below": self.stability.verdict_below,
            "verdict_above": self.stability.verdict_above,
            "negative_min": self.negative_min,
        }


def _verdicts_from_mu0(mu0: float) -> Stability:
    if mu0 > MARGINAL_BAND:
        v = "stable"
    elif mu0 < -MARGINAL_BAND:
        v = "unstable"
    else:
        v = "marginal"
    return Stability(mu0, v, v)


def discrete_residual(model: ReactionModel, prof: Profile) -> np.ndarray:
    """Centered-difference residual of p'' + f(x, p) with periodic wrap."""
    p = prof.values
    h = prof.dx
    lap = (np.roll(p, -1) - 2 * p + np.roll(p, 1)) / h**2
    return lap + model.f(prof.x, p)


def solve_periodic(model: ReactionModel, guess: Profile, tol: float = 1e-10,
                   max_iter: int = 60, fill_stability: bool = True) -> StationaryState:
    """Damped Newton on the discretized periodic stationary problem."""
    if not guess.periodic:
        raise ConfigurationError("guess must be a periodic profile")
    if abs(guess.period - model.period_L) > 1e-9 * model.period_L:
        raise ConfigurationError(
            f"guess period {guess.period} does not match model period {model.period_L}")
    if not (tol > 0):
        raise ConfigurationError("tol must be > 0")

    p = guess.values.copy()
    x = guess.x
    h = guess.dx
    n = p.size

    def residual(vec):
        lap = (np.roll(vec, -1) - 2 * vec + np.roll(vec, 1)) / h**2
        return lap + model.f(x, vec)

    res = residual(p)
    rnorm = np.max(np.abs(res))
    for _ in range(max_iter):
        if rnorm <= tol:
            break
        fu = model.f_u(x, p)
        main = -2.0 / h**2 + fu
        off = np.full(n, 1.0 / h**2)
        J = sparse.diags([main, off[:-1], off[1:]], [0, 1, -1], format="lil")
        J[0, n - 1] = 1.0 / h**2
        J[n - 1, 0] = 1.0 / h**2
        try:
            delta = spla.splu(J.tocsc()).solve(-res)
        except RuntimeError as exc:
            raise NoConvergenceError(f"singular Newton system: {exc}", last_residual=rnorm) from None
        s = 1.0
        for _ in range(30):
            cand = p + s * delta
            cres = residual(cand)
            cnorm = np.max(np.abs(cres))
            if cnorm < (1.0 - 0.5 * s) * rnorm or cnorm <= tol:
                break
            s *= 0.5
        else:
            raise NoConvergenceError("Newton line search stalled", last_residual=rnorm)
        p, res, rnorm = cand, cres, cnorm
    else:
        raise NoConvergenceError(
            f"no convergence after {max_iter} Newton iterations", last_residual=rnorm)

    prof = Profile(p, h, guess.x0, periodic=True)
    negative = bool(np.min(p) < 0)
    if negative:
        warnings.warn(f"stationary solve converged to min p = {np.min(p):.3e} < 0", RuntimeWarning)
    if fill_stability:
        mu0 = eigen.principal_eigenvalue(model, prof, 0.0).mu
    else:
        mu0 = float("nan")
    return StationaryState(prof, float(rnorm), _verdicts_from_mu0(mu0), negative)


def enumerate_constant_states(model: ReactionModel, u_max: float,
                              scan_step: float = 1e-4, n_profile: int = 64,
                              fill_stability: bool = True) -> list[StationaryState]:
    """All constant stationary states of a homogeneous model on [0, u_max].

    Roots are the sign-change brackets of u -> f(u) (refined by brentq) plus
    the endpoints of exact-zero plateaus (degenerate continua are reported by
    their edges).
    """
    if not model.is_homogeneous():
        raise UnsupportedModelError("enumerate_constant_states requires an x-independent model")
    us = np.arange(0.0, u_max + scan_step / 2, scan_step)
    vals = model.f(np.zeros_like(us), us)
    scale = 1.0 + np.max(np.abs(vals))
    zero = np.abs(vals) <= 1e-13 * scale

    roots: list[float] = []
    # exact-zero plateau edges (isolated zeros give a single edge)
    i = 0
    while i < us.size:
        if zero[i]:
            j = i
            while j + 1 < us.size and zero[j + 1]:
                j += 1
            roots.append(us[i])
            if j > i:
                roots.append(us[j])
            i = j + 1
        else:
            i += 1
    # sign changes between nonzero samples
    for i in range(us.size - 1):
        if not zero[i] and not zero[i + 1] and vals[i] * vals[i + 1] < 0:
            roots.append(brentq(lambda u: float(model.f(0.0, u)), us[i], us[i + 1], xtol=1e-14))

    roots = sorted(roots)
    dedup: list[float] = []
    for r in roots:
        if not dedup or r - dedup[-1] > 10 * scan_step:
            dedup.append(r)

    states = []
    for r in dedup:
        prof = constant_profile(r, model.period_L, n_profile)
        if fill_stability:
            mu0 = -float(model.f_u(0.0, r))
        else:
            mu0 = float("nan")
        states.append(StationaryState(prof, 0.0, _verdicts_from_mu0(mu0), r < 0))
    return states


class IsolationVerdict(str, enum.Enum):
    ISOLATED = "isolated"
    ACCUMULATION_SUSPECTED = "accumulation_suspected"
    INCONCLUSIVE = "inconclusive"


def is_isolated_below(state: StationaryState, model: ReactionModel,
                      probe_depth: int = 5, gap_floor: float = 1e-3,
                      tol: float = 1e-10) -> IsolationVerdict:
    """Probe for stationary states accumulating at `state` from below.

    Restarts the periodic solve from downward perturbations p - eps*phi with
    eps geometric in [1e-2, 1e-6] and phi the principal eigenfunction.
    """
    if probe_depth < 2:
        raise ConfigurationError("probe_depth must be >= 2")
    try:
        phi = eigen.principal_eigenvalue(model, state.profile, 0.0).eigenfunction
    except NoConvergenceError:
        return IsolationVerdict.INCONCLUSIVE
    p = state.profile
    eps_values = np.geomspace(1e-2, 1e-6, probe_depth)
    coincide_tol = max(1e-8, 100 * tol)
    distances = []
    for eps in eps_values:
        guess = Profile(p.values - eps * phi(p.x), p.dx, p.x0, periodic=True)
        try:
            q = solve_periodic(model, guess, tol=tol, fill_stability=False)
        except (NoConvergenceError, ConfigurationError):
            return IsolationVerdict.INCONCLUSIVE
        distances.append(float(np.max(np.abs(q.profile.values - p.values))))
    distances = np.asarray(distances)
    if np.all(distances <= coincide_tol):
        return IsolationVerdict.ISOLATED
    significant = distances[distances > coincide_tol]
    if np.all(significant >= gap_floor):
        return IsolationVerdict.ISOLATED
    # distances tracking eps without collapsing onto the state: continuum nearby
    tracking = (distances <= 10 * eps_values) & (distances >= 0.1 * eps_values)
    if tracking.sum() >= probe_depth / 2:
        return IsolationVerdict.ACCUMULATION_SUSPECTED
    return IsolationVerdict.INCONCLUSIVE


def state_to_json_file(state: StationaryState, path) -> None:
    with open(path, "w") as fh:
        json.dump(state.to_json(), fh, sort_keys=True, indent=2)

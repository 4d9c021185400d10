"""Time integration of u_t = u_xx + f(x, u) on a truncated line.

IMEX scheme: implicit centered diffusion (prefactored tridiagonal solve),
explicit reaction.  The reaction step is order-preserving under
dt <= 1/max|f_u|, which together with the M-matrix diffusion solve makes the
whole step monotone -- the discrete comparison principle every zero-number
and steepness diagnostic relies on.  Heaviside-type data u0 = p(x) for
x <= a, 0 for x > a; boundary nodes clamped to p on the left, 0 on the right.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.special import erfc  # noqa: F401  (re-exported for test oracles)

from .errors import ConfigurationError, IntegrationFailureError
from .profiles import Profile
from .reaction import ReactionModel, max_abs_fu


@dataclass
class Domain:
    x_left: float
    x_right: float
    dx: float

    def __post_init__(self):
        if not (self.dx > 0 and self.x_right > self.x_left):
            raise ConfigurationError("domain requires dx > 0 and x_right > x_left")
        n_cells = (self.x_right - self.x_left) / self.dx
        if abs(n_cells - round(n_cells)) > 1e-8:
            raise ConfigurationError("domain width must be an integer multiple of dx")

    @property
    def n(self) -> int:
        return int(round((self.x_right - self.x_left) / self.dx)) + 1

    @property
    def x(self) -> np.ndarray:
        return self.x_left + self.dx * np.arange(self.n)


def default_dt(model: ReactionModel, dx: float, u_max: float = 1.05) -> float:
    """min(0.25*dx^2, 0.5/max|f_u|): reaction splitting error below the
    diffusion discretization error, with half the monotonicity headroom."""
    return min(0.25 * dx * dx, 0.5 * monotone_dt_limit(model, u_max))


def monotone_dt_limit(model: ReactionModel, u_max: float = 1.05) -> float:
    m = max_abs_fu(model, u_max)
    return 1.0 / m if m > 0 else np.inf


def make_initial(p: Profile, a: float, domain: Domain) -> np.ndarray:
    """Heaviside-type field: p(x) for x <= a (the node at a included), 0 beyond."""
    if not p.periodic:
        raise ConfigurationError("p must be a periodic profile")
    L = p.period
    if domain.x_left > a - 10 * L or domain.x_right < a + 10 * L:
        raise ConfigurationError(
            f"domain must contain a = {a} with margin >= 10L = {10 * L} on each side")
    x = domain.x
    u0 = np.where(x <= a + 1e-9 * domain.dx, p(x), 0.0)
    return u0


class Trajectory:
    """One integration run: current field, recorded snapshots, step machinery.

    Snapshots are (t, field) pairs recorded every `record_every` time units;
    `series` optionally stores per-step values at watch indices (dense-in-time
    recording near level-crossing events without storing full fields).
    """

    def __init__(self, model: ReactionModel, domain: Domain, u0: np.ndarray,
                 dt: float, a_shift: float | None = None,
                 bc_left: float | None = None, bc_right: float = 0.0,
                 record_every: float = 0.5, watch_indices=None,
                 u_cap: float | None = None):
        u0 = np.asarray(u0, dtype=float)
        if u0.size != domain.n:
            raise ConfigurationError("u0 size does not match the domain grid")
        cap = float(np.max(u0)) if u_cap is None else u_cap
        limit = monotone_dt_limit(model, max(cap, 1e-6) + 0.05)
        if dt > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"dt = {dt} violates the order-preservation constraint; admissible max is "
                f"{limit:.6g} (= 1/max|f_u| on the invariant range)")
        self.model = model
        self.domain = domain
        self.dt = float(dt)
        self.a_shift = a_shift
        self.bc_left = float(u0[0]) if bc_left is None else float(bc_left)
        self.bc_right = float(bc_right)
        self.record_every = float(record_every)
        self.t = 0.0
        self.u = u0.copy()
        self.u[0] = self.bc_left
        self.u[-1] = self.bc_right
        self.snapshots: list[tuple[float, np.ndarray]] = [(0.0, self.u.copy())]
        self._x = domain.x
        self._xi = self._x[1:-1]
        n_int = domain.n - 2
        lam = dt / domain.dx**2
        A = sparse.diags(
            [np.full(n_int, 1.0 + 2.0 * lam), np.full(n_int - 1, -lam), np.full(n_int - 1, -lam)],
            [0, 1, -1], format="csc")
        self._lu = spla.splu(A)
        self._lam = lam
        self._next_record = self.record_every
        self.watch_indices = None if watch_indices is None else np.asarray(watch_indices, dtype=int)
        self.series_t: list[float] = []
        self.series_u: list[np.ndarray] = []
        if self.watch_indices is not None:
            self.series_t.append(0.0)
            self.series_u.append(self.u[self.watch_indices].copy())

    # -- views ---------------------------------------------------------------

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.snapshots])

    @property
    def fields(self) -> np.ndarray:
        return np.array([f for _, f in self.snapshots])

    def field_at(self, t: float) -> np.ndarray:
        """Snapshot nearest to t."""
        times = self.times
        return self.snapshots[int(np.argmin(np.abs(times - t)))][1]

    def series(self) -> tuple[np.ndarray, np.ndarray]:
        if self.watch_indices is None:
            raise ConfigurationError("trajectory was built without watch indices")
        return np.asarray(self.series_t), np.asarray(self.series_u)

    def metadata(self) -> dict:
        return {
            "model": self.model.preset_tag,
            "model_params": {k: v for k, v in self.model.params.items()},
            "domain": {"x_left": self.domain.x_left, "x_right": self.domain.x_right,
                       "dx": self.domain.dx},
            "dt": self.dt,
            "a": self.a_shift,
            "bc": {"left": self.bc_left, "right": self.bc_right},
        }


def step(traj: Trajectory) -> Trajectory:
    """Advance one IMEX step; records a snapshot when due."""
    u = traj.u
    v = u[1:-1] + traj.dt * traj.model.f(traj._xi, u[1:-1])
    v[0] += traj._lam * traj.bc_left
    v[-1] += traj._lam * traj.bc_right
    new = traj._lu.solve(v)
    if not np.isfinite(new).all():
        raise IntegrationFailureError("non-finite field detected", last_valid_time=traj.t)
    traj.u[1:-1] = new
    traj.t += traj.dt
    if traj.watch_indices is not None:
        traj.series_t.append(traj.t)
        traj.series_u.append(traj.u[traj.watch_indices].copy())
    if traj.t + 1e-9 * traj.dt >= traj._next_record:
        traj.snapshots.append((traj.t, traj.u.copy()))
        traj._next_record += traj.record_every
    return traj


def run(model: ReactionModel, p: Profile | np.ndarray, a: float | None, domain: Domain,
        T_final: float, observers=(), dt: float | None = None,
        record_every: float = 0.5, watch_indices=None) -> Trajectory:
    """Integrate to T_final, invoking observers at each recorded step.

    `p` periodic + `a` builds Heaviside-type data clamped to p on the left and
    0 on the right; alternatively pass a raw field (`a=None`) whose endpoint
    values become the clamps.
    """
    if isinstance(p, Profile) and p.periodic and a is not None:
        u0 = make_initial(p, a, domain)
        bc_left = float(p(domain.x_left))
        u_cap = p.max()
    else:
        u0 = np.asarray(p, dtype=float)
        bc_left = float(u0[0])
        u_cap = float(np.max(np.abs(u0)))
    if dt is None:
        dt = default_dt(model, domain.dx, max(u_cap, 1.0) + 0.05)
    traj = Trajectory(model, domain, u0, dt, a_shift=a, bc_left=bc_left,
                      record_every=record_every, watch_indices=watch_indices,
                      u_cap=max(u_cap, 1.0))
    for obs in observers:
        obs(traj)
    n_steps = int(round(T_final / dt))
    n_recorded = len(traj.snapshots)
    for _ in range(n_steps):
        step(traj)
        if len(traj.snapshots) > n_recorded:
            n_recorded = len(traj.snapshots)
            for obs in observers:
                obs(traj)
    if traj.snapshots[-1][0] < traj.t - 1e-9 * dt:
        traj.snapshots.append((traj.t, traj.u.copy()))
        for obs in observers:
            obs(traj)
    return traj


# ---------------------------------------------------------------------------
# Spreading diagnostics
# ---------------------------------------------------------------------------

@dataclass
class SpreadingReport:
    times: np.ndarray
    front_pos: np.ndarray
    c_lower_emp: float
    c_upper_emp: float
    c_slope: float
    supersolution_max_excess: float
    level: float
    c_grid_tail_sup: dict = field(default_factory=dict)

    def ratios(self) -> np.ndarray:
        return self.front_pos / self.times


def spreading_monitor(traj: Trajectory, c_grid=None, level: float = 1e-2,
                      t_min: float = 10.0) -> SpreadingReport:
    """Front position (rightmost u >= level), empirical speed bounds and the
    exponential supersolution check exp(-sqrt(K)(x - a - 2 sqrt(K) t)) * max p."""
    if traj.a_shift is None:
        raise ConfigurationError("spreading_monitor needs a Heaviside-type run (a_shift set)")
    x = traj.x
    times, fronts = [], []
    for t, u in traj.snapshots:
        if t < t_min:
            continue
        above = np.nonzero(u >= level)[0]
        if above.size == 0:
            continue
        times.append(t)
        fronts.append(x[above[-1]])
    if len(times) < 4:
        raise ConfigurationError("trajectory too short past t_min for spreading estimates")
    times = np.asarray(times)
    fronts = np.asarray(fronts)
    ratios = fronts / times
    tail = times >= times[0] + 0.5 * (times[-1] - times[0])
    c_lower = float(np.min(ratios[tail]))
    c_upper = float(np.max(ratios[tail]))
    slope = float(np.polyfit(times[tail], fronts[tail], 1)[0])

    K = traj.model.lipschitz_K
    rootK = np.sqrt(K)
    pmax = float(max(traj.bc_left, np.max(traj.snapshots[0][1])))
    excess = 0.0
    a = traj.a_shift
    for t, u in traj.snapshots:
        bound = pmax * np.exp(np.minimum(-rootK * (x - a - 2 * rootK * t), 50.0))
        excess = max(excess, float(np.max(u - bound)))

    tail_sup = {}
    if c_grid is not None:
        t_end, u_end = traj.snapshots[-1]
        for c in c_grid:
            mask = x >= a + c * t_end
            tail_sup[float(c)] = float(np.max(u_end[mask])) if mask.any() else 0.0
    return SpreadingReport(times, fronts, c_lower, c_upper, slope, excess, level, tail_sup)


def snapshots_to_csv(traj: Trajectory, path, t_stride: int = 1, x_stride: int = 1) -> None:
    """Long-format t,x,u dump (optionally strided to keep artifacts small)."""
    x = traj.x[::x_stride]
    with open(path, "w") as fh:
        fh.write("t,x,u\n")
        for t, u in traj.snapshots[::t_stride]:
            for xi, ui in zip(x, u[::x_stride]):
                fh.write(f"{t!r},{xi!r},{ui!r}\n")

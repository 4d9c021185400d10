"""Periodic principal eigenvalues of the linearized operator.

Solves -phi'' + 2*lam*phi' - f_u(x, q(x))*phi = mu(lam)*phi with positive
L-periodic phi by two independent routes (inverse power iteration on the
non-self-adjoint discretization, and minimization of the variational
quotient), plus the Dirichlet variant on (-R, R) and the induced linear
spreading speed of the zero state.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError, NoConvergenceError
from .profiles import Profile, constant_profile
from .reaction import ReactionModel


@dataclass
class EigenResult:
    lam: float
    mu: float
    eigenfunction: Profile
    method_tag: str
    residual: float
    dirichlet_R: float | None = None
    info: dict = field(default_factory=dict)


def _coefficient_on_grid(model: ReactionModel, base: Profile, n: int):
    """Sample f_u(x, base(x)) on an n-point grid over one period."""
    L = model.period_L
    x = np.arange(n) * (L / n)
    return x, model.f_u(x, base(x))


def _drift_operator(n: int, h: float, lam: float, c: np.ndarray) -> sparse.csr_matrix:
    """-D2 + 2*lam*D1 - diag(c) with periodic wrap (centered differences)."""
    main = np.full(n, 2.0 / h**2) - c
    upper = np.full(n, -1.0 / h**2 + lam / h)
    lower = np.full(n, -1.0 / h**2 - lam / h)
    A = sparse.diags([main, upper[:-1], lower[1:]], [0, 1, -1], format="lil")
    A[0, n - 1] = -1.0 / h**2 - lam / h
    A[n - 1, 0] = -1.0 / h**2 + lam / h
    return A.tocsr()


def principal_eigenvalue(model: ReactionModel, base: Profile, lam: float,
                         n: int | None = None, tol: float = 1e-10,
                         max_iter: int = 400) -> EigenResult:
    """Leading (smallest real part) eigenvalue with positive periodic eigenfunction.

    Inverse power iteration with shift: for shifts below the principal
    eigenvalue the resolvent is entrywise positive, so the iteration converges
    to the Perron pair.
    """
    L = model.period_L
    if n is None:
        n = base.n if base.periodic and abs(base.period - L) < 1e-9 * L else 256
    h = L / n
    if abs(lam) * h >= 1.0:
        raise ConfigurationError(f"lambda*h = {lam * h:.3g} too large for a positive resolvent; refine the grid")
    x, c = _coefficient_on_grid(model, base, n)
    A = _drift_operator(n, h, lam, c).tocsc()

    # applying A amplifies rounding noise by its norm; do not ask for less
    opnorm = 4.0 / h**2 + float(np.max(np.abs(c))) + 2.0 * abs(lam) / h
    res_floor = 50 * np.finfo(float).eps * opnorm

    # mu(lam) >= mu(0) >= -max(c), so this shift sits strictly below it.
    s = -float(np.max(c)) - 1.0
    lu = spla.splu(A - s * sparse.identity(n, format="csc"))
    v = np.ones(n)
    mu = s
    refreshes = 0
    for it in range(max_iter):
        w = lu.solve(v)
        nrm = np.max(np.abs(w))
        if not np.isfinite(nrm) or nrm == 0:
            raise NoConvergenceError("inverse power iteration produced a degenerate vector")
        w = w / nrm
        if w[np.argmax(np.abs(w))] < 0:
            w = -w
        Aw = A @ w
        mu = float(w @ Aw / (w @ w))
        res = float(np.max(np.abs(Aw - mu * w)))
        v = w
        if res <= max(tol * (1.0 + abs(mu)), res_floor):
            if np.min(w) <= 0:
                raise NoConvergenceError("converged eigenvector is not positive (unexpected leading pair)")
            phi = w / np.max(w)
            prof = Profile(phi, h, 0.0, periodic=True)
            return EigenResult(lam, mu, prof, "direct", res, info={"iterations": it + 1})
        # tighten the shift once the estimate settles; keeps convergence linear-fast
        if it >= 4 and refreshes < 6 and res < 1e-3 * (1.0 + abs(mu)):
            s = mu - max(10 * res, 1e-8)
            lu = spla.splu(A - s * sparse.identity(n, format="csc"))
            refreshes += 1
    raise NoConvergenceError(f"inverse power iteration stagnated (residual {res:.3e})", last_residual=res)


# ---------------------------------------------------------------------------
# Variational route
# ---------------------------------------------------------------------------

def nadin_variational(model: ReactionModel, base: Profile, lam: float,
                      n: int | None = None, max_iter: int = 20000,
                      tol: float = 1e-13, floor_frac: float = 1e-6,
                      seed_eta: np.ndarray | None = None) -> EigenResult:
    """Minimize the periodic variational quotient for mu(lam).

    Q(eta) = [ int(eta'^2 - f_u eta^2) + lam^2 (int eta^2 - L^2/int eta^-2) ] / int eta^2
    over positive periodic eta, by projected descent (Barzilai-Borwein steps,
    diffusion-preconditioned gradient, positivity floor, renormalization).
    The minimizer is returned as an eigenfunction surrogate.
    """
    L = model.period_L
    if n is None:
        n = base.n if base.periodic and abs(base.period - L) < 1e-9 * L else 256
    h = L / n
    x, c = _coefficient_on_grid(model, base, n)
    lam2 = lam * lam

    P = _drift_operator(n, h, 0.0, np.zeros(n)) + sparse.identity(n)
    precond = spla.splu(P.tocsc())

    def quotient_and_grad(eta):
        d = (np.roll(eta, -1) - eta) / h
        S2 = h * np.sum(eta**2)
        Sm2 = h * np.sum(eta**-2)
        Kq = h * np.sum(d * d - c * eta**2)
        B = S2 - L * L / Sm2
        Q = (Kq + lam2 * B) / S2
        lap = (np.roll(eta, -1) - 2 * eta + np.roll(eta, 1)) / h**2
        gK = 2 * h * (-lap - c * eta)
        gS2 = 2 * h * eta
        gB = gS2 - (L * L / Sm2**2) * (2 * h * eta**-3)
        g = (gK + lam2 * gB - Q * gS2) / S2
        return Q, g

    eta = np.ones(n) if seed_eta is None else np.asarray(seed_eta, dtype=float).copy()
    eta = np.maximum(eta, floor_frac)
    Q, g = quotient_and_grad(eta)
    gp = precond.solve(g)
    step = 0.1
    floor_hits = 0
    stall = 0
    prev_eta, prev_gp = None, None
    for it in range(max_iter):
        if prev_eta is not None:
            de = eta - prev_eta
            dg = gp - prev_gp
            denom = float(de @ dg)
            if denom > 0:
                step = float(de @ de) / denom
            step = float(np.clip(step, 1e-6, 1e3))
        trial_step = step
        for _ in range(40):
            cand = eta - trial_step * gp
            floor = floor_frac * np.max(cand)
            clipped = cand < floor
            cand = np.maximum(cand, floor)
            cand = cand / np.max(cand)
            Qc, gc = quotient_and_grad(cand)
            if Qc <= Q + 1e-14 * (1 + abs(Q)):
                break
            trial_step *= 0.5
        else:
            raise NoConvergenceError("variational descent could not find a decreasing step")
        if clipped.any():
            floor_hits += 1
        prev_eta, prev_gp = eta, gp
        improved = Q - Qc
        eta, Q, g = cand, Qc, gc
        gp = precond.solve(g)
        if improved <= tol * (1 + abs(Q)):
            stall += 1
            if stall >= 25:
                break
        else:
            stall = 0
    if floor_hits > 0.5 * (it + 1):
        warnings.warn("variational minimizer: positivity floor active on most steps", RuntimeWarning)
    prof = Profile(eta / np.max(eta), h, 0.0, periodic=True)
    return EigenResult(lam, float(Q), prof, "variational", residual=float(np.max(np.abs(g))),
                       info={"iterations": it + 1, "floor_hits": floor_hits})


# ---------------------------------------------------------------------------
# Curvature check mu(lam) - mu(0) = O(lam^2)
# ---------------------------------------------------------------------------

@dataclass
class CurvatureReport:
    lams: np.ndarray
    mus: np.ndarray
    c2: float
    max_residual: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.threshold


def quadratic_fit_report(lams, mus) -> CurvatureReport:
    """Least-squares fit mu(lam) - mu(0) = c2*lam^2; pure fit helper."""
    lams = np.asarray(lams, dtype=float)
    mus = np.asarray(mus, dtype=float)
    i0 = int(np.argmin(np.abs(lams)))
    if abs(lams[i0]) > 1e-12:
        raise ConfigurationError("lambda grid must contain 0")
    y = mus - mus[i0]
    l2 = lams**2
    c2 = float(l2 @ y / (l2 @ l2)) if np.any(l2 > 0) else 0.0
    resid = y - c2 * l2
    lam_max = float(np.max(np.abs(lams)))
    threshold = 1e-3 * (1.0 + abs(c2)) * lam_max**2
    return CurvatureReport(lams, mus, c2, float(np.max(np.abs(resid))), threshold)


def mu_curvature_check(model: ReactionModel, base: Profile, lambda_grid) -> CurvatureReport:
    lams = np.sort(np.asarray(lambda_grid, dtype=float))
    if lams.size < 5:
        raise ConfigurationError("lambda grid needs >= 5 points")
    if np.max(np.abs(lams + lams[::-1])) > 1e-12:
        raise ConfigurationError("lambda grid must be symmetric about 0")
    mus = [principal_eigenvalue(model, base, la).mu for la in lams]
    return quadratic_fit_report(lams, np.asarray(mus))


# ---------------------------------------------------------------------------
# Dirichlet variant on (-R, R)
# ---------------------------------------------------------------------------

def dirichlet_eigenvalue(model: ReactionModel, base: Profile, R: float,
                         points_per_L: int = 64) -> EigenResult:
    """Principal pair of -psi'' - f_u(x, base)psi on (-R, R), psi(+-R) = 0."""
    L = model.period_L
    if R < L:
        raise ConfigurationError(f"R = {R} must be >= one period L = {L}")
    n = int(round(2 * R * points_per_L / L)) + 1
    x = np.linspace(-R, R, n)
    h = x[1] - x[0]
    xi = x[1:-1]
    c = model.f_u(xi, base(xi))
    diag = 2.0 / h**2 - c
    off = np.full(xi.size - 1, -1.0 / h**2)
    vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    mu = float(vals[0])
    psi = vecs[:, 0]
    if psi[np.argmax(np.abs(psi))] < 0:
        psi = -psi
    if np.min(psi) < -1e-12 * np.max(np.abs(psi)):
        raise NoConvergenceError("Dirichlet ground state is not sign-definite")
    full = np.zeros(n)
    full[1:-1] = np.maximum(psi, 0.0)
    full /= np.max(full)
    prof = Profile(full, h, -R, periodic=False)
    res = 0.0  # dense symmetric solve; residual at machine level
    return EigenResult(0.0, mu, prof, "dirichlet", res, dirichlet_R=R)


def dirichlet_ladder(model: ReactionModel, base: Profile, R_values) -> dict:
    """mu_R across a ladder of half-widths, with the periodic mu(0) limit."""
    Rs = sorted(float(R) for R in R_values)
    mus = [dirichlet_eigenvalue(model, base, R).mu for R in Rs]
    mu0 = principal_eigenvalue(model, base, 0.0).mu
    gaps = [m - mu0 for m in mus]
    monotone = all(mus[i + 1] <= mus[i] + 1e-10 for i in range(len(mus) - 1))
    shrinking = all(gaps[i + 1] <= gaps[i] + 1e-10 for i in range(len(gaps) - 1))
    return {"R": Rs, "mu_R": mus, "mu_periodic": mu0, "gaps": gaps,
            "monotone": monotone, "gap_shrinking": shrinking}


# ---------------------------------------------------------------------------
# Linear spreading speed of the zero state
# ---------------------------------------------------------------------------

@dataclass
class SpreadingSpeedResult:
    c_star: float | None
    lambda_star: float | None
    determinate: bool
    reason: str
    curve: list


def linear_spreading_speed(model: ReactionModel, lam_lo: float = 0.05,
                           lam_hi: float = 6.0, n_grid: int = 50,
                           n: int = 256) -> SpreadingSpeedResult:
    """Minimize c(lam) = (lam^2 - mu0(lam)) / lam over lam > 0 at base 0.

    Returns an indeterminate record when c is unbounded below on the grid
    (zero state not linearly unstable in the KPP sense).
    """
    zero = constant_profile(0.0, model.period_L, n)
    cache: dict[float, float] = {}

    def mu0(la: float) -> float:
        la = float(la)
        if la not in cache:
            cache[la] = principal_eigenvalue(model, zero, la, n=n).mu
        return cache[la]

    def c_of(la: float) -> float:
        return (la * la - mu0(la)) / la

    lams = np.geomspace(lam_lo, lam_hi, n_grid)
    cs = np.array([c_of(la) for la in lams])
    curve = [(float(la), float(cache[float(la)]), float(cv)) for la, cv in zip(lams, cs)]

    i = int(np.argmin(cs))
    if mu0(lams[0]) >= -1e-12 or i == 0 or cs[i] <= 0:
        return SpreadingSpeedResult(None, None, False,
                                    "c(lambda) has no interior positive minimum on the grid "
                                    "(zero state not linearly unstable in the KPP sense)", curve)
    if i == n_grid - 1:
        return SpreadingSpeedResult(None, None, False,
                                    "argmin at the right grid edge; enlarge lam_hi", curve)

    lo, hi = lams[i - 1], lams[i + 1]
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    f1, f2 = c_of(x1), c_of(x2)
    while b - a > 1e-8 * (1 + b):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - gr * (b - a)
            f1 = c_of(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + gr * (b - a)
            f2 = c_of(x2)
    lam_star = 0.5 * (a + b)
    return SpreadingSpeedResult(float(c_of(lam_star)), float(lam_star), True, "ok", curve)


def mu_curve_csv(path, results) -> None:
    """Emit (lambda, mu, method) rows for a list of EigenResults."""
    with open(path, "w", newline="") as fh:
        fh.write("lambda,mu,method\n")
        for r in results:
            fh.write(f"{r.lam!r},{r.mu!r},{r.method_tag}\n")

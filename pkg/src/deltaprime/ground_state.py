"""Stationary states: the matching system, both branches and the ground state.

A stationary state glues ``-phi^{x1}`` on the left half-line to ``phi^{x2}``
on the right one. Writing ``t_i = tanh(mu sqrt(omega) y_i)`` with
``x1 = y1``, ``x2 = -y2``, the matching conditions at the defect reduce to

    f(t1) = f(t2),   1/t1 + 1/t2 = gamma sqrt(omega),   f(t) = t^{2mu}(1 - t^2).

The symmetric solution ``t1 = t2 = 2/(gamma sqrt(omega))`` exists for every
``omega > omega0``; past ``omega_star`` two mirror-image asymmetric solutions
appear and carry strictly smaller action.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .model import (FunctionalValues, Grid, ModelParams, OutOfRange, QFunction,
                    assemble_profile, default_grid, functionals, stationary_residual)
from .quadrature import gauss_legendre, power_tail_integral

logger = logging.getLogger(__name__)

T_TOL = 1e-12
# Below (1 + NEAR_MERGE) * omega_star the root is found in a rescaled variable.
NEAR_MERGE = 1e-3
# Past GAP_OFFSET_LIMIT * omega_star the action gap is O(1) and plain tails are used.
GAP_OFFSET_LIMIT = 1.1


class BracketFailure(RuntimeError):
    """The root bracket showed no sign change."""


class Branch(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC_LEFT = "asymmetric_left"  # t1 < t2: the larger hump sits on x < 0
    ASYMMETRIC_RIGHT = "asymmetric_right"

    @property
    def is_asymmetric(self) -> bool:
        return self is not Branch.SYMMETRIC

    @classmethod
    def parse(cls, value) -> "Branch":
        if isinstance(value, Branch):
            return value
        key = str(value).strip().lower().replace("-", "_")
        if key in ("asymmetric", "asym"):
            return cls.ASYMMETRIC_LEFT
        if key in ("sym",):
            return cls.SYMMETRIC
        return cls(key)


@dataclass(frozen=True)
class TSolution:
    t1: float
    t2: float
    branch: Branch
    y1: float
    y2: float

    @property
    def x1(self) -> float:
        """Signed centre of the left soliton piece."""
        return self.y1

    @property
    def x2(self) -> float:
        """Signed centre of the right soliton piece."""
        return -self.y2

    def mirrored(self) -> "TSolution":
        other = {Branch.ASYMMETRIC_LEFT: Branch.ASYMMETRIC_RIGHT,
                 Branch.ASYMMETRIC_RIGHT: Branch.ASYMMETRIC_LEFT}.get(self.branch, self.branch)
        return TSolution(self.t2, self.t1, other, self.y2, self.y1)

    def as_dict(self) -> dict:
        return {"branch": self.branch.value, "t1": self.t1, "t2": self.t2,
                "y1": self.y1, "y2": self.y2}


def f_poly(mu: float, t):
    """t^{2mu} (1 - t^2); vectorized."""
    t = np.asarray(t, dtype=float)
    out = t ** (2.0 * mu) * (1.0 - t * t)
    return float(out) if out.ndim == 0 else out


def f_poly_prime(mu: float, t):
    t = np.asarray(t, dtype=float)
    out = 2.0 * mu * t ** (2.0 * mu - 1.0) - (2.0 * mu + 2.0) * t ** (2.0 * mu + 1.0)
    return float(out) if out.ndim == 0 else out


def system_residuals(params: ModelParams, omega: float, t1: float, t2: float) -> tuple[float, float]:
    """(|f(t1) - f(t2)|, |1/t1 + 1/t2 - gamma sqrt(omega)|)."""
    return (abs(f_poly(params.mu, t1) - f_poly(params.mu, t2)),
            abs(1.0 / t1 + 1.0 / t2 - params.a(omega)))


def center_from_t(params: ModelParams, omega: float, t: float) -> float:
    """Inverse of t = tanh(mu sqrt(omega) y)."""
    if t >= 1.0:
        return math.inf
    return math.atanh(t) / (params.mu * math.sqrt(omega))


def _check_above_omega0(params: ModelParams, omega: float):
    if not (math.isfinite(omega) and omega > params.omega0):
        raise OutOfRange(f"omega must exceed omega0 = {params.omega0!r}, got {omega!r}")


def solve_symmetric(params: ModelParams, omega: float) -> TSolution:
    _check_above_omega0(params, omega)
    a = params.a(omega)
    t = 2.0 / a
    y = math.log((a + 2.0) / (a - 2.0)) / (2.0 * params.mu * math.sqrt(omega))
    return TSolution(t, t, Branch.SYMMETRIC, y, y)


def w_lemma(mu: float, a: float, x: float) -> float:
    """Scalar function whose root in (2/a, 1] is the larger asymmetric t."""
    if not x > 1.0 / a:
        raise ValueError(f"w_lemma needs x > 1/a = {1.0 / a:.6g}, got {x}")
    num = (a * a - 1.0) * x * x - 2.0 * a * x + 1.0
    return num / (a * x - 1.0) ** (2.0 * mu + 2.0) + x * x - 1.0


def _merge_function(mu: float, c: float, s: float) -> float:
    """[log f(t1) - log f(t2)] / s with t2 = c + s and t1 = c - s/(1 + a s), a = 2/c.

    The O(1) parts cancel analytically, so the function stays accurate when
    both t's sit next to the merge point.
    """
    a = 2.0 / c
    e1 = s / (1.0 + a * s)
    one_m_c2 = 1.0 - c * c
    num = 2.0 * mu * (math.log1p(-e1 / c) - math.log1p(s / c))
    num += math.log1p(e1 * (2.0 * c - e1) / one_m_c2) - math.log1p(-s * (2.0 * c + s) / one_m_c2)
    return num / s


def _brent(func, lo: float, hi: float) -> float:
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketFailure(f"no sign change on [{lo!r}, {hi!r}]: f = ({f_lo:.3g}, {f_hi:.3g})")
    return optimize.brentq(func, lo, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)


def _larger_root(params: ModelParams, omega: float) -> tuple[float, float]:
    """Return ``(t2, s)`` with ``s = t2 - 2/(gamma sqrt(omega))`` kept to full relative precision."""
    mu, a = params.mu, params.a(omega)
    c = 2.0 / a
    t_bar = params.t_bar
    if omega < (1.0 + NEAR_MERGE) * params.omega_star:
        s_lo = max(t_bar - c, 0.0)
        s_hi = min(1.0 - c, 64.0 * s_lo + 1e-3)
        while True:
            try:
                s = _brent(lambda s: _merge_function(mu, c, s), s_lo, s_hi)
                break
            except BracketFailure:
                if s_hi >= 1.0 - c:
                    raise
                s_hi = min(1.0 - c, 4.0 * s_hi)
        return c + s, s
    lo = max(c * (1.0 + 1e-12), t_bar)
    t2 = _brent(lambda x: w_lemma(mu, a, x), lo, 1.0)
    return t2, t2 - c


def _solve_asymmetric_s(params: ModelParams, omega: float) -> tuple[float, float, float]:
    if not (math.isfinite(omega) and omega > params.omega_star):
        raise OutOfRange(f"asymmetric states need omega > omega_star = "
                         f"{params.omega_star:.10g}, got {omega!r}")
    a = params.a(omega)
    t2, s = _larger_root(params, omega)
    if s < 0.5:
        # t1 = c - s/(1 + a s) keeps relative accuracy next to the merge point
        t1 = 2.0 / a - s / (1.0 + a * s)
    else:
        t1 = 1.0 / (a - 1.0 / t2)
    return t1, t2, s


def solve_asymmetric(params: ModelParams, omega: float) -> tuple[TSolution, TSolution]:
    """The mirror pair of asymmetric solutions (left-heavy first)."""
    t1, t2, _ = _solve_asymmetric_s(params, omega)
    y1 = center_from_t(params, omega, t1)
    y2 = center_from_t(params, omega, t2)
    left = TSolution(t1, t2, Branch.ASYMMETRIC_LEFT, y1, y2)
    return left, left.mirrored()


def solve_branch(params: ModelParams, omega: float, branch) -> TSolution:
    branch = Branch.parse(branch)
    if branch is Branch.SYMMETRIC:
        return solve_symmetric(params, omega)
    left, right = solve_asymmetric(params, omega)
    return left if branch is Branch.ASYMMETRIC_LEFT else right


def branches_at(params: ModelParams, omega: float) -> list[TSolution]:
    """Every stationary state (up to phase) at ``omega``."""
    sols = [solve_symmetric(params, omega)]
    if omega > params.omega_star:
        sols.extend(solve_asymmetric(params, omega))
    return sols


# -- closed-form functionals --------------------------------------------------

def _action_scale(params: ModelParams, omega: float) -> float:
    mu = params.mu
    return ((mu + 1.0) ** (1.0 / mu) * omega ** (0.5 + 1.0 / mu)
            / (2.0 * params.lam ** (1.0 / mu)))


def _mass_scale(params: ModelParams, omega: float) -> float:
    mu = params.mu
    return ((mu + 1.0) / params.lam) ** (1.0 / mu) * omega ** (1.0 / mu - 0.5) / mu


def closed_form_action(params: ModelParams, omega: float, tsol: TSolution) -> float:
    """S_omega of the stationary state described by ``tsol``."""
    g = 1.0 / params.mu
    return _action_scale(params, omega) * (power_tail_integral(g, tsol.t1)
                                           + power_tail_integral(g, tsol.t2))


def closed_form_mass(params: ModelParams, omega: float, tsol: TSolution) -> float:
    """||psi||^2 of the stationary state described by ``tsol``."""
    g = 1.0 / params.mu - 1.0
    return _mass_scale(params, omega) * (power_tail_integral(g, tsol.t1)
                                         + power_tail_integral(g, tsol.t2))


def action_gap(params: ModelParams, omega: float) -> float:
    """S(symmetric) - S(asymmetric), computed without cancellation.

    Both integrals are taken over offsets from c = 2/(gamma sqrt(omega)), so
    the result keeps relative accuracy even where the branches merge.
    """
    t1, t2, s = _solve_asymmetric_s(params, omega)
    if omega > GAP_OFFSET_LIMIT * params.omega_star:
        g = 1.0 / params.mu
        c = 2.0 / params.a(omega)
        tails = 2.0 * power_tail_integral(g, c) - power_tail_integral(g, t1) - power_tail_integral(g, t2)
        return _action_scale(params, omega) * tails
    a = params.a(omega)
    c = 2.0 / a
    e1 = s / (1.0 + a * s)
    g = 1.0 / params.mu

    def weight(t):
        return np.clip(1.0 - t * t, 0.0, None) ** g

    right = gauss_legendre(lambda u: weight(c + u), 0.0, s)
    left = gauss_legendre(lambda u: weight(c - u), 0.0, e1)
    return _action_scale(params, omega) * (right - left)


def q_function(params: ModelParams, omega: float, t: float) -> float:
    """q(t): integral of (1 - v^2)^{1/mu} from phi(t) = -t/(a t - 1) to t."""
    a = params.a(omega)
    if a * t == 1.0:
        raise ValueError(f"q is undefined at t = 1/(gamma sqrt(omega)) = {1.0 / a:.10g}")
    lower = -t / (a * t - 1.0)
    if abs(lower) > 1.0 or abs(t) > 1.0:
        raise ValueError(f"q needs |t| <= 1 and |phi(t)| <= 1; got t={t}, phi={lower}")
    g = 1.0 / params.mu
    val, _ = integrate.quad(lambda v: max(1.0 - v * v, 0.0) ** g, lower, t,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return val


def q_derivative(params: ModelParams, omega: float, t: float) -> float:
    a = params.a(omega)
    if a * t == 1.0:
        raise ValueError(f"q is undefined at t = 1/(gamma sqrt(omega)) = {1.0 / a:.10g}")
    phi = -t / (a * t - 1.0)
    g = 1.0 / params.mu
    return (1.0 - t * t) ** g - max(1.0 - phi * phi, 0.0) ** g * phi * phi / (t * t)


def q_second_at_symmetric(params: ModelParams, omega: float) -> float:
    """q'' at t = 2/(gamma sqrt(omega)); positive exactly when omega > omega_star.

    Differentiating twice gives ``2 g'(c) + 2 a g(c)`` with ``g = (1 - v^2)^{1/mu}``,
    i.e. ``(2/a) (1 - 4/a^2)^{1/mu - 1} (a^2 - 4 (mu + 1)/mu)``.
    """
    _check_above_omega0(params, omega)
    a2 = params.gamma**2 * omega
    mu = params.mu
    return ((2.0 / math.sqrt(a2)) * (1.0 - 4.0 / a2) ** (1.0 / mu - 1.0)
            * (a2 - 4.0 * (mu + 1.0) / mu))


# -- states on a grid ---------------------------------------------------------

@dataclass
class GroundState:
    """A stationary state sampled on a grid.

    ``is_minimizer`` marks the action-minimal state at this frequency. Past
    ``omega_star`` the continued symmetric state is kept in ``continued``.
    """

    params: ModelParams
    omega: float
    tsol: TSolution
    profile: QFunction
    values: FunctionalValues
    residuals: tuple[float, float, float]
    is_minimizer: bool = True
    continued: "GroundState | None" = None
    extra: dict = field(default_factory=dict)

    @property
    def branch(self) -> Branch:
        return self.tsol.branch

    def summary(self) -> dict:
        out = {"omega": self.omega, **self.params.as_dict(), **self.tsol.as_dict(),
               "is_minimizer": self.is_minimizer,
               **self.values.as_dict(),
               "residual_interior": self.residuals[0],
               "residual_match_deriv": self.residuals[1],
               "residual_match_jump": self.residuals[2],
               "S_closed_form": closed_form_action(self.params, self.omega, self.tsol),
               "M_closed_form": closed_form_mass(self.params, self.omega, self.tsol),
               **self.profile.grid.as_dict()}
        out.update(self.extra)
        return out


def grid_for(params: ModelParams, omega: float, n_per_side: int | None = None) -> Grid:
    """A grid wide enough for every branch at ``omega``."""
    sols = branches_at(params, omega)
    y_max = max(max(s.y1, s.y2) for s in sols)
    kw = {} if n_per_side is None else {"n_per_side": n_per_side}
    return default_grid(params, omega, y_max, 0.0, **kw)


def build_state(params: ModelParams, omega: float, tsol: TSolution,
                grid: Grid | None = None, theta: float = 0.0) -> GroundState:
    """Sample the stationary state ``tsol`` and evaluate its functionals."""
    if grid is None:
        grid = grid_for(params, omega)
    prof = assemble_profile(params, omega, tsol.x1, tsol.x2, theta=theta, grid=grid)
    prof.meta["branch"] = tsol.branch.value
    return GroundState(params, omega, tsol, prof, functionals(prof, params, omega),
                       stationary_residual(prof, params, omega))


def ground_state(params: ModelParams, omega: float, grid: Grid | None = None) -> GroundState:
    """Action-minimal stationary state at ``omega``.

    For ``omega > omega_star`` the left-heavy asymmetric state is returned;
    its mirror image has the same action. The continued symmetric state is
    attached as ``continued`` with ``is_minimizer=False``.
    """
    _check_above_omega0(params, omega)
    if grid is None:
        grid = grid_for(params, omega)
    sym = solve_symmetric(params, omega)
    if omega <= params.omega_star:
        return build_state(params, omega, sym, grid)
    left, _ = solve_asymmetric(params, omega)
    gap = action_gap(params, omega)
    if not gap > 0.0:
        raise RuntimeError(f"action ordering violated at omega={omega}: "
                           f"S_sym - S_asym = {gap:.3g}")
    gs = build_state(params, omega, left, grid)
    cont = build_state(params, omega, sym, grid)
    cont.is_minimizer = False
    gs.continued = cont
    gs.extra["action_gap"] = gap
    return gs


# -- scans -------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    omega: float
    branch: str
    t1: float
    t2: float
    S_omega: float
    M: float
    verdict: str
    is_minimizer: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def scan_frequencies(omega_min: float, omega_max: float, n_points: int,
                     spacing: str = "linear") -> np.ndarray:
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if spacing == "log":
        return np.geomspace(omega_min, omega_max, n_points)
    return np.linspace(omega_min, omega_max, n_points)


def bifurcation_scan(params: ModelParams, omega_min: float, omega_max: float,
                     n_points: int, spacing: str = "linear",
                     with_verdict: bool = True, workers: int = 1) -> list[ScanRow]:
    """One row per branch per frequency, sorted by frequency."""
    _check_above_omega0(params, omega_min)
    if omega_max < omega_min:
        raise ValueError("omega_max must be >= omega_min")
    omegas = scan_frequencies(omega_min, omega_max, n_points, spacing)
    job = _ScanJob(params, with_verdict)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(job, omegas))
    else:
        chunks = [job(w) for w in omegas]
    return [row for chunk in chunks for row in chunk]


@dataclass(frozen=True)
class _ScanJob:
    params: ModelParams
    with_verdict: bool

    def __call__(self, omega: float) -> list[ScanRow]:
        from .stability import classify

        params = self.params
        omega = float(omega)
        rows = []
        sols = branches_at(params, omega)
        asym = len(sols) > 1
        for sol in sols:
            verdict = classify(params, omega, sol.branch).verdict if self.with_verdict else ""
            rows.append(ScanRow(omega, sol.branch.value, sol.t1, sol.t2,
                                closed_form_action(params, omega, sol),
                                closed_form_mass(params, omega, sol),
                                verdict, sol.branch.is_asymmetric or not asym))
        return rows

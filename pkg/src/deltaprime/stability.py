"""Slope and curvature of the action along each branch, and stability verdicts.

With d(omega) the action of a stationary state, d'(omega) = M/2 and the sign
of d''(omega) together with the number n of negative eigenvalues of the
real-part linearization decides orbital stability: stable when
n - p = 0 and unstable when n - p is odd, where p = 1 if d'' > 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

from .ground_state import Branch, _solve_asymmetric_s, f_poly_prime, solve_branch
from .model import ModelParams, OutOfRange
from .quadrature import power_tail_integral

BIFURCATION_EXCLUSION = 1e-8
DEAD_BAND = 1e-8
MU_STAR_BRACKET = (2.0, 2.5)


class SingularAtBifurcation(ArithmeticError):
    """The asymmetric-branch derivatives are singular at omega_star."""


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class StabilityVerdict:
    branch: Branch
    omega: float
    d_second: float
    n_expected: int
    p: int | None
    verdict: Verdict

    def as_dict(self) -> dict:
        out = asdict(self)
        out["branch"] = self.branch.value
        out["verdict"] = self.verdict.value
        return out


def singular_integral(mu: float, zeta: float) -> float:
    """Integral of (1 - t^2)^{1/mu - 1} over [zeta, 1], for 0 <= zeta < 1."""
    if not 0.0 <= zeta < 1.0:
        raise ValueError(f"zeta must lie in [0, 1), got {zeta}")
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return power_tail_integral(1.0 / mu - 1.0, zeta)


def zetas(params: ModelParams, omega: float, branch) -> tuple[float, float]:
    """The pair (zeta1, zeta2) entering d' on ``branch``.

    On the symmetric branch both equal 2/(gamma sqrt(omega)); this includes
    the continuation past omega_star.
    """
    sol = solve_branch(params, omega, branch)
    return sol.t1, sol.t2


def _dprime_scale(params: ModelParams, omega: float) -> float:
    mu = params.mu
    return ((mu + 1.0) / params.lam) ** (1.0 / mu) * omega ** (1.0 / mu - 0.5) / (2.0 * mu)


def d_prime(params: ModelParams, omega: float, branch) -> float:
    """d'(omega), equal to half the mass of the stationary state on ``branch``."""
    z1, z2 = zetas(params, omega, branch)
    mu = params.mu
    return _dprime_scale(params, omega) * (singular_integral(mu, z1) + singular_integral(mu, z2))


def zeta_derivatives(params: ModelParams, omega: float, branch) -> tuple[float, float]:
    """d zeta_i / d omega along ``branch``."""
    branch = Branch.parse(branch)
    if branch is Branch.SYMMETRIC:
        solve_branch(params, omega, branch)
        z = -1.0 / (params.gamma * omega**1.5)
        return z, z
    if abs(omega / params.omega_star - 1.0) < BIFURCATION_EXCLUSION:
        raise SingularAtBifurcation(
            f"asymmetric derivatives are singular at omega_star = {params.omega_star:.10g}")
    t1, t2, _ = _solve_asymmetric_s(params, omega)
    mu, g = params.mu, params.gamma
    fp1, fp2 = f_poly_prime(mu, t1), f_poly_prime(mu, t2)
    denom = 2.0 * math.sqrt(omega) * (t1 * t1 * fp1 + t2 * t2 * fp2)
    k = -g * (t1 * t2) ** 2 / denom
    d1, d2 = k * fp2, k * fp1
    if branch is Branch.ASYMMETRIC_RIGHT:
        d1, d2 = d2, d1
    return d1, d2


@dataclass(frozen=True)
class DSecondTerms:
    prefactor: float
    term_I: float
    term_II: float

    @property
    def value(self) -> float:
        return self.prefactor * (self.term_I + self.term_II)


def _prefactor(params: ModelParams, omega: float) -> float:
    mu = params.mu
    return ((mu + 1.0) / params.lam) ** (1.0 / mu) * omega ** (1.0 / mu - 1.5) / (2.0 * mu)


def d_second_terms(params: ModelParams, omega: float, branch) -> DSecondTerms:
    """Prefactor and the two bracketed terms of d''(omega)."""
    branch = Branch.parse(branch)
    mu = params.mu
    alpha = 1.0 / mu - 1.0
    if branch is Branch.SYMMETRIC:
        sol = solve_branch(params, omega, branch)
        c = sol.t1
        term_i = (1.0 / mu - 0.5) * 2.0 * singular_integral(mu, c)
        # -omega * 2 * zeta' (1 - c^2)^alpha with zeta' = -1/(gamma omega^{3/2})
        term_ii = c * (1.0 - c * c) ** alpha
        return DSecondTerms(_prefactor(params, omega), term_i, term_ii)
    d1, d2 = zeta_derivatives(params, omega, branch)
    z1, z2 = zetas(params, omega, branch)
    term_i = (1.0 / mu - 0.5) * (singular_integral(mu, z1) + singular_integral(mu, z2))
    term_ii = -omega * (d1 * (1.0 - z1 * z1) ** alpha + d2 * (1.0 - z2 * z2) ** alpha)
    return DSecondTerms(_prefactor(params, omega), term_i, term_ii)


def d_second(params: ModelParams, omega: float, branch) -> float:
    return d_second_terms(params, omega, branch).value


def term_II(params: ModelParams, omega: float, branch) -> float:
    return d_second_terms(params, omega, branch).term_II


def term_II_limits(mu: float, gamma: float | None = None) -> tuple[float, float]:
    """One-sided limits of the second bracketed term at omega_star.

    The limits do not depend on ``gamma``; the argument is accepted for
    symmetry with the other entry points.
    """
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    left = math.sqrt(mu) / (mu + 1.0) ** (1.0 / mu - 0.5)
    return left, left * (5.0 - 2.0 * mu) / (4.0 * mu + 5.0)


def w_of_mu(mu: float) -> float:
    """Bracket of d''(omega_star + 0); its sign is the sign of the right limit."""
    t_bar = math.sqrt(mu / (mu + 1.0))
    return (2.0 / mu - 1.0) * singular_integral(mu, t_bar) + term_II_limits(mu)[1]


@dataclass(frozen=True)
class MuStar:
    value: float
    bracket: tuple[float, float]
    w_at_bracket: tuple[float, float]


def mu_star(xtol: float = 1e-10) -> MuStar:
    """The unique root of w in (2, 2.5), by bisection."""
    lo, hi = MU_STAR_BRACKET
    root = optimize.bisect(w_of_mu, lo, hi, xtol=xtol, maxiter=200)
    return MuStar(root, (lo, hi), (w_of_mu(lo), w_of_mu(hi)))


def n_expected(params: ModelParams, omega: float, branch) -> int:
    """Predicted number of negative eigenvalues of the real-part linearization."""
    branch = Branch.parse(branch)
    if branch is Branch.SYMMETRIC and omega > params.omega_star:
        return 2
    return 1


def classify(params: ModelParams, omega: float, branch) -> StabilityVerdict:
    branch = Branch.parse(branch)
    if branch.is_asymmetric and not omega > params.omega_star:
        raise OutOfRange(f"asymmetric states need omega > omega_star = {params.omega_star:.10g}")
    n = n_expected(params, omega, branch)
    if abs(omega / params.omega_star - 1.0) < BIFURCATION_EXCLUSION:
        d2 = d_second(params, omega, Branch.SYMMETRIC) if branch is Branch.SYMMETRIC else math.nan
        return StabilityVerdict(branch, omega, d2, n, None, Verdict.INDETERMINATE)
    terms = d_second_terms(params, omega, branch)
    d2 = terms.value
    p = None if abs(d2) < DEAD_BAND * abs(terms.prefactor) else int(d2 > 0)
    if branch is Branch.SYMMETRIC and omega > params.omega_star:
        verdict = Verdict.UNSTABLE
    elif p is None:
        verdict = Verdict.INDETERMINATE
    elif n - p == 0:
        verdict = Verdict.STABLE
    elif (n - p) % 2 == 1:
        verdict = Verdict.UNSTABLE
    else:
        verdict = Verdict.INDETERMINATE
    return StabilityVerdict(branch, omega, d2, n, p, verdict)


@dataclass(frozen=True)
class Thresholds:
    """Where d'' changes sign along the asymmetric branch.

    ``omega1`` ends the first run of positive d'' (``None`` when d'' starts
    negative); ``omega2`` starts the final run of negative d'' (``None`` when
    d'' never turns negative in the scanned window).
    """

    mu: float
    gamma: float
    omega1: float | None
    omega2: float | None
    sign_changes: int
    omega_max: float


def stability_thresholds(params: ModelParams, omega_max_factor: float = 1e4,
                         n_points: int = 400) -> Thresholds:
    """Locate the stability-change frequencies by sign-scanning d''."""
    ws = np.geomspace(params.omega_star * (1.0 + 1e-6), params.omega_star * omega_max_factor,
                      n_points)

    def d2(w):
        return d_second(params, float(w), Branch.ASYMMETRIC_LEFT)

    vals = np.array([d2(w) for w in ws])
    neg = vals < 0
    crossings = [i for i in range(len(ws) - 1) if neg[i] != neg[i + 1]]

    def refine(i):
        return optimize.brentq(d2, ws[i], ws[i + 1], xtol=1e-12 * ws[i])

    omega1 = omega2 = None
    if not neg[0] and crossings:
        omega1 = refine(crossings[0])
    elif neg[0]:
        omega1 = float(ws[0])
    if neg[-1]:
        omega2 = refine(crossings[-1]) if crossings else float(ws[0])
    return Thresholds(params.mu, params.gamma, omega1, omega2, len(crossings),
                      float(ws[-1]))


def verdict_table(params_list, omegas_for) -> list[dict]:
    """Rows (mu, gamma, omega, branch, d'', n, p, verdict) over every branch.

    ``omegas_for(params)`` returns the frequencies to evaluate for each
    parameter set.
    """
    rows = []
    for params in params_list:
        for w in omegas_for(params):
            w = float(w)
            branches = [Branch.SYMMETRIC]
            if w > params.omega_star:
                branches.append(Branch.ASYMMETRIC_LEFT)
            for b in branches:
                v = classify(params, w, b)
                rows.append({"mu": params.mu, "gamma": params.gamma, "omega": w,
                             "branch": b.value, "d_second": v.d_second,
                             "n": v.n_expected, "p": v.p, "verdict": v.verdict.value})
    return rows

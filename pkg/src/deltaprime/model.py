"""Parameters, the two-half-line grid, stationary profiles and functionals.

Functions on the energy space are sampled on a uniform grid per half-line.
The origin is stored twice (``0-`` and ``0+``) so jumps across the defect
are first-class data.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_N_PER_SIDE = 4000
DECAY_FLOOR = 1e-10
# e^{-25} < DECAY_FLOOR, so profiles decaying like e^{-sqrt(omega)|x|} fit.
DECAY_LENGTHS = 25.0


class ValidationError(ValueError):
    """Raised when a parameter is outside its admissible domain."""


class OutOfRange(ValueError):
    """Raised when a frequency lies outside the domain of a branch."""


@dataclass(frozen=True)
class ModelParams:
    """Strength ``gamma`` of the attractive defect, coupling ``lam`` and power ``mu``."""

    gamma: float
    lam: float
    mu: float

    @property
    def omega0(self) -> float:
        """Frequency of the linear bound state, 4/gamma^2."""
        return 4.0 / self.gamma**2

    @property
    def omega_star(self) -> float:
        """Frequency at which the asymmetric branches are born."""
        return self.omega0 * (self.mu + 1.0) / self.mu

    @property
    def t_bar(self) -> float:
        """Maximiser of t^{2mu}(1 - t^2) on (0, 1)."""
        return math.sqrt(self.mu / (self.mu + 1.0))

    def a(self, omega: float) -> float:
        """The combination gamma * sqrt(omega) appearing in the matching system."""
        return self.gamma * math.sqrt(omega)

    def amplitude(self, omega: float) -> float:
        """Peak height of the free soliton at frequency ``omega``."""
        mu = self.mu
        return ((mu + 1.0) * omega / self.lam) ** (1.0 / (2.0 * mu))

    def as_dict(self) -> dict:
        return {"gamma": self.gamma, "lambda": self.lam, "mu": self.mu,
                "omega0": self.omega0, "omega_star": self.omega_star}


def make_params(gamma: float, lam: float = 1.0, mu: float = 1.0) -> ModelParams:
    """Validate and build :class:`ModelParams`.

    Raises:
        ValidationError: if any argument is non-finite or not strictly positive.
    """
    for name, value in (("gamma", gamma), ("lambda", lam), ("mu", mu)):
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be a real number, got {value!r}") from None
        if not math.isfinite(v) or v <= 0.0:
            raise ValidationError(f"{name} must be finite and > 0, got {value!r}")
    return ModelParams(float(gamma), float(lam), float(mu))


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-L, 0-] and [0+, L] with ``n_per_side`` cells per side.

    Values are laid out as ``[x=-L, ..., x=0-, x=0+, ..., x=L]``, so there are
    ``2 * n_per_side + 2`` slots and the two origin slots are adjacent.
    """

    half_length: float
    n_per_side: int

    def __post_init__(self):
        if not (self.half_length > 0 and math.isfinite(self.half_length)):
            raise ValidationError(f"half_length must be finite and > 0, got {self.half_length}")
        if int(self.n_per_side) != self.n_per_side or self.n_per_side < 4:
            raise ValidationError(f"n_per_side must be an integer >= 4, got {self.n_per_side}")

    @property
    def h(self) -> float:
        return self.half_length / self.n_per_side

    @property
    def size(self) -> int:
        return 2 * self.n_per_side + 2

    @property
    def i_minus(self) -> int:
        """Index of the 0- slot."""
        return self.n_per_side

    @property
    def i_plus(self) -> int:
        """Index of the 0+ slot."""
        return self.n_per_side + 1

    @property
    def x(self) -> np.ndarray:
        side = np.linspace(0.0, self.half_length, self.n_per_side + 1)
        return np.concatenate([-side[::-1], side])

    @property
    def side(self) -> np.ndarray:
        """-1 for left-half-line slots, +1 for right-half-line slots."""
        n1 = self.n_per_side + 1
        return np.concatenate([-np.ones(n1, dtype=int), np.ones(n1, dtype=int)])

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights per half-line (also the lumped P1 mass)."""
        w = np.full(self.size, self.h)
        w[[0, self.i_minus, self.i_plus, -1]] = 0.5 * self.h
        return w

    def mirror(self, values: np.ndarray) -> np.ndarray:
        """Return ``g(x) = values(-x)``; the 0- and 0+ slots swap."""
        return np.asarray(values)[::-1]

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.half_length, self.n_per_side * factor)

    def as_dict(self) -> dict:
        return {"half_length": self.half_length, "n_per_side": self.n_per_side, "h": self.h}


def default_half_length(params: ModelParams, omega: float, x1: float = 0.0,
                        x2: float = 0.0) -> float:
    """Truncation length large enough for exponentially localized profiles."""
    return max(DECAY_LENGTHS / math.sqrt(params.omega0),
               DECAY_LENGTHS / math.sqrt(omega) + max(abs(x1), abs(x2)))


def default_grid(params: ModelParams, omega: float, x1: float = 0.0, x2: float = 0.0,
                 n_per_side: int = DEFAULT_N_PER_SIDE) -> Grid:
    return Grid(default_half_length(params, omega, x1, x2), n_per_side)


@dataclass
class QFunction:
    """A complex function on the two half-lines, sampled on ``grid``."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {self.values.shape}")

    @property
    def trace_minus(self) -> complex:
        return complex(self.values[self.grid.i_minus])

    @property
    def trace_plus(self) -> complex:
        return complex(self.values[self.grid.i_plus])

    @property
    def jump(self) -> complex:
        """psi(0+) - psi(0-)."""
        return self.trace_plus - self.trace_minus

    @property
    def left(self) -> np.ndarray:
        return self.values[: self.grid.i_plus]

    @property
    def right(self) -> np.ndarray:
        return self.values[self.grid.i_plus:]

    def with_values(self, values: np.ndarray) -> "QFunction":
        return QFunction(self.grid, values, dict(self.meta))

    def __mul__(self, scalar) -> "QFunction":
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "QFunction") -> "QFunction":
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "QFunction") -> "QFunction":
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)


def _check_same_grid(f: QFunction, g: QFunction):
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")


def soliton_value(params: ModelParams, omega: float, x0: float, x):
    """Free NLS soliton of frequency ``omega`` centred at ``x0``; vectorized in ``x``."""
    if not omega > 0:
        raise OutOfRange(f"omega must be > 0, got {omega}")
    mu = params.mu
    z = mu * math.sqrt(omega) * (np.asarray(x, dtype=float) - x0)
    # sech^{1/mu}(z) = (2 e^{-|z|} / (1 + e^{-2|z|}))^{1/mu}, stable for large |z|
    e = np.exp(-np.abs(z))
    sech = 2.0 * e / (1.0 + e * e)
    out = params.amplitude(omega) * sech ** (1.0 / mu)
    return float(out) if np.ndim(out) == 0 else out


def assemble_profile(params: ModelParams, omega: float, x1: float, x2: float,
                     theta: float = 0.0, grid: Grid | None = None,
                     decay_floor: float = DECAY_FLOOR) -> QFunction:
    """Glue two soliton tails at the defect.

    The left half-line carries ``-e^{i theta} phi^{x1}`` and the right one
    ``e^{i theta} phi^{x2}``, where ``x1``/``x2`` are the signed soliton
    centres. Stationary states have ``x2 <= 0 <= x1``; the symmetric one is
    ``(x1, x2) = (y, -y)``.
    """
    if grid is None:
        grid = default_grid(params, omega, x1, x2)
    n1 = grid.n_per_side + 1
    x = grid.x
    vals = np.empty(grid.size, dtype=complex)
    phase = np.exp(1j * theta)
    vals[:n1] = -phase * soliton_value(params, omega, x1, x[:n1])
    vals[n1:] = phase * soliton_value(params, omega, x2, x[n1:])
    peak = np.max(np.abs(vals))
    edge = max(abs(vals[0]), abs(vals[-1]))
    if peak > 0 and edge > decay_floor * peak:
        logger.warning("profile not decayed at +-L: |psi(+-L)|/max|psi| = %.3g > %.1g; "
                       "enlarge the grid", edge / peak, decay_floor)
    return QFunction(grid, vals, {"omega": omega, "x1": x1, "x2": x2, "theta": theta,
                                  **params.as_dict()})


@dataclass(frozen=True)
class FunctionalValues:
    F_gamma: float
    mass: float
    energy: float
    action: float
    nehari: float
    stilde: float
    grad_sq: float
    power_norm: float  # ||psi||_{2mu+2}^{2mu+2}

    def as_dict(self) -> dict:
        return {"F_gamma": self.F_gamma, "M": self.mass, "E": self.energy,
                "S_omega": self.action, "I_omega": self.nehari, "S_tilde": self.stilde}


def gradient_norm_sq(f: QFunction) -> float:
    """||psi'||^2 with the origin excluded: exact for the piecewise-linear interpolant."""
    h = f.grid.h
    dl = np.diff(f.left)
    dr = np.diff(f.right)
    return float((np.sum(np.abs(dl) ** 2) + np.sum(np.abs(dr) ** 2)) / h)


def lp_norm_p(f: QFunction, p: float) -> float:
    """Trapezoid approximation of the integral of |psi|^p."""
    return float(np.sum(f.grid.weights * np.abs(f.values) ** p))


def q_inner(f: QFunction, g: QFunction) -> complex:
    """Energy-space inner product (f, g) + (f', g'), antilinear in ``f``."""
    _check_same_grid(f, g)
    w = f.grid.weights
    h = f.grid.h
    l2 = np.sum(w * np.conj(f.values) * g.values)
    d = np.sum(np.conj(np.diff(f.left)) * np.diff(g.left))
    d += np.sum(np.conj(np.diff(f.right)) * np.diff(g.right))
    return complex(l2 + d / h)


def q_norm(f: QFunction) -> float:
    return math.sqrt(max(q_inner(f, f).real, 0.0))


def functionals(f: QFunction, params: ModelParams, omega: float) -> FunctionalValues:
    """Quadratic form, mass, energy, action, Nehari functional and reduced action."""
    mu, lam, gamma = params.mu, params.lam, params.gamma
    grad = gradient_norm_sq(f)
    jump_sq = abs(f.jump) ** 2
    mass = lp_norm_p(f, 2.0)
    pnorm = lp_norm_p(f, 2.0 * mu + 2.0)
    F = grad - jump_sq / gamma
    energy = 0.5 * F - lam / (2.0 * mu + 2.0) * pnorm
    action = energy + 0.5 * omega * mass
    nehari = F + omega * mass - lam * pnorm
    stilde = action - 0.5 * nehari
    return FunctionalValues(F, mass, energy, action, nehari, stilde, grad, pnorm)


def one_sided_derivatives(f: QFunction) -> tuple[complex, complex]:
    """Second-order one-sided derivatives (psi'(0-), psi'(0+))."""
    v, h = f.values, f.grid.h
    im, ip = f.grid.i_minus, f.grid.i_plus
    d_plus = (-3.0 * v[ip] + 4.0 * v[ip + 1] - v[ip + 2]) / (2.0 * h)
    d_minus = (3.0 * v[im] - 4.0 * v[im - 1] + v[im - 2]) / (2.0 * h)
    return complex(d_minus), complex(d_plus)


def stationary_residual(f: QFunction, params: ModelParams,
                        omega: float) -> tuple[float, float, float]:
    """Residuals of the stationary equation and of the two matching conditions.

    Returns ``(interior, match_deriv, match_jump)``: the max over interior
    nodes of ``|-psi'' - lam |psi|^{2mu} psi + omega psi|`` (central second
    differences), ``|psi'(0+) - psi'(0-)|`` and
    ``|psi(0+) - psi(0-) + gamma psi'(0+)|``.
    """
    h = f.grid.h
    interior = 0.0
    for part in (f.left, f.right):
        d2 = (part[2:] - 2.0 * part[1:-1] + part[:-2]) / h**2
        u = part[1:-1]
        res = -d2 - params.lam * np.abs(u) ** (2 * params.mu) * u + omega * u
        if res.size:
            interior = max(interior, float(np.max(np.abs(res))))
    d_minus, d_plus = one_sided_derivatives(f)
    match_deriv = abs(d_plus - d_minus)
    match_jump = abs(f.jump + params.gamma * d_plus)
    return interior, match_deriv, match_jump


def linear_eigenfunction(params: ModelParams, grid: Grid) -> QFunction:
    """Normalized bound state (2/gamma)^{1/2} sgn(x) e^{-2|x|/gamma} of the defect."""
    x = grid.x
    vals = math.sqrt(2.0 / params.gamma) * grid.side * np.exp(-2.0 * np.abs(x) / params.gamma)
    return QFunction(grid, vals.astype(complex), {"kind": "linear_eigenfunction"})


# -- serialization ----------------------------------------------------------

def write_qfunction_csv(f: QFunction, path, **header) -> Path:
    """Write columns ``x, re, im, side``; a leading ``#`` line carries metadata."""
    path = Path(path)
    meta = {**f.meta, **f.grid.as_dict(), **header}
    with path.open("w", newline="") as fh:
        fh.write("# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items()) + "\n")
        w = csv.writer(fh)
        w.writerow(["x", "re", "im", "side"])
        for x, v, s in zip(f.grid.x, f.values, f.grid.side):
            w.writerow([f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}", "+" if s > 0 else "-"])
    return path


def read_qfunction_csv(path) -> QFunction:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        meta = {}
        for tok in first.lstrip("#").split():
            k, _, v = tok.partition("=")
            meta[k] = _parse(v)
        rows = list(csv.DictReader(fh))
    grid = Grid(float(meta["half_length"]), int(meta["n_per_side"]))
    vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    for k in ("half_length", "n_per_side", "h"):
        meta.pop(k, None)
    return QFunction(grid, vals, meta)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v).replace(" ", "_")


def _parse(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v

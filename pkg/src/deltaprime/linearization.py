"""Form-based discretization of H_gamma and of the linearized operators.

Unknowns are the grid values minus the two Dirichlet ends at +-L. On each
half-line the Dirichlet form is assembled with piecewise-linear elements; the
defect contributes ``-(u(0+) - u(0-))^2 / gamma``, which only couples the two
adjacent origin slots. The stiffness matrix is therefore tridiagonal, and with
the lumped (trapezoid) mass the generalized eigenproblem reduces to a
symmetric tridiagonal one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, sparse

from .ground_state import GroundState, solve_symmetric
from .model import Grid, ModelParams, QFunction

KERNEL_REL_TOL = 1e-6
# Continuum zero modes show up as O(h^2) eigenvalues. The constant covers
# mu up to 3 at the default resolution (measured ratio about 7 at mu = 3).
KERNEL_H2_CONST = 25.0


class GridMismatch(ValueError):
    """The state and the requested operator live on different grids."""


@dataclass
class DiscreteOperator:
    """Symmetric tridiagonal stiffness plus lumped mass over interior slots.

    ``diag`` and ``off`` hold the stiffness matrix of the form for the
    ``grid.size - 2`` unknowns ``x_1 .. x_{size-2}``; ``mass`` is the lumped
    mass. The generalized problem is ``A u = lambda M u``.
    """

    grid: Grid
    kind: str
    omega: float
    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def matrix(self) -> sparse.csr_matrix:
        return sparse.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")

    def interior(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        return values[1:-1] if values.size == self.grid.size else values

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Stiffness times vector (full-grid or interior input, interior output)."""
        u = self.interior(values)
        out = self.diag * u
        out[:-1] += self.off * u[1:]
        out[1:] += self.off * u[:-1]
        return out

    def strong_residual(self, values: np.ndarray) -> np.ndarray:
        """M^{-1} A u: the operator applied to u in the L^2 sense."""
        return self.apply(values) / self.mass

    def form(self, f: QFunction | np.ndarray) -> float:
        """Quadratic form value a(u, u)."""
        vals = f.values if isinstance(f, QFunction) else f
        u = self.interior(vals)
        return float(np.real(np.vdot(u, self.apply(u))))

    def l2_norm(self, values: np.ndarray) -> float:
        u = self.interior(values)
        return math.sqrt(float(np.sum(self.mass * np.abs(u) ** 2)))

    def standard_form(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and off-diagonal of M^{-1/2} A M^{-1/2}."""
        s = 1.0 / np.sqrt(self.mass)
        return self.diag * s * s, self.off * s[:-1] * s[1:]

    def to_full(self, interior: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.size, dtype=np.asarray(interior).dtype)
        out[1:-1] = interior
        return out


def discretize_form(params: ModelParams, omega: float, potential, grid: Grid,
                    kind: str = "custom") -> DiscreteOperator:
    """Assemble ``int u'v' - (jump u)(jump v)/gamma + int (omega + V) u v``.

    ``potential`` is sampled on the full grid (or ``None`` for V = 0).
    """
    n = grid.n_per_side
    h = grid.h
    N = grid.size - 2
    diag = np.full(N, 2.0 / h)
    off = np.full(N - 1, -1.0 / h)
    # slots 0-/0+ sit at interior indices n-1 and n; each has one element only
    im, ip = n - 1, n
    diag[im] = diag[ip] = 1.0 / h
    off[im] = 1.0 / params.gamma
    diag[im] -= 1.0 / params.gamma
    diag[ip] -= 1.0 / params.gamma
    mass = grid.weights[1:-1].copy()
    if potential is None:
        v = np.zeros(N)
    else:
        v = np.asarray(potential, dtype=float)
        if v.shape != (grid.size,):
            raise GridMismatch(f"potential has shape {v.shape}, grid needs ({grid.size},)")
        v = v[1:-1]
    diag += mass * (omega + v)
    return DiscreteOperator(grid, kind, omega, diag, off, mass,
                            {"gamma": params.gamma, "lambda": params.lam, "mu": params.mu})


def hgamma(params: ModelParams, grid: Grid, shift: float = 0.0) -> DiscreteOperator:
    """H_gamma + shift with no potential."""
    return discretize_form(params, shift, None, grid, kind="Hgamma")


def build_L(params: ModelParams, omega: float, state: GroundState, which: int,
            grid: Grid | None = None) -> DiscreteOperator:
    """L1 (``which=1``) or L2 (``which=2``) linearized around ``state``."""
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    if grid is not None and grid != state.profile.grid:
        raise GridMismatch(f"state lives on {state.profile.grid}, operator requested on {grid}")
    if omega != state.omega:
        raise ValueError(f"state has omega={state.omega}, operator requested at omega={omega}")
    grid = state.profile.grid
    dens = np.abs(state.profile.values) ** (2.0 * params.mu)
    depth = (2.0 * params.mu + 1.0) if which == 1 else 1.0
    return discretize_form(params, omega, -depth * params.lam * dens, grid, kind=f"L{which}")


def kernel_tolerance(op: DiscreteOperator) -> float:
    scale = max(abs(op.omega), 1.0)
    return max(KERNEL_REL_TOL * scale, KERNEL_H2_CONST * op.grid.h**2 * scale)


@dataclass
class SpectralReport:
    kind: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # full-grid columns, mass-normalized
    tol: float
    grid: Grid
    omega: float

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.eigenvalues < -self.tol))

    @property
    def near_zero(self) -> list[float]:
        return [float(e) for e in self.eigenvalues if abs(e) <= self.tol]

    @property
    def lowest_pairs(self) -> list[tuple[float, np.ndarray]]:
        return [(float(e), self.eigenvectors[:, i]) for i, e in enumerate(self.eigenvalues)]

    def multiplicities(self, rel_gap: float = 1e-6) -> list[int]:
        """Cluster sizes of the negative eigenvalues, in ascending order."""
        neg = [e for e in self.eigenvalues if e < -self.tol]
        out: list[int] = []
        for i, e in enumerate(neg):
            if i and abs(e - neg[i - 1]) <= rel_gap * max(abs(e), 1.0):
                out[-1] += 1
            else:
                out.append(1)
        return out

    def eigenfunction(self, i: int) -> QFunction:
        return QFunction(self.grid, self.eigenvectors[:, i].astype(complex),
                         {"kind": self.kind, "eigenvalue": float(self.eigenvalues[i])})

    def as_dict(self) -> dict:
        return {"kind": self.kind, "omega": self.omega,
                "eigenvalues": [float(e) for e in self.eigenvalues],
                "n_negative": self.n_negative, "near_zero": self.near_zero,
                "negative_multiplicities": self.multiplicities(), "tol": self.tol,
                "grid": self.grid.as_dict()}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def spectral_report(op: DiscreteOperator, k: int = 8, tol: float | None = None) -> SpectralReport:
    """The ``k`` smallest eigenpairs of ``A u = lambda M u``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, op.n)
    d, e = op.standard_form()
    try:
        w, v = linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    except linalg.LinAlgError as exc:
        raise RuntimeError(f"tridiagonal eigensolver did not converge: {exc}") from exc
    u = v / np.sqrt(op.mass)[:, None]
    full = np.zeros((op.grid.size, k))
    full[1:-1] = u
    return SpectralReport(op.kind, w, full, kernel_tolerance(op) if tol is None else tol,
                          op.grid, op.omega)


def xi_kernel_vector(params: ModelParams, omega: float, grid: Grid) -> QFunction:
    """Even, continuous candidate for the kernel of L1 on the symmetric branch."""
    y = solve_symmetric(params, omega).y1
    u = params.mu * math.sqrt(omega) * (np.abs(grid.x) + y)
    # sinh(u)/cosh^{1+1/mu}(u) = tanh(u) sech^{1/mu}(u), written to avoid overflow
    e = np.exp(-u)
    sech = 2.0 * e / (1.0 + e * e)
    vals = np.tanh(u) * sech ** (1.0 / params.mu)
    return QFunction(grid, vals.astype(complex), {"kind": "xi_kernel", "omega": omega})


def xi_form_value_exact(params: ModelParams, omega: float) -> float:
    """Closed-form value of the L1 form on the kernel candidate."""
    r = 4.0 / (params.gamma**2 * omega)
    mu = params.mu
    return -(4.0 / params.gamma) * (1.0 - r) ** (1.0 / mu) * (mu - (mu + 1.0) * r)


def cosine_similarity(f: np.ndarray, g: np.ndarray, weights: np.ndarray | None = None) -> float:
    """|<f, g>| / (|f| |g|), optionally weighted."""
    f = np.asarray(f)
    g = np.asarray(g)
    w = np.ones(f.shape) if weights is None else weights
    num = abs(np.sum(w * np.conj(f) * g))
    den = math.sqrt(np.sum(w * np.abs(f) ** 2) * np.sum(w * np.abs(g) ** 2))
    return float(num / den) if den > 0 else 0.0

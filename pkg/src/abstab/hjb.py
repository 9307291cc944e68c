"""Semi-Lagrangian solver for the worst-case growth function rho(kappa, theta).

rho(k, t) is the largest ratio r(t)/r(0) over admissible gain histories that
end at gain k at angle t. It solves

    rho_t + g * min_nu(nu * rho_k) = f * rho,    rho(k, 0) = 1,

and since the Hamiltonian is linear in nu only the two extreme rates matter.
Each step traces both candidate characteristics back one angle step,
interpolates the previous row at their feet, keeps the larger value and adds
the explicit source term f * rho * dtheta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CflUnsatisfiable, DomainError, NonFiniteValue
from .plant import PlantSystem, PolarField
from .ratebound import RateBoundSpec, max_abs_rate, nu_max, nu_min

MAX_STEPS_PER_PI = 10_000_000
_KAPPA_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    dkappa: float
    dtheta: float
    J: int
    steps_per_pi: int
    cfl_bound: float = 0.0  # sup |g * nu| used for the CFL check

    @property
    def kappa(self) -> np.ndarray:
        return kappa_nodes(self.J)

    @property
    def cfl_number(self) -> float:
        """``dtheta * sup|g nu| / dkappa``; below 1 on every valid grid."""
        return self.dtheta * self.cfl_bound / self.dkappa

    def theta(self, n):
        return np.asarray(n) * self.dtheta


@lru_cache(maxsize=32)
def kappa_nodes(J: int) -> np.ndarray:
    nodes = np.arange(J + 1) / J
    nodes.setflags(write=False)
    return nodes


def _parse_dkappa(dkappa: float) -> int:
    if not dkappa > 0.0:
        raise DomainError("dkappa must be positive")
    J = int(round(1.0 / dkappa))
    if J < 2 or abs(J * dkappa - 1.0) > 1e-12:
        raise DomainError(f"dkappa={dkappa!r} must equal 1/J for an integer J >= 2")
    return J


def make_grid(
    plant: PlantSystem,
    spec: RateBoundSpec,
    dkappa: float,
    dtheta: float | None = None,
    max_steps_per_pi: int = MAX_STEPS_PER_PI,
) -> GridSpec:
    """Choose the angle step from the CFL bound and round it to a divisor of pi.

    The candidate is ``dkappa / ((||A|| + ||B||) * max|nu|)`` with spectral
    norms; an explicit ``dtheta`` replaces the candidate but must itself
    satisfy the CFL condition.
    """
    J = _parse_dkappa(dkappa)
    rate = max_abs_rate(spec)
    sup_gnu = plant.norm_bound() * rate
    if dtheta is None:
        target = math.pi / 8 if sup_gnu == 0.0 else dkappa / sup_gnu
    else:
        if not dtheta > 0.0:
            raise DomainError("dtheta must be positive")
        target = dtheta
    ratio = math.pi / target
    if not math.isfinite(ratio) or ratio > max_steps_per_pi:
        raise CflUnsatisfiable(
            f"angle step {target:.3g} needs more than {max_steps_per_pi} steps per pi"
        )
    steps = max(1, math.ceil(ratio))
    # the CFL inequality is strict; bump when the candidate divides pi exactly
    while math.pi / steps * sup_gnu >= dkappa:
        if dtheta is not None:
            raise CflUnsatisfiable(
                f"dtheta={dtheta:.6g} violates CFL: dtheta*sup|g nu| >= dkappa"
            )
        steps += 1
    if steps > max_steps_per_pi:
        raise CflUnsatisfiable(f"more than {max_steps_per_pi} steps per pi required")
    return GridSpec(float(dkappa), math.pi / steps, J, steps, sup_gnu)


def interp_row(row, kappa, grid: GridSpec):
    """Piecewise-linear interpolation of a row in kappa; exact at nodes."""
    row = np.asarray(row, dtype=float)
    k = np.asarray(kappa, dtype=float)
    if np.any(k < -_KAPPA_SLACK) or np.any(k > 1.0 + _KAPPA_SLACK):
        raise DomainError(f"gain outside [0, 1]: {kappa!r}")
    k = np.clip(k, 0.0, 1.0)
    J = grid.J
    nodes = kappa_nodes(J)
    j = np.minimum(np.floor(k * J).astype(np.intp), J - 1)
    w = (k - nodes[j]) * J
    out = row[j] + w * (row[j + 1] - row[j])
    near = np.clip(np.rint(k * J).astype(np.intp), 0, J)
    out = np.where(k == nodes[near], row[near], out)
    return float(out) if out.ndim == 0 else out


def _node_rates(spec: RateBoundSpec, J: int):
    nodes = kappa_nodes(J)
    return nu_min(spec, nodes), nu_max(spec, nodes)


def _advance(row, f, g, lo_rate, hi_rate, grid: GridSpec):
    nodes = kappa_nodes(grid.J)
    dth = grid.dtheta
    foot_hi = np.clip(nodes - g * hi_rate * dth, 0.0, 1.0)
    foot_lo = np.clip(nodes - g * lo_rate * dth, 0.0, 1.0)
    via_hi = interp_row(row, foot_hi, grid)
    via_lo = interp_row(row, foot_lo, grid)
    took_hi = via_hi >= via_lo
    new = np.where(took_hi, via_hi, via_lo) + f * row * dth
    if not np.all(np.isfinite(new)):
        raise NonFiniteValue("non-finite value produced by the sweep")
    return new, took_hi


def sweep_step(
    field: PolarField,
    spec: RateBoundSpec,
    grid: GridSpec,
    row_n,
    n: int,
    return_branch: bool = False,
):
    """Advance one row: ``rho^n -> rho^{n+1}``.

    With ``return_branch`` also returns a boolean array that is True where the
    upper-rate characteristic won (ties go to it).
    """
    theta = (n % grid.steps_per_pi) * grid.dtheta
    _, g, f = field.eval(kappa_nodes(grid.J), theta)
    lo, hi = _node_rates(spec, grid.J)
    new, took_hi = _advance(np.asarray(row_n, dtype=float), f, g, lo, hi, grid)
    return (new, took_hi) if return_branch else new


@dataclass(frozen=True, eq=False)
class ValueField:
    """Gridded approximation of rho.

    ``rows[i]`` holds rho at angle ``row_index[i] * dtheta``. With
    ``keep="all"`` every row is stored and ``branch[n]`` records, for the
    step that produced row ``n + 1``, where the upper-rate branch won.
    """

    grid: GridSpec
    n_max: int
    rows: np.ndarray
    row_index: np.ndarray
    branch: np.ndarray | None = None
    plant: PlantSystem | None = None
    spec: RateBoundSpec | None = None

    @property
    def n_rows(self) -> int:
        return self.n_max * self.grid.steps_per_pi + 1

    def row(self, n: int) -> np.ndarray:
        if self.row_index.size == self.n_rows:
            return self.rows[n]
        pos = np.searchsorted(self.row_index, n)
        if pos >= self.row_index.size or self.row_index[pos] != n:
            raise KeyError(f"row {n} not retained (streaming mode keeps rows at multiples of pi)")
        return self.rows[pos]

    def row_at_pi(self, N: int) -> np.ndarray:
        return self.row(N * self.grid.steps_per_pi)

    def rows_at_pi(self) -> np.ndarray:
        """Array of shape (n_max + 1, J + 1); entry N is the row at angle N*pi."""
        return np.stack([self.row_at_pi(N) for N in range(self.n_max + 1)])

    def value(self, kappa, n: int):
        return interp_row(self.row(n), kappa, self.grid)


def max_abs_f(field: PolarField, grid: GridSpec, chunk: int = 4096) -> float:
    nodes = kappa_nodes(grid.J)
    best = 0.0
    for start in range(0, grid.steps_per_pi, chunk):
        n = np.arange(start, min(start + chunk, grid.steps_per_pi))
        _, _, f = field.eval(nodes[None, :], (n * grid.dtheta)[:, None])
        best = max(best, float(np.abs(f).max()))
    return best


def solve(
    plant: PlantSystem,
    spec: RateBoundSpec,
    dkappa: float = 0.01,
    n_max: int = 20,
    *,
    grid: GridSpec | None = None,
    keep: str = "all",
) -> ValueField:
    """March rho from the boundary row rho = 1 over ``n_max`` half-turns.

    ``plant`` must already be in counterclockwise coordinates (see
    ``check_oscillatory``). ``keep="pi"`` retains only the rows at multiples
    of pi, which is all the stability tests need.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    if keep not in ("all", "pi"):
        raise DomainError("keep must be 'all' or 'pi'")
    if grid is None:
        grid = make_grid(plant, spec, dkappa)
    field = PolarField(plant)
    if grid.dtheta * max_abs_f(field, grid) >= 1.0:
        raise CflUnsatisfiable("dtheta * max|f| >= 1: positivity of rho not guaranteed")

    J, spp = grid.J, grid.steps_per_pi
    nodes = kappa_nodes(J)
    lo, hi = _node_rates(spec, J)
    h0, h1, g0, g1 = field.coefficients(np.arange(spp) * grid.dtheta)
    total = n_max * spp

    row = np.ones(J + 1)
    if keep == "all":
        rows = np.empty((total + 1, J + 1))
        branch = np.empty((total, J + 1), dtype=bool)
        rows[0] = row
    else:
        rows = np.empty((n_max + 1, J + 1))
        branch = None
        rows[0] = row

    for n in range(total):
        m = n % spp
        g = g0[m] + nodes * g1[m]
        f = (h0[m] + nodes * h1[m]) / g
        row, took_hi = _advance(row, f, g, lo, hi, grid)
        if keep == "all":
            rows[n + 1] = row
            branch[n] = took_hi
        elif (n + 1) % spp == 0:
            rows[(n + 1) // spp] = row

    if keep == "all":
        index = np.arange(total + 1)
    else:
        index = np.arange(n_max + 1) * spp
    rows.setflags(write=False)
    return ValueField(grid, n_max, rows, index, branch, plant, spec)

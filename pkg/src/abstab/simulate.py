"""Trajectories of the angle-parameterised closed loop

    (log r)' = f(kappa, theta),    kappa' = g(kappa, theta) * nu

under explicit gain-rate policies, integrated with classical RK4.

Every admissible history is a candidate in the maximisation that defines
rho, so trajectories bound rho from below; ``oracle_check`` tests exactly
that. ``FieldGreedyPolicy`` recovers a near-worst history from the branch
choices recorded while solving.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DomainError, NonFiniteValue, OracleViolation
from .hjb import ValueField, interp_row, kappa_nodes
from .plant import PolarField
from .ratebound import RateBoundSpec, forward_admissible, nu_max, nu_min

_CHUNK = 256
_ROOT_ITERS = 30
_HIT_TOL = 1e-13

UP, DOWN, HOLD = 1, -1, 0


@dataclass(frozen=True)
class ConstantPolicy:
    value: float = 0.0

    kind = "constant"

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class BangBangPolicy:
    """Extreme rates, alternating at ``switch_angles``; ``start`` is 'max' or 'min'."""

    switch_angles: tuple = ()
    start: str = "max"

    kind = "bang_bang"

    def __post_init__(self):
        angles = tuple(float(a) for a in self.switch_angles)
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise DomainError("switch angles must be strictly increasing")
        if self.start not in ("max", "min"):
            raise DomainError("start must be 'max' or 'min'")
        object.__setattr__(self, "switch_angles", angles)

    @property
    def breakpoints(self):
        return self.switch_angles

    def modes(self, theta_left) -> np.ndarray:
        count = np.searchsorted(np.asarray(self.switch_angles), theta_left, side="right")
        flipped = (count % 2).astype(bool)
        first, other = (UP, DOWN) if self.start == "max" else (DOWN, UP)
        return np.where(flipped, other, first).astype(np.int8)

    def to_dict(self):
        return {"kind": self.kind, "switch_angles": list(self.switch_angles), "start": self.start}


def trace_back(field: ValueField, N: int, kappa_end) -> tuple[np.ndarray, np.ndarray]:
    """Follow the winning characteristics of ``field`` backward from angle N*pi.

    At each step the branch is the one that won at the grid node nearest
    the current gain; the gain moves to that branch's foot. Vectorised over
    ``kappa_end``. Returns ``(modes, path)``: ``modes`` of shape
    (len(kappa_end), N * steps_per_pi) holds UP/DOWN/HOLD per angle step,
    ``path`` (one column longer) the traced gain at every grid angle.
    """
    if field.branch is None:
        raise DomainError("tracing needs a field solved with keep='all'")
    if not 1 <= N <= field.n_max:
        raise DomainError(f"N={N} outside 1..{field.n_max}")
    if field.plant is None or field.spec is None:
        raise DomainError("field does not carry its plant and rate bounds")
    grid, spec = field.grid, field.spec
    pf = PolarField(field.plant)
    kappa = np.clip(np.atleast_1d(np.asarray(kappa_end, dtype=float)), 0.0, 1.0)
    total = N * grid.steps_per_pi
    modes = np.empty((kappa.size, total), dtype=np.int8)
    path = np.empty((kappa.size, total + 1))
    path[:, total] = kappa
    h0, h1, g0, g1 = pf.coefficients(np.arange(grid.steps_per_pi) * grid.dtheta)
    for n in range(total - 1, -1, -1):
        j = np.rint(kappa * grid.J).astype(np.intp)
        up = field.branch[n, j]
        m = n % grid.steps_per_pi
        g = g0[m] + kappa * g1[m]
        rate = np.where(up, nu_max(spec, kappa), nu_min(spec, kappa))
        pinned = ((kappa == 1.0) & ~up) | ((kappa == 0.0) & up)
        modes[:, n] = np.where(pinned, HOLD, np.where(up, UP, DOWN))
        kappa = np.clip(kappa - g * rate * grid.dtheta, 0.0, 1.0)
        path[:, n] = kappa
    return modes, path


@dataclass(frozen=True, eq=False)
class FieldGreedyPolicy:
    """Worst-case history recovered from a solved field, ending at ``kappa_end`` at N*pi.

    The branch at each (kappa, theta) is the one that maximised the update
    at the nearest grid node, applied along the backward trace from the
    endpoint (by default the worst gain of that row); ties went to the upper
    rate when the field was solved. Forward in angle the worst path rides a
    repelling ridge, so the replay follows the traced gain path with a
    proportional correction of gain ``tracking`` (1/rad) instead of replaying
    the branch sequence open loop.
    """

    field: ValueField
    N: int
    kappa_end: float | None = None
    tracking: float = 20.0
    program: np.ndarray = dc_field(init=False, repr=False)
    path: np.ndarray = dc_field(init=False, repr=False)
    kappa0: float = dc_field(init=False)

    kind = "field_greedy"

    def __post_init__(self):
        kend = self.kappa_end
        if kend is None:
            row = self.field.row_at_pi(self.N)
            kend = float(kappa_nodes(self.field.grid.J)[int(np.argmax(row))])
            object.__setattr__(self, "kappa_end", kend)
        modes, path = trace_back(self.field, self.N, kend)
        object.__setattr__(self, "program", modes[0])
        object.__setattr__(self, "path", path[0])
        object.__setattr__(self, "kappa0", float(path[0, 0]))

    @property
    def breakpoints(self):
        return np.arange(1, self.program.size) * self.field.grid.dtheta

    def to_dict(self):
        return {"kind": self.kind, "N": self.N, "kappa_end": self.kappa_end,
                "kappa0": self.kappa0, "tracking": self.tracking}


@dataclass
class Trajectory:
    theta: np.ndarray
    r: np.ndarray
    kappa: np.ndarray
    max_excursion: float = 0.0  # largest distance of kappa outside [0,1] before clamping
    policy: object = dc_field(default=None, repr=False)

    @property
    def growth(self) -> float:
        return float(self.r[-1] / self.r[0])


class _Batch:
    """RK4 for trajectories sharing one angle mesh.

    Exactly one rate source is given: ``modes`` (n_traj x n_intervals,
    UP/DOWN/HOLD per mesh interval), a ``constant`` requested rate, or
    ``paths`` (n_traj x grid angles) to track with spacing ``ref_dtheta``.
    """

    def __init__(self, field, spec, modes=None, constant=None, paths=None,
                 ref_dtheta=None, tracking=20.0):
        self.field = field
        self.spec = spec
        self.modes = modes
        self.constant = constant
        self.paths = paths
        self.ref_dtheta = ref_dtheta
        self.tracking = tracking
        self.max_excursion = 0.0

    def _context(self, i, theta_left, rows):
        if self.modes is not None:
            return self.modes[rows, i]
        if self.paths is not None:
            n = int(math.floor(theta_left / self.ref_dtheta + 1e-9))
            n = min(n, self.paths.shape[1] - 2)
            return (n * self.ref_dtheta, self.paths[rows, n], self.paths[rows, n + 1])
        return None

    def _rhs(self, kappa, theta, ctx):
        h0, h1, g0, g1 = self.field.coefficients(theta)
        g = g0 + kappa * g1
        if self.modes is not None:
            nu = np.where(
                ctx == UP, self.spec.delta_max(kappa),
                np.where(ctx == DOWN, self.spec.delta_min(kappa), 0.0),
            )
        elif self.paths is not None:
            t0, a, b = ctx
            slope = (b - a) / self.ref_dtheta
            ref = a + slope * (theta - t0)
            nu = (slope + self.tracking * (ref - kappa)) / g
        else:
            nu = np.full_like(kappa, self.constant)
        return (h0 + kappa * h1) / g, g * forward_admissible(self.spec, kappa, nu)

    def _rk4(self, logr, kappa, theta, h, ctx):
        k1r, k1k = self._rhs(kappa, theta, ctx)
        k2r, k2k = self._rhs(kappa + 0.5 * h * k1k, theta + 0.5 * h, ctx)
        k3r, k3k = self._rhs(kappa + 0.5 * h * k2k, theta + 0.5 * h, ctx)
        k4r, k4k = self._rhs(kappa + h * k3k, theta + h, ctx)
        return (
            logr + h / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r),
            kappa + h / 6.0 * (k1k + 2 * k2k + 2 * k3k + k4k),
        )

    def _hit_boundary(self, logr, kappa, theta, h, ctx, bound):
        """Sub-step length at which kappa reaches ``bound`` (Illinois regula falsi)."""
        lo = np.zeros(kappa.size)
        hi = np.full(kappa.size, h)
        f_lo = kappa - bound
        f_hi = self._rk4(logr, kappa, theta, hi, ctx)[1] - bound
        side = np.zeros(kappa.size)
        s = lo
        for _ in range(_ROOT_ITERS):
            denom = f_hi - f_lo
            safe = np.where(denom != 0.0, denom, 1.0)
            s = np.clip(np.where(denom != 0.0, lo - f_lo * (hi - lo) / safe, lo), lo, hi)
            fs = self._rk4(logr, kappa, theta, s, ctx)[1] - bound
            if np.all(np.abs(fs) <= _HIT_TOL):
                break
            same = np.sign(fs) == np.sign(f_lo)
            f_hi = np.where(same & (side == 1), 0.5 * f_hi, f_hi)
            f_lo = np.where(~same & (side == -1), 0.5 * f_lo, f_lo)
            lo, f_lo = np.where(same, s, lo), np.where(same, fs, f_lo)
            hi, f_hi = np.where(same, hi, s), np.where(same, f_hi, fs)
            side = np.where(same, 1, -1)
        r_hit, k_hit = self._rk4(logr, kappa, theta, s, ctx)
        return s, r_hit, k_hit

    def step(self, logr, kappa, theta, h, i):
        rows = slice(None)
        ctx = self._context(i, theta, rows)
        new_r, new_k = self._rk4(logr, kappa, theta, h, ctx)
        out = (new_k > 1.0) | (new_k < 0.0)
        if np.any(out):
            idx = np.nonzero(out)[0]
            sub = self._context(i, theta, idx)
            bound = np.where(new_k[idx] > 1.0, 1.0, 0.0)
            s, r_hit, k_hit = self._hit_boundary(logr[idx], kappa[idx], theta, h, sub, bound)
            self.max_excursion = max(self.max_excursion, float(np.max(np.abs(k_hit - bound))))
            # the remainder starts on the boundary, where the outward rate is clamped to 0
            r_rest, k_rest = self._rk4(r_hit, bound, theta + s, h - s, sub)
            new_r, new_k = new_r.copy(), new_k.copy()
            new_r[idx], new_k[idx] = r_rest, k_rest
        self.max_excursion = max(
            self.max_excursion, float(np.max(np.maximum(new_k - 1.0, -new_k), initial=0.0))
        )
        new_k = np.clip(new_k, 0.0, 1.0)
        if not (np.all(np.isfinite(new_r)) and np.all(np.isfinite(new_k))):
            raise NonFiniteValue("trajectory blew up")
        return new_r, new_k

    def run(self, mesh, logr, kappa, record=False, stop_index=None):
        """March over ``mesh``; full histories when ``record``, else the state
        of each trajectory at its own ``stop_index`` (or at the end)."""
        n_int = mesh.size - 1
        if record:
            hist_r = np.empty((n_int + 1, logr.size))
            hist_k = np.empty((n_int + 1, logr.size))
            hist_r[0], hist_k[0] = logr, kappa
        if stop_index is not None:
            end_r, end_k = logr.copy(), kappa.copy()
        for i in range(n_int):
            logr, kappa = self.step(logr, kappa, float(mesh[i]), float(mesh[i + 1] - mesh[i]), i)
            if record:
                hist_r[i + 1], hist_k[i + 1] = logr, kappa
            if stop_index is not None:
                hit = stop_index == i + 1
                end_r[hit], end_k[hit] = logr[hit], kappa[hit]
        if record:
            return hist_r, hist_k
        if stop_index is not None:
            return end_r, end_k
        return logr, kappa


def _mesh(theta_end: float, step: float, breakpoints=()) -> np.ndarray:
    n = max(1, math.ceil(theta_end / step - 1e-9))
    mesh = np.linspace(0.0, theta_end, n + 1)
    extra = np.asarray(breakpoints, dtype=float)
    extra = extra[(extra > 0.0) & (extra < theta_end)]
    if extra.size:
        mesh = np.union1d(mesh, extra)
        # drop slivers left by breakpoints that coincide with mesh nodes up to rounding
        keep = np.concatenate([[True], np.diff(mesh) > 1e-12 * max(1.0, theta_end)])
        mesh = mesh[keep]
        mesh[-1] = theta_end
    return mesh


def integrate(
    field: PolarField,
    spec: RateBoundSpec,
    policy,
    kappa0: float,
    theta_end: float,
    step: float = 1e-3,
    r0: float = 1.0,
) -> Trajectory:
    """Integrate one trajectory from angle 0 to ``theta_end`` with fixed-step RK4.

    The policy's switching angles are added to the mesh so that each step
    sees a single branch.
    """
    if not 0.0 <= kappa0 <= 1.0:
        raise DomainError(f"kappa0={kappa0!r} outside [0, 1]")
    if not (theta_end > 0 and step > 0):
        raise DomainError("theta_end and step must be positive")
    if not r0 > 0:
        raise DomainError("r0 must be positive")
    if isinstance(policy, FieldGreedyPolicy):
        if step > policy.field.grid.dtheta * (1 + 1e-12):
            raise DomainError("step must not exceed the field's dtheta for FieldGreedyPolicy")
    if isinstance(policy, ConstantPolicy):
        mesh = _mesh(theta_end, step)
        batch = _Batch(field, spec, constant=policy.value)
    elif isinstance(policy, FieldGreedyPolicy):
        mesh = _mesh(theta_end, step, policy.breakpoints)
        batch = _Batch(field, spec, paths=policy.path[None, :],
                       ref_dtheta=policy.field.grid.dtheta, tracking=policy.tracking)
    else:
        mesh = _mesh(theta_end, step, policy.breakpoints)
        batch = _Batch(field, spec, modes=policy.modes(mesh[:-1])[None, :])
    hist_r, hist_k = batch.run(mesh, np.array([math.log(r0)]), np.array([float(kappa0)]), record=True)
    return Trajectory(mesh, np.exp(hist_r[:, 0]), hist_k[:, 0], batch.max_excursion, policy)


def greedy_witness(field: ValueField, N: int, step: float | None = None, scan: bool = True) -> Trajectory:
    """Replay FieldGreedy programs to angle N*pi and return the largest growth.

    With ``scan`` every grid node is tried as endpoint; otherwise only the
    worst node of the row.
    """
    if field.plant is None or field.spec is None:
        raise DomainError("field does not carry its plant and rate bounds")
    grid = field.grid
    step = grid.dtheta if step is None else step
    pf = PolarField(field.plant)
    theta_end = N * math.pi
    if scan:
        ends = kappa_nodes(grid.J).copy()
        modes, paths = trace_back(field, N, ends)
        mesh = _mesh(theta_end, step, np.arange(1, modes.shape[1]) * grid.dtheta)
        batch = _Batch(pf, field.spec, paths=paths, ref_dtheta=grid.dtheta)
        logr, _ = batch.run(mesh, np.zeros(ends.size), paths[:, 0].copy())
        best = float(ends[int(np.argmax(logr))])
        policy = FieldGreedyPolicy(field, N, best)
    else:
        policy = FieldGreedyPolicy(field, N)
    return integrate(pf, field.spec, policy, policy.kappa0, theta_end, step)


@dataclass
class OracleReport:
    trials: int
    violations: int
    max_ratio: float
    tol: float
    seed: int
    violating: list = dc_field(default_factory=list)
    ratios: np.ndarray | None = dc_field(default=None, repr=False)

    def to_dict(self):
        return {
            "trials": self.trials,
            "violations": self.violations,
            "max_ratio": self.max_ratio,
            "tol": self.tol,
            "seed": self.seed,
            "violating": self.violating,
        }


def _threads() -> int:
    env = os.environ.get("ABSTAB_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def random_bang_bang(rng: np.random.Generator, n_max: int, step: float, switches_per_pi: float = 5.0):
    """Draw ``(kappa0, N, policy)``: Poisson switching snapped to multiples of ``step``."""
    kappa0 = float(rng.uniform(0.0, 1.0))
    N = int(rng.integers(1, n_max + 1))
    theta_end = N * math.pi
    angles = []
    t = rng.exponential(math.pi / switches_per_pi)
    while t < theta_end:
        angles.append(t)
        t += rng.exponential(math.pi / switches_per_pi)
    idx = np.unique(np.rint(np.array(angles) / step).astype(np.int64))
    snapped = idx * step
    snapped = snapped[(snapped > 0) & (snapped < theta_end)]
    start = "max" if rng.random() < 0.5 else "min"
    return kappa0, N, BangBangPolicy(tuple(snapped.tolist()), start)


def _oracle_chunk(field_rho: ValueField, pf: PolarField, spec, draws, step_div):
    grid = field_rho.grid
    step = grid.dtheta / step_div
    per_pi = grid.steps_per_pi * step_div
    n_end = max(N for _, N, _ in draws)
    mesh = np.arange(n_end * per_pi + 1) * step
    modes = np.stack([p.modes(mesh[:-1]) for _, _, p in draws])
    kappa0 = np.array([k for k, _, _ in draws])
    stop = np.array([N * per_pi for _, N, _ in draws])
    logr, kend = _Batch(pf, spec, modes=modes).run(mesh, np.zeros(len(draws)), kappa0, stop_index=stop)
    rho = np.array([interp_row(field_rho.row_at_pi(N), k, grid) for (_, N, _), k in zip(draws, kend)])
    return np.exp(logr), rho


def oracle_check(
    field_rho: ValueField,
    field: PolarField,
    spec: RateBoundSpec,
    trials: int,
    seed: int = 0,
    tol: float = 0.02,
    step_div: int = 1,
    raise_on_violation: bool = True,
) -> OracleReport:
    """Check that random bang-bang trajectories never beat rho by more than ``tol``.

    Trial ``i`` draws from ``default_rng([seed, i])``. Trials are grouped
    by length into fixed chunks, so results do not depend on the thread count.
    Raises OracleViolation (unless ``raise_on_violation`` is off) with the
    first offending policy attached.
    """
    if trials < 0:
        raise DomainError("trials must be >= 0")
    if trials == 0:
        return OracleReport(0, 0, 0.0, tol, seed, [], np.empty(0))
    step = field_rho.grid.dtheta / step_div
    draws = [random_bang_bang(np.random.default_rng([seed, i]), field_rho.n_max, step) for i in range(trials)]
    order = sorted(range(trials), key=lambda i: draws[i][1])
    chunks = [order[s : s + _CHUNK] for s in range(0, trials, _CHUNK)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(
            lambda c: _oracle_chunk(field_rho, field, spec, [draws[i] for i in c], step_div), chunks
        ))
    growth = np.empty(trials)
    rho = np.empty(trials)
    for c, (gr, rh) in zip(chunks, results):
        growth[c], rho[c] = gr, rh
    ratios = growth / rho
    bad = np.nonzero(ratios > 1.0 + tol)[0]

    def record(i):
        k0, N, p = draws[i]
        return {**p.to_dict(), "kappa0": k0, "theta_end": N * math.pi, "seed": seed,
                "trial": int(i), "growth": float(growth[i]), "rho": float(rho[i])}

    report = OracleReport(trials, int(bad.size), float(ratios.max()), tol, seed,
                          [record(i) for i in bad], ratios)
    if bad.size and raise_on_violation:
        raise OracleViolation(
            f"{bad.size} of {trials} trajectories exceed rho by more than {tol:.1%}",
            policy=report.violating[0],
            report=report,
        )
    return report

"""Planar plant, closed-loop matrix and the polar-coordinate fields.

With x = r*(cos t, sin t) the closed loop x' = (A + k*B) x becomes

    dr/dt     = h(k, t) * r,     h = i(t)^T (A + k B) i(t)
    dtheta/dt = g(k, t),         g = j(t)^T (A + k B) i(t)

and, parameterised by the angle, r' = f * r with f = h / g.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivisionByZeroAngularRate, DomainError, NotOscillatory

# x_new = (x2, x1)
_SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class PlantSystem:
    """SISO plant ``x' = A x + b u, y = c^T x`` closed by ``u = kappa * y``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    B: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        c = np.array(self.c, dtype=float).reshape(-1)
        if A.shape != (2, 2) or b.shape != (2,) or c.shape != (2,):
            raise DomainError("plant must be planar: A 2x2, b and c 2-vectors")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise DomainError("plant entries must be finite")
        for name, arr in (("A", A), ("b", b), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        B = np.outer(b, c)
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    def swapped(self) -> "PlantSystem":
        """Same system in coordinates (x2, x1); reverses the rotation sense."""
        return PlantSystem(_SWAP @ self.A @ _SWAP, _SWAP @ self.b, _SWAP @ self.c)

    def norm_bound(self) -> float:
        """``||A||_2 + ||B||_2``, an upper bound of |g| and |h| over the gain range."""
        return float(np.linalg.norm(self.A, 2) + np.linalg.norm(self.B, 2))

    def __eq__(self, other):
        if not isinstance(other, PlantSystem):
            return NotImplemented
        return (
            np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )

    def __hash__(self):
        return hash((self.A.tobytes(), self.b.tobytes(), self.c.tobytes()))


def closed_loop_matrix(plant: PlantSystem, kappa: float) -> np.ndarray:
    if not 0.0 <= kappa <= 1.0:
        raise DomainError(f"gain {kappa!r} outside [0, 1]")
    return plant.A + kappa * plant.B


@dataclass(frozen=True)
class PolarField:
    """Evaluator of h, g and f = h/g for a plant. Vectorised over kappa and theta."""

    plant: PlantSystem

    @property
    def g_threshold(self) -> float:
        return 64 * np.finfo(float).eps * (1.0 + self.plant.norm_bound())

    def _forms(self, M, cos, sin):
        # i^T M i and j^T M i with i = (cos, sin), j = (-sin, cos)
        mi0 = M[0, 0] * cos + M[0, 1] * sin
        mi1 = M[1, 0] * cos + M[1, 1] * sin
        return cos * mi0 + sin * mi1, -sin * mi0 + cos * mi1

    def coefficients(self, theta):
        """Return (h0, h1, g0, g1) with h = h0 + kappa*h1 and g = g0 + kappa*g1."""
        cos, sin = np.cos(theta), np.sin(theta)
        h0, g0 = self._forms(self.plant.A, cos, sin)
        h1, g1 = self._forms(self.plant.B, cos, sin)
        return h0, h1, g0, g1

    def h(self, kappa, theta):
        h0, h1, _, _ = self.coefficients(theta)
        return h0 + np.asarray(kappa) * h1

    def g(self, kappa, theta):
        _, _, g0, g1 = self.coefficients(theta)
        return g0 + np.asarray(kappa) * g1

    def f(self, kappa, theta):
        return self.eval(kappa, theta)[2]

    def eval(self, kappa, theta):
        h0, h1, g0, g1 = self.coefficients(theta)
        kappa = np.asarray(kappa)
        h = h0 + kappa * h1
        g = g0 + kappa * g1
        if np.any(np.abs(g) < self.g_threshold):
            raise DivisionByZeroAngularRate(
                "angular rate g vanishes; run check_oscillatory first"
            )
        return h, g, h / g


def eval_polar(field: PolarField, kappa, theta):
    """Return ``(h, g, f)`` at ``(kappa, theta)``."""
    return field.eval(kappa, theta)


@dataclass(frozen=True)
class OscillationReport:
    plant: PlantSystem  # the plant in analysed (counterclockwise) coordinates
    swapped: bool
    counterclockwise: bool
    min_abs_g: float
    max_discriminant: float  # max over the gain grid of tr^2 - 4 det; < 0 when oscillatory


def check_oscillatory(
    plant: PlantSystem,
    tolerance: float = 1e-9,
    n_kappa: int = 1001,
    n_theta: int = 1001,
) -> OscillationReport:
    """Verify that every frozen-gain closed loop rotates in one direction.

    Complex eigenvalues are checked on a gain grid, then the sign of g is
    sampled on a ``n_kappa x n_theta`` grid over [0,1] x [0,pi]. A clockwise
    plant is returned in swapped coordinates, flagged in the report.

    Raises NotOscillatory when either check fails.
    """
    kappa = np.linspace(0.0, 1.0, n_kappa)
    A, B = plant.A, plant.B
    tr = np.trace(A) + kappa * np.trace(B)
    M = A[None] + kappa[:, None, None] * B[None]
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    disc = tr**2 - 4.0 * det
    max_disc = float(disc.max())
    if max_disc >= 0.0:
        bad = float(kappa[np.argmax(disc)])
        raise NotOscillatory(f"A + kappa*B has real eigenvalues at kappa={bad:.4g}")

    theta = np.linspace(0.0, np.pi, n_theta)
    _, _, g0, g1 = PolarField(plant).coefficients(theta)
    g = g0[None, :] + kappa[:, None] * g1[None, :]
    gmin, gmax = float(g.min()), float(g.max())
    min_abs = float(np.abs(g).min())
    if gmin > tolerance:
        return OscillationReport(plant, False, True, min_abs, max_disc)
    if gmax < -tolerance:
        return OscillationReport(plant.swapped(), True, False, min_abs, max_disc)
    raise NotOscillatory(
        f"angular rate changes sign or is below tolerance (min |g| = {min_abs:.3g})"
    )

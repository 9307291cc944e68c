"""Stability and instability tests read off the rows of rho at multiples of pi."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

from .errors import DomainError
from .hjb import ValueField

# bound from the comparison-system method, quoted for the m_min=1, m_max=4 example
COMPARISON_METHOD_BOUND = 0.63


class Status(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class StabilityVerdict:
    status: Status
    witness_N: int | None
    rho_min_at_N: float
    rho_max_at_N: float
    margin: float
    tau: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status.value
        return d


def default_tau(field: ValueField) -> float:
    return 10.0 * field.grid.dtheta


def decide(field: ValueField, tau: float | None = None) -> StabilityVerdict:
    """Scan N = 1..n_max for the first half-turn count at which a test fires.

    Stable when ``max_kappa rho(kappa, N*pi) < 1 - tau``, Unstable when
    ``min_kappa rho > 1 + tau``. ``margin`` is the distance of the deciding
    extreme from 1 (for Inconclusive: the extreme closest to a decision at
    ``n_max``, negative when it lies on the wrong side).
    """
    if tau is None:
        tau = default_tau(field)
    if tau < 0:
        raise DomainError("tau must be >= 0")
    lo = hi = 1.0
    for N in range(1, field.n_max + 1):
        row = field.row_at_pi(N)
        lo, hi = float(row.min()), float(row.max())
        if hi < 1.0 - tau:
            return StabilityVerdict(Status.STABLE, N, lo, hi, 1.0 - hi, tau)
        if lo > 1.0 + tau:
            return StabilityVerdict(Status.UNSTABLE, N, lo, hi, lo - 1.0, tau)
    return StabilityVerdict(Status.INCONCLUSIVE, None, lo, hi, max(1.0 - hi, lo - 1.0), tau)


def comparator_bounds(m_min: float, m_max: float, eps: float) -> dict:
    """Sufficient damping bounds for ``m(t) x'' + k x' + x = 0`` from the literature.

    ``circle``: quadratic Lyapunov function / circle criterion, ignores the
    rate of ``m``. ``ignatyev``: ``k > eps/2`` for ``|m'| <= eps``.
    """
    if not m_min > 0:
        raise DomainError("m_min must be positive")
    if m_max < m_min:
        raise DomainError("m_max must be >= m_min")
    if eps < 0:
        raise DomainError("eps must be >= 0")
    return {"circle": math.sqrt(m_max) - math.sqrt(m_min), "ignatyev": eps / 2.0}

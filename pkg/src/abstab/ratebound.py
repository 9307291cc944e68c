"""Admissible envelope ``delta_min(kappa) <= dkappa/dt <= delta_max(kappa)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_VALIDATION_POINTS = 10_001


class RateBoundSpec:
    """Base class. Subclasses provide vectorised ``delta_min`` / ``delta_max``."""

    def delta_min(self, kappa):
        raise NotImplementedError

    def delta_max(self, kappa):
        raise NotImplementedError

    def _validate(self):
        kappa = np.linspace(0.0, 1.0, _VALIDATION_POINTS)
        lo, hi = self.delta_min(kappa), self.delta_max(kappa)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise DomainError("rate bounds must be finite on [0, 1]")
        if np.any(lo > 0.0) or np.any(hi < 0.0):
            raise DomainError("rate bounds must satisfy delta_min <= 0 <= delta_max")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class AffineRateBound(RateBoundSpec):
    """``delta_min = min_offset + min_slope*kappa``, likewise for ``delta_max``."""

    min_offset: float
    min_slope: float
    max_offset: float
    max_slope: float

    def __post_init__(self):
        ends = [self.delta_min(0.0), self.delta_min(1.0), self.delta_max(0.0), self.delta_max(1.0)]
        if not np.all(np.isfinite(ends)):
            raise DomainError("rate bounds must be finite")
        # affine: the sign condition holds on [0,1] iff it holds at both ends
        if max(ends[0], ends[1]) > 0.0 or min(ends[2], ends[3]) < 0.0:
            raise DomainError("rate bounds must satisfy delta_min <= 0 <= delta_max")
        self._validate()

    def delta_min(self, kappa):
        return self.min_offset + self.min_slope * np.asarray(kappa, dtype=float)

    def delta_max(self, kappa):
        return self.max_offset + self.max_slope * np.asarray(kappa, dtype=float)

    def to_dict(self):
        return {
            "delta_min": {"offset": self.min_offset, "slope": self.min_slope},
            "delta_max": {"offset": self.max_offset, "slope": self.max_slope},
        }


@dataclass(frozen=True, eq=False)
class TabulatedRateBound(RateBoundSpec):
    """Piecewise-linear bounds through samples ``(kappa[i], delta_*[i])``."""

    kappa: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        k = np.array(self.kappa, dtype=float)
        lo = np.array(self.lower, dtype=float)
        hi = np.array(self.upper, dtype=float)
        if k.ndim != 1 or k.shape != lo.shape or k.shape != hi.shape or k.size < 2:
            raise DomainError("tabulated bounds need matching 1-d arrays of length >= 2")
        if k[0] != 0.0 or k[-1] != 1.0 or np.any(np.diff(k) <= 0):
            raise DomainError("tabulated kappa samples must increase from 0 to 1")
        for name, arr in (("kappa", k), ("lower", lo), ("upper", hi)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(lo > 0.0) or np.any(hi < 0.0):
            raise DomainError("rate bounds must satisfy delta_min <= 0 <= delta_max")
        self._validate()

    def delta_min(self, kappa):
        return np.interp(kappa, self.kappa, self.lower)

    def delta_max(self, kappa):
        return np.interp(kappa, self.kappa, self.upper)

    def to_dict(self):
        return {
            "kappa": self.kappa.tolist(),
            "delta_min": self.lower.tolist(),
            "delta_max": self.upper.tolist(),
        }


def zero_rate() -> AffineRateBound:
    """Frozen gain: the envelope collapses to zero."""
    return AffineRateBound(0.0, 0.0, 0.0, 0.0)


def symmetric_affine(eps: float, offset: float) -> AffineRateBound:
    """``|dkappa/dt| <= eps*(kappa + offset)``."""
    return AffineRateBound(-eps * offset, -eps, eps * offset, eps)


def _check_kappa(kappa):
    k = np.asarray(kappa, dtype=float)
    if np.any(k < 0.0) or np.any(k > 1.0) or not np.all(np.isfinite(k)):
        raise DomainError(f"gain outside [0, 1]: {kappa!r}")
    return k


def nu_min(spec: RateBoundSpec, kappa):
    """Lower characteristic rate: ``delta_min`` on [0,1), exactly 0 at kappa = 1."""
    k = _check_kappa(kappa)
    out = np.where(k == 1.0, 0.0, spec.delta_min(k))
    return float(out) if out.ndim == 0 else out


def nu_max(spec: RateBoundSpec, kappa):
    """Upper characteristic rate: exactly 0 at kappa = 0, ``delta_max`` on (0,1]."""
    k = _check_kappa(kappa)
    out = np.where(k == 0.0, 0.0, spec.delta_max(k))
    return float(out) if out.ndim == 0 else out


def max_abs_rate(spec: RateBoundSpec) -> float:
    """Supremum over [0,1] of ``max(|nu_min|, |nu_max|)``.

    The clamps only remove single points, so by continuity the supremum is
    that of the unclamped bounds, which for both representations sits at a node.
    """
    if isinstance(spec, TabulatedRateBound):
        return float(max(np.abs(spec.lower).max(), np.abs(spec.upper).max()))
    if isinstance(spec, AffineRateBound):
        ends = np.array([0.0, 1.0])
    else:
        ends = np.linspace(0.0, 1.0, _VALIDATION_POINTS)
    return float(max(np.abs(spec.delta_min(ends)).max(), np.abs(spec.delta_max(ends)).max()))


def forward_admissible(spec: RateBoundSpec, kappa, nu):
    """Clamp a requested rate into the admissible set for forward motion.

    Inside (0,1) the envelope applies; on the boundary the rate may not point
    outward (nu >= 0 at kappa = 0, nu <= 0 at kappa = 1).
    """
    k = np.asarray(kappa, dtype=float)
    nu = np.clip(nu, spec.delta_min(k), spec.delta_max(k))
    nu = np.where(k >= 1.0, np.minimum(nu, 0.0), nu)
    nu = np.where(k <= 0.0, np.maximum(nu, 0.0), nu)
    return nu

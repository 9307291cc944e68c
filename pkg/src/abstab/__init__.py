"""Absolute stability of planar systems under rate-bounded time-varying linear feedback."""

from .errors import (
    AbstabError,
    BracketError,
    CflUnsatisfiable,
    ConfigError,
    DivisionByZeroAngularRate,
    DomainError,
    NonFiniteValue,
    NotOscillatory,
    OracleViolation,
)
from .hjb import GridSpec, ValueField, interp_row, make_grid, solve, sweep_step
from .plant import PlantSystem, PolarField, check_oscillatory, closed_loop_matrix, eval_polar
from .ratebound import (
    AffineRateBound,
    RateBoundSpec,
    TabulatedRateBound,
    max_abs_rate,
    nu_max,
    nu_min,
    zero_rate,
)
from .simulate import (
    BangBangPolicy,
    ConstantPolicy,
    FieldGreedyPolicy,
    Trajectory,
    greedy_witness,
    integrate,
    oracle_check,
)
from .verdict import StabilityVerdict, Status, comparator_bounds, decide

__version__ = "0.1.0"

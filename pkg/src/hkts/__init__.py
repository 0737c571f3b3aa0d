"""Henstock-Kurzweil delta integration of lattice-valued functions on time scales."""

from .errors import (
    ConfigError,
    HKError,
    IntegrityError,
    InvalidGauge,
    InvalidInterval,
    MonotonicityError,
    NotInTimeScale,
    NotOracleEligible,
    SpaceMismatch,
    UniformIntegrabilityError,
    WitnessNotFound,
)
from .exprlang import EvalError, ParseError, compile_expr, parse
from .gauge import (
    DeltaGauge,
    TaggedPartition,
    cousin_partition,
    fineness_certificate,
    is_fine,
    random_fine_partition,
    stitch_gauges,
)
from .integrator import (
    EngineConfig,
    Integrand,
    IntegralResult,
    check_linearity,
    hk_integrate,
    oracle_integrate,
    riemann_sum,
    saks_henstock_residual,
    split_integrate,
)
from .riesz import SCALAR, EvalMap, LatticeElement, LatticeSpace, Regulator
from .timescale import TimeScale, TsInterval

__version__ = "0.1.0"

__all__ = [
    "check_linearity",
    "compile_expr",
    "ConfigError",
    "cousin_partition",
    "DeltaGauge",
    "EngineConfig",
    "EvalError",
    "EvalMap",
    "fineness_certificate",
    "hk_integrate",
    "HKError",
    "IntegralResult",
    "Integrand",
    "IntegrityError",
    "InvalidGauge",
    "InvalidInterval",
    "is_fine",
    "LatticeElement",
    "LatticeSpace",
    "MonotonicityError",
    "NotInTimeScale",
    "NotOracleEligible",
    "oracle_integrate",
    "parse",
    "ParseError",
    "random_fine_partition",
    "Regulator",
    "riemann_sum",
    "saks_henstock_residual",
    "SCALAR",
    "SpaceMismatch",
    "split_integrate",
    "stitch_gauges",
    "TaggedPartition",
    "TimeScale",
    "TsInterval",
    "UniformIntegrabilityError",
    "WitnessNotFound",
]

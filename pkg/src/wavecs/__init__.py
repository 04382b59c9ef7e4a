"""Compressed sensing of acoustic wave fields on a planar sensor."""

__version__ = "0.1.0"

from .curvelet import (
    CurveletCoeffs,
    CurveletPlan,
    cinf_window,
    fdct,
    ifdct,
    k_term,
    lf_window,
    make_plan,
)
from .errors import (
    InvalidConfigError,
    InvalidInputError,
    InvalidStateError,
    NumericalFailureError,
    PlanConstructionError,
    WavecsError,
)
from .hadamard import (
    BinaryMeasurement,
    SensingOperator,
    binary_to_signed,
    build_patterns,
    fwht,
    make_sensing_operator,
    measure_binary,
    sensing_adjoint,
    sensing_apply,
)
from .phantom_io import (
    BallPhantomSpec,
    clock_phantom,
    emit_image,
    make_ball_phantom,
    mse,
    read_array,
    read_coeffs,
    read_patterns,
    read_series,
    read_volume,
    write_coeffs,
    write_patterns,
    write_series,
    write_volume,
)
from .solver import (
    OperatorPair,
    RecoveryConfig,
    SolveReport,
    build_cs_operator,
    recover_series,
    salsa,
    smw_apply,
    soft_threshold,
)
from .wave import (
    DegradationSpec,
    MediumSpec,
    blackman_degradation,
    blackman_smooth,
    degrade,
    filter_initial_pressure,
    forward_geometry,
    freq_model,
    spectral_forward,
    time_reversal,
)

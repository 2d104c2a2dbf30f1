"""Constant-modulus dual-function radar-communication waveform design.

Synthesizes transmit frames that serve downlink users while keeping the
spatial covariance close to the omni-directional (orthogonal) radar target,
via a closed-form Procrustes design, a Riemannian conjugate-gradient solver
on the unit-modulus manifold, and an alternating-minimization trade-off
loop. Monte-Carlo drivers evaluate symbol error rate, beampatterns and
detection probability.
"""

from .manifold import (
    LsObjective,
    ZeroSumEntryError,
    euclidean_gradient,
    metric_inner,
    project_to_tangent,
    random_point,
    retract,
    riemannian_gradient,
)
from .metrics import (
    QPSK,
    BeampatternCurve,
    beampattern,
    constant_modulus_error,
    covariance,
    demodulate,
    detection_probability,
    mui_energy,
    orthogonality_error,
    ser,
    steering_vector,
)
from .sim import (
    CurvePoint,
    Method,
    Scenario,
    SolverBudgetError,
    cm_zf_waveform,
    gen_channel,
    gen_symbols,
    run_radar_experiment,
    run_ser_experiment,
    run_tradeoff_sweep,
    transmit,
)
from .solvers import (
    AltMinResult,
    BacktrackExhaustedError,
    NotDescentDirectionError,
    SolverConfig,
    StackedProblem,
    altmin,
    armijo_step,
    build_stacked,
    devectorize,
    polak_ribiere_beta,
    rcg_solve,
    solve_mui_orthogonal,
    solve_opp,
    vectorize_problem,
    vectorize_waveform,
)

__version__ = "0.1.0"

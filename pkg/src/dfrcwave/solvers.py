"""Waveform optimizers.

Three procedures cover the design space:

* :func:`solve_mui_orthogonal` / :func:`solve_opp` -- closed-form SVD
  solutions of the orthogonal Procrustes problems (globally optimal for the
  strictly orthogonal design and for the auxiliary-matrix sub-problem).
* :func:`rcg_solve` -- Riemannian conjugate gradient for the constant-modulus
  least-squares sub-problem on the complex circle manifold.
* :func:`altmin` -- alternating minimization of the weighted trade-off
  objective rho * ||H X - S||_F^2 + (1 - rho) * ||X - U||_F^2 over the
  constant-modulus waveform X and the row-orthogonal auxiliary matrix U.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .manifold import (
    LsObjective,
    ZeroSumEntryError,
    metric_inner,
    retract,
    riemannian_gradient,
    unvec_columns,
    vec_columns,
)

__all__ = [
    "NotDescentDirectionError",
    "BacktrackExhaustedError",
    "SolverConfig",
    "StackedProblem",
    "AltMinResult",
    "solve_opp",
    "solve_mui_orthogonal",
    "build_stacked",
    "vectorize_problem",
    "vectorize_waveform",
    "devectorize",
    "polak_ribiere_beta",
    "armijo_step",
    "rcg_solve",
    "altmin",
]


class NotDescentDirectionError(ValueError):
    """The supplied search direction does not point downhill."""


class BacktrackExhaustedError(RuntimeError):
    """Armijo backtracking ran out of trials without sufficient decrease."""


def _fro2(m: np.ndarray) -> float:
    return float(np.sum(m.real * m.real + m.imag * m.imag))


def _as_complex_matrix(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and line-search parameters for the iterative solvers.

    epsilon/k_max bound the inner RCG (gradient norm target, iteration cap);
    eta/n_max bound the outer alternating loop (objective-change target,
    iteration cap). The Armijo search accepts the first step mu satisfying
    f(R_x(mu d)) <= f(x) + armijo_c * mu * <grad f, d>, starting from
    armijo_initial_step / ||grad|| and shrinking by armijo_shrink.
    """

    epsilon: float = 1e-4
    k_max: int = 500
    eta: float = 1e-5
    n_max: int = 100
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_initial_step: float = 1.0
    armijo_max_backtracks: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.k_max > 2:
            raise ValueError("k_max must be > 2")
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if not self.n_max >= 1:
            raise ValueError("n_max must be >= 1")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError("armijo_c must be in (0, 1)")
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ValueError("armijo_shrink must be in (0, 1)")
        if not self.armijo_initial_step > 0:
            raise ValueError("armijo_initial_step must be > 0")
        if not self.armijo_max_backtracks >= 1:
            raise ValueError("armijo_max_backtracks must be >= 1")


@dataclass(frozen=True)
class StackedProblem:
    """The two weighted design terms stacked into one least-squares pair.

    a_matrix = [sqrt(rho) H ; sqrt(1-rho) I_N] has shape (K+N, N) and
    b_matrix = [sqrt(rho) S ; sqrt(1-rho) U] has shape (K+N, L), so that
    ||A X - B||_F^2 == rho ||H X - S||_F^2 + (1-rho) ||X - U||_F^2.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    rho: float
    total_power: float


@dataclass
class AltMinResult:
    waveform: np.ndarray
    auxiliary: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool


def solve_opp(target: np.ndarray, scale: float) -> np.ndarray:
    """Nearest scaled row-orthogonal matrix to a Procrustes target.

    Returns R = sqrt(L * scale) * U_t V_t where U_t diag(s) V_t is the thin
    SVD of ``target`` (M x L, L >= M). R satisfies (1/L) R R^H = scale * I_M
    and maximizes Re tr(R^H target) over that feasible set, which makes it
    the global minimizer of the associated Procrustes objective.
    """
    target = _as_complex_matrix(target, "target")
    m, l = target.shape
    if l < m:
        raise ValueError(
            f"row-orthogonal feasible set is empty for shape {target.shape} (need L >= M)"
        )
    if not scale > 0:
        raise ValueError("scale must be > 0")
    if not np.all(np.isfinite(target)):
        raise ValueError("target contains non-finite entries")
    u, _, vh = np.linalg.svd(target, full_matrices=False)
    return np.sqrt(l * scale) * (u @ vh)


def solve_mui_orthogonal(H: np.ndarray, S: np.ndarray, total_power: float) -> np.ndarray:
    """Closed-form waveform minimizing downlink interference among strictly
    orthogonal designs: min ||H X - S||_F^2 s.t. (1/L) X X^H = (P_T/N) I_N.

    The solution is the Procrustes alignment of the target H^H S.
    """
    H = _as_complex_matrix(H, "H")
    S = _as_complex_matrix(S, "S")
    k, n = H.shape
    if S.shape[0] != k:
        raise ValueError(f"H has {k} users but S has {S.shape[0]} rows")
    l = S.shape[1]
    if l < n:
        raise ValueError(f"need frame length L >= N, got L={l}, N={n}")
    if k > n:
        warnings.warn(
            f"K={k} users exceed N={n} antennas; the design is still defined "
            "but interference will stay high",
            stacklevel=2,
        )
    return solve_opp(H.conj().T @ S, total_power / n)


def build_stacked(H, S, U, rho: float, total_power: float) -> StackedProblem:
    """Stack the weighted interference and orthogonality terms (see
    :class:`StackedProblem` for the identity this construction guarantees)."""
    H = _as_complex_matrix(H, "H")
    S = _as_complex_matrix(S, "S")
    U = _as_complex_matrix(U, "U")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    if not total_power > 0:
        raise ValueError("total_power must be > 0")
    k, n = H.shape
    if S.shape[0] != k:
        raise ValueError(f"H has {k} rows but S has {S.shape[0]}")
    if U.shape[0] != n:
        raise ValueError(f"H has {n} columns but U has {U.shape[0]} rows")
    if S.shape[1] != U.shape[1]:
        raise ValueError(f"S and U frame lengths differ: {S.shape[1]} vs {U.shape[1]}")
    sr = np.sqrt(rho)
    so = np.sqrt(1.0 - rho)
    a = np.vstack([sr * H, so * np.eye(n, dtype=np.complex128)])
    b = np.vstack([sr * S, so * U])
    return StackedProblem(a_matrix=a, b_matrix=b, rho=float(rho), total_power=float(total_power))


def vectorize_problem(sp: StackedProblem) -> LsObjective:
    """Express the stacked problem over the unit-modulus coordinates x with
    X = sqrt(P_T/N) unvec(x); the power scaling moves into the objective."""
    n = sp.a_matrix.shape[1]
    return LsObjective(
        a_matrix=sp.a_matrix,
        b_matrix=sp.b_matrix,
        amplitude=float(np.sqrt(sp.total_power / n)),
    )


def vectorize_waveform(X: np.ndarray, total_power: float) -> np.ndarray:
    """Manifold coordinates of a waveform: vec(X) / sqrt(P_T/N)."""
    X = _as_complex_matrix(X, "X")
    amp = np.sqrt(total_power / X.shape[0])
    return vec_columns(X) / amp


def devectorize(x: np.ndarray, n_antennas: int, frame_length: int,
                total_power: float) -> np.ndarray:
    """Waveform matrix from manifold coordinates: sqrt(P_T/N) unvec(x)."""
    amp = np.sqrt(total_power / n_antennas)
    return amp * unvec_columns(np.asarray(x, dtype=np.complex128), n_antennas, frame_length)


def polak_ribiere_beta(g, g_prev_projected, g_prev_norm_sq: float) -> float:
    """Polak-Ribiere combination coefficient with the non-negativity clamp.

    ``g_prev_projected`` is the previous gradient transported (projected)
    into the current tangent space.
    """
    if not g_prev_norm_sq > 0:
        raise ValueError("g_prev_norm_sq must be > 0")
    g = np.asarray(g)
    beta = metric_inner(g, g - np.asarray(g_prev_projected)) / g_prev_norm_sq
    return max(0.0, beta)


def armijo_step(obj: LsObjective, x: np.ndarray, d: np.ndarray,
                cfg: SolverConfig, *, f_x: float | None = None,
                grad: np.ndarray | None = None,
                initial_step: float | None = None):
    """Backtracking line search along a tangent descent direction.

    Returns ``(mu, x_next)`` where mu = mu0 * shrink^m is the first trial
    satisfying f(R_x(mu d)) <= f(x) + armijo_c * mu * <grad, d> and
    x_next = R_x(mu d). By default mu0 = armijo_initial_step / ||grad||.

    Raises :class:`NotDescentDirectionError` when <grad, d> >= 0 and
    :class:`BacktrackExhaustedError` after armijo_max_backtracks shrinks.
    """
    x = np.asarray(x, dtype=np.complex128)
    d = np.asarray(d, dtype=np.complex128)
    if grad is None:
        grad = riemannian_gradient(obj, x)
    if f_x is None:
        f_x = obj.value(x)
    slope = metric_inner(grad, d)
    if slope >= 0.0:
        raise NotDescentDirectionError(f"<grad, d> = {slope:.3e} is not negative")
    if initial_step is None:
        mu = cfg.armijo_initial_step / np.sqrt(metric_inner(grad, grad))
    else:
        mu = float(initial_step)
    for _ in range(cfg.armijo_max_backtracks + 1):
        try:
            x_next = retract(x, mu * d)
        except ZeroSumEntryError:
            mu *= cfg.armijo_shrink
            continue
        if obj.value(x_next) <= f_x + cfg.armijo_c * mu * slope:
            return mu, x_next
        mu *= cfg.armijo_shrink
    raise BacktrackExhaustedError(
        f"no sufficient decrease within {cfg.armijo_max_backtracks} backtracks"
    )


def rcg_solve(obj: LsObjective, x0: np.ndarray, cfg: SolverConfig,
              collect_trace: bool = False):
    """Riemannian conjugate gradient for the constant-modulus least squares.

    Runs Polak-Ribiere(+) conjugate gradient with projection transport,
    Armijo backtracking and retraction until the Riemannian gradient norm
    drops below cfg.epsilon or cfg.k_max accepted iterations are reached.
    Returns ``(x, iterations, grad_norm)``, or with ``collect_trace`` the
    additional array of accepted objective values (length iterations + 1).
    ``iterations`` counts accepted descent steps; starting at a stationary
    point returns immediately with 0.

    Successive line searches warm-start from the previously accepted step
    (grown by one shrink factor); the first search uses
    armijo_initial_step / ||grad||.

    Raises :class:`BacktrackExhaustedError` if backtracking cannot find any
    decrease even after restarting along steepest descent.
    """
    x0 = np.asarray(x0, dtype=np.complex128)
    if x0.ndim != 1 or x0.size != obj.dim:
        raise ValueError(
            f"x0 must be a stacked vector of length {obj.dim}, got shape {x0.shape}"
        )
    mags = np.abs(x0)
    if np.any(np.abs(mags - 1.0) > 1e-9):
        raise ValueError("x0 is not on the unit-modulus manifold")
    x0 = x0 / mags
    x0m = unvec_columns(x0, obj.n_antennas, obj.frame_length)
    trace = np.empty(cfg.k_max + 1)
    xr, xi, iterations, grad_norm, status, _ = _kernels.rcg_kernel(
        np.ascontiguousarray(obj.a_matrix.real),
        np.ascontiguousarray(obj.a_matrix.imag),
        np.ascontiguousarray(obj.b_matrix.real),
        np.ascontiguousarray(obj.b_matrix.imag),
        obj.amplitude,
        np.ascontiguousarray(x0m.real),
        np.ascontiguousarray(x0m.imag),
        cfg.epsilon,
        cfg.k_max,
        cfg.armijo_c,
        cfg.armijo_shrink,
        cfg.armijo_initial_step,
        cfg.armijo_max_backtracks,
        trace,
    )
    if status == _kernels.STATUS_STALLED:
        raise BacktrackExhaustedError(
            "line search stalled (no decrease along steepest descent); "
            f"gradient norm {grad_norm:.3e} above epsilon {cfg.epsilon:.3e}"
        )
    x = vec_columns(xr + 1j * xi)
    if collect_trace:
        return x, iterations, grad_norm, trace[: iterations + 1].copy()
    return x, iterations, grad_norm


def altmin(H, S, rho: float, total_power: float, cfg: SolverConfig,
           x0: np.ndarray | None = None) -> AltMinResult:
    """Alternate between the auxiliary-matrix Procrustes update and the
    constant-modulus RCG sub-problem until the objective change falls
    below cfg.eta or cfg.n_max outer iterations elapse.

    Each outer iteration first refits U to the current waveform (a closed
    form global optimum of its sub-problem), then descends the stacked
    least-squares objective over the waveform, warm-starting the RCG at the
    current iterate. Coordinate descent plus warm starts makes the objective
    trace non-increasing.

    ``x0`` optionally fixes the initial waveform (entries must have modulus
    sqrt(P_T/N)); by default phases are drawn uniformly from cfg.seed.
    """
    H = _as_complex_matrix(H, "H")
    S = _as_complex_matrix(S, "S")
    k, n = H.shape
    if S.shape[0] != k:
        raise ValueError(f"H has {k} users but S has {S.shape[0]} rows")
    l = S.shape[1]
    if l < n:
        raise ValueError(f"need frame length L >= N for a row-orthogonal U, got L={l}, N={n}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    amp = np.sqrt(total_power / n)
    if x0 is None:
        rng = np.random.default_rng(cfg.seed)
        X = amp * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (n, l)))
    else:
        X = _as_complex_matrix(x0, "x0")
        if X.shape != (n, l):
            raise ValueError(f"x0 must have shape {(n, l)}, got {X.shape}")
        mags = np.abs(X)
        if np.any(np.abs(mags - amp) > 1e-9):
            raise ValueError("x0 entries must have modulus sqrt(P_T/N)")
        X = amp * (X / mags)

    scale = total_power / n
    U = solve_opp(X, scale)
    f = rho * _fro2(H @ X - S) + (1.0 - rho) * _fro2(X - U)
    trace = [f]
    converged = False
    iterations = 0
    while iterations < cfg.n_max:
        iterations += 1
        U = solve_opp(X, scale)
        obj = vectorize_problem(build_stacked(H, S, U, rho, total_power))
        x, _, _ = rcg_solve(obj, vectorize_waveform(X, total_power), cfg)
        X = devectorize(x, n, l, total_power)
        f = rho * _fro2(H @ X - S) + (1.0 - rho) * _fro2(X - U)
        trace.append(f)
        if abs(trace[-1] - trace[-2]) < cfg.eta:
            converged = True
            break
    return AltMinResult(
        waveform=X,
        auxiliary=U,
        objective_trace=np.asarray(trace),
        iterations=iterations,
        converged=converged,
    )

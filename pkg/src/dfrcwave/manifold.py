"""Geometry of the unit-modulus (complex circle) manifold.

The feasible set of the vectorized constant-modulus constraint is

    M = { x in C^n : |x_i| = 1 for all i },

a product of n unit circles. Points and tangent vectors are plain complex
ndarrays; a vector w is tangent at x when Re(w * conj(x)) == 0 elementwise.
The metric is the canonical one induced by the embedding, Re<u, v>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ZeroSumEntryError",
    "LsObjective",
    "project_to_tangent",
    "retract",
    "metric_inner",
    "random_point",
    "euclidean_gradient",
    "riemannian_gradient",
    "vec_columns",
    "unvec_columns",
]

#: |x_i + w_i| below this is treated as an undefined retraction input.
RETRACTION_FLOOR = 1e-300


class ZeroSumEntryError(ValueError):
    """Raised when retraction hits an entry with x_i + w_i == 0."""


def _require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def vec_columns(m: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into one vector (vec operator)."""
    return np.asarray(m).ravel(order="F")


def unvec_columns(x: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    """Inverse of :func:`vec_columns` for an ``n_rows x n_cols`` matrix."""
    x = np.asarray(x)
    if x.size != n_rows * n_cols:
        raise ValueError(f"cannot reshape length {x.size} into {n_rows}x{n_cols}")
    return x.reshape((n_rows, n_cols), order="F")


def project_to_tangent(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Orthogonal projection of w onto the tangent space at x.

    Computes ``w - Re(w o conj(x)) o x`` where ``o`` is the elementwise
    product. The output satisfies ``Re(out o conj(x)) == 0`` and the map is
    idempotent.
    """
    x = np.asarray(x)
    w = np.asarray(w)
    _require_same_shape(x, w)
    return w - (w.real * x.real + w.imag * x.imag) * x


def retract(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Map the step w at x back onto the manifold, entrywise (x+w)/|x+w|.

    Raises :class:`ZeroSumEntryError` when some ``|x_i + w_i|`` underflows;
    the map is undefined at 0 and the caller (a shrinking line search) is
    expected never to get there.
    """
    x = np.asarray(x)
    w = np.asarray(w)
    _require_same_shape(x, w)
    y = x + w
    mag = np.abs(y)
    if np.any(mag < RETRACTION_FLOOR):
        raise ZeroSumEntryError("retraction undefined: some x_i + w_i == 0")
    return y / mag


def metric_inner(u: np.ndarray, v: np.ndarray) -> float:
    """Riemannian metric Re<u, v> = sum_i Re(u_i conj(v_i))."""
    u = np.asarray(u)
    v = np.asarray(v)
    _require_same_shape(u, v)
    return float(np.sum(u.real * v.real + u.imag * v.imag))


def random_point(n: int, seed: int) -> np.ndarray:
    """Random manifold point with phases i.i.d. uniform on [0, 2pi)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))


@dataclass(frozen=True)
class LsObjective:
    """Least-squares objective ``f(x) = ||A~ x - b~||^2`` on the manifold.

    ``A~ = amplitude * (I_L kron A)`` is never materialized: every product
    goes through the small stacked matrix ``A`` using the Kronecker identity
    ``(I kron A) vec(X) = vec(A X)``, so one objective or gradient
    evaluation costs O(rows(A) * N * L) complex multiplications instead of
    the O((NL)^2) a dense representation would need. ``b~ = vec(b_matrix)``.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    amplitude: float

    def __post_init__(self) -> None:
        a = np.asarray(self.a_matrix, dtype=np.complex128)
        b = np.asarray(self.b_matrix, dtype=np.complex128)
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError("a_matrix and b_matrix must be 2-D")
        if a.shape[0] != b.shape[0]:
            raise ValueError(
                f"row mismatch: a_matrix {a.shape} vs b_matrix {b.shape}"
            )
        if not np.isfinite(self.amplitude) or self.amplitude <= 0:
            raise ValueError("amplitude must be positive and finite")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_matrix", b)

    @property
    def n_rows(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def frame_length(self) -> int:
        return self.b_matrix.shape[1]

    @property
    def dim(self) -> int:
        """Dimension of the manifold variable (N * L)."""
        return self.n_antennas * self.frame_length

    def target_vector(self) -> np.ndarray:
        """b~ as a stacked vector; intended for small diagnostic work."""
        return vec_columns(self.b_matrix)

    def _as_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.size != self.dim:
            raise ValueError(f"expected length {self.dim}, got {x.size}")
        return unvec_columns(x, self.n_antennas, self.frame_length)

    def residual(self, x: np.ndarray) -> np.ndarray:
        """Matrix-shaped residual ``amplitude * A X - B`` for x = vec(X)."""
        return self.amplitude * (self.a_matrix @ self._as_matrix(x)) - self.b_matrix

    def value(self, x: np.ndarray) -> float:
        r = self.residual(x)
        return float(np.sum(r.real * r.real + r.imag * r.imag))


def euclidean_gradient(obj: LsObjective, x: np.ndarray) -> np.ndarray:
    """Euclidean gradient ``2 A~^H (A~ x - b~)``, evaluated blockwise."""
    r = obj.residual(x)
    g = (2.0 * obj.amplitude) * (obj.a_matrix.conj().T @ r)
    return vec_columns(g)


def riemannian_gradient(obj: LsObjective, x: np.ndarray) -> np.ndarray:
    """Projection of the Euclidean gradient onto the tangent space at x."""
    return project_to_tangent(x, euclidean_gradient(obj, x))

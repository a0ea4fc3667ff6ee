"""Small dense kernels shared by the intensity, spatial and econometrics modules.

Matrices here are tiny (indicator cross products, city weight matrices), so the
eigensolver is a plain cyclic Jacobi iteration and the 1-D optimizer is a grid
scan refined by golden-section search.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_triangular

from landagg.errors import AsymmetricInput, NonConvergence, NonFiniteEvaluation, RankDeficient

log = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 100
GOLDEN_RATIO = (1 + math.sqrt(5)) / 2


@dataclass(frozen=True)
class SymMatrix:
    entries: NDArray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise AsymmetricInput(f"expected a square matrix, got shape {a.shape}")

        scale = np.max(np.abs(a)) if a.size else 0.0
        gap = np.max(np.abs(a - a.T)) if a.size else 0.0
        if gap > SYMMETRY_TOLERANCE * scale:
            raise AsymmetricInput(f"matrix is not symmetric (max |a_ij - a_ji| = {gap:.3e})")

        object.__setattr__(self, "entries", (a + a.T) / 2.0)

    @property
    def order(self) -> int:
        return self.entries.shape[0]


class LeastSquaresResult(NamedTuple):
    coefficients: NDArray
    residuals: NDArray
    rss: float


def eig_sym(m: SymMatrix | NDArray) -> tuple[NDArray, NDArray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in ascending order and the matching orthonormal
    eigenvectors as columns.
    """
    if not isinstance(m, SymMatrix):
        m = SymMatrix(m)

    a = m.entries.copy()
    n = m.order
    v = np.identity(n)
    scale = np.linalg.norm(a)

    if n == 0 or scale == 0.0:
        return np.diag(a).copy(), v

    upper = np.triu_indices(n, k=1)
    for sweep in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(np.sum(a[upper] ** 2))
        if off <= 1e-15 * scale:
            break

        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue

                # negligible against both diagonal entries: drop it
                g = 100.0 * abs(apq)
                if sweep > 3 and abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue

                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        raise NonConvergence(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")

    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    return values[order], v[:, order]


def _checked(f: Callable[[float], float], x: float) -> float:
    value = float(f(x))
    if not math.isfinite(value):
        raise NonFiniteEvaluation(f"objective is not finite at x = {x!r} (value {value})")
    return value


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal f on [a, b]."""
    c = b - (b - a) / GOLDEN_RATIO
    d = a + (b - a) / GOLDEN_RATIO
    fc = _checked(f, c)
    fd = _checked(f, d)

    while abs(b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - (b - a) / GOLDEN_RATIO
            fc = _checked(f, c)
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) / GOLDEN_RATIO
            fd = _checked(f, d)

    x = (a + b) / 2.0
    return x, _checked(f, x)


def maximize_1d(f: Callable[[float], float], lo: float, hi: float, grid: int = 201, tol: float = 1e-8) -> float:
    """Grid scan over [lo, hi] followed by golden-section refinement of the best cell.

    The returned point is never worse than any grid point.
    """
    if not lo < hi:
        raise ValueError(f"empty search interval [{lo}, {hi}]")
    grid = max(int(grid), 3)

    points = np.linspace(lo, hi, grid)
    values = np.array([_checked(f, x) for x in points])
    best = int(np.argmax(values))

    left = points[max(best - 1, 0)]
    right = points[min(best + 1, grid - 1)]
    x, fx = golden_section_max(f, left, right, tol)

    if fx < values[best]:
        return float(points[best])
    return float(x)


def hessian(f: Callable[[NDArray], float], theta: NDArray, step: float = 1e-5,
            scale: NDArray | None = None) -> NDArray:
    """Central-difference Hessian of f at theta.

    Step i is ``step * scale_i``; ``scale`` defaults to ``max(|theta_i|, 1)``.
    Pass ``|theta_i|`` for a parameter that must keep its sign, such as a variance.
    """
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    scale = np.maximum(np.abs(theta), 1.0) if scale is None else np.asarray(scale, dtype=float)
    if scale.shape != theta.shape or not (scale > 0).all():
        raise ValueError("Hessian scale must be positive, one entry per parameter")
    h = step * scale
    f0 = float(f(theta))
    out = np.zeros((k, k))

    def at(*moves):
        point = theta.copy()
        for i, sign in moves:
            point[i] += sign * h[i]
        return float(f(point))

    for i in range(k):
        out[i, i] = (at((i, 1)) - 2.0 * f0 + at((i, -1))) / (h[i] * h[i])
        for j in range(i + 1, k):
            value = (at((i, 1), (j, 1)) - at((i, 1), (j, -1)) - at((i, -1), (j, 1)) + at((i, -1), (j, -1)))
            out[i, j] = out[j, i] = value / (4.0 * h[i] * h[j])

    if not np.isfinite(out).all():
        raise NonFiniteEvaluation("Hessian has non-finite entries")
    return out


def least_squares(x: NDArray, y: NDArray, rank_tolerance: float = 1e-10) -> LeastSquaresResult:
    """Least squares through a reduced QR factorization.

    Column j is reported as rank deficient when |R_jj| falls below
    ``rank_tolerance`` times the largest |R_ii|, i.e. when it is (numerically)
    in the span of the columns before it.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2:
        raise ValueError("design matrix must be two dimensional")

    rows, cols = x.shape
    if rows < cols:
        raise RankDeficient(f"{rows} rows cannot identify {cols} coefficients")

    q, r = np.linalg.qr(x, mode="reduced")
    diag = np.abs(np.diag(r))
    limit = rank_tolerance * (diag.max() if diag.size else 0.0)
    for j, value in enumerate(diag):
        if value <= limit:
            err = RankDeficient(f"column {j} is linearly dependent on the preceding columns")
            err.column = j
            raise err

    coefficients = solve_triangular(r, q.T @ y)
    residuals = y - x @ coefficients
    return LeastSquaresResult(coefficients, residuals, float(residuals @ residuals))

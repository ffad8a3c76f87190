"""Dense real tensor primitives: pairwise contraction, bipartitioned SVD,
orthogonal complements and dominant-eigenvalue solving.

All tensors are plain ``numpy.ndarray`` objects of dtype float64 in row-major
layout. Complex arithmetic is out of scope; every routine coerces its input
to real doubles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "TensorError",
    "AxisMismatchError",
    "EigenConvergenceError",
    "SvdResult",
    "DominantEig",
    "contract_pair",
    "svd",
    "orthogonal_complement",
    "dominant_eig",
]


class TensorError(ValueError):
    """Base error for tensor-level failures."""


class AxisMismatchError(TensorError):
    """Paired axes have incompatible extents."""


class EigenConvergenceError(TensorError):
    """Power iteration failed to converge within the iteration budget."""

    def __init__(self, msg: str, residual: float, iterations: int):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


def asarray(a) -> np.ndarray:
    """Coerce to a float64 C-contiguous array (rank-0 inputs stay rank-0)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 0:
        return arr
    return np.ascontiguousarray(arr)


def contract_pair(
    a: np.ndarray,
    b: np.ndarray,
    pairs: Sequence[tuple[int, int]],
) -> np.ndarray:
    """Contract tensors ``a`` and ``b`` over the given ``(axis_of_a, axis_of_b)``
    pairs.

    The result carries the unpaired axes of ``a`` first (in their original
    order) followed by the unpaired axes of ``b``.
    """
    a = asarray(a)
    b = asarray(b)
    ax_a = [p[0] for p in pairs]
    ax_b = [p[1] for p in pairs]
    if len(set(ax_a)) != len(ax_a) or len(set(ax_b)) != len(ax_b):
        raise AxisMismatchError(f"repeated axis in contraction pairs {list(pairs)}")
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise AxisMismatchError(
                f"axis {i} of a (extent {a.shape[i]}) cannot be paired with "
                f"axis {j} of b (extent {b.shape[j]})"
            )
    if not pairs:
        return np.multiply.outer(a, b)
    return np.tensordot(a, b, axes=(ax_a, ax_b))


@dataclass(frozen=True)
class SvdResult:
    """SVD of a tensor matricized over an axis bipartition.

    ``u`` has shape ``row_dims + (k,)``, ``vh`` has shape ``(k,) + col_dims``
    with ``k = min(prod(row_dims), prod(col_dims))``. Singular values are
    descending and non-negative; each left singular vector is sign-fixed so
    that its largest-magnitude entry is positive.
    """

    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray

    def u_matrix(self) -> np.ndarray:
        return self.u.reshape(-1, self.s.size)

    def vh_matrix(self) -> np.ndarray:
        return self.vh.reshape(self.s.size, -1)


def svd(
    a: np.ndarray,
    row_axes: Sequence[int] | None = None,
    col_axes: Sequence[int] | None = None,
) -> SvdResult:
    """SVD of ``a`` viewed as a matrix between ``row_axes`` and ``col_axes``.

    The bipartition must cover every axis exactly once. For a 2-d input the
    default bipartition is ``([0], [1])``.
    """
    a = asarray(a)
    if row_axes is None and col_axes is None:
        if a.ndim != 2:
            raise TensorError("svd of a non-matrix tensor requires an explicit axis bipartition")
        row_axes, col_axes = [0], [1]
    row_axes = list(row_axes)
    col_axes = list(col_axes)
    if sorted(row_axes + col_axes) != list(range(a.ndim)):
        raise TensorError(
            f"axis bipartition {row_axes}|{col_axes} does not cover all {a.ndim} axes exactly once"
        )
    m = a.transpose(row_axes + col_axes)
    row_dims = m.shape[: len(row_axes)]
    col_dims = m.shape[len(row_axes):]
    mat = m.reshape(int(np.prod(row_dims, dtype=np.int64)), -1)
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise TensorError(f"SVD failed to converge for a {mat.shape} matrix") from exc
    # Fix signs: largest-magnitude entry of each left singular vector positive.
    for k in range(s.size):
        col = u[:, k]
        pivot = col[np.argmax(np.abs(col))]
        if pivot < 0:
            u[:, k] = -col
            vh[k, :] = -vh[k, :]
    return SvdResult(
        u=np.ascontiguousarray(u.reshape(row_dims + (s.size,))),
        s=s,
        vh=np.ascontiguousarray(vh.reshape((s.size,) + col_dims)),
    )


def orthogonal_complement(row: np.ndarray) -> np.ndarray:
    """Rows spanning the subspace orthogonal to ``row``.

    Returns a ``(d-1, d)`` matrix ``R`` with orthonormal rows satisfying
    ``R @ row = 0``, built from the subleading right singular vectors of the
    full-matrices SVD of ``row`` viewed as a 1 x d matrix.
    """
    row = asarray(row).reshape(-1)
    d = row.size
    nrm = np.linalg.norm(row)
    if nrm == 0.0:
        raise TensorError("cannot build the orthogonal complement of a zero vector")
    _, _, vh = np.linalg.svd(row.reshape(1, d), full_matrices=True)
    return np.ascontiguousarray(vh[1:, :])


@dataclass(frozen=True)
class DominantEig:
    """Result of power iteration.

    ``degenerate`` is set (and ``value`` holds the common magnitude) when the
    iteration locks into a period-2 cycle, the signature of a dominant
    ``+lambda/-lambda`` pair. Downstream consumers that assume a simple
    dominant eigenvalue must check this flag.
    """

    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    degenerate: bool = False


def dominant_eig(
    apply: Callable[[np.ndarray], np.ndarray],
    n: int,
    tol: float = 1e-12,
    max_iter: int = 10000,
) -> DominantEig:
    """Largest-magnitude eigenvalue of a linear operator given as a mat-vec.

    Plain power iteration with per-step normalization. The start vector is a
    deterministic near-uniform vector, slightly tilted so symmetric operators
    do not trap the iteration in an orthogonal subspace.
    """
    if n < 1:
        raise TensorError("operator dimension must be at least 1")
    v = np.ones(n)
    v[0] += 0.1
    if n > 1:
        v[1] -= 0.05
    v /= np.linalg.norm(v)
    prev = None
    prev2 = None
    residual = np.inf
    for it in range(1, max_iter + 1):
        w = apply(v)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return DominantEig(value=0.0, vector=v, iterations=it, residual=0.0)
        w = w / nrm
        if prev2 is not None:
            if np.linalg.norm(w - prev2) < tol and np.linalg.norm(w - prev) > np.sqrt(tol):
                # Period-2 cycle: degenerate +/- pair; nrm estimates |lambda|.
                return DominantEig(
                    value=nrm, vector=w, iterations=it, residual=np.linalg.norm(w - prev),
                    degenerate=True,
                )
        if prev is not None:
            residual = min(np.linalg.norm(w - prev), np.linalg.norm(w + prev))
            if residual < tol:
                lam = float(w @ apply(w))
                return DominantEig(value=lam, vector=w, iterations=it, residual=residual)
        prev2 = prev
        prev = w
        v = w
    raise EigenConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(last residual {residual:.3e})",
        residual=float(residual),
        iterations=max_iter,
    )

"""Symmetric and generalized eigensolvers plus whitening helpers.

All spectra come from one deterministic cyclic Jacobi solver so that repeat
runs on identical input are bit-identical.  Eigenvectors follow a fixed sign
convention: in each column the entry of largest magnitude is non-negative,
with ties broken by the earliest row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import jacobi_eigh
from .errors import InvalidArgumentError, NumericalError

__all__ = ["EigenResult", "sym_eig", "energy_rank", "whiten_basis", "solve_gen_eig"]

_MAX_SWEEPS = 100
_OFF_TOL = 1e-12
_ASYM_TOL = 1e-9
_EIG_FLOOR = 1e-10


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues in descending order with column-paired eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if values.ndim != 1 or vectors.ndim != 2:
            raise InvalidArgumentError("EigenResult needs 1-D values, 2-D vectors")
        if vectors.shape[1] != values.shape[0]:
            raise InvalidArgumentError(
                f"{vectors.shape[1]} eigenvector columns for "
                f"{values.shape[0]} eigenvalues"
            )
        if np.any(np.diff(values) > 0):
            raise InvalidArgumentError("eigenvalues must be in descending order")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "vectors", vectors)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made non-negative; argmax takes
    # the earliest index on ties.
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            vectors[:, j] = -col
    return vectors


def sym_eig(c) -> EigenResult:
    """Full spectrum of a symmetric matrix via cyclic Jacobi rotations.

    The input may deviate from exact symmetry by at most 1e-9 relative to its
    largest entry; it is symmetrized before iteration.  Convergence requires
    the off-diagonal Frobenius norm to fall below 1e-12 * ||C||_F within 100
    sweeps, else :class:`NumericalError` is raised.
    """
    c = np.ascontiguousarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {c.shape}")
    if c.shape[0] < 1:
        raise InvalidArgumentError("matrix must be at least 1x1")
    if not np.all(np.isfinite(c)):
        raise InvalidArgumentError("matrix contains non-finite entries")
    scale = np.max(np.abs(c))
    asym = np.max(np.abs(c - c.T))
    if asym > _ASYM_TOL * scale:
        raise InvalidArgumentError(
            f"matrix is not symmetric: max asymmetry {asym:.3e} exceeds "
            f"{_ASYM_TOL:.0e} * max|entry| = {_ASYM_TOL * scale:.3e}"
        )
    a = (c + c.T) / 2.0
    threshold = _OFF_TOL * float(np.linalg.norm(a))
    values, vectors, sweeps, off = jacobi_eigh(a, threshold, _MAX_SWEEPS)
    if off > threshold:
        raise NumericalError(
            f"Jacobi iteration left off-diagonal norm {off:.3e} above "
            f"threshold {threshold:.3e} after {sweeps} sweeps"
        )
    order = np.argsort(-values, kind="stable")
    return EigenResult(values[order], _fix_signs(vectors[:, order]))


def energy_rank(values, fraction: float) -> int:
    """Smallest r whose leading eigenvalues hold `fraction` of the total.

    `values` must be non-negative (entries above -1e-10 * max are clamped to
    zero) in descending order with a strictly positive total.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] < 1:
        raise InvalidArgumentError("need a non-empty 1-D eigenvalue array")
    if not (0.0 < fraction <= 1.0):
        raise InvalidArgumentError(f"fraction must be in (0, 1], got {fraction}")
    top = float(values[0])
    if np.any(values < -_EIG_FLOOR * max(top, 0.0)):
        raise InvalidArgumentError("eigenvalues are significantly negative")
    values = np.maximum(values, 0.0)
    total = float(np.sum(values))
    if total <= 0.0:
        raise InvalidArgumentError("cannot rank an all-zero spectrum")
    reached = np.cumsum(values) >= fraction * total
    # fraction 1.0 still terminates: the final cumulative sum equals the total
    # exactly because trailing zeros add exactly 0.0.
    if not reached[-1]:
        return int(values.shape[0])
    return int(np.argmax(reached)) + 1


def whiten_basis(e: EigenResult, r: int) -> np.ndarray:
    """First r eigenvectors scaled to unit variance: column j is u_j/sqrt(l_j).

    Eigenvalues are floored at 1e-10 * l_max so near-null directions cannot
    blow up the scale.
    """
    if not isinstance(e, EigenResult):
        raise InvalidArgumentError("whiten_basis expects an EigenResult")
    n = e.values.shape[0]
    if not (1 <= r <= n):
        raise InvalidArgumentError(f"rank {r} out of range 1..{n}")
    top = float(e.values[0])
    if top <= 0.0:
        raise InvalidArgumentError("cannot whiten an all-zero spectrum")
    lam = np.maximum(e.values[:r], _EIG_FLOOR * top)
    return e.vectors[:, :r] / np.sqrt(lam)[None, :]


def solve_gen_eig(s_b, s_w, gamma: float = 1e-6) -> EigenResult:
    """Solve S_b v = l (S_w + gamma * tr(S_w)/n * I) v, descending in l.

    The regularized within scatter is Cholesky-factored (R = L L^T) and the
    problem reduced to the symmetric matrix L^-1 S_b L^-T, so the returned
    eigenvalues are real.  Eigenvector columns are unit length but in general
    not mutually orthogonal.  Raises :class:`NumericalError` when R is not
    positive definite.
    """
    s_b = np.ascontiguousarray(s_b, dtype=np.float64)
    s_w = np.ascontiguousarray(s_w, dtype=np.float64)
    if s_b.shape != s_w.shape or s_b.ndim != 2 or s_b.shape[0] != s_b.shape[1]:
        raise InvalidArgumentError(
            f"scatter shapes {s_b.shape} and {s_w.shape} must be equal and square"
        )
    if gamma < 0.0:
        raise InvalidArgumentError(f"gamma must be >= 0, got {gamma}")
    n = s_w.shape[0]
    s_b = (s_b + s_b.T) / 2.0
    s_w = (s_w + s_w.T) / 2.0
    r = s_w + (gamma * float(np.trace(s_w)) / n) * np.eye(n)
    try:
        l = np.linalg.cholesky(r)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "regularized within-class scatter is not positive definite; "
            "raise gamma or check the class layout"
        ) from exc
    # m = L^-1 S_b L^-T via two triangular solves
    half = np.linalg.solve(l, s_b)
    m = np.linalg.solve(l, half.T).T
    e = sym_eig((m + m.T) / 2.0)
    vectors = np.linalg.solve(l.T, e.vectors)
    vectors /= np.linalg.norm(vectors, axis=0)[None, :]
    return EigenResult(e.values, _fix_signs(vectors))

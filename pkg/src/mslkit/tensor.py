"""Dense tensor primitives: unfolding, folding, mode products, stacking.

Tensors are plain float64 ndarrays in C order, so "last mode varies fastest"
holds for the flat memory layout.  Mode indices are 0-based.  The mode-k
unfolding puts mode-k fibers as columns, enumerated with the remaining modes
kept in their original relative order and the last of them varying fastest;
this is exactly ``np.moveaxis(t, k, 0).reshape(t.shape[k], -1)`` for a
C-ordered array.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, NumericalError

__all__ = ["as_tensor", "unfold", "fold", "mode_product", "stack"]

_MAX_ORDER = 8


def as_tensor(data) -> np.ndarray:
    """Coerce `data` to a finite float64 C-contiguous ndarray of order >= 1.

    Raises
    ------
    InvalidArgumentError
        If the input is scalar, of order > 8, or contains NaN/Inf.
    """
    # ascontiguousarray promotes 0-d to 1-d; check the order beforehand.
    if np.asarray(data).ndim < 1:
        raise InvalidArgumentError("tensor must have order >= 1, got a scalar")
    t = np.ascontiguousarray(data, dtype=np.float64)
    if t.ndim > _MAX_ORDER:
        raise InvalidArgumentError(
            f"tensor order {t.ndim} exceeds the supported maximum {_MAX_ORDER}"
        )
    if t.size == 0:
        raise InvalidArgumentError(f"tensor has an empty mode: shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError("tensor contains non-finite entries")
    return t


def _check_mode(ndim: int, mode: int) -> None:
    if not isinstance(mode, (int, np.integer)):
        raise InvalidArgumentError(f"mode must be an integer, got {mode!r}")
    if mode < 0 or mode >= ndim:
        raise InvalidArgumentError(
            f"mode {mode} out of range for an order-{ndim} tensor"
        )


def unfold(tensor, mode: int) -> np.ndarray:
    """Return the mode-`mode` unfolding as a (I_mode, prod of the rest) matrix.

    Column j holds the mode-`mode` fiber at multi-index (i_1, .., i_N) with
    j = sum over l != mode of i_l * prod of I_o for o > l, o != mode.
    """
    t = as_tensor(tensor)
    _check_mode(t.ndim, mode)
    return np.ascontiguousarray(
        np.moveaxis(t, mode, 0).reshape(t.shape[mode], -1)
    )


def fold(matrix, mode: int, shape) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor of `shape` from a matrix."""
    m = np.ascontiguousarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidArgumentError(f"expected a matrix, got order {m.ndim}")
    shape = tuple(int(s) for s in shape)
    if len(shape) < 1 or len(shape) > _MAX_ORDER:
        raise InvalidArgumentError(f"target shape {shape} has unsupported order")
    _check_mode(len(shape), mode)
    rest = tuple(s for i, s in enumerate(shape) if i != mode)
    expected = (shape[mode], int(np.prod(rest, dtype=np.int64)) if rest else 1)
    if m.shape != expected:
        raise InvalidArgumentError(
            f"matrix shape {m.shape} does not match mode-{mode} unfolding "
            f"{expected} of target shape {shape}"
        )
    moved = m.reshape((shape[mode],) + rest)
    return np.ascontiguousarray(np.moveaxis(moved, 0, mode))


def mode_product(tensor, mode: int, u) -> np.ndarray:
    """Contract mode `mode` of `tensor` with the rows of matrix `u`.

    The result has the shape of `tensor` with I_mode replaced by u.shape[0]:
    (X x_mode U)[.., j, ..] = sum_i X[.., i, ..] * U[j, i].
    """
    t = as_tensor(tensor)
    _check_mode(t.ndim, mode)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.ndim != 2:
        raise InvalidArgumentError(f"mode matrix must be 2-D, got order {u.ndim}")
    if u.shape[1] != t.shape[mode]:
        raise InvalidArgumentError(
            f"mode matrix has {u.shape[1]} columns but mode {mode} "
            f"has size {t.shape[mode]}"
        )
    new_shape = t.shape[:mode] + (u.shape[0],) + t.shape[mode + 1:]
    out = fold(u @ unfold(t, mode), mode, new_shape)
    if not np.all(np.isfinite(out)):
        raise NumericalError("mode product overflowed to non-finite values")
    return out


def stack(samples) -> np.ndarray:
    """Stack order-N sample tensors along a new trailing sample mode.

    ``stack(samples)[.., m] == samples[m]`` for every m.
    """
    samples = list(samples)
    if not samples:
        raise InvalidArgumentError("cannot stack an empty sample list")
    first = as_tensor(samples[0])
    if first.ndim >= _MAX_ORDER:
        raise InvalidArgumentError(
            f"stacking order-{first.ndim} samples would exceed order {_MAX_ORDER}"
        )
    out = np.empty(first.shape + (len(samples),), dtype=np.float64)
    out[..., 0] = first
    for m, s in enumerate(samples[1:], start=1):
        s = as_tensor(s)
        if s.shape != first.shape:
            raise InvalidArgumentError(
                f"sample {m} has shape {s.shape}, expected {first.shape}"
            )
        out[..., m] = s
    return out

"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``MUDALLOC_PURE_PYTHON=1`` is set. Signatures match ``_ckernels``.
"""
import numpy as np


def dykstra_project(point, q_s, q_l, tol, max_sweeps, warm=None):
    """Euclidean projection onto {0<=x<=1, row sums >= q_l, column sums <= q_s}.

    Dykstra's method is run as block coordinate ascent on the dual, so the
    correction terms ``warm = (p_row, p_col, p_box)`` of an earlier call may
    seed this one; the iterate always satisfies ``x = point - sum(p)``.
    Iteration stops once no correction term moves by ``tol`` or more over a
    full sweep.

    Returns ``(x, sweeps, (p_row, p_col, p_box))``.
    """
    z = np.array(point, dtype=np.float64, copy=True)
    K, J = z.shape
    if warm is None:
        p_row = np.zeros_like(z)
        p_col = np.zeros_like(z)
        p_box = np.zeros_like(z)
    else:
        p_row, p_col, p_box = (np.array(p, dtype=np.float64, copy=True) for p in warm)
    x = z - p_row - p_col - p_box
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1

        y = x + p_row
        deficit = q_l - y.sum(axis=1)
        x = y + (np.maximum(deficit, 0.0) / J)[:, None]
        new = y - x
        move = np.abs(new - p_row).max()
        p_row = new

        y = x + p_col
        excess = y.sum(axis=0) - q_s
        x = y - (np.maximum(excess, 0.0) / K)[None, :]
        new = y - x
        move = max(move, np.abs(new - p_col).max())
        p_col = new

        y = x + p_box
        x = np.clip(y, 0.0, 1.0)
        new = y - x
        move = max(move, np.abs(new - p_box).max())
        p_box = new

        if move < tol:
            break
    return x, sweeps, (p_row, p_col, p_box)


def separable_sqrt_linear(q, c, w, floor):
    """Value and gradient of sum(2 c sqrt(q) - w q) with q clamped at ``floor``."""
    root = np.sqrt(np.maximum(q, floor))
    value = float(np.sum(2.0 * c * np.sqrt(np.maximum(q, 0.0)) - w * q))
    grad = c / root - w
    return value, grad

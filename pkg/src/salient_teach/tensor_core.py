"""Deterministic numeric kernel: softmax, losses, gradients, resampling.

Everything in this module is a pure function on plain numpy arrays and runs
in 64-bit floats so that test oracles can pin exact values. None of these
functions mutate their inputs.
"""

import numpy as np

from .errors import InvalidArgumentError

# Probabilities below this floor are clamped before taking the log so that
# degenerate predictions yield large-but-finite losses.
LOSS_FLOOR = 1e-12


def _as_vector(values, name: str) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"{name} must be finite")
    return v


def _as_grid(values, name: str) -> np.ndarray:
    g = np.asarray(values, dtype=np.float64)
    if g.ndim != 2 or g.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D grid")
    if not np.all(np.isfinite(g)):
        raise InvalidArgumentError(f"{name} must be finite")
    return g


def _check_label(label: int, n_classes: int) -> int:
    label = int(label)
    if not 0 <= label < n_classes:
        raise InvalidArgumentError(
            f"label {label} out of range for {n_classes} classes"
        )
    return label


def softmax(logits) -> np.ndarray:
    """Exp-normalize a logit vector into probabilities.

    The maximum logit is subtracted before exponentiation; without it large
    logits overflow exp() even though the result is well-defined.
    """
    z = _as_vector(logits, "logits")
    e = np.exp(z - z.max())
    return e / e.sum()


def cross_entropy(probs, label: int) -> float:
    """Negative log-likelihood of ``label`` under ``probs``."""
    p = _as_vector(probs, "probs")
    label = _check_label(label, p.size)
    return float(-np.log(max(p[label], LOSS_FLOOR)))


def logits_gradient(probs, label: int) -> np.ndarray:
    """Gradient of cross_entropy(softmax(z), label) with respect to z.

    The analytic form is p - onehot(label); its components sum to zero.
    """
    p = _as_vector(probs, "probs")
    label = _check_label(label, p.size)
    g = p.copy()
    g[label] -= 1.0
    return g


def _source_coords(n_out: int, n_in: int) -> np.ndarray:
    # Half-pixel-center convention: output pixel d samples the source at
    # (d + 0.5) * (in / out) - 0.5, clamped to the valid index range.
    d = np.arange(n_out, dtype=np.float64)
    s = (d + 0.5) * (n_in / n_out) - 0.5
    return np.clip(s, 0.0, float(n_in - 1))


def bilinear_resize(grid, out_h: int, out_w: int) -> np.ndarray:
    """Resample a 2-D grid to (out_h, out_w) with bilinear interpolation.

    Uses the ``v0 + f * (v1 - v0)`` form so that constant grids and
    identity-size resizes reproduce their inputs exactly.
    """
    g = _as_grid(grid, "grid")
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError("output dimensions must be >= 1")
    in_h, in_w = g.shape

    sy = _source_coords(out_h, in_h)
    sx = _source_coords(out_w, in_w)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    fy = sy - y0
    fx = sx - x0
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)

    rows = g[y0, :] + fy[:, None] * (g[y1, :] - g[y0, :])
    return rows[:, x0] + fx[None, :] * (rows[:, x1] - rows[:, x0])


def minmax_normalize(grid) -> np.ndarray:
    """Rescale a grid to [0, 1]; a constant grid maps to all zeros.

    The all-zeros rule means "no discriminative region" renders as no
    highlight rather than a uniform half-intensity wash.
    """
    g = _as_grid(grid, "grid")
    lo = g.min()
    hi = g.max()
    if hi == lo:
        return np.zeros_like(g)
    return (g - lo) / (hi - lo)


def argmax_class(scores) -> int:
    """Index of the maximum score; ties break toward the lowest index."""
    s = _as_vector(scores, "scores")
    return int(np.argmax(s))

"""Image-quality and localization metrics for the method comparison."""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import SensorRig

NO_DETECTION_ERROR = 1.0  # m, sentinel when a method produces no edges


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def ssim(a, b, window: int = 7, data_range: float = 1.0,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Structural similarity with a uniform sliding window.

    Population moments per window, stabilizing constants from the given
    dynamic range, mean over all (valid) window positions.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape) < window:
        raise ValueError(f"image smaller than the {window}x{window} window")
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(2, 3))
    mu_b = wb.mean(axis=(2, 3))
    va = (wa * wa).mean(axis=(2, 3)) - mu_a * mu_a
    vb = (wb * wb).mean(axis=(2, 3)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(2, 3)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (va + vb + c2)
    return float(np.mean(num / den))


def first_edge_indices(edges) -> np.ndarray:
    """Per-row index of the first marked column, -1 where a row is empty."""
    arr = np.asarray(edges)
    hit = arr > 0.5
    any_hit = hit.any(axis=1)
    first = np.where(any_hit, hit.argmax(axis=1), -1)
    return first


def median_edge_indices(edges) -> np.ndarray:
    """Per-row median marked column (lower middle for even counts), -1 where
    a row is empty.  The median is robust to the thick edge blobs classical
    methods produce."""
    arr = np.asarray(edges)
    out = np.full(arr.shape[0], -1, dtype=np.int64)
    for i in range(arr.shape[0]):
        cols = np.nonzero(arr[i] > 0.5)[0]
        if cols.size:
            out[i] = cols[(cols.size - 1) // 2]
    return out


def _row_positions(j_l, j_r, rig: SensorRig):
    """Per-row (x, y) from an L/R index pair, or None when unsolvable."""
    p_l = j_l * rig.path_bin
    p_r = j_r * rig.path_bin
    dp = p_l - p_r
    if abs(dp) > rig.baseline_h:
        return None
    phi = math.asin(dp / rig.baseline_h)
    r = p_l / 2.0
    return (r * math.cos(phi), r * math.sin(phi))


def position_rmse(pred, truth, rig: SensorRig, max_offset: int = 8) -> float:
    """Obstacle-position RMSE between predicted and true edge maps.

    Dual mode (pred and truth are (left, right) image pairs): rows are
    bilaterated to (x, y) positions.  Single mode: range-only errors.
    A single integer column offset, chosen to minimize the error, is
    applied to the prediction before scoring (edge maps may be shifted
    relative to the truth by a constant).  Rows lacking a detection on
    either side are skipped; a prediction with no usable rows at all
    scores the sentinel 1 m error.
    """
    dual = isinstance(pred, (tuple, list))
    if dual != isinstance(truth, (tuple, list)):
        raise ValueError("pred and truth must both be single images or pairs")

    if dual:
        pl, pr = (median_edge_indices(p) for p in pred)
        tl, tr = (median_edge_indices(t) for t in truth)
        rows = np.nonzero((pl >= 0) & (pr >= 0) & (tl >= 0) & (tr >= 0))[0]
        if rows.size == 0:
            return NO_DETECTION_ERROR

        def rmse_at(k):
            errs = []
            for i in rows:
                p = _row_positions(pl[i] + k, pr[i] + k, rig)
                t = _row_positions(tl[i], tr[i], rig)
                if p is None or t is None:
                    errs.append(NO_DETECTION_ERROR)
                else:
                    errs.append(math.hypot(p[0] - t[0], p[1] - t[1]))
            return math.sqrt(np.mean(np.square(errs)))

    else:
        pi = median_edge_indices(pred)
        ti = median_edge_indices(truth)
        rows = np.nonzero((pi >= 0) & (ti >= 0))[0]
        if rows.size == 0:
            return NO_DETECTION_ERROR
        bin_w = rig.range_bin

        def rmse_at(k):
            err = (pi[rows] + k - ti[rows]) * bin_w
            return math.sqrt(float(np.mean(err * err)))

    return min(rmse_at(k) for k in range(-max_offset, max_offset + 1))

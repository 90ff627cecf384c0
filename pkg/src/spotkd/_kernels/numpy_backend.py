"""Pure-NumPy recurrent scan kernels (reference implementation and fallback).

Both kernels operate on time-major arrays (T, B, H). The forward scan runs
``h_t = tanh(xproj_t + h_{t-1} @ rec_w)`` with ``h_{-1} = 0``; the backward
scan propagates gradients through the same recurrence.
"""

from __future__ import annotations

import numpy as np


def scan_forward(xproj: np.ndarray, rec_w: np.ndarray) -> np.ndarray:
    t_len, batch, hidden = xproj.shape
    h = np.empty((t_len, batch, hidden))
    prev = np.zeros((batch, hidden))
    for t in range(t_len):
        prev = np.tanh(xproj[t] + prev @ rec_w)
        h[t] = prev
    return h


def scan_backward(h: np.ndarray, rec_w: np.ndarray, dh: np.ndarray):
    """Gradients of a scalar loss through the scan.

    Args:
        h: forward hidden states (T, B, H).
        rec_w: recurrent weight (H, H).
        dh: upstream gradients w.r.t. each h_t (T, B, H).

    Returns:
        (dxproj, drec_w): gradients w.r.t. the pre-activation inputs and the
        recurrent weight.
    """
    t_len, batch, hidden = h.shape
    dxproj = np.empty_like(h)
    drec = np.zeros((hidden, hidden))
    delta = np.zeros((batch, hidden))
    rec_wt = rec_w.T
    for t in range(t_len - 1, -1, -1):
        total = dh[t] + delta @ rec_wt
        delta = total * (1.0 - h[t] * h[t])
        dxproj[t] = delta
        if t > 0:
            drec += h[t - 1].T @ delta
    return dxproj, drec

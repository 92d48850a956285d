"""The frame X, X_perp, V on SM in (d/dx, d/dy, d/dth) coordinates."""
from __future__ import annotations

import numpy as np


def frame_coefficients(metric, x, y, th):
    """Return (X, X_perp, V) as arrays of shape (3, ...).

    X is the geodesic vector field, V = d/dth and X_perp = [X, V].
    """
    x, y, th = np.broadcast_arrays(*(np.asarray(a, float) for a in (x, y, th)))
    lam, lx, ly = metric.lam_derivs(x, y)
    e = np.exp(-lam)
    c, s = np.cos(th), np.sin(th)
    X = np.stack([e * c, e * s, e * (-lx * s + ly * c)])
    P = np.stack([e * s, -e * c, e * (lx * c + ly * s)])
    V = np.stack([np.zeros_like(e), np.zeros_like(e), np.ones_like(e)])
    return X, P, V

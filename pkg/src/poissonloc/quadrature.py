"""Adaptive Simpson quadrature for scalar or array-valued integrands.

Used for the Fisher information matrix (matrix-valued integrand, forced
breakpoints at the front edges) and for compensators of time-varying
amplitude profiles. Error control is on the max-abs component.
"""
from __future__ import annotations

import numpy as np


def _simpson(fa, fm, fb, h):
    return (h / 6.0) * (fa + 4.0 * fm + fb)


def _recurse(f, a, m, b, fa, fm, fb, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = np.asarray(f(lm), dtype=float)
    frm = np.asarray(f(rm), dtype=float)
    left = _simpson(fa, flm, fm, m - a)
    right = _simpson(fm, frm, fb, b - m)
    err = (left + right - whole) / 15.0
    if depth <= 0 or np.max(np.abs(err)) <= tol:
        return left + right + err
    return (_recurse(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _recurse(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def adaptive_simpson(f, a: float, b: float, *, tol: float = 1e-10,
                     breakpoints=(), max_depth: int = 40):
    """Integrate f over [a, b]; f may return a float or an ndarray.

    Interior breakpoints split the range so non-smooth seams sit on segment
    boundaries; the absolute tolerance is divided across segments by length.
    """
    if not b > a:
        return 0.0
    pts = [a] + sorted(p for p in set(float(x) for x in breakpoints) if a < p < b) + [b]
    total = b - a
    out = None
    for lo, hi in zip(pts[:-1], pts[1:]):
        seg_tol = tol * (hi - lo) / total
        m = 0.5 * (lo + hi)
        fa = np.asarray(f(lo), dtype=float)
        fm = np.asarray(f(m), dtype=float)
        fb = np.asarray(f(hi), dtype=float)
        whole = _simpson(fa, fm, fb, hi - lo)
        seg = _recurse(f, lo, m, hi, fa, fm, fb, whole, seg_tol, max_depth)
        out = seg if out is None else out + seg
    return out if out.shape else float(out)

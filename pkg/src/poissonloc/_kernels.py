"""Hot per-event loops, jitted. Everything here works per detector on the
per-unit-n intensity with constant amplitudes; callers handle sorting the two
arrival times (ta <= tb with amplitudes Sa, Sb reordered to match), the
compensator (closed form), and the affine-amplitude slow path.

Event-region layout per candidate row, with ea = ta + delta, eb = tb + delta:

    (-inf, ta]   background only, ln(lambda/lambda0) = 0
    (ta, ea]     ramp a (possibly overlapping ramp b), per-event work
    (ea, tb]     plateau Sa (empty when the windows overlap), counted
    (max(ea,tb), eb]  ramp b with front a complete, per-event work
    (eb, inf)    plateau Sa + Sb, counted

An event exactly at an arrival time carries the pre-jump rate (the front is
open at 0), which 'right'-sided searchsorted encodes for the kappa = 0 case.
"""
import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _front(x, kappa, smoothstep):
    # x already clipped to [0, 1]
    if smoothstep:
        return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    return x ** kappa


@njit(cache=True, fastmath=True)
def loglik_jumps(events, ta, tb, sa, sb, lam0, delta, kappa, smoothstep):
    """Sum over events of ln(lambda/lambda0), one value per candidate row."""
    P = ta.shape[0]
    N = events.shape[0]
    out = np.empty(P)
    for p in range(P):
        t0 = ta[p]
        t1 = tb[p]
        e0 = t0 + delta
        e1 = t1 + delta
        Sa = sa[p]
        Sb = sb[p]
        acc = 0.0
        if kappa == 0.0:
            i0 = np.searchsorted(events, t0, side='right')
            i1 = np.searchsorted(events, t1, side='right')
            acc = (i1 - i0) * np.log((lam0 + Sa) / lam0) \
                + (N - i1) * np.log((lam0 + Sa + Sb) / lam0)
        else:
            i0 = np.searchsorted(events, t0, side='right')
            j0 = np.searchsorted(events, e0, side='right')
            i1 = np.searchsorted(events, t1, side='right')
            j1 = np.searchsorted(events, e1, side='right')
            for j in range(i0, j0):
                t = events[j]
                xa = (t - t0) / delta
                if xa > 1.0:
                    xa = 1.0
                xb = (t - t1) / delta
                if xb < 0.0:
                    xb = 0.0
                elif xb > 1.0:
                    xb = 1.0
                lam = lam0 + Sa * _front(xa, kappa, smoothstep) \
                    + Sb * _front(xb, kappa, smoothstep)
                acc += np.log(lam / lam0)
            if i1 > j0:
                acc += (i1 - j0) * np.log((lam0 + Sa) / lam0)
            lo = j0 if j0 > i1 else i1
            for j in range(lo, j1):
                xb = (events[j] - t1) / delta
                if xb > 1.0:
                    xb = 1.0
                lam = lam0 + Sa + Sb * _front(xb, kappa, smoothstep)
                acc += np.log(lam / lam0)
            acc += (N - j1) * np.log((lam0 + Sa + Sb) / lam0)
        out[p] = acc
    return out


@njit(cache=True, fastmath=True)
def _front_deriv(x, kappa, smoothstep):
    # d psi / d x on the open unit interval, 0 outside
    if x <= 0.0 or x >= 1.0:
        return 0.0
    if smoothstep:
        return 30.0 * x * x * (1.0 - x) * (1.0 - x)
    return kappa * x ** (kappa - 1.0)


@njit(cache=True, fastmath=True)
def score_jumps(events, ta, tb, sa, sb, lam0, delta, kappa, smoothstep):
    """Per row: (sum_j Sa psi'_a / lambda, sum_j Sb psi'_b / lambda).

    psi' is the derivative in t (the 1/delta factor included). Multiplying by
    minus d tau / d theta outside assembles the event part of the score.
    """
    P = ta.shape[0]
    out = np.zeros((P, 2))
    for p in range(P):
        t0 = ta[p]
        t1 = tb[p]
        e0 = t0 + delta
        e1 = t1 + delta
        Sa = sa[p]
        Sb = sb[p]
        i0 = np.searchsorted(events, t0, side='right')
        j1 = np.searchsorted(events, e1, side='right')
        ga = 0.0
        gb = 0.0
        for j in range(i0, j1):
            t = events[j]
            xa = (t - t0) / delta
            xb = (t - t1) / delta
            da = _front_deriv(xa, kappa, smoothstep)
            db = _front_deriv(xb, kappa, smoothstep)
            if da == 0.0 and db == 0.0:
                continue
            fa = 1.0 if xa >= 1.0 else _front(xa if xa > 0.0 else 0.0, kappa, smoothstep)
            fb = 1.0 if xb >= 1.0 else _front(xb if xb > 0.0 else 0.0, kappa, smoothstep)
            lam = lam0 + Sa * fa + Sb * fb
            ga += Sa * da / (delta * lam)
            gb += Sb * db / (delta * lam)
        out[p, 0] = ga
        out[p, 1] = gb
    return out

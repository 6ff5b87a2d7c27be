"""Log-likelihood ratio, score, Fisher information, and the cusp constant Q^2.

The reference measure is the pure-background process (rate n * lambda0 at
every detector), so

    ln L(theta) = sum_k [ sum_j ln(lambda_k(theta, t_j) / lambda0)
                          - n * int_0^T (lambda_k(theta, t) - lambda0) dt ]

with lambda_k the per-unit-n intensity. The event sums run through jitted
kernels on the sorted arrival pair; compensators are closed-form for
constant amplitudes and adaptive Simpson otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import DomainError, RegimeError, SingularFisherError
from .geometry import (DetectorArray, ParameterBox, ThetaVector, arrival_times,
                       as_theta_array, direction_vectors)
from .quadrature import adaptive_simpson
from .signal import IntensityModel, Regime, _check_sizes
from .simulate import ObservationSet

__all__ = [
    "LogLikelihoodValue", "FisherMatrix", "log_likelihood", "log_likelihood_batch",
    "score", "fisher_information", "fisher_display_elements", "q_kappa_squared",
]


@dataclass(frozen=True)
class LogLikelihoodValue:
    value: float
    theta: ThetaVector

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class FisherMatrix:
    """Per-unit-n Fisher information I(theta), a symmetric 4x4 matrix."""

    matrix: np.ndarray
    theta: ThetaVector

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(4, 4)
        object.__setattr__(self, "matrix", m)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def inverse(self) -> np.ndarray:
        w = self.eigenvalues()
        tol = 1e-12 * max(w.max(), 1.0)
        if w.min() <= tol:
            raise SingularFisherError(
                f"Fisher matrix singular: eigenvalue {w.min():.3e} at index "
                f"{int(np.argmin(w))} (threshold {tol:.3e})")
        return np.linalg.inv(self.matrix)


def _sorted_arrivals(model, array, thetas):
    """Arrival pairs sorted per (row, detector) with amplitudes relabeled.

    Returns ta, tb, sa, sb of shape (P, K); ta <= tb.
    """
    P = thetas.shape[0]
    src = thetas.reshape(P, 2, 2)
    diff = array.positions[None, None, :, :] - src[:, :, None, :]
    tau = np.hypot(diff[..., 0], diff[..., 1]) / array.nu  # (P, 2, K)
    amps = np.broadcast_to(model.amplitudes[None], (P, 2, array.size))
    swap = tau[:, 0, :] > tau[:, 1, :]
    ta = np.where(swap, tau[:, 1, :], tau[:, 0, :])
    tb = np.where(swap, tau[:, 0, :], tau[:, 1, :])
    sa = np.where(swap, amps[:, 1, :], amps[:, 0, :])
    sb = np.where(swap, amps[:, 0, :], amps[:, 1, :])
    return ta, tb, sa, sb


def log_likelihood_batch(obs: ObservationSet, thetas) -> np.ndarray:
    """ln L at many parameter points; thetas (P, 4) -> values (P,)."""
    model, array = obs.model, obs.array
    _check_sizes(model, array)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != 4:
        raise DomainError(f"thetas must be (P, 4), got {thetas.shape}")
    if not model.is_constant:
        return np.array([_loglik_generic(obs, t) for t in thetas])
    front = model.front
    ta, tb, sa, sb = _sorted_arrivals(model, array, thetas)
    smooth = front.uses_smoothstep
    values = np.zeros(thetas.shape[0])
    for k, rec in enumerate(obs.records):
        values += _kernels.loglik_jumps(
            rec.events, np.ascontiguousarray(ta[:, k]), np.ascontiguousarray(tb[:, k]),
            np.ascontiguousarray(sa[:, k]), np.ascontiguousarray(sb[:, k]),
            model.lambda0, front.delta, front.kappa, smooth)
    # compensator: n * sum_{i,k} S_ik * int psi; symmetric in the labeling
    comp = np.einsum("pk->p", sa * front.integral(model.horizon - ta)) \
        + np.einsum("pk->p", sb * front.integral(model.horizon - tb))
    return values - model.n * comp


def log_likelihood(obs: ObservationSet, theta,
                   box: ParameterBox | None = None) -> LogLikelihoodValue:
    """ln L(theta) against the pure-background reference.

    With `box` given, theta outside the closed box raises DomainError.
    """
    t = as_theta_array(theta)
    if box is not None and not box.contains(t):
        raise DomainError(f"theta {t.tolist()} outside box "
                          f"[{box.lower.tolist()}, {box.upper.tolist()}]")
    val = float(log_likelihood_batch(obs, t[None, :])[0])
    return LogLikelihoodValue(val, ThetaVector(t))


def _loglik_generic(obs: ObservationSet, theta) -> float:
    """Slow reference path; handles affine amplitude profiles."""
    from .signal import intensity
    model, array = obs.model, obs.array
    tau = arrival_times(array, theta)
    total = 0.0
    for k, rec in enumerate(obs.records):
        lam = intensity(model, array, theta, rec.events, k) / model.n
        total += float(np.sum(np.log(lam / model.lambda0)))
        brk = [tau[i, k] + e for i in (0, 1) for e in (0.0, model.front.delta)]

        def body(t, k=k, tau=tau):
            v = 0.0
            for i in (0, 1):
                v += float(model.amplitude(i, k, t)) * float(model.front.value(t - tau[i, k]))
            return v

        total -= model.n * adaptive_simpson(body, 0.0, model.horizon,
                                            tol=1e-10, breakpoints=brk)
    return total


# --- score ------------------------------------------------------------------


def _require_smooth(model: IntensityModel, what: str) -> None:
    reg = model.regime
    if reg is not Regime.SMOOTH:
        raise RegimeError(
            f"{what} requires the smooth regime; kappa={model.front.kappa} is "
            f"{reg.value}")


def score(obs: ObservationSet, theta, box: ParameterBox | None = None) -> np.ndarray:
    """Gradient of ln L in theta, shape (4,). Smooth regime only."""
    model, array = obs.model, obs.array
    _require_smooth(model, "score")
    t = as_theta_array(theta)
    if box is not None and not box.contains(t):
        raise DomainError(f"theta {t.tolist()} outside box")
    front = model.front
    m = direction_vectors(array, t)          # (2, K, 2)
    tau = arrival_times(array, t)            # (2, K)
    grad = np.zeros(4)
    if model.is_constant:
        ta, tb, sa, sb = _sorted_arrivals(model, array, t[None, :])
        swap = tau[0] > tau[1]
        for k, rec in enumerate(obs.records):
            ab = _kernels.score_jumps(
                rec.events, ta[:, k], tb[:, k], sa[:, k], sb[:, k],
                model.lambda0, front.delta, front.kappa, front.uses_smoothstep)[0]
            g1, g2 = (ab[1], ab[0]) if swap[k] else (ab[0], ab[1])
            # d lnlam / d theta_i = (S_i psi'_i / lam) * (m_i / nu)
            grad[0:2] += g1 * m[0, k] / array.nu
            grad[2:4] += g2 * m[1, k] / array.nu
        for i in (0, 1):
            comp = model.amplitudes[i] * front.value(model.horizon - tau[i])  # (K,)
            grad[2 * i: 2 * i + 2] -= model.n * np.einsum(
                "k,kj->j", comp, m[i] / array.nu)
        return grad
    return _score_generic(obs, t, m, tau)


def _score_generic(obs, t, m, tau) -> np.ndarray:
    model, array = obs.model, obs.array
    front = model.front
    grad = np.zeros(4)
    for k, rec in enumerate(obs.records):
        lam = np.full(rec.events.shape, model.lambda0)
        dpsi = []
        for i in (0, 1):
            lam = lam + model.amplitude(i, k, rec.events) * front.value(rec.events - tau[i, k])
            dpsi.append(model.amplitude(i, k, rec.events) * front.derivative(rec.events - tau[i, k]))
        for i in (0, 1):
            jump = float(np.sum(dpsi[i] / lam))

            def dcomp(t_, i=i, k=k):
                return float(model.amplitude(i, k, t_)) * float(front.derivative(t_ - tau[i, k]))

            brk = [tau[i, k], tau[i, k] + front.delta]
            comp = adaptive_simpson(dcomp, 0.0, model.horizon, tol=1e-11, breakpoints=brk)
            grad[2 * i: 2 * i + 2] += (jump - model.n * comp) * m[i, k] / array.nu
    return grad


# --- Fisher information -----------------------------------------------------


def fisher_information(model: IntensityModel, array: DetectorArray, theta,
                       tol: float = 1e-10) -> FisherMatrix:
    """Per-unit-n information matrix I(theta) = sum_k int lamdot lamdot^T / lam dt.

    Smooth regime only; the raw power front needs kappa > 1/2 strictly (at
    kappa = 1/2 the integral diverges at the ramp foot).
    """
    _check_sizes(model, array)
    _require_smooth(model, "fisher_information")
    front = model.front
    if not front.uses_smoothstep and front.kappa <= 0.5:
        raise RegimeError("power front with kappa = 0.5 has divergent information; "
                          "use the smoothstep front or kappa > 0.5")
    t = as_theta_array(theta)
    m = direction_vectors(array, t)
    tau = arrival_times(array, t)
    total = np.zeros((4, 4))
    for k in range(array.size):
        def integrand(s, k=k):
            lam = model.lambda0
            v = np.zeros(4)
            for i in (0, 1):
                amp = float(model.amplitude(i, k, s))
                lam += amp * float(front.value(s - tau[i, k]))
                d = amp * float(front.derivative(s - tau[i, k]))
                v[2 * i: 2 * i + 2] = d * m[i, k] / array.nu
            return np.outer(v, v) / lam

        lo = float(tau[:, k].min())
        hi = float(min(tau[:, k].max() + front.delta, model.horizon))
        if hi <= lo:
            continue
        brk = [tau[i, k] + e for i in (0, 1) for e in (0.0, front.delta)]
        total += adaptive_simpson(integrand, lo, hi, tol=tol, breakpoints=brk)
    return FisherMatrix(total, ThetaVector(t))


def fisher_display_elements(model: IntensityModel, array: DetectorArray,
                            theta) -> np.ndarray:
    """Independent recomputation of (I11, I12, I13, I14) via scipy quad.

    Written from the componentwise formulas (cos/sin of the source-detector
    angles against the squared front slope over the rate), as a cross-check
    on the matrix assembly path. Constant amplitudes only.
    """
    _require_smooth(model, "fisher_display_elements")
    if not model.is_constant:
        raise DomainError("display elements assume constant amplitudes")
    front = model.front
    t = as_theta_array(theta)
    m = direction_vectors(array, t)
    tau = arrival_times(array, t)
    nu2 = array.nu ** 2
    out = np.zeros(4)
    for k in range(array.size):
        S1, S2 = model.amplitudes[0, k], model.amplitudes[1, k]
        cos1, sin1 = m[0, k]
        cos2, sin2 = m[1, k]

        def lam(s):
            return model.lambda0 + S1 * float(front.value(s - tau[0, k])) \
                + S2 * float(front.value(s - tau[1, k]))

        def d1(s):
            return S1 * float(front.derivative(s - tau[0, k]))

        def d2(s):
            return S2 * float(front.derivative(s - tau[1, k]))

        a0, a1 = tau[0, k], min(tau[0, k] + front.delta, model.horizon)
        if a1 > a0:
            pts = [x for x in (tau[1, k], tau[1, k] + front.delta) if a0 < x < a1]
            own = integrate.quad(lambda s: d1(s) ** 2 / lam(s), a0, a1,
                                 epsabs=1e-12, epsrel=1e-11, limit=200,
                                 points=pts or None)[0]
            out[0] += cos1 * cos1 * own / nu2
            out[1] += cos1 * sin1 * own / nu2
        b0 = max(tau[0, k], tau[1, k])
        b1 = min(tau[0, k] + front.delta, tau[1, k] + front.delta, model.horizon)
        if b1 > b0:
            cross = integrate.quad(lambda s: d1(s) * d2(s) / lam(s), b0, b1,
                                   epsabs=1e-12, epsrel=1e-11, limit=200)[0]
            out[2] += cos1 * cos2 * cross / nu2
            out[3] += cos1 * sin2 * cross / nu2
    return out


# --- the cusp constant ------------------------------------------------------

_QKAPPA_CACHE: dict[float, float] = {}


def q_kappa_squared(kappa: float) -> float:
    """Q_kappa^2 = int_R (|v-1|^kappa 1{v>=1} - v^kappa 1{v>0})^2 dv, 0<kappa<1/2.

    Split as the exact [0,1] piece 1/(2kappa+1), scipy quad on [1, 2] and
    [2, A], and a three-term asymptotic tail from A on (the integrand decays
    like kappa^2 v^(2kappa-2), too slowly to truncate).
    """
    kappa = float(kappa)
    if not 0.0 < kappa < 0.5:
        raise DomainError(f"q_kappa_squared needs 0 < kappa < 1/2, got {kappa}")
    if kappa in _QKAPPA_CACHE:
        return _QKAPPA_CACHE[kappa]

    def f(v):
        return ((v - 1.0) ** kappa - v ** kappa) ** 2

    head = 1.0 / (2.0 * kappa + 1.0)
    mid1 = integrate.quad(f, 1.0, 2.0, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    A = 1e4
    # v -> 1/u turns the wide slowly-decaying range into a smooth bounded one
    mid2 = integrate.quad(lambda u: f(1.0 / u) / u ** 2, 1.0 / A, 0.5,
                          epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    c2 = (1.0 - kappa) ** 2 / 4.0 + (1.0 - kappa) * (2.0 - kappa) / 3.0
    tail = kappa ** 2 * (A ** (2 * kappa - 1) / (1 - 2 * kappa)
                         + (1.0 - kappa) * A ** (2 * kappa - 2) / (2 - 2 * kappa)
                         + c2 * A ** (2 * kappa - 3) / (3 - 2 * kappa))
    val = head + mid1 + mid2 + tail
    _QKAPPA_CACHE[kappa] = val
    return val

"""Emission fronts and detector intensity functions.

Each source contributes S_{i,k}(t) * psi(t - tau_{i,k}) to detector k, on top
of a constant background lambda0; everything is scaled by the overall level n.
The front psi ramps from 0 to 1 over a window of width delta:

    power front     psi(s) = (s/delta)^kappa on [0, delta], 1 beyond, 0 before
    smoothstep      psi(s) = q(s/delta), q(x) = 6x^5 - 15x^4 + 10x^3

kappa classifies the regime: kappa = 0 is a pure jump (change-point regime,
psi(s) = 1{s>0}), 0 < kappa < 1/2 keeps a square-integrable singularity at
the foot (cusp regime), kappa >= 1/2 is the regular regime, where the default
front is the C^2 smoothstep because the raw power front has a kink at
s = delta that breaks the curvature conditions behind the Fisher matrix.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import DetectorArray, ParameterBox, arrival_times

__all__ = [
    "Regime", "FrontSpec", "IntensityModel", "intensity",
    "integrated_intensity", "validate_scenario",
]


class Regime(enum.Enum):
    SMOOTH = "smooth"
    CUSP = "cusp"
    CHANGE_POINT = "change-point"


@dataclass(frozen=True)
class FrontSpec:
    """Front shape: exponent kappa >= 0, ramp width delta > 0.

    smooth_override: None selects the regime default (smoothstep when
    kappa >= 1/2); False forces the raw power front even in the regular
    regime (comparison runs); True asserts the smoothstep and is only legal
    with kappa >= 1/2.
    """

    kappa: float
    delta: float
    smooth_override: bool | None = None

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa >= 0.0):
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")
        if not (np.isfinite(self.delta) and self.delta > 0.0):
            raise DomainError(f"delta must be > 0, got {self.delta}")
        if self.smooth_override is True and self.kappa < 0.5:
            raise DomainError("smooth_override=True requires kappa >= 0.5")

    @property
    def regime(self) -> Regime:
        if self.kappa == 0.0:
            return Regime.CHANGE_POINT
        if self.kappa < 0.5:
            return Regime.CUSP
        return Regime.SMOOTH

    @property
    def uses_smoothstep(self) -> bool:
        return self.regime is Regime.SMOOTH and self.smooth_override is not False

    # --- pointwise front values -------------------------------------------

    def value(self, s):
        """psi(s), vectorized."""
        s = np.asarray(s, dtype=float)
        if self.kappa == 0.0:
            return (s > 0.0).astype(float)
        x = np.clip(s / self.delta, 0.0, 1.0)
        if self.uses_smoothstep:
            return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        return x ** self.kappa

    def derivative(self, s):
        """d psi / d s; zero outside the open ramp window."""
        s = np.asarray(s, dtype=float)
        x = s / self.delta
        inside = (x > 0.0) & (x < 1.0)
        xi = np.where(inside, x, 0.5)  # dummy value avoids 0^(kappa-1) warnings
        if self.uses_smoothstep:
            d = 30.0 * xi * xi * (1.0 - xi) ** 2 / self.delta
        elif self.kappa == 0.0:
            d = np.zeros_like(xi)
        else:
            d = self.kappa * xi ** (self.kappa - 1.0) / self.delta
        return np.where(inside, d, 0.0)

    def integral(self, w):
        """int_0^w psi(s) ds, exact; vectorized, zero for w <= 0."""
        w = np.asarray(w, dtype=float)
        x = np.clip(w / self.delta, 0.0, 1.0)
        if self.uses_smoothstep:
            ramp = self.delta * x ** 4 * (2.5 + x * (-3.0 + x))
            full = 0.5 * self.delta
        else:
            ramp = self.delta / (self.kappa + 1.0) * x ** (self.kappa + 1.0)
            full = self.delta / (self.kappa + 1.0)
        return np.where(w <= self.delta, ramp, full + (w - self.delta))


@dataclass(frozen=True)
class IntensityModel:
    """Scenario intensity: front, per-source-per-detector amplitudes, level.

    amplitudes[i, k] = S_{i,k} > 0; with `slopes` given the amplitude is
    affine in time, S_{i,k}(t) = amplitudes[i, k] + slopes[i, k] * t, and must
    stay positive on [0, horizon]. n is the overall scaling (the asymptotic
    parameter); lambda0 the background per unit n; horizon the window length T.
    """

    front: FrontSpec
    amplitudes: np.ndarray
    lambda0: float
    n: float
    horizon: float
    slopes: np.ndarray | None = None

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        if amps.ndim != 2 or amps.shape[0] != 2:
            raise DomainError(f"amplitudes must be (2, K), got {amps.shape}")
        if not np.all(np.isfinite(amps)) or not np.all(amps > 0.0):
            raise DomainError("amplitudes must be positive and finite")
        object.__setattr__(self, "amplitudes", amps)
        if self.slopes is not None:
            sl = np.asarray(self.slopes, dtype=float)
            if sl.shape != amps.shape or not np.all(np.isfinite(sl)):
                raise DomainError(f"slopes must match amplitudes {amps.shape}")
            if np.any(amps + sl * self.horizon <= 0.0):
                raise DomainError("affine amplitude becomes non-positive before the horizon")
            object.__setattr__(self, "slopes", sl)
        if not (np.isfinite(self.lambda0) and self.lambda0 > 0.0):
            raise DomainError(f"lambda0 must be > 0, got {self.lambda0}")
        if not (np.isfinite(self.n) and self.n > 0.0):
            raise DomainError(f"n must be > 0, got {self.n}")
        if not (np.isfinite(self.horizon) and self.horizon > 0.0):
            raise DomainError(f"horizon must be > 0, got {self.horizon}")

    @property
    def n_detectors(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def is_constant(self) -> bool:
        return self.slopes is None or not np.any(self.slopes)

    @property
    def regime(self) -> Regime:
        return self.front.regime

    def amplitude(self, i: int, k: int, t):
        """S_{i,k}(t), vectorized in t."""
        base = self.amplitudes[i, k]
        if self.slopes is None:
            return np.full_like(np.asarray(t, dtype=float), base)
        return base + self.slopes[i, k] * np.asarray(t, dtype=float)

    def max_amplitude_sum(self, k: int) -> float:
        """max over [0, horizon] of S_{1,k}(t) + S_{2,k}(t); thinning bound."""
        if self.slopes is None:
            return float(self.amplitudes[:, k].sum())
        at0 = self.amplitudes[:, k].sum()
        atT = (self.amplitudes[:, k] + self.slopes[:, k] * self.horizon).sum()
        return float(max(at0, atT))

    def with_n(self, n: float) -> "IntensityModel":
        return IntensityModel(self.front, self.amplitudes, self.lambda0,
                              float(n), self.horizon, self.slopes)


def intensity(model: IntensityModel, array: DetectorArray, theta, t, k: int):
    """Full rate lambda_{k,n}(theta, t) at detector k, vectorized in t."""
    _check_sizes(model, array)
    t = np.asarray(t, dtype=float)
    tau = arrival_times(array, theta)
    per_unit = np.full_like(t, model.lambda0, dtype=float)
    for i in (0, 1):
        per_unit = per_unit + model.amplitude(i, k, t) * model.front.value(t - tau[i, k])
    return model.n * per_unit


def integrated_intensity(model: IntensityModel, array: DetectorArray, theta,
                         upto: float | None = None) -> np.ndarray:
    """int_0^T lambda_{k,n}(theta, t) dt for every detector, shape (K,).

    Exact closed form for constant amplitudes; adaptive Simpson with forced
    breakpoints at the front edges otherwise.
    """
    _check_sizes(model, array)
    T = model.horizon if upto is None else float(upto)
    tau = arrival_times(array, theta)
    K = array.size
    out = np.full(K, model.lambda0 * T)
    if model.is_constant:
        for i in (0, 1):
            out += model.amplitudes[i] * model.front.integral(T - tau[i])
    else:
        from .quadrature import adaptive_simpson
        for k in range(K):
            def f(t, k=k):
                v = 0.0
                for i in (0, 1):
                    v += float(model.amplitude(i, k, t)) * float(model.front.value(t - tau[i, k]))
                return v
            brk = [tau[i, k] + e for i in (0, 1) for e in (0.0, model.front.delta)]
            out[k] += adaptive_simpson(f, 0.0, T, tol=1e-10, breakpoints=brk)
    return model.n * out


def _check_sizes(model: IntensityModel, array: DetectorArray) -> None:
    if model.n_detectors != array.size:
        raise DomainError(
            f"model has {model.n_detectors} detector columns, array has {array.size}")


def validate_scenario(model: IntensityModel, array: DetectorArray,
                      box: ParameterBox) -> None:
    """Reject scenarios whose geometry breaks the modeling assumptions.

    Checks, naming the offending detector/source/corner in the message:
      * no detector inside either source sub-box (arrival time could hit 0);
      * every arrival plus the full ramp fits the horizon for all theta in
        the box (worst case is at a sub-box corner since the distance is
        convex in the source position).
    """
    _check_sizes(model, array)
    for i in (0, 1):
        lo, hi = box.source_box(i)
        inside = np.all((array.positions >= lo) & (array.positions <= hi), axis=1)
        if np.any(inside):
            k = int(np.flatnonzero(inside)[0])
            raise ConfigError(
                f"detector {k} at {array.positions[k].tolist()} lies inside the "
                f"source-{i + 1} box [{lo.tolist()}, {hi.tolist()}]")
        corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
        d = np.linalg.norm(array.positions[None, :, :] - corners[:, None, :], axis=2)
        worst = d.max(axis=0) / array.nu + model.front.delta
        if np.any(worst >= model.horizon):
            k = int(np.argmax(worst))
            c = int(np.argmax(d[:, k]))
            raise ConfigError(
                f"horizon {model.horizon} too short: source-{i + 1} corner "
                f"{corners[c].tolist()} gives arrival+ramp {worst[k]:.6g} at detector {k}")
